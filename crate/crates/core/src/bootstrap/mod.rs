//! Effective discounting curves from FX swaps and cross-currency swaps.
//!
//! For an unknown currency `u` quoted against a known currency `v` (the base
//! currency or one whose basis curve is already calibrated), the short end is
//! stripped directly from FX swaps and the long end is solved pillar by
//! pillar so that at-par CCS reprice to zero. Foreign forwarding curves are
//! taken as given.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::collateral::{fx_forward, FxSystem};
use crate::currency::Currency;
use crate::curves::{Curve, Interpolation, Pillar, SplineCurve1D, ZeroSpreadCurve};
use crate::error::{Error, Result};
use crate::instruments::{npv, par_spread, price_fx_swap, CcsInstrument, FxSwapInstrument, PricingMode};
use crate::solver::brent;
use crate::timegrid::{DateStamp, Quote, QuoteKind, QuoteSubject, Tenor};

mod triplet;

pub use triplet::{
    compare_triplet, triplet_report_csv, triplet_scheme_a, triplet_scheme_b, TripletRow, TripletScheme, TRIPLET_MONTHS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    /// Longest FX swap used; CCS quotes at or before it are dropped. `None`
    /// takes the longest quoted FX swap.
    pub cutover: Option<Tenor>,
    /// Round-trip tolerance on NPV per unit notional.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub interpolation: Interpolation,
    /// CCS coupon frequency.
    pub frequency_months: u32,
    pub scheme: TripletScheme,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            cutover: None,
            tolerance: 1e-10,
            max_iterations: 200,
            interpolation: Interpolation::LogLinearDf,
            frequency_months: 3,
            scheme: TripletScheme::A,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let Some(t) = self.cutover {
            if t.is_zero() {
                return Err(Error::Domain("cutover must be after the valuation date".into()));
            }
        }
        if self.max_iterations == 0 || self.frequency_months == 0 {
            return Err(Error::Domain("iterations and frequency must be positive".into()));
        }
        Ok(())
    }
}

/// FX swap quote normalised to the unknown currency: `spot` and `forward`
/// are units of the known currency per unit of the unknown one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortEndQuote {
    pub maturity: Tenor,
    pub spot: f64,
    pub forward: f64,
}

/// `P^u(T) = X^{u->v}(T) P^v(T) / chi^{u->v}`, one pillar per quote.
pub fn bootstrap_short_end(asof: DateStamp, known: &Curve, quotes: &[ShortEndQuote]) -> Result<Vec<Pillar>> {
    let mut out = Vec::with_capacity(quotes.len());
    for q in quotes {
        let t = asof.add_tenor(q.maturity)?.time_from(asof);
        let df = q.forward / q.spot * known.discount_factor(t)?;
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::Data(format!("FX swap at {} implies discount factor {df}", q.maturity)));
        }
        if out.last().is_some_and(|p: &Pillar| p.t >= t) {
            return Err(Error::Ordering(format!("FX swap quotes not increasing at {}", q.maturity)));
        }
        out.push(Pillar { t, df });
    }
    Ok(out)
}

/// Which currency renotions in the calibration CCS and which pays the spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcsLayout {
    pub mtm: Currency,
    pub spread: Currency,
    /// Constant-notional swaps when false.
    pub marked_to_market: bool,
}

impl CcsLayout {
    pub fn instrument(
        &self,
        asof: DateStamp,
        maturity: Tenor,
        spread: f64,
        collateral: Currency,
        frequency_months: u32,
    ) -> Result<CcsInstrument> {
        let mut ccs = CcsInstrument::standard(
            asof,
            maturity,
            self.mtm,
            self.spread,
            spread,
            self.marked_to_market,
            collateral,
            1.0,
        )?;
        if frequency_months != 3 {
            let periods =
                crate::instruments::periods_for(asof, maturity, frequency_months, crate::timegrid::DayCount::Act360)?;
            ccs.receive.periods = periods.clone();
            ccs.pay.periods = periods;
        }
        Ok(ccs)
    }
}

fn nominal(t: Tenor) -> f64 {
    t.nominal_years()
}

/// Par spreads on a smooth grid: every whole year after `after` within the
/// quoted range, plus the quoted maturities themselves. Quoted points are
/// reproduced exactly.
pub fn spline_ccs_spreads(quotes: &[(Tenor, f64)], after: f64) -> Result<Vec<(Tenor, f64)>> {
    if quotes.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted = quotes.to_vec();
    sorted.sort_by(|a, b| nominal(a.0).total_cmp(&nominal(b.0)));
    if sorted.len() == 1 {
        return Ok(sorted);
    }
    let knots: Vec<(f64, f64)> = sorted.iter().map(|(t, s)| (nominal(*t), *s)).collect();
    let spline = SplineCurve1D::new(&knots)?;
    let mut grid: BTreeMap<u32, Tenor> = BTreeMap::new();
    for (t, _) in &sorted {
        let m = t.months().ok_or_else(|| Error::Data(format!("CCS maturity {t} must be in months or years")))?;
        grid.insert(m, *t);
    }
    let first = spline.first().ceil() as u32;
    let last = spline.last().floor() as u32;
    for y in first.max(1)..=last {
        grid.entry(12 * y).or_insert(Tenor::Years(y));
    }
    grid.into_iter()
        .filter(|(m, _)| *m as f64 / 12.0 > after + 1e-12)
        .map(|(_, t)| Ok((t, spline.interpolate(nominal(t))?)))
        .collect()
}

/// Solves one pillar per grid instrument, in maturity order, so that each
/// CCS reprices at par. Earlier pillars stay fixed.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_long_end(
    fx: &FxSystem,
    unknown: Currency,
    short_end: &[Pillar],
    layout: CcsLayout,
    grid: &[(Tenor, f64)],
    cfg: &BootstrapConfig,
) -> Result<Vec<Pillar>> {
    let asof = fx.asof();
    let mut pillars = short_end.to_vec();
    let mut sys = fx.clone();
    for &(maturity, spread) in grid {
        let ccs = layout.instrument(asof, maturity, spread, fx.base(), cfg.frequency_months)?;
        let t = ccs.maturity();
        if pillars.last().is_some_and(|p| p.t >= t) {
            return Err(Error::Ordering(format!("CCS pillar {maturity} does not extend the curve")));
        }
        let guess = if pillars.is_empty() {
            1.0
        } else {
            Curve::new(asof, cfg.interpolation, pillars.clone())?.discount_factor(t)?
        };
        let unit = fx.spot(layout.spread)?;
        let mut objective = |df: f64| -> Result<f64> {
            let mut trial = pillars.clone();
            trial.push(Pillar { t, df });
            sys.set_basis(unknown, Curve::new(asof, cfg.interpolation, trial)?);
            Ok(npv(&ccs, &sys, PricingMode::Effective, None)? / unit)
        };
        let (lo, hi) = (1e-8, 2.0 * guess);
        let (flo, fhi) = (objective(lo)?, objective(hi)?);
        if flo.signum() == fhi.signum() {
            return Err(Error::Solver(format!(
                "{unknown} pillar {maturity}: NPV does not change sign on [{lo}, {hi}] (NPV {flo:e} and {fhi:e})"
            )));
        }
        let df = brent(&mut objective, lo, hi, 1e-16, cfg.max_iterations)?;
        let residual = objective(df)?;
        if !(residual.abs() < cfg.tolerance) {
            return Err(Error::Solver(format!("{unknown} pillar {maturity}: residual NPV {residual:e}")));
        }
        pillars.push(Pillar { t, df });
    }
    Ok(pillars)
}

/// Repricing of one calibration quote after the bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripRow {
    pub kind: QuoteKind,
    pub pair: String,
    pub maturity: Tenor,
    pub quote: f64,
    /// Model par quote: forward points or par spread.
    pub model: f64,
    /// NPV of the quoted contract per unit notional.
    pub npv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCalibration {
    pub unknown: Currency,
    pub known: Currency,
    pub curve: Curve,
    /// Same curve as a zero spread over the unknown currency's overnight curve.
    pub zero_spread: Option<ZeroSpreadCurve>,
    /// Number of short-end (FX swap) pillars at the front of `curve`.
    pub short_end_pillars: usize,
    pub rows: Vec<RoundTripRow>,
}

impl PairCalibration {
    pub fn max_abs_npv(&self) -> f64 {
        self.rows.iter().map(|r| r.npv.abs()).fold(0.0, f64::max)
    }
}

fn pair_of(q: &Quote) -> Option<(Currency, Currency)> {
    match q.subject {
        QuoteSubject::Pair(a, b) => Some((a, b)),
        QuoteSubject::Single(_) => None,
    }
}

fn is_calibration_kind(k: QuoteKind) -> bool {
    matches!(k, QuoteKind::FxSwap | QuoteKind::MtmCcs | QuoteKind::CnCcs)
}

/// Applies `fx-spot` quotes to the system, resolving crosses through the
/// base currency and already known spots.
pub fn apply_spot_quotes(fx: &mut FxSystem, quotes: &[Quote]) -> Result<()> {
    let mut pending: Vec<(Currency, Currency, f64)> = quotes
        .iter()
        .filter(|q| q.kind == QuoteKind::FxSpot)
        .filter_map(|q| pair_of(q).map(|(a, b)| (a, b, q.value)))
        .collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for (a, b, v) in pending {
            // v is units of b per unit of a: chi^a = v chi^b
            if fx.has_spot(b) {
                let chi = v * fx.spot(b)?;
                if a != fx.base() {
                    fx.set_spot(a, chi)?;
                }
            } else if fx.has_spot(a) {
                let chi = fx.spot(a)? / v;
                fx.set_spot(b, chi)?;
            } else {
                rest.push((a, b, v));
            }
        }
        if rest.len() == before {
            let (a, b, _) = rest[0];
            return Err(Error::Configuration(format!("cannot resolve spot {a}{b} from the base {}", fx.base())));
        }
        pending = rest;
    }
    Ok(())
}

/// Calibrates the basis curve of `unknown` from the quotes on pairs that
/// contain it. All such pairs must share one known counter-currency.
pub fn bootstrap_pair(
    fx: &FxSystem,
    unknown: Currency,
    quotes: &[Quote],
    cfg: &BootstrapConfig,
) -> Result<PairCalibration> {
    cfg.validate()?;
    let asof = fx.asof();
    let mine: Vec<&Quote> = quotes
        .iter()
        .filter(|q| is_calibration_kind(q.kind))
        .filter(|q| pair_of(q).is_some_and(|(a, b)| a == unknown || b == unknown))
        .collect();
    if mine.is_empty() {
        return Err(Error::Data(format!("no calibration instruments for {unknown}")));
    }
    let counters: BTreeSet<Currency> =
        mine.iter().filter_map(|q| pair_of(q)).map(|(a, b)| if a == unknown { b } else { a }).collect();
    if counters.len() != 1 {
        return Err(Error::Configuration(format!("{unknown} is quoted against several currencies: {counters:?}")));
    }
    let known = *counters.iter().next().expect("one counter currency");
    let known_curve = fx.discount(known)?;
    let chi_uv = fx.spot_cross(unknown, known)?;

    // short end
    let mut swaps: Vec<(Tenor, f64, &Quote)> = Vec::new();
    for q in mine.iter().filter(|q| q.kind == QuoteKind::FxSwap) {
        let (a, b) = pair_of(q).expect("pair quote");
        let forward = fx.spot_cross(a, b)? + q.value;
        if !(forward > 0.0) {
            return Err(Error::Data(format!("FX swap {a}{b} {} implies forward {forward}", q.maturity)));
        }
        let x_uv = if a == unknown { forward } else { 1.0 / forward };
        swaps.push((q.maturity, x_uv, *q));
    }
    swaps.sort_by(|a, b| nominal(a.0).total_cmp(&nominal(b.0)));
    let cutover = match cfg.cutover {
        Some(t) => nominal(t),
        None => swaps.last().map(|s| nominal(s.0)).unwrap_or(0.0),
    };
    swaps.retain(|s| nominal(s.0) <= cutover + 1e-12);
    let short_quotes: Vec<ShortEndQuote> =
        swaps.iter().map(|&(maturity, forward, _)| ShortEndQuote { maturity, spot: chi_uv, forward }).collect();
    let short = bootstrap_short_end(asof, known_curve, &short_quotes)?;

    // long end
    let mut layout: Option<CcsLayout> = None;
    let mut ccs_quotes: Vec<(Tenor, f64, &Quote)> = Vec::new();
    for q in mine.iter().filter(|q| matches!(q.kind, QuoteKind::MtmCcs | QuoteKind::CnCcs)) {
        let (a, b) = pair_of(q).expect("pair quote");
        let this = CcsLayout { mtm: a, spread: b, marked_to_market: q.kind == QuoteKind::MtmCcs };
        if layout.is_some_and(|l| l != this) {
            return Err(Error::Configuration(format!("mixed CCS conventions for {unknown}")));
        }
        layout = Some(this);
        if nominal(q.maturity) <= cutover + 1e-12 {
            log::warn!("dropping {} {a}{b} {}: inside the FX swap range", q.kind.as_str(), q.maturity);
            continue;
        }
        ccs_quotes.push((q.maturity, q.value, *q));
    }
    let grid = spline_ccs_spreads(&ccs_quotes.iter().map(|c| (c.0, c.1)).collect::<Vec<_>>(), cutover)?;
    let pillars = match layout {
        Some(layout) => bootstrap_long_end(fx, unknown, &short, layout, &grid, cfg)?,
        None => short.clone(),
    };
    if pillars.is_empty() {
        return Err(Error::Data(format!("no calibration instruments for {unknown}")));
    }
    let curve = Curve::new(asof, cfg.interpolation, pillars)?;
    let zero_spread = match fx.ois(unknown) {
        Ok(reference) => Some(ZeroSpreadCurve::from_curve(&curve, reference.clone())?),
        Err(_) => None,
    };

    // round trip on the quotes actually used
    let mut sys = fx.clone();
    sys.set_basis(unknown, curve.clone());
    let mut rows = Vec::new();
    for &(maturity, _, q) in &swaps {
        let (a, b) = pair_of(q).expect("pair quote");
        let t = asof.add_tenor(maturity)?.time_from(asof);
        let swap = FxSwapInstrument::from_points(&sys, a, b, t, q.value, 1.0)?;
        rows.push(RoundTripRow {
            kind: q.kind,
            pair: format!("{a}{b}"),
            maturity,
            quote: q.value,
            model: fx_forward(&sys, a, b, t)? - sys.spot_cross(a, b)?,
            npv: price_fx_swap(&swap, &sys)? / sys.spot(b)?,
        });
    }
    if let Some(layout) = layout {
        for &(maturity, spread, q) in &ccs_quotes {
            let ccs = layout.instrument(asof, maturity, spread, sys.base(), cfg.frequency_months)?;
            rows.push(RoundTripRow {
                kind: q.kind,
                pair: format!("{}{}", layout.mtm, layout.spread),
                maturity,
                quote: spread,
                model: par_spread(&ccs, &sys, PricingMode::Effective, None)?,
                npv: npv(&ccs, &sys, PricingMode::Effective, None)? / sys.spot(layout.spread)?,
            });
        }
    }
    Ok(PairCalibration { unknown, known, curve, zero_spread, short_end_pillars: short.len(), rows })
}

/// Every basis curve implied by the quotes, under the system's base
/// collateral.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub fx: FxSystem,
    pub pairs: Vec<PairCalibration>,
}

impl Calibration {
    pub fn rows(&self) -> impl Iterator<Item = &RoundTripRow> {
        self.pairs.iter().flat_map(|p| p.rows.iter())
    }

    pub fn max_abs_npv(&self) -> f64 {
        self.pairs.iter().map(|p| p.max_abs_npv()).fold(0.0, f64::max)
    }

    pub fn report_csv(&self) -> String {
        let mut s = String::from("kind,pair,maturity,quote,model,npv\n");
        for r in self.rows() {
            s.push_str(&format!("{},{},{},{},{},{:e}\n", r.kind.as_str(), r.pair, r.maturity, r.quote, r.model, r.npv));
        }
        s
    }
}

/// Applies spot quotes and bootstraps every quoted currency, starting with
/// those quoted against the base currency.
pub fn calibrate_system(fx: &FxSystem, quotes: &[Quote], cfg: &BootstrapConfig) -> Result<Calibration> {
    cfg.validate()?;
    let mut sys = fx.clone();
    apply_spot_quotes(&mut sys, quotes)?;
    let mut todo: BTreeSet<Currency> = BTreeSet::new();
    for q in quotes.iter().filter(|q| is_calibration_kind(q.kind)) {
        if let Some((a, b)) = pair_of(q) {
            todo.extend([a, b]);
        }
    }
    todo.remove(&sys.base());
    if todo.is_empty() {
        return Err(Error::Data("no calibration instruments".into()));
    }
    let mut done: BTreeSet<Currency> = BTreeSet::new();
    let mut pairs = Vec::new();
    while !todo.is_empty() {
        let known = |c: Currency| c == sys.base() || done.contains(&c);
        let linked =
            |u: Currency, q: &Quote| pair_of(q).is_some_and(|(a, b)| (a == u && known(b)) || (b == u && known(a)));
        let ready = todo.iter().copied().find(|&u| quotes.iter().any(|q| is_calibration_kind(q.kind) && linked(u, q)));
        let Some(u) = ready else {
            return Err(Error::Configuration(format!(
                "cannot order calibration of {todo:?} from the base {}",
                sys.base()
            )));
        };
        let usable: Vec<Quote> = quotes.iter().filter(|q| linked(u, q)).cloned().collect();
        let cal = bootstrap_pair(&sys, u, &usable, cfg)?;
        sys.set_basis(u, cal.curve.clone());
        pairs.push(cal);
        todo.remove(&u);
        done.insert(u);
    }
    Ok(Calibration { fx: sys, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegrid::parse_quotes;

    fn asof() -> DateStamp {
        DateStamp::from_ymd(2013, 9, 6).unwrap()
    }

    fn ccy(s: &str) -> Currency {
        Currency::new(s).unwrap()
    }

    fn market() -> FxSystem {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.0 / 1.3117).unwrap();
        for (c, ois, fwd) in [("EUR", 0.008, 0.011), ("USD", 0.010, 0.0125)] {
            fx.set_ois(ccy(c), Curve::flat_annual(asof(), ois).unwrap());
            fx.set_forwarding(ccy(c), Curve::flat_annual(asof(), fwd).unwrap());
        }
        fx
    }

    #[test]
    fn short_end_hand_value() {
        let known = Curve::new(asof(), Interpolation::LogLinearDf, vec![Pillar { t: 1.0, df: 0.99 }]).unwrap();
        let t = asof().add_tenor(Tenor::Years(1)).unwrap().time_from(asof());
        assert_eq!(t, 1.0);
        let p = bootstrap_short_end(
            asof(),
            &known,
            &[ShortEndQuote { maturity: Tenor::Years(1), spot: 1.30, forward: 1.3130 }],
        )
        .unwrap();
        assert!((p[0].df - 0.9999).abs() < 1e-15);
        let flat = bootstrap_short_end(
            asof(),
            &known,
            &[ShortEndQuote { maturity: Tenor::Years(1), spot: 1.30, forward: 1.30 }],
        )
        .unwrap();
        assert_eq!(flat[0].df, 0.99);
        assert!(matches!(
            bootstrap_short_end(
                asof(),
                &known,
                &[ShortEndQuote { maturity: Tenor::Years(1), spot: 1.30, forward: -0.1 }]
            ),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn zero_basis_gives_reference_curve() {
        // same rates in both currencies and zero spreads: the implied USD
        // curve is the USD overnight curve
        let mut fx = market();
        for c in ["EUR", "USD"] {
            fx.set_ois(ccy(c), Curve::flat_annual(asof(), 0.01).unwrap());
            fx.set_forwarding(ccy(c), Curve::flat_annual(asof(), 0.01).unwrap());
        }
        let quotes = parse_quotes("mtm-ccs,USDEUR,1y,0\nmtm-ccs,USDEUR,5y,0\nmtm-ccs,USDEUR,10y,0\n").unwrap();
        let cal = bootstrap_pair(&fx, ccy("USD"), &quotes, &BootstrapConfig::default()).unwrap();
        let z = cal.zero_spread.unwrap();
        for t in [0.5, 1.0, 3.3, 10.0] {
            assert!(z.zero_spread(t).unwrap().abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn spline_grid_keeps_quotes() {
        let q = [(Tenor::Years(1), -0.00145), (Tenor::Months(18), -0.00185), (Tenor::Years(5), -0.00265)];
        let g = spline_ccs_spreads(&q, 0.5).unwrap();
        let tenors: Vec<String> = g.iter().map(|x| x.0.to_string()).collect();
        assert_eq!(tenors, ["1y", "18m", "2y", "3y", "4y", "5y"]);
        assert_eq!(g[1].1, -0.00185);
        assert_eq!(g[5].1, -0.00265);
    }

    #[test]
    fn fx_swaps_win_inside_cutover() {
        let fx = market();
        let quotes = parse_quotes("fx-swap,EURUSD,6m,0.0005\nfx-swap,EURUSD,1y,0.0011\nmtm-ccs,USDEUR,1y,-0.00145\nmtm-ccs,USDEUR,2y,-0.00205\n").unwrap();
        let cal = bootstrap_pair(&fx, ccy("USD"), &quotes, &BootstrapConfig::default()).unwrap();
        assert_eq!(cal.short_end_pillars, 2);
        assert_eq!(cal.rows.len(), 3);
        assert!(cal.max_abs_npv() < 1e-10);
    }

    #[test]
    fn no_instruments() {
        assert!(matches!(calibrate_system(&market(), &[], &BootstrapConfig::default()), Err(Error::Data(_))));
    }

    #[test]
    fn spots_resolve_through_crosses() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        let q = parse_quotes("fx-spot,USDHKD,spot,7.7551\nfx-spot,EURUSD,spot,1.3117\n").unwrap();
        apply_spot_quotes(&mut fx, &q).unwrap();
        assert!((fx.spot_cross(ccy("EUR"), ccy("HKD")).unwrap() - 1.3117 * 7.7551).abs() < 1e-12);
    }
}
