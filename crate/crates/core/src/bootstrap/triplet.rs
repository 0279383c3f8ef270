//! Two ways to get a minor-currency curve under domestic collateral when
//! the minor currency is only quoted against a pivot currency.
//!
//! Scheme (a) calibrates the pivot under domestic collateral and then the
//! minor currency against it. Scheme (b) calibrates both under pivot
//! collateral, synthesises domestic/minor par spreads there and
//! re-bootstraps the minor curve under domestic collateral from them.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{apply_spot_quotes, bootstrap_pair, calibrate_system, spline_ccs_spreads, BootstrapConfig, CcsLayout};
use crate::collateral::FxSystem;
use crate::currency::Currency;
use crate::error::{Error, Result};
use crate::instruments::{par_spread, PricingMode};
use crate::timegrid::{Quote, QuoteKind, QuoteSubject, Tenor};

/// Maturities (months) of the default triplet comparison.
pub const TRIPLET_MONTHS: [u32; 10] = [12, 18, 24, 36, 48, 60, 84, 120, 144, 180];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletScheme {
    A,
    B,
}

impl FromStr for TripletScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(TripletScheme::A),
            "b" => Ok(TripletScheme::B),
            other => {
                Err(Error::Parse { line: 0, message: format!("unknown triplet scheme {other:?}, expected a or b") })
            }
        }
    }
}

fn on_pair(q: &Quote, x: Currency, y: Currency) -> bool {
    matches!(q.subject, QuoteSubject::Pair(a, b) if (a == x && b == y) || (a == y && b == x))
}

fn require_quotes(quotes: &[Quote], x: Currency, y: Currency) -> Result<()> {
    let any_ccs = quotes.iter().any(|q| matches!(q.kind, QuoteKind::MtmCcs | QuoteKind::CnCcs) && on_pair(q, x, y));
    if !any_ccs {
        return Err(Error::Data(format!("no {x}/{y} CCS quotes")));
    }
    Ok(())
}

fn rebased(market: &FxSystem, quotes: &[Quote], base: Currency) -> Result<FxSystem> {
    let mut m = market.clone();
    apply_spot_quotes(&mut m, quotes)?;
    m.with_base(base)
}

/// Minor curve under domestic collateral, through the pivot curve calibrated
/// under the same collateral.
pub fn triplet_scheme_a(
    market: &FxSystem,
    quotes: &[Quote],
    cfg: &BootstrapConfig,
    domestic: Currency,
    pivot: Currency,
    minor: Currency,
) -> Result<FxSystem> {
    require_quotes(quotes, domestic, pivot)?;
    require_quotes(quotes, pivot, minor)?;
    let relevant: Vec<Quote> = quotes
        .iter()
        .filter(|q| q.kind == QuoteKind::FxSpot || on_pair(q, domestic, pivot) || on_pair(q, pivot, minor))
        .cloned()
        .collect();
    Ok(calibrate_system(&rebased(market, &relevant, domestic)?, &relevant, cfg)?.fx)
}

/// `X^{a->b}(T)` from a quote on either orientation of the pair.
fn quoted_forward(fx: &FxSystem, quotes: &[Quote], a: Currency, b: Currency, maturity: Tenor) -> Result<Option<f64>> {
    for q in quotes.iter().filter(|q| q.kind == QuoteKind::FxSwap && q.maturity == maturity) {
        if let QuoteSubject::Pair(x, y) = q.subject {
            if x == a && y == b {
                return Ok(Some(fx.spot_cross(a, b)? + q.value));
            }
            if x == b && y == a {
                return Ok(Some(1.0 / (fx.spot_cross(b, a)? + q.value)));
            }
        }
    }
    Ok(None)
}

/// Minor curve under domestic collateral, re-bootstrapped from
/// domestic/minor par spreads computed under pivot collateral.
pub fn triplet_scheme_b(
    market: &FxSystem,
    quotes: &[Quote],
    cfg: &BootstrapConfig,
    domestic: Currency,
    pivot: Currency,
    minor: Currency,
) -> Result<FxSystem> {
    require_quotes(quotes, domestic, pivot)?;
    require_quotes(quotes, pivot, minor)?;
    let relevant: Vec<Quote> = quotes
        .iter()
        .filter(|q| q.kind == QuoteKind::FxSpot || on_pair(q, domestic, pivot) || on_pair(q, pivot, minor))
        .cloned()
        .collect();
    let under_pivot = calibrate_system(&rebased(market, &relevant, pivot)?, &relevant, cfg)?.fx;
    let asof = market.asof();

    // short end: chain the quoted forwards through the pivot
    let mut synthetic = Vec::new();
    let mut maturities: Vec<Tenor> = relevant
        .iter()
        .filter(|q| q.kind == QuoteKind::FxSwap && on_pair(q, pivot, minor))
        .map(|q| q.maturity)
        .collect();
    maturities.sort_by(|a, b| a.nominal_years().total_cmp(&b.nominal_years()));
    maturities.dedup();
    for m in &maturities {
        let first = quoted_forward(&under_pivot, &relevant, domestic, pivot, *m)?;
        let second = quoted_forward(&under_pivot, &relevant, pivot, minor, *m)?;
        if let (Some(x), Some(y)) = (first, second) {
            synthetic.push(Quote {
                kind: QuoteKind::FxSwap,
                subject: QuoteSubject::Pair(domestic, minor),
                maturity: *m,
                value: x * y - under_pivot.spot_cross(domestic, minor)?,
                collateral: Some(domestic),
            });
        }
    }
    let cutover = match cfg.cutover {
        Some(t) => t.nominal_years(),
        None => synthetic.iter().map(|q| q.maturity.nominal_years()).fold(0.0, f64::max),
    };

    // long end: par spreads on the minor quotes' grid, domestic leg renotioning
    let minor_ccs: Vec<(Tenor, f64)> = relevant
        .iter()
        .filter(|q| matches!(q.kind, QuoteKind::MtmCcs | QuoteKind::CnCcs) && on_pair(q, pivot, minor))
        .map(|q| (q.maturity, q.value))
        .collect();
    let marked_to_market = relevant.iter().filter(|q| on_pair(q, pivot, minor)).all(|q| q.kind != QuoteKind::CnCcs);
    let layout = CcsLayout { mtm: domestic, spread: minor, marked_to_market };
    for (maturity, _) in spline_ccs_spreads(&minor_ccs, cutover)? {
        let ccs = layout.instrument(asof, maturity, 0.0, pivot, cfg.frequency_months)?;
        synthetic.push(Quote {
            kind: if marked_to_market { QuoteKind::MtmCcs } else { QuoteKind::CnCcs },
            subject: QuoteSubject::Pair(domestic, minor),
            maturity,
            value: par_spread(&ccs, &under_pivot, PricingMode::Effective, None)?,
            collateral: Some(pivot),
        });
    }

    let mut out = under_pivot.with_base(domestic)?;
    let cal = bootstrap_pair(&out, minor, &synthetic, cfg)?;
    out.set_basis(minor, cal.curve);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripletRow {
    pub months: u32,
    pub spread_a: f64,
    pub spread_b: f64,
    /// `(b - a)` in basis points.
    pub diff_bp: f64,
}

/// Domestic/minor MtM par spreads under domestic collateral from the curves
/// of both schemes.
pub fn compare_triplet(
    scheme_a: &FxSystem,
    scheme_b: &FxSystem,
    domestic: Currency,
    minor: Currency,
    months: &[u32],
    cfg: &BootstrapConfig,
) -> Result<Vec<TripletRow>> {
    let layout = CcsLayout { mtm: domestic, spread: minor, marked_to_market: true };
    months
        .iter()
        .map(|&m| {
            let spread = |fx: &FxSystem| -> Result<f64> {
                let ccs = layout.instrument(fx.asof(), Tenor::Months(m), 0.0, domestic, cfg.frequency_months)?;
                par_spread(&ccs, fx, PricingMode::Effective, None)
            };
            let (a, b) = (spread(scheme_a)?, spread(scheme_b)?);
            Ok(TripletRow { months: m, spread_a: a, spread_b: b, diff_bp: (b - a) * 1e4 })
        })
        .collect()
}

pub fn triplet_report_csv(rows: &[TripletRow]) -> String {
    let mut s = String::from("maturity,spread_a,spread_b,diff_bp\n");
    for r in rows {
        s.push_str(&format!("{}m,{},{},{}\n", r.months, r.spread_a, r.spread_b, r.diff_bp));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::Curve;
    use crate::timegrid::{parse_quotes, DateStamp};

    fn ccy(s: &str) -> Currency {
        Currency::new(s).unwrap()
    }

    fn flat_market(rates: [(f64, f64); 3]) -> FxSystem {
        let asof = DateStamp::from_ymd(2013, 9, 6).unwrap();
        let mut fx = FxSystem::new(asof, ccy("EUR"));
        for (c, (ois, fwd)) in ["EUR", "USD", "HKD"].into_iter().zip(rates) {
            fx.set_ois(ccy(c), Curve::flat_annual(asof, ois).unwrap());
            fx.set_forwarding(ccy(c), Curve::flat_annual(asof, fwd).unwrap());
        }
        fx
    }

    const DEGENERATE: &str = "\
fx-spot,EURUSD,spot,1.3117
fx-spot,USDHKD,spot,7.7551
mtm-ccs,USDEUR,1y,0
mtm-ccs,USDEUR,5y,0
mtm-ccs,USDEUR,10y,0
mtm-ccs,USDHKD,1y,0
mtm-ccs,USDHKD,5y,0
mtm-ccs,USDHKD,10y,0
";

    #[test]
    fn degenerate_inputs_give_zero_spreads() {
        let fx = flat_market([(0.01, 0.01); 3]);
        let q = parse_quotes(DEGENERATE).unwrap();
        let cfg = BootstrapConfig::default();
        let (eur, usd, hkd) = (ccy("EUR"), ccy("USD"), ccy("HKD"));
        let a = triplet_scheme_a(&fx, &q, &cfg, eur, usd, hkd).unwrap();
        let b = triplet_scheme_b(&fx, &q, &cfg, eur, usd, hkd).unwrap();
        for r in compare_triplet(&a, &b, eur, hkd, &[12, 60, 120], &cfg).unwrap() {
            assert!(r.spread_a.abs() < 1e-12 && r.spread_b.abs() < 1e-12, "{r:?}");
            assert!(r.diff_bp.abs() < 1e-8);
        }
    }

    #[test]
    fn missing_pivot_quotes() {
        let fx = flat_market([(0.01, 0.01); 3]);
        let q = parse_quotes("mtm-ccs,USDEUR,1y,0\n").unwrap();
        let r = triplet_scheme_a(&fx, &q, &BootstrapConfig::default(), ccy("EUR"), ccy("USD"), ccy("HKD"));
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn scheme_flag() {
        assert_eq!("b".parse::<TripletScheme>().unwrap(), TripletScheme::B);
        assert!("c".parse::<TripletScheme>().is_err());
    }
}
