//! FX swaps and cross-currency swaps.
//!
//! All NPVs are returned in base-currency units of the supplied
//! [`FxSystem`]. A CCS has one leg carrying the quoted spread; at most one
//! leg is marked-to-market.
//!
//! A marked-to-market leg in currency `m` facing a constant leg with notional
//! `N_c` in currency `c` re-fixes its notional at every period start `T_{i-1}`
//! to `N_c` converted at the prevailing FX rate, lends it at `T_{i-1}` and gets
//! it back with interest at `T_i`. In base units:
//!
//! ```text
//!   chi^m N_c sum_i [ -D_m(T_{i-1}) X^{c->m}(T_{i-1})
//!                     + D_m(T_i) (DX_i + tau_i (DXL_i + s DX_i)) ]
//! ```
//!
//! with `DX_i = X^{c->m}(T_{i-1})`, `DXL_i = DX_i F_i` in effective mode and
//! the convexity-adjusted expectations in adjusted mode.

use serde::{Deserialize, Serialize};

use crate::collateral::{effective_discount_curve, fx_forward, CollateralContext, FxSystem};
use crate::convexity::{adjust_domestic, adjust_foreign, MarketModelParams, ModelPoint, PeriodState};
use crate::currency::Currency;
use crate::curves::{forward_libor, Curve};
use crate::error::{Error, Result};
use crate::timegrid::{build_schedule, DateStamp, DayCount, Period, Tenor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NotionalKind {
    Constant,
    MarkToMarket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSpec {
    /// Libor from the currency's forwarding curve.
    Floating,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    Effective,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegSide {
    Receive,
    Pay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcsLeg {
    pub currency: Currency,
    pub periods: Vec<Period>,
    /// Notional in leg currency; ignored for marked-to-market legs, whose
    /// notional follows the other leg.
    pub notional: f64,
    pub notional_kind: NotionalKind,
    pub rate: RateSpec,
    pub spread: f64,
}

impl CcsLeg {
    pub fn floating(currency: Currency, periods: Vec<Period>, notional: f64, notional_kind: NotionalKind) -> Self {
        CcsLeg { currency, periods, notional, notional_kind, rate: RateSpec::Floating, spread: 0.0 }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.spread = spread;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::DegenerateInstrument(format!("{} leg has no periods", self.currency)));
        }
        for w in self.periods.windows(2) {
            if w[1].start < w[0].end - 1e-12 || w[1].start > w[0].end + 1e-12 {
                return Err(Error::Ordering(format!("{} leg periods are not contiguous", self.currency)));
            }
        }
        if self.periods.iter().any(|p| !(p.end > p.start) || !(p.accrual > 0.0)) || self.periods[0].start < 0.0 {
            return Err(Error::Ordering(format!("{} leg has an invalid period", self.currency)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcsInstrument {
    pub receive: CcsLeg,
    pub pay: CcsLeg,
    pub collateral: Currency,
    /// Leg whose spread is solved for by [`par_spread`].
    pub spread_on: LegSide,
}

/// Value of one leg in base units and its sensitivity to the leg spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegValue {
    pub value: f64,
    /// `d value / d spread`.
    pub annuity: f64,
}

/// Model periods for a swap starting at `asof` and ending `maturity` later.
pub fn periods_for(
    asof: DateStamp,
    maturity: Tenor,
    frequency_months: u32,
    day_count: DayCount,
) -> Result<Vec<Period>> {
    let end = asof.add_tenor(maturity)?;
    Ok(build_schedule(asof, end, frequency_months, day_count)?.periods(asof))
}

impl CcsInstrument {
    /// Quarterly CCS starting today: the `mtm` currency leg renotions (or has
    /// constant notional when `mtm_flag` is false) and the `spread_ccy` leg
    /// pays Libor plus `spread` on notional `notional`.
    #[allow(clippy::too_many_arguments)]
    pub fn standard(
        asof: DateStamp,
        maturity: Tenor,
        major: Currency,
        spread_ccy: Currency,
        spread: f64,
        mtm_flag: bool,
        collateral: Currency,
        notional: f64,
    ) -> Result<Self> {
        let periods = periods_for(asof, maturity, 3, DayCount::Act360)?;
        let kind = if mtm_flag { NotionalKind::MarkToMarket } else { NotionalKind::Constant };
        Ok(CcsInstrument {
            receive: CcsLeg::floating(spread_ccy, periods.clone(), notional, NotionalKind::Constant)
                .with_spread(spread),
            pay: CcsLeg::floating(major, periods, f64::NAN, kind),
            collateral,
            spread_on: LegSide::Receive,
        })
    }

    fn spread_leg(&self) -> &CcsLeg {
        match self.spread_on {
            LegSide::Receive => &self.receive,
            LegSide::Pay => &self.pay,
        }
    }

    fn spread_leg_mut(&mut self) -> &mut CcsLeg {
        match self.spread_on {
            LegSide::Receive => &mut self.receive,
            LegSide::Pay => &mut self.pay,
        }
    }

    pub fn set_spread(&mut self, s: f64) {
        self.spread_leg_mut().spread = s;
    }

    pub fn spread(&self) -> f64 {
        self.spread_leg().spread
    }

    pub fn maturity(&self) -> f64 {
        let r = self.receive.periods.last().map(|p| p.end).unwrap_or(0.0);
        let p = self.pay.periods.last().map(|p| p.end).unwrap_or(0.0);
        r.max(p)
    }

    /// Resolves notionals: constant legs keep theirs, a marked-to-market leg
    /// follows the constant leg on the other side. Unset constant notionals
    /// are derived at spot from the other leg.
    fn notionals(&self, fx: &FxSystem) -> Result<(f64, f64)> {
        use NotionalKind::*;
        let (r, p) = (&self.receive, &self.pay);
        match (r.notional_kind, p.notional_kind) {
            (MarkToMarket, MarkToMarket) => Err(Error::DegenerateInstrument("both legs marked-to-market".into())),
            (MarkToMarket, Constant) => Ok((f64::NAN, p.notional)),
            (Constant, MarkToMarket) => Ok((r.notional, f64::NAN)),
            (Constant, Constant) => {
                let rn = if r.notional.is_finite() {
                    r.notional
                } else {
                    p.notional * fx.spot_cross(p.currency, r.currency)?
                };
                let pn = if p.notional.is_finite() {
                    p.notional
                } else {
                    r.notional * fx.spot_cross(r.currency, p.currency)?
                };
                if !rn.is_finite() || !pn.is_finite() {
                    return Err(Error::DegenerateInstrument("no notional given on either leg".into()));
                }
                Ok((rn, pn))
            }
        }
    }
}

fn leg_rate(leg: &CcsLeg, fwd: Option<&Curve>, p: &Period) -> Result<f64> {
    match leg.rate {
        RateSpec::Fixed(k) => Ok(k),
        RateSpec::Floating => forward_libor(fwd.expect("forwarding curve resolved for floating leg"), p),
    }
}

fn forwarding_for<'a>(leg: &CcsLeg, fx: &'a FxSystem) -> Result<Option<&'a Curve>> {
    match leg.rate {
        RateSpec::Floating => fx.forwarding(leg.currency).map(Some),
        RateSpec::Fixed(_) => Ok(None),
    }
}

/// Constant-notional leg: `N (-D(T_0) + sum tau_i (F_i + s) D(T_i) + D(T_N))`,
/// converted to base units.
pub fn price_cn_ccs_leg(leg: &CcsLeg, notional: f64, fx: &FxSystem, collateral: Currency) -> Result<LegValue> {
    leg.validate()?;
    let ctx = CollateralContext::overnight(leg.currency, collateral);
    let disc = effective_discount_curve(&ctx, fx)?;
    let fwd = forwarding_for(leg, fx)?;
    let chi = fx.spot(leg.currency)?;
    if notional == 0.0 {
        return Ok(LegValue { value: 0.0, annuity: 0.0 });
    }

    let mut value = -disc.discount_factor(leg.periods[0].start)?;
    let mut annuity = 0.0;
    for p in &leg.periods {
        let d = disc.discount_factor(p.end)?;
        value += p.accrual * (leg_rate(leg, fwd, p)? + leg.spread) * d;
        annuity += p.accrual * d;
    }
    value += disc.discount_factor(leg.periods[leg.periods.len() - 1].end)?;
    Ok(LegValue { value: chi * notional * value, annuity: chi * notional * annuity })
}

/// Which side of the frozen-drift model a marked-to-market leg sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MtmSide {
    /// Leg currency is the base currency.
    Domestic,
    /// The facing constant leg is in the base currency.
    Foreign,
}

/// Marked-to-market leg in `leg.currency` facing a constant leg of
/// `against_notional` units of `against`.
pub fn price_mtm_leg(
    leg: &CcsLeg,
    against: Currency,
    against_notional: f64,
    fx: &FxSystem,
    collateral: Currency,
    mode: PricingMode,
    params: Option<&MarketModelParams>,
) -> Result<LegValue> {
    leg.validate()?;
    if leg.currency == against {
        return Err(Error::DegenerateInstrument(format!("MtM leg and constant leg both in {against}")));
    }
    let m = leg.currency;
    let disc_ctx = CollateralContext::overnight(m, collateral);
    let disc = effective_discount_curve(&disc_ctx, fx)?;
    let fwd = forwarding_for(leg, fx)?;
    let chi_m = fx.spot(m)?;

    let adjusted = match mode {
        PricingMode::Effective => None,
        PricingMode::Adjusted => {
            let params =
                params.ok_or_else(|| Error::MissingParams("adjusted pricing needs market-model parameters".into()))?;
            params.validate()?;
            if collateral != fx.base() {
                return Err(Error::Configuration(format!(
                    "adjusted pricing assumes collateral in the base currency {}, got {collateral}",
                    fx.base()
                )));
            }
            let side = if m == fx.base() {
                MtmSide::Domestic
            } else if against == fx.base() {
                MtmSide::Foreign
            } else {
                return Err(Error::Configuration(format!(
                    "adjusted pricing needs one leg in the base currency {}",
                    fx.base()
                )));
            };
            Some((params, side))
        }
    };

    let mut value = 0.0;
    let mut annuity = 0.0;
    for (i, p) in leg.periods.iter().enumerate() {
        // X^{c->m}(T_{i-1}), FX forward for the re-fixing date
        let x_prev = fx_forward(fx, against, m, p.start)?;
        let rate = leg_rate(leg, fwd, p)?;
        let (dx, dxl) = match adjusted {
            None => (x_prev, x_prev * rate),
            Some((params, side)) => {
                let fixed = matches!(leg.rate, RateSpec::Fixed(_));
                let pp = params.at(i)?;
                let e = forward_libor(&disc, p)?;
                let adjusted = match side {
                    MtmSide::Domestic => {
                        let state = PeriodState { x: x_prev, e, f: rate, tau: p.accrual, horizon: p.start };
                        let point =
                            ModelPoint { sigma: pp.sigma, eta: pp.eta, rho: pp.rho, delta: pp.delta, beta: pp.beta };
                        adjust_domestic(&state, &point)?
                    }
                    MtmSide::Foreign => {
                        // the model is written for X = domestic per foreign unit
                        let state = PeriodState { x: 1.0 / x_prev, e, f: rate, tau: p.accrual, horizon: p.start };
                        let point = ModelPoint {
                            sigma: pp.sigma,
                            eta: pp.eta_f,
                            rho: pp.rho_f,
                            delta: pp.delta_f,
                            beta: pp.beta_f,
                        };
                        adjust_foreign(&state, &point)?
                    }
                };
                // a fixed coupon only sees the delayed-FX adjustment
                if fixed {
                    (adjusted.0, adjusted.0 * rate)
                } else {
                    adjusted
                }
            }
        };
        let d0 = disc.discount_factor(p.start)?;
        let d1 = disc.discount_factor(p.end)?;
        value += -d0 * x_prev + d1 * (dx + p.accrual * (dxl + leg.spread * dx));
        annuity += d1 * p.accrual * dx;
    }
    let scale = chi_m * against_notional;
    Ok(LegValue { value: scale * value, annuity: scale * annuity })
}

/// Marked-to-market leg in the base currency.
pub fn price_mtm_leg_domestic(
    leg: &CcsLeg,
    against: Currency,
    against_notional: f64,
    fx: &FxSystem,
    mode: PricingMode,
    params: Option<&MarketModelParams>,
) -> Result<LegValue> {
    if leg.currency != fx.base() {
        return Err(Error::Configuration(format!("{} is not the base currency", leg.currency)));
    }
    price_mtm_leg(leg, against, against_notional, fx, fx.base(), mode, params)
}

/// Marked-to-market leg in a foreign currency facing a base-currency leg.
pub fn price_mtm_leg_foreign(
    leg: &CcsLeg,
    against_notional: f64,
    fx: &FxSystem,
    mode: PricingMode,
    params: Option<&MarketModelParams>,
) -> Result<LegValue> {
    if leg.currency == fx.base() {
        return Err(Error::Configuration(format!("{} is the base currency", leg.currency)));
    }
    price_mtm_leg(leg, fx.base(), against_notional, fx, fx.base(), mode, params)
}

/// Values of the receive and pay legs.
pub fn leg_values(
    ccs: &CcsInstrument,
    fx: &FxSystem,
    mode: PricingMode,
    params: Option<&MarketModelParams>,
) -> Result<(LegValue, LegValue)> {
    let (rn, pn) = ccs.notionals(fx)?;
    let price = |leg: &CcsLeg, n: f64, other: &CcsLeg, other_n: f64| match leg.notional_kind {
        NotionalKind::Constant => price_cn_ccs_leg(leg, n, fx, ccs.collateral),
        NotionalKind::MarkToMarket => price_mtm_leg(leg, other.currency, other_n, fx, ccs.collateral, mode, params),
    };
    Ok((price(&ccs.receive, rn, &ccs.pay, pn)?, price(&ccs.pay, pn, &ccs.receive, rn)?))
}

/// `V(receive) - V(pay)` in base units.
pub fn npv(ccs: &CcsInstrument, fx: &FxSystem, mode: PricingMode, params: Option<&MarketModelParams>) -> Result<f64> {
    let (r, p) = leg_values(ccs, fx, mode, params)?;
    Ok(r.value - p.value)
}

/// Spread on the designated leg that sets the NPV to zero. The NPV is affine
/// in the spread, so this is closed form.
pub fn par_spread(
    ccs: &CcsInstrument,
    fx: &FxSystem,
    mode: PricingMode,
    params: Option<&MarketModelParams>,
) -> Result<f64> {
    let (r, p) = leg_values(ccs, fx, mode, params)?;
    let total = r.value - p.value;
    let slope = match ccs.spread_on {
        LegSide::Receive => r.annuity,
        LegSide::Pay => -p.annuity,
    };
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::DegenerateInstrument("spread leg has zero annuity".into()));
    }
    Ok(ccs.spread() - total / slope)
}

/// FX swap on `from/to`: receive `notional` units of `to` at maturity against
/// `notional / contract_rate` units of `from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxSwapInstrument {
    pub from: Currency,
    pub to: Currency,
    pub maturity: f64,
    /// Contractual forward rate (units of `to` per `from`).
    pub contract_rate: f64,
    pub notional: f64,
}

impl FxSwapInstrument {
    /// Contract struck from quoted swap points `delta = X - chi`.
    pub fn from_points(
        fx: &FxSystem,
        from: Currency,
        to: Currency,
        maturity: f64,
        points: f64,
        notional: f64,
    ) -> Result<Self> {
        Ok(FxSwapInstrument { from, to, maturity, contract_rate: fx.spot_cross(from, to)? + points, notional })
    }
}

/// `N (X_mkt(T)/X - 1) D_to(T)`, in base units, collateralised in the base
/// currency.
pub fn price_fx_swap(inst: &FxSwapInstrument, fx: &FxSystem) -> Result<f64> {
    if !(inst.contract_rate > 0.0) {
        return Err(Error::DegenerateInstrument(format!("contract rate {} must be positive", inst.contract_rate)));
    }
    let x_mkt = fx_forward(fx, inst.from, inst.to, inst.maturity)?;
    let d = fx.discount(inst.to)?.discount_factor(inst.maturity)?;
    Ok(fx.spot(inst.to)? * inst.notional * (x_mkt / inst.contract_rate - 1.0) * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{Interpolation, Pillar};

    fn asof() -> DateStamp {
        DateStamp::from_ymd(2013, 9, 6).unwrap()
    }

    fn ccy(s: &str) -> Currency {
        Currency::new(s).unwrap()
    }

    fn flat(r: f64) -> Curve {
        Curve::flat_annual(asof(), r).unwrap()
    }

    fn system() -> FxSystem {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        fx.set_ois(ccy("EUR"), flat(0.02));
        fx.set_forwarding(ccy("EUR"), flat(0.024));
        fx.set_ois(ccy("USD"), flat(0.018));
        fx.set_basis(ccy("USD"), flat(0.025));
        fx.set_forwarding(ccy("USD"), flat(0.027));
        fx
    }

    #[test]
    fn fx_swap_examples() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        let c = |df| Curve::new(asof(), Interpolation::LogLinearDf, vec![Pillar { t: 1.0, df }]).unwrap();
        fx.set_ois(ccy("EUR"), c(0.99));
        fx.set_basis(ccy("USD"), c(0.98));
        let at_market = FxSwapInstrument {
            from: ccy("USD"),
            to: ccy("EUR"),
            maturity: 1.0,
            contract_rate: fx_forward(&fx, ccy("USD"), ccy("EUR"), 1.0).unwrap(),
            notional: 1.0,
        };
        assert_eq!(price_fx_swap(&at_market, &fx).unwrap(), 0.0);
        let off = FxSwapInstrument { contract_rate: 1.30, ..at_market.clone() };
        let v = price_fx_swap(&off, &fx).unwrap();
        assert!((v - (1.30 * 0.98 / 0.99 / 1.30 - 1.0) * 0.99).abs() < 1e-15);
        assert!((v + 0.0100006).abs() < 1e-6);
    }

    #[test]
    fn single_period_spread_annuity() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        let c = Curve::new(asof(), Interpolation::LogLinearDf, vec![Pillar { t: 1.0, df: 0.99 }]).unwrap();
        fx.set_ois(ccy("EUR"), c.clone());
        fx.set_forwarding(ccy("EUR"), c);
        let leg = CcsLeg::floating(
            ccy("EUR"),
            vec![Period { start: 0.0, end: 1.0, accrual: 1.0 }],
            1.0,
            NotionalKind::Constant,
        )
        .with_spread(0.001);
        let v = price_cn_ccs_leg(&leg, 1.0, &fx, ccy("EUR")).unwrap();
        assert!((v.value - 0.00099).abs() < 1e-16);
        assert_eq!(price_cn_ccs_leg(&leg, 0.0, &fx, ccy("EUR")).unwrap().value, 0.0);
    }

    #[test]
    fn missing_forwarding_curve() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_ois(ccy("EUR"), flat(0.02));
        let leg = CcsLeg::floating(
            ccy("EUR"),
            periods_for(asof(), Tenor::Years(2), 3, DayCount::Act360).unwrap(),
            1.0,
            NotionalKind::Constant,
        );
        assert!(matches!(price_cn_ccs_leg(&leg, 1.0, &fx, ccy("EUR")), Err(Error::Configuration(_))));
    }

    /// Brute-force cash-flow enumeration of a marked-to-market leg: every
    /// flow is listed with its date and amount and discounted separately.
    fn brute_force_mtm(fx: &FxSystem, leg: &CcsLeg, against: Currency, n: f64) -> f64 {
        let disc = fx.discount(leg.currency).unwrap();
        let fwd = fx.forwarding(leg.currency).unwrap();
        let mut flows: Vec<(f64, f64)> = Vec::new();
        for p in &leg.periods {
            let notional = n * fx_forward(fx, against, leg.currency, p.start).unwrap();
            let libor = (fwd.discount_factor(p.start).unwrap() / fwd.discount_factor(p.end).unwrap() - 1.0) / p.accrual;
            flows.push((p.start, -notional));
            flows.push((p.end, notional));
            flows.push((p.end, notional * p.accrual * (libor + leg.spread)));
        }
        let chi = fx.spot(leg.currency).unwrap();
        flows.iter().map(|(t, a)| chi * a * disc.discount_factor(*t).unwrap()).sum()
    }

    #[test]
    fn mtm_matches_cash_flow_enumeration() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        fx.set_ois(ccy("EUR"), flat(0.02));
        fx.set_forwarding(ccy("EUR"), flat(0.02));
        fx.set_basis(ccy("USD"), flat(0.025));
        fx.set_forwarding(ccy("USD"), flat(0.025));
        let periods =
            vec![Period { start: 0.0, end: 0.5, accrual: 0.5 }, Period { start: 0.5, end: 1.0, accrual: 0.5 }];
        for (m, c) in [("EUR", "USD"), ("USD", "EUR")] {
            let leg =
                CcsLeg::floating(ccy(m), periods.clone(), f64::NAN, NotionalKind::MarkToMarket).with_spread(0.0015);
            let v = price_mtm_leg(&leg, ccy(c), 1.0, &fx, ccy("EUR"), PricingMode::Effective, None).unwrap();
            let b = brute_force_mtm(&fx, &leg, ccy(c), 1.0);
            assert!((v.value - b).abs() < 1e-15, "{m}: {} vs {b}", v.value);
        }
    }

    #[test]
    fn single_period_mtm_equals_constant_notional() {
        let fx = system();
        let periods = vec![Period { start: 0.0, end: 1.0, accrual: 1.0 }];
        let mtm =
            CcsLeg::floating(ccy("USD"), periods.clone(), f64::NAN, NotionalKind::MarkToMarket).with_spread(0.002);
        let v = price_mtm_leg(&mtm, ccy("EUR"), 1.0, &fx, ccy("EUR"), PricingMode::Effective, None).unwrap();
        let n = fx.spot_cross(ccy("EUR"), ccy("USD")).unwrap();
        let cn = CcsLeg::floating(ccy("USD"), periods, n, NotionalKind::Constant).with_spread(0.002);
        let w = price_cn_ccs_leg(&cn, n, &fx, ccy("EUR")).unwrap();
        assert!((v.value - w.value).abs() < 1e-15);
        assert!((v.annuity - w.annuity).abs() < 1e-15);
    }

    #[test]
    fn foreign_lending_term_is_domestic_annuity() {
        // the lending flows of a foreign MtM leg are worth sum_i P(T_{i-1}; e)
        let fx = system();
        let periods = periods_for(asof(), Tenor::Years(3), 3, DayCount::Act360).unwrap();
        let leg = CcsLeg::floating(ccy("USD"), periods.clone(), f64::NAN, NotionalKind::MarkToMarket);
        let disc = fx.discount(ccy("USD")).unwrap();
        let lending: f64 = periods
            .iter()
            .map(|p| {
                fx.spot(ccy("USD")).unwrap() * disc.discount_factor(p.start).unwrap()
                    / fx_forward(&fx, ccy("USD"), ccy("EUR"), p.start).unwrap()
            })
            .sum();
        let dom: f64 = periods.iter().map(|p| fx.ois(ccy("EUR")).unwrap().discount_factor(p.start).unwrap()).sum();
        assert!((lending - dom).abs() < 1e-14);
        let _ = leg;
    }

    #[test]
    fn adjusted_with_zero_correlation_is_effective() {
        let fx = system();
        let params = MarketModelParams::uniform(0.3, 0.3, 0.0);
        let periods = periods_for(asof(), Tenor::Years(10), 3, DayCount::Act360).unwrap();
        for m in ["EUR", "USD"] {
            let c = if m == "EUR" { "USD" } else { "EUR" };
            let leg =
                CcsLeg::floating(ccy(m), periods.clone(), f64::NAN, NotionalKind::MarkToMarket).with_spread(0.001);
            let e = price_mtm_leg(&leg, ccy(c), 1.0, &fx, ccy("EUR"), PricingMode::Effective, None).unwrap();
            let a = price_mtm_leg(&leg, ccy(c), 1.0, &fx, ccy("EUR"), PricingMode::Adjusted, Some(&params)).unwrap();
            // the foreign side inverts the forward twice
            assert!((e.value - a.value).abs() < 1e-15 && (e.annuity - a.annuity).abs() < 1e-14, "{e:?} {a:?}");
        }
    }

    #[test]
    fn adjusted_needs_params() {
        let fx = system();
        let periods = periods_for(asof(), Tenor::Years(2), 3, DayCount::Act360).unwrap();
        let leg = CcsLeg::floating(ccy("EUR"), periods, f64::NAN, NotionalKind::MarkToMarket);
        assert!(matches!(
            price_mtm_leg_domestic(&leg, ccy("USD"), 1.0, &fx, PricingMode::Adjusted, None),
            Err(Error::MissingParams(_))
        ));
    }

    #[test]
    fn adjusted_tends_to_effective() {
        let fx = system();
        let periods = periods_for(asof(), Tenor::Years(10), 3, DayCount::Act360).unwrap();
        let leg = CcsLeg::floating(ccy("EUR"), periods, f64::NAN, NotionalKind::MarkToMarket);
        let e = price_mtm_leg_domestic(&leg, ccy("USD"), 1.0, &fx, PricingMode::Effective, None).unwrap().value;
        let mut last = f64::INFINITY;
        for vol in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let p = MarketModelParams::uniform(vol, vol, 0.7);
            let a = price_mtm_leg_domestic(&leg, ccy("USD"), 1.0, &fx, PricingMode::Adjusted, Some(&p)).unwrap().value;
            let gap = (a - e).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn role_swap_symmetry() {
        // EUR-based view of a USD MtM leg vs USD-based view of the same leg
        // relabelled: the two systems are mirror images with inverted spot
        let eur_based = system();
        let mut usd_based = FxSystem::new(asof(), ccy("USD"));
        usd_based.set_spot(ccy("EUR"), 1.0 / 1.30).unwrap();
        usd_based.set_ois(ccy("USD"), flat(0.025));
        usd_based.set_forwarding(ccy("USD"), flat(0.027));
        usd_based.set_basis(ccy("EUR"), flat(0.02));
        usd_based.set_forwarding(ccy("EUR"), flat(0.024));
        let periods = periods_for(asof(), Tenor::Years(5), 3, DayCount::Act360).unwrap();
        let foreign_leg =
            CcsLeg::floating(ccy("USD"), periods.clone(), f64::NAN, NotionalKind::MarkToMarket).with_spread(0.001);
        let f = price_mtm_leg_foreign(&foreign_leg, 1.0, &eur_based, PricingMode::Effective, None).unwrap();
        let d =
            price_mtm_leg_domestic(&foreign_leg, ccy("EUR"), 1.0, &usd_based, PricingMode::Effective, None).unwrap();
        // the same leg valued in EUR and in USD: differ by the spot only
        assert!((f.value - d.value * 1.30).abs() < 1e-13);
    }

    #[test]
    fn par_spread_symmetric_legs_is_zero() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        for c in ["EUR", "USD"] {
            fx.set_forwarding(ccy(c), flat(0.02));
        }
        fx.set_ois(ccy("EUR"), flat(0.02));
        fx.set_basis(ccy("USD"), flat(0.02));
        for mtm in [true, false] {
            let ccs =
                CcsInstrument::standard(asof(), Tenor::Years(7), ccy("USD"), ccy("EUR"), 0.0, mtm, ccy("EUR"), 1.0)
                    .unwrap();
            assert!(par_spread(&ccs, &fx, PricingMode::Effective, None).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn par_spread_reprices_to_zero() {
        let fx = system();
        for mtm in [true, false] {
            let mut ccs =
                CcsInstrument::standard(asof(), Tenor::Years(12), ccy("USD"), ccy("EUR"), 0.0, mtm, ccy("EUR"), 1.0)
                    .unwrap();
            let s = par_spread(&ccs, &fx, PricingMode::Effective, None).unwrap();
            ccs.set_spread(s);
            assert!(npv(&ccs, &fx, PricingMode::Effective, None).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn both_legs_mtm_rejected() {
        let fx = system();
        let mut ccs =
            CcsInstrument::standard(asof(), Tenor::Years(2), ccy("USD"), ccy("EUR"), 0.0, true, ccy("EUR"), 1.0)
                .unwrap();
        ccs.receive.notional_kind = NotionalKind::MarkToMarket;
        assert!(matches!(npv(&ccs, &fx, PricingMode::Effective, None), Err(Error::DegenerateInstrument(_))));
    }
}
