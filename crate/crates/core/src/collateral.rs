//! Collateral discounting rules, FX forwards and triangulation.
//!
//! Every rate composition is carried out on discount factors. A cash flow in
//! currency `a` collateralised in currency `k` at rate `c` is discounted with
//!
//! ```text
//!     D(T) = P_c(T) * P^a(T) / P^k(T)
//! ```
//!
//! where `P^x` is the basis curve of `x` under base-currency collateral at the
//! base overnight rate `e` (with `P^base = P_e`). The four collateral rules
//! (domestic/domestic, domestic/foreign, foreign/domestic, foreign/foreign)
//! are the special cases of this product, and identical curve factors are
//! cancelled symbolically before anything is multiplied.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::currency::Currency;
use crate::curves::{Curve, Interpolation, Pillar};
use crate::error::{Error, Result};
use crate::mc::{self, GammaModel, SimulationConfig};
use crate::timegrid::DateStamp;

/// Spot rates and curves of a multi-currency market seen from `base`.
///
/// `spots[a]` is `chi^a`, the base-currency price of one unit of `a`; only
/// these n-1 spots are stored and every cross is derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxSystem {
    asof: DateStamp,
    base: Currency,
    #[serde(default)]
    spots: BTreeMap<Currency, f64>,
    /// Overnight (own-currency collateral) curves.
    #[serde(default)]
    ois: BTreeMap<Currency, Curve>,
    /// Basis curves `P^a(.; e)` under base collateral.
    #[serde(default)]
    basis: BTreeMap<Currency, Curve>,
    /// Libor forwarding pseudo-curves.
    #[serde(default)]
    forwarding: BTreeMap<Currency, Curve>,
}

impl FxSystem {
    pub fn new(asof: DateStamp, base: Currency) -> Self {
        FxSystem {
            asof,
            base,
            spots: BTreeMap::new(),
            ois: BTreeMap::new(),
            basis: BTreeMap::new(),
            forwarding: BTreeMap::new(),
        }
    }

    pub fn asof(&self) -> DateStamp {
        self.asof
    }

    pub fn base(&self) -> Currency {
        self.base
    }

    /// Sets `chi^ccy` (base units per unit of `ccy`).
    pub fn set_spot(&mut self, ccy: Currency, base_per_unit: f64) -> Result<()> {
        if ccy == self.base {
            return Err(Error::Configuration(format!("{ccy} is the base currency")));
        }
        if !(base_per_unit > 0.0) || !base_per_unit.is_finite() {
            return Err(Error::Data(format!("spot for {ccy} must be positive, got {base_per_unit}")));
        }
        self.spots.insert(ccy, base_per_unit);
        Ok(())
    }

    pub fn set_ois(&mut self, ccy: Currency, curve: Curve) {
        self.ois.insert(ccy, curve);
    }

    pub fn set_basis(&mut self, ccy: Currency, curve: Curve) {
        self.basis.insert(ccy, curve);
    }

    pub fn set_forwarding(&mut self, ccy: Currency, curve: Curve) {
        self.forwarding.insert(ccy, curve);
    }

    pub fn currencies(&self) -> Vec<Currency> {
        let mut v: Vec<Currency> = std::iter::once(self.base).chain(self.spots.keys().copied()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn has_spot(&self, ccy: Currency) -> bool {
        ccy == self.base || self.spots.contains_key(&ccy)
    }

    /// `chi^ccy`.
    pub fn spot(&self, ccy: Currency) -> Result<f64> {
        if ccy == self.base {
            return Ok(1.0);
        }
        self.spots.get(&ccy).copied().ok_or_else(|| Error::Configuration(format!("no spot rate for {ccy}")))
    }

    /// `chi^{from -> to}`: units of `to` per unit of `from`.
    pub fn spot_cross(&self, from: Currency, to: Currency) -> Result<f64> {
        if from == to {
            return Ok(1.0);
        }
        Ok(self.spot(from)? / self.spot(to)?)
    }

    pub fn ois(&self, ccy: Currency) -> Result<&Curve> {
        self.ois.get(&ccy).ok_or_else(|| Error::Configuration(format!("missing curve {ccy}-OIS")))
    }

    pub fn forwarding(&self, ccy: Currency) -> Result<&Curve> {
        self.forwarding.get(&ccy).ok_or_else(|| Error::Configuration(format!("missing forwarding curve for {ccy}")))
    }

    pub fn basis(&self, ccy: Currency) -> Option<&Curve> {
        self.basis.get(&ccy)
    }

    pub fn basis_curves(&self) -> &BTreeMap<Currency, Curve> {
        &self.basis
    }

    /// Discount curve of `ccy` flows under base collateral: the base
    /// overnight curve for the base currency, the basis curve otherwise.
    pub fn discount(&self, ccy: Currency) -> Result<&Curve> {
        if ccy == self.base {
            self.ois(ccy)
        } else {
            self.basis.get(&ccy).ok_or_else(|| {
                Error::Configuration(format!("missing basis curve for {ccy} under {} collateral", self.base))
            })
        }
    }

    /// Same market seen from another base currency. Spots are converted;
    /// overnight and forwarding curves carry over, basis curves do not since
    /// they belong to the old collateral currency.
    pub fn with_base(&self, base: Currency) -> Result<FxSystem> {
        let pivot = self.spot(base)?;
        let mut out = FxSystem::new(self.asof, base);
        for ccy in self.currencies() {
            if ccy != base {
                out.set_spot(ccy, self.spot(ccy)? / pivot)?;
            }
        }
        out.ois = self.ois.clone();
        out.forwarding = self.forwarding.clone();
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fx system serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Rate paid on the collateral account.
#[derive(Debug, Clone, PartialEq)]
pub enum CollateralRate {
    /// The overnight rate of the collateral currency.
    Overnight,
    /// An explicit collateral-rate discount curve.
    Custom(Curve),
}

/// Cash-flow currency plus collateral currency and rate. Foreign funding is
/// always assumed to go through FX swaps collateralised in the base currency
/// at its overnight rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CollateralContext {
    pub cashflow: Currency,
    pub collateral: Currency,
    pub rate: CollateralRate,
}

impl CollateralContext {
    pub fn overnight(cashflow: Currency, collateral: Currency) -> Self {
        CollateralContext { cashflow, collateral, rate: CollateralRate::Overnight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Factor {
    Custom,
    Ois(Currency),
    Basis(Currency),
}

/// Curve discounting `ctx.cashflow` flows under the given collateral.
pub fn effective_discount_curve<'a>(ctx: &'a CollateralContext, fx: &'a FxSystem) -> Result<Cow<'a, Curve>> {
    let base = fx.base();
    let funding = |c: Currency| if c == base { Factor::Ois(base) } else { Factor::Basis(c) };
    let rate = match ctx.rate {
        CollateralRate::Overnight => Factor::Ois(ctx.collateral),
        CollateralRate::Custom(_) => Factor::Custom,
    };

    let mut factors: BTreeMap<Factor, i32> = BTreeMap::new();
    *factors.entry(rate).or_default() += 1;
    *factors.entry(funding(ctx.cashflow)).or_default() += 1;
    *factors.entry(funding(ctx.collateral)).or_default() -= 1;
    factors.retain(|_, e| *e != 0);

    let lookup = |f: Factor| -> Result<&'a Curve> {
        match f {
            Factor::Custom => match &ctx.rate {
                CollateralRate::Custom(c) => Ok(c),
                CollateralRate::Overnight => unreachable!("custom factor without custom rate"),
            },
            Factor::Ois(c) => fx.ois(c),
            Factor::Basis(c) => fx.discount(c),
        }
    };

    let resolved: Vec<(&Curve, i32)> = factors.iter().map(|(&f, &e)| Ok((lookup(f)?, e))).collect::<Result<_>>()?;
    if let [(curve, 1)] = resolved.as_slice() {
        return Ok(Cow::Borrowed(*curve));
    }
    if resolved.is_empty() {
        return Err(Error::Configuration("collateral rule cancelled to an empty product".into()));
    }
    compose(fx.asof(), &resolved).map(Cow::Owned)
}

/// Product of curves raised to integer powers, pillared on the union of the
/// constituents' pillars. Exact for log-linear constituents.
fn compose(asof: DateStamp, parts: &[(&Curve, i32)]) -> Result<Curve> {
    let mut times: Vec<f64> = parts.iter().flat_map(|(c, _)| c.pillars().iter().map(|p| p.t)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let pillars = times
        .into_iter()
        .map(|t| {
            let mut l = 0.0;
            for (c, e) in parts {
                l += f64::from(*e) * c.log_df(t)?;
            }
            Ok(Pillar { t, df: l.exp() })
        })
        .collect::<Result<Vec<_>>>()?;
    Curve::new(asof, Interpolation::LogLinearDf, pillars)
}

/// FX forward `X^{from -> to}(T)` under base collateral:
/// `chi^{from -> to} * P^from(T) / P^to(T)`.
pub fn fx_forward(fx: &FxSystem, from: Currency, to: Currency, t: f64) -> Result<f64> {
    let chi = fx.spot_cross(from, to)?;
    if t == 0.0 {
        return Ok(chi);
    }
    Ok(chi * fx.discount(from)?.discount_factor(t)? / fx.discount(to)?.discount_factor(t)?)
}

/// An FX forward request tagged with the collateral currency of the trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxForwardSpec {
    pub from: Currency,
    pub to: Currency,
    pub collateral: Currency,
}

/// FX forward with collateral in `spec.collateral` at its overnight rate.
pub fn fx_forward_collateralized(fx: &FxSystem, spec: FxForwardSpec, t: f64) -> Result<f64> {
    let chi = fx.spot_cross(spec.from, spec.to)?;
    if t == 0.0 {
        return Ok(chi);
    }
    let d_from =
        effective_discount_curve(&CollateralContext::overnight(spec.from, spec.collateral), fx)?.discount_factor(t)?;
    let d_to =
        effective_discount_curve(&CollateralContext::overnight(spec.to, spec.collateral), fx)?.discount_factor(t)?;
    Ok(chi * d_from / d_to)
}

/// Chains `X^{x -> y}` and `X^{y -> z}` into `X^{x -> z}`. The chain is only
/// meaningful when both forwards share the same collateral.
pub fn triangulate_forward(fx: &FxSystem, first: FxForwardSpec, second: FxForwardSpec, t: f64) -> Result<f64> {
    if first.to != second.from {
        return Err(Error::Configuration(format!(
            "cannot chain {}->{} with {}->{}",
            first.from, first.to, second.from, second.to
        )));
    }
    if first.collateral != second.collateral {
        return Err(Error::MixedCollateral(format!(
            "{}->{} collateralised in {} but {}->{} in {}",
            first.from, first.to, first.collateral, second.from, second.to, second.collateral
        )));
    }
    Ok(fx_forward_collateralized(fx, first, t)? * fx_forward_collateralized(fx, second, t)?)
}

/// Which currency is exchanged back one-for-one at maturity of an FX swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceLeg {
    /// One unit of `to` against `1/X` units of `from`.
    Domestic,
    /// One unit of `from` against `X` units of `to`.
    Foreign,
}

/// Par rate of an FX swap on `from/to` collateralised in `to`.
pub fn fx_swap_par_rate(fx: &FxSystem, from: Currency, to: Currency, t: f64, reference: ReferenceLeg) -> Result<f64> {
    let chi = fx.spot_cross(from, to)?;
    let d = fx.discount(to)?.discount_factor(t)?;
    // E[chi_T D] expressed through the basis curve of `from`
    let chi_d = chi * fx.discount(from)?.discount_factor(t)?;
    match reference {
        // E[(chi_T / X - 1) D] = 0  =>  X = E[chi_T D] / E[D]
        ReferenceLeg::Domestic => Ok(1.0 / (d / chi_d)),
        // E[(chi_T - X) D] = 0
        ReferenceLeg::Foreign => Ok(chi_d / d),
    }
}

/// Model-implied convexity of the FX forward under a switch of collateral
/// currency. The quantity is not observable from quotes, so a joint model for
/// the FX rate and the collateral spread must be supplied.
pub fn fx_convexity_gamma(model: Option<&GammaModel>, t: f64, cfg: &SimulationConfig) -> Result<(f64, f64)> {
    let model = model.ok_or_else(|| {
        Error::MissingParams(
            "collateral convexity needs an explicit joint model for the FX rate and the collateral spread".into(),
        )
    })?;
    mc::estimate_gamma(model, t, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asof() -> DateStamp {
        DateStamp::from_ymd(2013, 9, 6).unwrap()
    }

    fn ccy(s: &str) -> Currency {
        Currency::new(s).unwrap()
    }

    fn pillars(p: &[(f64, f64)]) -> Curve {
        Curve::new(asof(), Interpolation::LogLinearDf, p.iter().map(|&(t, df)| Pillar { t, df }).collect()).unwrap()
    }

    fn two_ccy() -> FxSystem {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        fx.set_ois(ccy("EUR"), pillars(&[(1.0, 0.99), (2.0, 0.979)]));
        fx.set_ois(ccy("USD"), pillars(&[(1.0, 0.992), (3.0, 0.97)]));
        fx.set_basis(ccy("USD"), pillars(&[(1.0, 0.98), (2.0, 0.962)]));
        fx
    }

    #[test]
    fn domestic_flows_domestic_collateral() {
        let fx = two_ccy();
        let ctx = CollateralContext::overnight(ccy("EUR"), ccy("EUR"));
        let d = effective_discount_curve(&ctx, &fx).unwrap();
        assert_eq!(&*d, fx.ois(ccy("EUR")).unwrap());
    }

    #[test]
    fn foreign_flows_domestic_collateral_is_basis_curve() {
        let mut fx = two_ccy();
        fx.set_basis(ccy("USD"), pillars(&[(1.0, 0.9999)]));
        let ctx = CollateralContext::overnight(ccy("USD"), ccy("EUR"));
        let d = effective_discount_curve(&ctx, &fx).unwrap();
        assert!(matches!(d, Cow::Borrowed(_)));
        assert_eq!(d.discount_factor(1.0).unwrap(), 0.9999);
    }

    #[test]
    fn foreign_flows_own_collateral_depends_on_overnight_only() {
        let fx = two_ccy();
        let ctx = CollateralContext::overnight(ccy("USD"), ccy("USD"));
        let d = effective_discount_curve(&ctx, &fx).unwrap();
        assert_eq!(&*d, fx.ois(ccy("USD")).unwrap());
    }

    #[test]
    fn domestic_flows_foreign_collateral_composes() {
        let fx = two_ccy();
        let ctx = CollateralContext::overnight(ccy("EUR"), ccy("USD"));
        let d = effective_discount_curve(&ctx, &fx).unwrap();
        for t in [0.5, 1.0, 1.7, 2.0, 3.0, 6.0] {
            let expected = fx.ois(ccy("USD")).unwrap().discount_factor(t).unwrap()
                * fx.ois(ccy("EUR")).unwrap().discount_factor(t).unwrap()
                / fx.basis(ccy("USD")).unwrap().discount_factor(t).unwrap();
            assert!((d.discount_factor(t).unwrap() / expected - 1.0).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn domestic_flows_foreign_collateral_collapses_without_basis() {
        // with c^f = e^f and a basis curve equal to the foreign overnight curve
        // the d/f rule must give back the d/d rule
        let mut fx = two_ccy();
        let usd = fx.ois(ccy("USD")).unwrap().clone();
        fx.set_basis(ccy("USD"), usd);
        let ctx = CollateralContext::overnight(ccy("EUR"), ccy("USD"));
        let d = effective_discount_curve(&ctx, &fx).unwrap();
        let dd = fx.ois(ccy("EUR")).unwrap();
        for t in [0.25, 1.0, 2.5, 10.0] {
            assert!((d.discount_factor(t).unwrap() - dd.discount_factor(t).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_curve_is_configuration_error() {
        let fx = two_ccy();
        let ctx = CollateralContext::overnight(ccy("JPY"), ccy("EUR"));
        assert!(matches!(effective_discount_curve(&ctx, &fx), Err(Error::Configuration(_))));
    }

    #[test]
    fn forward_examples() {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.30).unwrap();
        fx.set_ois(ccy("EUR"), pillars(&[(1.0, 0.99)]));
        fx.set_basis(ccy("USD"), pillars(&[(1.0, 0.98)]));
        let x = fx_forward(&fx, ccy("USD"), ccy("EUR"), 1.0).unwrap();
        assert!((x - 1.2868687).abs() < 1e-7);
        assert_eq!(fx_forward(&fx, ccy("USD"), ccy("EUR"), 0.0).unwrap(), 1.30);

        fx.set_basis(ccy("USD"), pillars(&[(1.0, 0.99)]));
        for t in [0.3, 1.0, 4.0] {
            assert!((fx_forward(&fx, ccy("USD"), ccy("EUR"), t).unwrap() - 1.30).abs() < 1e-15);
        }
    }

    fn three_ccy() -> FxSystem {
        let mut fx = FxSystem::new(asof(), ccy("EUR"));
        fx.set_spot(ccy("USD"), 1.08).unwrap();
        fx.set_spot(ccy("HKD"), 1.2).unwrap();
        fx.set_ois(ccy("EUR"), pillars(&[(1.0, 0.992), (5.0, 0.96)]));
        fx.set_ois(ccy("USD"), pillars(&[(1.0, 0.991)]));
        fx.set_basis(ccy("USD"), pillars(&[(1.0, 0.99), (5.0, 0.951)]));
        fx.set_basis(ccy("HKD"), pillars(&[(1.0, 0.98), (5.0, 0.94)]));
        fx
    }

    #[test]
    fn rebasing_keeps_crosses() {
        let fx = three_ccy();
        let usd = fx.with_base(ccy("USD")).unwrap();
        for (a, b) in [("EUR", "HKD"), ("HKD", "USD"), ("USD", "EUR")] {
            let x = fx.spot_cross(ccy(a), ccy(b)).unwrap();
            let y = usd.spot_cross(ccy(a), ccy(b)).unwrap();
            assert!((x / y - 1.0).abs() < 1e-15);
        }
        assert!(usd.basis(ccy("HKD")).is_none());
        assert!(usd.ois(ccy("EUR")).is_ok());
    }

    #[test]
    fn triangulation_same_collateral() {
        let fx = three_ccy();
        let (usd, hkd, eur) = (ccy("USD"), ccy("HKD"), ccy("EUR"));
        let xy = fx.spot_cross(usd, hkd).unwrap();
        let yz = fx.spot_cross(hkd, eur).unwrap();
        assert!((xy - 0.9).abs() < 1e-15);
        assert!((yz - 1.2).abs() < 1e-15);
        assert!((fx.spot_cross(usd, eur).unwrap() - 1.08).abs() < 1e-15);

        let x1 = fx_forward(&fx, usd, hkd, 1.0).unwrap();
        assert!((x1 - 0.9 * 0.99 / 0.98).abs() < 1e-12);
        assert!((x1 - 0.9091837).abs() < 1e-7);

        for coll in [eur, usd] {
            let a = FxForwardSpec { from: usd, to: hkd, collateral: coll };
            let b = FxForwardSpec { from: hkd, to: eur, collateral: coll };
            let direct =
                fx_forward_collateralized(&fx, FxForwardSpec { from: usd, to: eur, collateral: coll }, 5.0).unwrap();
            let chained = triangulate_forward(&fx, a, b, 5.0).unwrap();
            assert!(((direct - chained) / direct).abs() < 1e-12);
            assert_eq!(triangulate_forward(&fx, a, b, 0.0).unwrap(), 0.9 * 1.2);
        }
    }

    #[test]
    fn triangulation_mixed_collateral_rejected() {
        let fx = three_ccy();
        let a = FxForwardSpec { from: ccy("USD"), to: ccy("HKD"), collateral: ccy("EUR") };
        let b = FxForwardSpec { from: ccy("HKD"), to: ccy("EUR"), collateral: ccy("USD") };
        assert!(matches!(triangulate_forward(&fx, a, b, 1.0), Err(Error::MixedCollateral(_))));
    }

    #[test]
    fn fx_swap_reference_legs_agree() {
        let fx = three_ccy();
        for t in [0.1, 1.0, 3.3, 9.0] {
            let d = fx_swap_par_rate(&fx, ccy("USD"), ccy("EUR"), t, ReferenceLeg::Domestic).unwrap();
            let f = fx_swap_par_rate(&fx, ccy("USD"), ccy("EUR"), t, ReferenceLeg::Foreign).unwrap();
            assert!((d - f).abs() <= 1e-15 * d.abs());
            assert!((d - fx_forward(&fx, ccy("USD"), ccy("EUR"), t).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_needs_model() {
        let cfg = SimulationConfig::default();
        assert!(matches!(fx_convexity_gamma(None, 5.0, &cfg), Err(Error::MissingParams(_))));
    }

    #[test]
    fn json_roundtrip() {
        let fx = three_ccy();
        let back = FxSystem::from_json(&fx.to_json()).unwrap();
        assert_eq!(back, fx);
    }
}
