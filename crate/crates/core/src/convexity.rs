//! Frozen-drift convexity adjustments for marked-to-market CCS legs.
//!
//! Forward Libors follow shifted lognormal dynamics, the simple discounting
//! rate `E` is tied to the Libor forward by a static spread `beta`, and the
//! forward FX rate is lognormal with a drift driven by `E`. Freezing that drift
//! at its time-zero value gives closed forms for the delayed FX payment and the
//! FX-times-Libor payment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DISPLACEMENT: f64 = 0.01;

/// Per-period market-model parameters. Any array of length one is broadcast
/// to every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModelParams {
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta_f: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default)]
    pub eta_f: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho_fx_libor: Vec<f64>,
    #[serde(default)]
    pub rho_fx_libor_f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_f: Option<Vec<f64>>,
}

fn default_delta() -> Vec<f64> {
    vec![DEFAULT_DISPLACEMENT]
}

/// Parameters for one period, domestic and foreign side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodParams {
    pub delta: f64,
    pub delta_f: f64,
    pub eta: f64,
    pub eta_f: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rho_f: f64,
    pub beta: Option<f64>,
    pub beta_f: Option<f64>,
}

fn pick(v: &[f64], i: usize, name: &str) -> Result<f64> {
    match v.len() {
        0 => Err(Error::MissingParams(format!("{name} not supplied"))),
        1 => Ok(v[0]),
        n if i < n => Ok(v[i]),
        n => Err(Error::MissingParams(format!("{name} has {n} entries, period {i} requested"))),
    }
}

impl MarketModelParams {
    /// Same parameters for every period.
    pub fn uniform(sigma: f64, eta: f64, rho: f64) -> Self {
        MarketModelParams {
            delta: default_delta(),
            delta_f: default_delta(),
            eta: vec![eta],
            eta_f: vec![eta],
            sigma: vec![sigma],
            rho_fx_libor: vec![rho],
            rho_fx_libor_f: vec![rho],
            beta: None,
            beta_f: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("delta", &self.delta),
            ("delta_f", &self.delta_f),
            ("eta", &self.eta),
            ("eta_f", &self.eta_f),
            ("sigma", &self.sigma),
        ];
        for (name, v) in all {
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Domain(format!("{name} entries must be finite and non-negative")));
            }
        }
        for (name, v) in [("rho_fx_libor", &self.rho_fx_libor), ("rho_fx_libor_f", &self.rho_fx_libor_f)] {
            if v.iter().any(|x| !(x.abs() <= 1.0)) {
                return Err(Error::Domain(format!("{name} entries must lie in [-1, 1]")));
            }
        }
        Ok(())
    }

    /// Parameters for period `i` (zero-based). Foreign vol and correlation
    /// fall back to the domestic ones when not supplied.
    pub fn at(&self, i: usize) -> Result<PeriodParams> {
        let eta = pick(&self.eta, i, "eta")?;
        let rho = pick(&self.rho_fx_libor, i, "rho_fx_libor")?;
        Ok(PeriodParams {
            delta: pick(&self.delta, i, "delta")?,
            delta_f: pick(&self.delta_f, i, "delta_f")?,
            eta,
            eta_f: if self.eta_f.is_empty() { eta } else { pick(&self.eta_f, i, "eta_f")? },
            sigma: pick(&self.sigma, i, "sigma")?,
            rho,
            rho_f: if self.rho_fx_libor_f.is_empty() { rho } else { pick(&self.rho_fx_libor_f, i, "rho_fx_libor_f")? },
            beta: self.beta.as_deref().map(|b| pick(b, i, "beta")).transpose()?,
            beta_f: self.beta_f.as_deref().map(|b| pick(b, i, "beta_f")).transpose()?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: MarketModelParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

/// Curve-implied state for one period `(T_{i-1}, T_i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodState {
    /// FX forward to `T_{i-1}` (domestic per foreign unit).
    pub x: f64,
    /// Simple discounting rate over the period.
    pub e: f64,
    /// Libor forward over the period.
    pub f: f64,
    pub tau: f64,
    /// `T_{i-1} - t` in years.
    pub horizon: f64,
}

/// One point of the shifted lognormal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub sigma: f64,
    pub eta: f64,
    pub rho: f64,
    pub delta: f64,
    /// Static Libor-minus-discount spread; `None` takes `F - E`.
    pub beta: Option<f64>,
}

fn drift_coefficient(s: &PeriodState, m: &ModelPoint) -> Result<f64> {
    let denom = 1.0 + s.tau * s.e;
    if !(denom > 0.0) {
        return Err(Error::Singularity(format!("1 + tau*E = {denom} for tau={}, E={}", s.tau, s.e)));
    }
    if s.horizon < 0.0 {
        return Err(Error::Ordering(format!("reset lies before the valuation date (horizon {})", s.horizon)));
    }
    let beta = m.beta.unwrap_or(s.f - s.e);
    Ok(s.tau * (s.e + m.delta + beta) / denom)
}

/// Domestic MtM leg: `(E^{T_i}[chi_{T_{i-1}}], E^{T_i}[chi_{T_{i-1}} L(T_i)])`.
pub fn adjust_domestic(s: &PeriodState, m: &ModelPoint) -> Result<(f64, f64)> {
    let a = drift_coefficient(s, m)?;
    let k = m.sigma * m.eta * m.rho * s.horizon;
    let delayed = s.x * (-a * k).exp();
    let g = k.exp();
    // (F + delta) g - delta, arranged to return F exactly when g = 1
    Ok((delayed, delayed * (s.f * g + m.delta * (g - 1.0))))
}

/// Foreign MtM leg: `(E^{T_i;b}[1/chi_{T_{i-1}}], E^{T_i;b}[L^f(T_i)/chi_{T_{i-1}}])`,
/// with `s.e`, `s.f` the foreign basis discount rate and Libor forward.
pub fn adjust_foreign(s: &PeriodState, m: &ModelPoint) -> Result<(f64, f64)> {
    let a = drift_coefficient(s, m)?;
    let k = m.sigma * m.eta * m.rho * s.horizon;
    let delayed = (a * k).exp() / s.x;
    let g = (-k).exp();
    Ok((delayed, delayed * (s.f * g + m.delta * (g - 1.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand_state() -> PeriodState {
        PeriodState { x: 1.0, e: 0.02, f: 0.02, tau: 0.25, horizon: 5.0 }
    }

    fn hand_point() -> ModelPoint {
        ModelPoint { sigma: 0.10, eta: 0.20, rho: 0.5, delta: 0.0, beta: Some(0.0) }
    }

    #[test]
    fn hand_evaluated_domestic_factor() {
        let (d, l) = adjust_domestic(&hand_state(), &hand_point()).unwrap();
        // tau E / (1 + tau E) = 0.005/1.005, times sigma eta rho h = 0.05
        assert!((d - (-0.000248756f64).exp()).abs() < 1e-9);
        assert!((d - 0.99975128).abs() < 1e-8);
        assert!((l / d - 0.02 * 1.0512711).abs() < 1e-9);
    }

    #[test]
    fn hand_evaluated_foreign_factor() {
        let (d, l) = adjust_foreign(&hand_state(), &hand_point()).unwrap();
        assert!((d - 1.00024879).abs() < 1e-8);
        assert!((l / d - 0.02 * (-0.05f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_correlation_is_exact_identity() {
        let s = PeriodState { x: 1.3117, e: 0.011, f: 0.0137, tau: 0.2556, horizon: 7.3 };
        let m = ModelPoint { sigma: 0.3, eta: 0.3, rho: 0.0, delta: 0.01, beta: None };
        assert_eq!(adjust_domestic(&s, &m).unwrap(), (s.x, s.x * s.f));
        let (d, l) = adjust_foreign(&s, &m).unwrap();
        assert_eq!(d, 1.0 / s.x);
        assert_eq!(l, d * s.f);
    }

    #[test]
    fn zero_horizon_is_unadjusted() {
        let s = PeriodState { horizon: 0.0, ..hand_state() };
        assert_eq!(adjust_domestic(&s, &hand_point()).unwrap(), (1.0, 0.02));
    }

    #[test]
    fn singular_discount_ratio() {
        let s = PeriodState { e: -4.0, ..hand_state() };
        assert!(matches!(adjust_domestic(&s, &hand_point()), Err(Error::Singularity(_))));
        assert!(matches!(adjust_foreign(&s, &hand_point()), Err(Error::Singularity(_))));
    }

    #[test]
    fn params_broadcast_and_validate() {
        let p = MarketModelParams::from_json(r#"{"eta":[0.2],"sigma":[0.1,0.12],"rho_fx_libor":[0.5]}"#).unwrap();
        let q = p.at(1).unwrap();
        assert_eq!((q.sigma, q.eta, q.delta, q.rho_f), (0.12, 0.2, 0.01, 0.5));
        assert!(p.at(2).is_err());
        assert!(MarketModelParams::from_json(r#"{"eta":[0.2],"sigma":[0.1],"rho_fx_libor":[1.5]}"#).is_err());
        assert!(MarketModelParams::from_json(r#"{"eta":[-0.2],"sigma":[0.1],"rho_fx_libor":[0.5]}"#).is_err());
    }

    proptest! {
        #[test]
        fn exponents_are_negatives(
            sigma in 0.0f64..0.3, eta in 0.0f64..0.3, rho in -1.0f64..1.0,
            e in -0.01f64..0.08, h in 0.0f64..10.0, delta in 0.0f64..0.02,
        ) {
            let s = PeriodState { x: 1.0, e, f: e, tau: 0.25, horizon: h };
            let m = ModelPoint { sigma, eta, rho, delta, beta: None };
            let (d, _) = adjust_domestic(&s, &m).unwrap();
            let (f, _) = adjust_foreign(&s, &m).unwrap();
            prop_assert!((d.ln() + f.ln()).abs() < 1e-14);
            // sign structure: domestic factor below one iff sigma eta rho (E + delta + beta) >= 0
            if sigma * eta * rho * (e + delta) > 1e-12 && h > 0.0 {
                prop_assert!(d < 1.0);
            }
        }

        #[test]
        fn monotone_in_rho(r1 in -1.0f64..1.0, r2 in -1.0f64..1.0, h in 0.1f64..10.0) {
            let s = PeriodState { x: 1.0, e: 0.02, f: 0.025, tau: 0.25, horizon: h };
            let at = |rho| adjust_domestic(&s, &ModelPoint { sigma: 0.2, eta: 0.2, rho, delta: 0.01, beta: None }).unwrap().0;
            let (lo, hi) = (r1.min(r2), r1.max(r2));
            prop_assert!(at(lo) >= at(hi));
        }
    }
}
