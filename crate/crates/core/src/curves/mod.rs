//! Discount curves.
//!
//! A [`Curve`] stores discount factors at pillar times (ACT/365F years from
//! the valuation date) and an implicit node `df(0) = 1`. Beyond the last
//! pillar the instantaneous forward is held flat.

mod spline;

pub use spline::SplineCurve1D;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timegrid::{DateStamp, Period};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interpolation {
    #[serde(rename = "log-linear-df")]
    LogLinearDf,
    #[serde(rename = "monotone-cubic-zero")]
    MonotoneCubicZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pillar {
    pub t: f64,
    pub df: f64,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    asof: DateStamp,
    interp: Interpolation,
    pillars: Vec<Pillar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct Curve {
    asof: DateStamp,
    interp: Interpolation,
    pillars: Vec<Pillar>,
    // cached ln df at each pillar
    log_df: Vec<f64>,
    zero_spline: Option<SplineCurve1D>,
}

impl TryFrom<CurveRepr> for Curve {
    type Error = Error;

    fn try_from(r: CurveRepr) -> Result<Self> {
        Curve::new(r.asof, r.interp, r.pillars)
    }
}

impl From<Curve> for CurveRepr {
    fn from(c: Curve) -> Self {
        CurveRepr { asof: c.asof, interp: c.interp, pillars: c.pillars }
    }
}

impl Curve {
    /// Builds a curve from pillars. A pillar at `t = 0` is accepted only with
    /// `df = 1` and is then dropped (the origin node is implicit).
    pub fn new(asof: DateStamp, interp: Interpolation, pillars: Vec<Pillar>) -> Result<Self> {
        let mut kept = Vec::with_capacity(pillars.len());
        for p in pillars {
            if !p.t.is_finite() || !p.df.is_finite() {
                return Err(Error::Data(format!("non-finite pillar ({}, {})", p.t, p.df)));
            }
            if p.df <= 0.0 {
                return Err(Error::Data(format!("non-positive discount factor {} at t={}", p.df, p.t)));
            }
            if p.t < 0.0 {
                return Err(Error::Domain(format!("pillar before valuation date: t={}", p.t)));
            }
            if p.t == 0.0 {
                if p.df != 1.0 {
                    return Err(Error::Data(format!("df(0) must be 1, got {}", p.df)));
                }
                continue;
            }
            kept.push(p);
        }
        if kept.is_empty() {
            return Err(Error::Data("curve has no pillars".into()));
        }
        if kept.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Ordering("pillar times must be strictly increasing".into()));
        }
        let log_df: Vec<f64> = kept.iter().map(|p| p.df.ln()).collect();
        let zero_spline = match interp {
            Interpolation::MonotoneCubicZero if kept.len() >= 2 => {
                let knots: Vec<(f64, f64)> = kept.iter().zip(&log_df).map(|(p, l)| (p.t, -l / p.t)).collect();
                Some(SplineCurve1D::new(&knots)?)
            }
            _ => None,
        };
        Ok(Curve { asof, interp, pillars: kept, log_df, zero_spline })
    }

    /// Curve with a constant continuously-compounded rate, pillared at `times`.
    pub fn flat(asof: DateStamp, rate: f64, times: &[f64]) -> Result<Self> {
        let pillars = times.iter().map(|&t| Pillar { t, df: (-rate * t).exp() }).collect();
        Curve::new(asof, Interpolation::LogLinearDf, pillars)
    }

    /// Flat curve on an annual grid out to 60 years.
    pub fn flat_annual(asof: DateStamp, rate: f64) -> Result<Self> {
        let times: Vec<f64> = (1..=60).map(f64::from).collect();
        Curve::flat(asof, rate, &times)
    }

    pub fn asof(&self) -> DateStamp {
        self.asof
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn pillars(&self) -> &[Pillar] {
        &self.pillars
    }

    pub fn last_time(&self) -> f64 {
        self.pillars[self.pillars.len() - 1].t
    }

    /// Natural log of the discount factor.
    pub fn log_df(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("discount factor requested at t={t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let n = self.pillars.len();
        let last = self.pillars[n - 1].t;
        if t >= last {
            if t == last {
                return Ok(self.log_df[n - 1]);
            }
            let (t0, l0) = if n >= 2 { (self.pillars[n - 2].t, self.log_df[n - 2]) } else { (0.0, 0.0) };
            let fwd = (self.log_df[n - 1] - l0) / (last - t0);
            return Ok(self.log_df[n - 1] + fwd * (t - last));
        }
        match self.interp {
            Interpolation::LogLinearDf => {
                let k = self.pillars.partition_point(|p| p.t <= t);
                if k > 0 && self.pillars[k - 1].t == t {
                    return Ok(self.log_df[k - 1]);
                }
                let (t0, l0) = if k == 0 { (0.0, 0.0) } else { (self.pillars[k - 1].t, self.log_df[k - 1]) };
                let (t1, l1) = (self.pillars[k].t, self.log_df[k]);
                let w = (t - t0) / (t1 - t0);
                Ok(l0 + w * (l1 - l0))
            }
            Interpolation::MonotoneCubicZero => {
                let first = self.pillars[0].t;
                let z = match &self.zero_spline {
                    Some(s) if t >= first => s.interpolate(t)?,
                    _ => -self.log_df[0] / first,
                };
                Ok(-z * t)
            }
        }
    }

    pub fn discount_factor(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        let k = self.pillars.partition_point(|p| p.t < t);
        if k < self.pillars.len() && self.pillars[k].t == t {
            return Ok(self.pillars[k].df);
        }
        Ok(self.log_df(t)?.exp())
    }

    /// Continuously-compounded zero rate.
    pub fn zero_rate(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::Domain(format!("zero rate requested at t={t}")));
        }
        Ok(-self.log_df(t)? / t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Simple-compounded forward rate `(df(t1)/df(t2) - 1)/tau`.
pub fn forward_simple_rate(curve: &Curve, t1: f64, t2: f64, tau: f64) -> Result<f64> {
    if !(t1 < t2) {
        return Err(Error::Ordering(format!("forward rate over [{t1}, {t2}]")));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("accrual fraction {tau} must be positive")));
    }
    Ok((curve.discount_factor(t1)? / curve.discount_factor(t2)? - 1.0) / tau)
}

/// Libor forward for one schedule period, read off a forwarding pseudo-curve.
pub fn forward_libor(forwarding: &Curve, period: &Period) -> Result<f64> {
    forward_simple_rate(forwarding, period.start, period.end, period.accrual)
}

/// A reference curve times a zero-coupon spread: `df = ref * exp(-Z(T) T)`.
///
/// `Z(T) T` is linear in `T` between spread pillars (and from the origin),
/// and keeps the slope of its last segment beyond the final pillar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSpreadCurve {
    reference: Curve,
    // (t, Z(t) * t)
    weights: Vec<(f64, f64)>,
}

impl ZeroSpreadCurve {
    /// Spread pillars given as `(t, Z(t))`.
    pub fn new(reference: Curve, spreads: &[(f64, f64)]) -> Result<Self> {
        if spreads.is_empty() {
            return Err(Error::Data("zero-spread curve needs at least one pillar".into()));
        }
        if spreads.iter().any(|&(t, _)| !(t > 0.0)) || spreads.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Ordering("spread pillars must be positive and increasing".into()));
        }
        let weights = spreads.iter().map(|&(t, z)| (t, z * t)).collect();
        Ok(ZeroSpreadCurve { reference, weights })
    }

    /// Decomposes `target` over `reference` at the target's pillars.
    pub fn from_curve(target: &Curve, reference: Curve) -> Result<Self> {
        let weights = target
            .pillars()
            .iter()
            .map(|p| Ok((p.t, reference.log_df(p.t)? - p.df.ln())))
            .collect::<Result<Vec<_>>>()?;
        Ok(ZeroSpreadCurve { reference, weights })
    }

    pub fn reference(&self) -> &Curve {
        &self.reference
    }

    fn weight(&self, t: f64) -> f64 {
        let w = &self.weights;
        let k = w.partition_point(|p| p.0 < t);
        if k < w.len() && w[k].0 == t {
            return w[k].1;
        }
        let (a, b) = if k == 0 {
            ((0.0, 0.0), w[0])
        } else if k == w.len() {
            if w.len() == 1 {
                ((0.0, 0.0), w[0])
            } else {
                (w[k - 2], w[k - 1])
            }
        } else {
            (w[k - 1], w[k])
        };
        a.1 + (t - a.0) * (b.1 - a.1) / (b.0 - a.0)
    }

    /// Zero spread `Z(T)` per annum.
    pub fn zero_spread(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("zero spread requested at t={t}")));
        }
        Ok(self.weight(t) / t)
    }

    pub fn discount_factor(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        Ok((self.reference.log_df(t)? - self.weight(t)).exp())
    }
}
