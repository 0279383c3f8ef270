//! Discrete replication of the carry earned on foreign collateral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat continuously compounded rates for the replication experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskFreeSpec {
    /// Risk-free (Treasury) rate.
    pub r: f64,
    /// Rate paid on foreign-currency collateral.
    pub c_f: f64,
    /// Foreign basis rate implied by FX swaps collateralised in the base currency.
    pub b_f: f64,
    /// Domestic collateral rate.
    pub e: f64,
}

/// Dividend rate realised over one period of length `dt` by a desk that holds
/// one unit of foreign collateral.
///
/// At the start of the period the desk converts the collateral to domestic
/// currency through an FX swap (collateralised at `e`) and invests the
/// proceeds in a risk-free zero-coupon bond. At the end the bond pays, the
/// swap unwinds and the foreign collateral owes `1 + c_f dt` of interest plus
/// principal. What is left, per unit of time, is the carry. It tends to
/// `r - c_f + b_f - e` with an O(dt) error.
pub fn replicate_foreign_collateral_carry(rfs: &RiskFreeSpec, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("period length must be positive, got {dt}")));
    }
    // FX swap: one foreign unit now against X(dt)/chi foreign units at dt,
    // where X/chi = P^f(dt; e) / P(dt; e)
    let swap_ratio = (-rfs.b_f * dt).exp() / (-rfs.e * dt).exp();
    // bond bought with the converted unit, grown at r
    let bond = (rfs.r * dt).exp();
    // cost of the collateral in today's money: pay back (1 + c_f dt) foreign units
    let owed_today = (1.0 + rfs.c_f * dt) * swap_ratio / bond;
    Ok((1.0 - owed_today) / dt)
}
