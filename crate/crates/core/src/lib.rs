//! Collateral-aware multi-currency curve construction and cross-currency swap
//! pricing.
//!
//! The crate is organised bottom-up:
//!
//! * [`timegrid`]: dates, day counts, schedules and raw quotes.
//! * [`curves`]: discount curves, the monotone spline and zero-spread curves.
//! * [`collateral`]: the collateral discounting rules, FX forwards and
//!   triangulation.
//! * [`instruments`]: FX swaps, constant-notional and marked-to-market CCS.
//! * [`convexity`]: frozen-drift adjustments for marked-to-market legs.
//! * [`bootstrap`]: implied curve calibration and the currency triplet schemes.
//! * [`mc`]: Monte Carlo and discrete-replication oracles.
//! * [`cli`]: the `xccy` batch front end.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod cli;
pub mod collateral;
pub mod convexity;
pub mod currency;
pub mod curves;
pub mod error;
pub mod instruments;
pub mod mc;
pub mod solver;
pub mod timegrid;

pub use collateral::{CollateralContext, CollateralRate, FxSystem};
pub use currency::Currency;
pub use curves::{Curve, Interpolation, SplineCurve1D, ZeroSpreadCurve};
pub use error::{Error, Result};
pub use timegrid::{DateStamp, DayCount, Period, Quote, QuoteKind, Schedule, Tenor};
