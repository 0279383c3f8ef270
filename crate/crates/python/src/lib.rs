//! Python bindings. Curves, quotes and instruments travel as the same JSON
//! and CSV text the `xccy` command line reads and writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use xccy_core::bootstrap::{
    calibrate_system, compare_triplet, triplet_report_csv, triplet_scheme_a, triplet_scheme_b, BootstrapConfig,
    TRIPLET_MONTHS,
};
use xccy_core::cli::InstrumentSpec;
use xccy_core::convexity::{adjust_domestic, adjust_foreign, MarketModelParams, ModelPoint, PeriodState};
use xccy_core::instruments::{npv as core_npv, par_spread as core_par_spread, CcsInstrument, PricingMode};
use xccy_core::mc::{replicate_foreign_collateral_carry, RiskFreeSpec};
use xccy_core::timegrid::parse_quotes;
use xccy_core::{Currency, FxSystem};

fn err(e: xccy_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(text: Option<&str>) -> PyResult<BootstrapConfig> {
    let cfg: BootstrapConfig = match text {
        Some(t) => serde_json::from_str(t).map_err(json_err)?,
        None => BootstrapConfig::default(),
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn mode(name: &str) -> PyResult<PricingMode> {
    match name {
        "effective" => Ok(PricingMode::Effective),
        "adjusted" => Ok(PricingMode::Adjusted),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}, expected effective or adjusted"))),
    }
}

/// Calibrates every quoted currency. Returns `(curves_json, roundtrip_csv, max_abs_npv)`.
#[pyfunction]
#[pyo3(signature = (quotes_csv, market_json, config_json=None))]
fn bootstrap(quotes_csv: &str, market_json: &str, config_json: Option<&str>) -> PyResult<(String, String, f64)> {
    let fx = FxSystem::from_json(market_json).map_err(err)?;
    let quotes = parse_quotes(quotes_csv).map_err(err)?;
    let cal = calibrate_system(&fx, &quotes, &config(config_json)?).map_err(err)?;
    Ok((cal.fx.to_json(), cal.report_csv(), cal.max_abs_npv()))
}

type Priced = (FxSystem, CcsInstrument, PricingMode, Option<MarketModelParams>);

fn priced(curves_json: &str, instrument_json: &str, mode_name: &str, params_json: Option<&str>) -> PyResult<Priced> {
    let fx = FxSystem::from_json(curves_json).map_err(err)?;
    let spec: InstrumentSpec = serde_json::from_str(instrument_json).map_err(json_err)?;
    let ccs = spec.build(&fx, spec.maturity, spec.marked_to_market).map_err(err)?;
    let params = params_json.map(MarketModelParams::from_json).transpose().map_err(err)?;
    Ok((fx, ccs, mode(mode_name)?, params))
}

/// NPV in base-currency units of a CCS described as in `xccy price`.
#[pyfunction]
#[pyo3(signature = (curves_json, instrument_json, mode="effective", params_json=None))]
fn npv(curves_json: &str, instrument_json: &str, mode: &str, params_json: Option<&str>) -> PyResult<f64> {
    let (fx, ccs, m, params) = priced(curves_json, instrument_json, mode, params_json)?;
    core_npv(&ccs, &fx, m, params.as_ref()).map_err(err)
}

/// Spread on the spread leg that prices the CCS at par.
#[pyfunction]
#[pyo3(signature = (curves_json, instrument_json, mode="effective", params_json=None))]
fn par_spread(curves_json: &str, instrument_json: &str, mode: &str, params_json: Option<&str>) -> PyResult<f64> {
    let (fx, ccs, m, params) = priced(curves_json, instrument_json, mode, params_json)?;
    core_par_spread(&ccs, &fx, m, params.as_ref()).map_err(err)
}

/// Both triangulation schemes on the standard maturities, as CSV.
#[pyfunction]
#[pyo3(signature = (quotes_csv, market_json, domestic="EUR", pivot="USD", minor="HKD", config_json=None))]
fn triplet_check(
    quotes_csv: &str,
    market_json: &str,
    domestic: &str,
    pivot: &str,
    minor: &str,
    config_json: Option<&str>,
) -> PyResult<String> {
    let fx = FxSystem::from_json(market_json).map_err(err)?;
    let quotes = parse_quotes(quotes_csv).map_err(err)?;
    let cfg = config(config_json)?;
    let c = |s: &str| Currency::new(s).map_err(err);
    let (d, p, m) = (c(domestic)?, c(pivot)?, c(minor)?);
    let a = triplet_scheme_a(&fx, &quotes, &cfg, d, p, m).map_err(err)?;
    let b = triplet_scheme_b(&fx, &quotes, &cfg, d, p, m).map_err(err)?;
    let rows = compare_triplet(&a, &b, d, m, &TRIPLET_MONTHS, &cfg).map_err(err)?;
    Ok(triplet_report_csv(&rows))
}

/// Frozen-drift expectations `(delayed FX, FX times Libor)` for one period.
#[pyfunction]
#[pyo3(signature = (x, e, f, tau, horizon, sigma, eta, rho, delta=0.01, beta=None, foreign=false))]
#[allow(clippy::too_many_arguments)]
fn convexity_adjustment(
    x: f64,
    e: f64,
    f: f64,
    tau: f64,
    horizon: f64,
    sigma: f64,
    eta: f64,
    rho: f64,
    delta: f64,
    beta: Option<f64>,
    foreign: bool,
) -> PyResult<(f64, f64)> {
    let state = PeriodState { x, e, f, tau, horizon };
    let point = ModelPoint { sigma, eta, rho, delta, beta };
    if foreign { adjust_foreign(&state, &point) } else { adjust_domestic(&state, &point) }.map_err(err)
}

/// Carry per unit time of holding foreign collateral, replicated with period `dt`.
#[pyfunction]
fn carry_rate(r: f64, c_f: f64, b_f: f64, e: f64, dt: f64) -> PyResult<f64> {
    replicate_foreign_collateral_carry(&RiskFreeSpec { r, c_f, b_f, e }, dt).map_err(err)
}

#[pymodule]
fn xccy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(npv, m)?)?;
    m.add_function(wrap_pyfunction!(par_spread, m)?)?;
    m.add_function(wrap_pyfunction!(triplet_check, m)?)?;
    m.add_function(wrap_pyfunction!(convexity_adjustment, m)?)?;
    m.add_function(wrap_pyfunction!(carry_rate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
