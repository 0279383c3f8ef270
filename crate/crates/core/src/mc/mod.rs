//! Monte Carlo and discrete-replication oracles.
//!
//! Nothing here reuses the closed forms it checks. Randomness is counter
//! based: sample `k` of an experiment draws from a ChaCha8 stream selected by
//! `k`, so results do not depend on how samples are spread over threads.
//! Per-chunk moments are merged pairwise in a fixed order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexity::{adjust_domestic, adjust_foreign, MarketModelParams, ModelPoint, PeriodState};
use crate::error::{Error, Result};

mod carry;

pub use carry::{replicate_foreign_collateral_carry, RiskFreeSpec};

const CHUNK: usize = 512;
const MAX_REJECTED_FRACTION: f64 = 1e-3;

const TAG_GRID: u64 = 1;
const TAG_RN: u64 = 2;
const TAG_GAMMA: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub paths: usize,
    /// Time step in years.
    pub step: f64,
    pub seed: u64,
    /// Pair every path with its mirror image.
    pub antithetic: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { paths: 200_000, step: 1.0 / 12.0, seed: 42, antithetic: true }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Domain(format!("need at least 2 paths, got {}", self.paths)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    /// Independent samples: antithetic pairs count once.
    fn samples(&self) -> usize {
        if self.antithetic {
            self.paths.div_ceil(2)
        } else {
            self.paths
        }
    }

    fn signs(&self) -> &'static [f64] {
        if self.antithetic {
            &[1.0, -1.0]
        } else {
            &[1.0]
        }
    }

    fn rng(&self, tag: u64, sample: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(sample);
        rng
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `(reference - mean) / se`; a zero standard error gives 0 when the
    /// two agree to rounding and an infinite score otherwise.
    pub fn z(&self, reference: f64) -> f64 {
        let d = reference - self.mean;
        if self.se > 0.0 {
            d / self.se
        } else if d.abs() <= 1e-12 * reference.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Running count, mean and centred second moment.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments { n, mean: a.mean + d * (b.n / n), m2: a.m2 + b.m2 + d * d * (a.n * b.n / n) }
    }

    fn estimate(&self) -> Estimate {
        let se = if self.n > 1.0 { (self.m2 / (self.n - 1.0) / self.n).sqrt() } else { f64::NAN };
        Estimate { mean: self.mean, se }
    }
}

fn merge_pairwise(mut parts: Vec<Vec<Moments>>) -> Vec<Moments> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.into_iter().zip(b).map(|(x, y)| Moments::merge(x, y)).collect()),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Runs `sample` for every sample index and accumulates `width` outputs.
/// `sample` returns false for a rejected path.
fn run<S, I, F>(samples: usize, width: usize, init: I, sample: F) -> (Vec<Moments>, usize)
where
    I: Fn() -> S + Sync,
    F: Fn(u64, &mut S, &mut [f64]) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(Vec<Moments>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = init();
            let mut acc = vec![Moments::default(); width];
            let mut out = vec![0.0; width];
            let mut rejected = 0;
            for k in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                out.iter_mut().for_each(|x| *x = 0.0);
                if sample(k as u64, &mut scratch, &mut out) {
                    for (m, x) in acc.iter_mut().zip(&out) {
                        m.push(*x);
                    }
                } else {
                    rejected += 1;
                }
            }
            (acc, rejected)
        })
        .collect();
    let rejected = parts.iter().map(|p| p.1).sum();
    (merge_pairwise(parts.into_iter().map(|p| p.0).collect()), rejected)
}

fn check_rejections(rejected: usize, samples: usize) -> Result<()> {
    if rejected as f64 > MAX_REJECTED_FRACTION * samples as f64 {
        return Err(Error::Simulation(format!("{rejected} of {samples} paths hit 1 + tau*E <= 0")));
    }
    Ok(())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Which MtM expectations a simulation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MtmSide {
    /// `E^{T_i}[X]` and `E^{T_i}[X L]` for a leg in the base currency.
    Domestic,
    /// `E^{T_i;b}[1/X]` and `E^{T_i;b}[L^f/X]` for a foreign leg.
    Foreign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    DomDelayedFx,
    DomFxLibor,
    ForInvFx,
    ForLiborOverFx,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::DomDelayedFx, Target::DomFxLibor, Target::ForInvFx, Target::ForLiborOverFx];

    pub fn as_str(&self) -> &'static str {
        match self {
            Target::DomDelayedFx => "dom-delayed-fx",
            Target::DomFxLibor => "dom-fx-libor",
            Target::ForInvFx => "for-inv-fx",
            Target::ForLiborOverFx => "for-libor-over-fx",
        }
    }
}

/// Rates and accrual for the simulated period. `beta = None` takes the
/// static spread `f - e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodSetup {
    pub e: f64,
    pub f: f64,
    pub tau: f64,
    pub delta: f64,
    pub beta: Option<f64>,
}

impl Default for PeriodSetup {
    fn default() -> Self {
        PeriodSetup { e: 0.02, f: 0.02, tau: 0.25, delta: 0.0, beta: None }
    }
}

impl PeriodSetup {
    fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.f - self.e)
    }

    /// Shifted rate `E + delta + beta` at time zero.
    fn y0(&self) -> f64 {
        self.e + self.delta + self.beta()
    }
}

/// Parameter grid for [`validate_closed_forms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormGrid {
    pub sigmas: Vec<f64>,
    pub etas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub horizons: Vec<f64>,
    #[serde(default)]
    pub setup: PeriodSetup,
}

impl Default for ClosedFormGrid {
    fn default() -> Self {
        ClosedFormGrid {
            sigmas: vec![0.1, 0.2, 0.3],
            etas: vec![0.1, 0.2, 0.3],
            rhos: vec![-0.9, 0.0, 0.9],
            horizons: vec![1.0, 5.0, 10.0],
            setup: PeriodSetup::default(),
        }
    }
}

impl ClosedFormGrid {
    fn validate(&self) -> Result<()> {
        if [&self.sigmas, &self.etas, &self.rhos, &self.horizons].iter().any(|v| v.is_empty()) {
            return Err(Error::Domain("empty parameter grid".into()));
        }
        if self.sigmas.iter().chain(&self.etas).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("vols must be finite and non-negative".into()));
        }
        if self.rhos.iter().any(|r| !(r.abs() <= 1.0)) {
            return Err(Error::Domain("correlations must lie in [-1, 1]".into()));
        }
        if self.horizons.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::Ordering("horizons must be non-negative".into()));
        }
        if self.horizons.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Ordering("horizons must be sorted".into()));
        }
        if !(1.0 + self.setup.tau * self.setup.e > 0.0) {
            return Err(Error::Singularity("1 + tau*E <= 0 at time zero".into()));
        }
        Ok(())
    }

    fn points(&self) -> usize {
        self.sigmas.len() * self.etas.len() * self.rhos.len() * self.horizons.len()
    }
}

/// Step counts for each horizon on a grid of `step * coarsen`.
fn horizon_steps(horizons: &[f64], step: f64, coarsen: usize) -> Result<Vec<usize>> {
    let coarse = step * coarsen as f64;
    horizons
        .iter()
        .map(|h| {
            let n = (h / coarse).round();
            if (n * coarse - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::Domain(format!("horizon {h} is not a multiple of the step {coarse}")));
            }
            Ok(n as usize * coarsen)
        })
        .collect()
}

struct GridScratch {
    dw: Vec<f64>,
    zperp: Vec<f64>,
    /// Per eta and horizon: (drift integral, W^F, Y).
    state: Vec<(f64, f64, f64)>,
}

/// Simulates the exact non-frozen dynamics on the whole grid at once and
/// returns moments laid out as `[point][target]`, points ordered by
/// sigma, eta, rho, horizon. The FX rate starts at one.
///
/// The shifted rate `Y = E + delta + beta` is driftless lognormal under the
/// native measure and is sampled exactly on the step grid. The FX drift
/// integral `int tau Y / (1 + tau E) ds` is integrated with the trapezoid rule
/// on every `coarsen`-th point, and the FX Brownian motion is split into its
/// component along the rate driver plus an independent terminal draw.
fn simulate_grid(grid: &ClosedFormGrid, cfg: &SimulationConfig, coarsen: usize) -> Result<(Vec<Moments>, usize)> {
    cfg.validate()?;
    grid.validate()?;
    let steps = horizon_steps(&grid.horizons, cfg.step, coarsen)?;
    let nmax = steps.iter().copied().max().unwrap_or(0);
    let dt = cfg.step;
    let sqdt = dt.sqrt();
    let setup = grid.setup;
    let (y0, shift) = (setup.y0(), setup.delta + setup.beta());
    let tau = setup.tau;
    let nh = grid.horizons.len();
    let ne = grid.etas.len();
    let width = grid.points() * 4;
    let signs = cfg.signs();
    let weight = 1.0 / signs.len() as f64;

    let drift = |y: f64| -> Option<f64> {
        let d = 1.0 + tau * (y - shift);
        (d > 0.0).then(|| tau * y / d)
    };

    let (moments, rejected) = run(
        cfg.samples(),
        width,
        || GridScratch { dw: vec![0.0; nmax], zperp: vec![0.0; nh], state: vec![(0.0, 0.0, 0.0); ne * nh] },
        |k, s, out| {
            let mut rng = cfg.rng(TAG_GRID, k);
            for x in s.dw.iter_mut() {
                *x = sqdt * normal(&mut rng);
            }
            for z in s.zperp.iter_mut() {
                *z = normal(&mut rng);
            }
            for &sign in signs {
                for (ie, &eta) in grid.etas.iter().enumerate() {
                    let Some(mut a_prev) = drift(y0) else { return false };
                    let (mut w, mut integral) = (0.0, 0.0);
                    let mut t_prev = 0.0;
                    let mut j = 0;
                    for (ih, &n) in steps.iter().enumerate() {
                        while j < n {
                            w += sign * s.dw[j];
                            j += 1;
                            if j % coarsen == 0 {
                                let t = j as f64 * dt;
                                let y = y0 * (eta * w - 0.5 * eta * eta * t).exp();
                                let Some(a) = drift(y) else { return false };
                                integral += 0.5 * (a_prev + a) * (t - t_prev);
                                a_prev = a;
                                t_prev = t;
                            }
                        }
                        let t = n as f64 * dt;
                        let y = y0 * (eta * w - 0.5 * eta * eta * t).exp();
                        s.state[ie * nh + ih] = (integral, w, y);
                    }
                }
                let mut p = 0;
                for &sigma in &grid.sigmas {
                    for (ie, &eta) in grid.etas.iter().enumerate() {
                        for &rho in &grid.rhos {
                            let orth = (1.0 - rho * rho).max(0.0).sqrt();
                            for (ih, &h) in grid.horizons.iter().enumerate() {
                                let (integral, wf, y) = s.state[ie * nh + ih];
                                let wx = rho * wf + orth * h.sqrt() * sign * s.zperp[ih];
                                let half_var = 0.5 * sigma * sigma * h;
                                let k = sigma * eta * rho * integral;
                                let dom = (sigma * wx - half_var - k).exp();
                                let inv = (-sigma * wx - half_var + k).exp();
                                let libor = y - setup.delta;
                                let o = &mut out[4 * p..4 * p + 4];
                                o[0] += weight * dom;
                                o[1] += weight * dom * libor;
                                o[2] += weight * inv;
                                o[3] += weight * inv * libor;
                                p += 1;
                            }
                        }
                    }
                }
            }
            true
        },
    );
    check_rejections(rejected, cfg.samples())?;
    Ok((moments, rejected))
}

/// One row of the oracle report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZRow {
    pub sigma: f64,
    pub eta: f64,
    pub rho: f64,
    pub horizon: f64,
    pub target: Target,
    pub closed_form: f64,
    pub mc: Estimate,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ZRow>,
    pub paths: usize,
    pub rejected: usize,
}

impl ValidationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,eta,rho,T,target,closed_form,mc_mean,mc_se,z\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.sigma,
                r.eta,
                r.rho,
                r.horizon,
                r.target.as_str(),
                r.closed_form,
                r.mc.mean,
                r.mc.se,
                r.z
            ));
        }
        s
    }
}

fn closed_forms(setup: &PeriodSetup, point: &ModelPoint, horizon: f64) -> Result<[f64; 4]> {
    let state = PeriodState { x: 1.0, e: setup.e, f: setup.f, tau: setup.tau, horizon };
    let (d, dl) = adjust_domestic(&state, point)?;
    let (f, fl) = adjust_foreign(&state, point)?;
    Ok([d, dl, f, fl])
}

fn report(grid: &ClosedFormGrid, cfg: &SimulationConfig, coarsen: usize) -> Result<ValidationReport> {
    let (moments, rejected) = simulate_grid(grid, cfg, coarsen)?;
    let mut rows = Vec::with_capacity(moments.len());
    let mut p = 0;
    for &sigma in &grid.sigmas {
        for &eta in &grid.etas {
            for &rho in &grid.rhos {
                for &horizon in &grid.horizons {
                    let point = ModelPoint { sigma, eta, rho, delta: grid.setup.delta, beta: grid.setup.beta };
                    let cf = closed_forms(&grid.setup, &point, horizon)?;
                    for (i, target) in Target::ALL.into_iter().enumerate() {
                        let mc = moments[4 * p + i].estimate();
                        rows.push(ZRow { sigma, eta, rho, horizon, target, closed_form: cf[i], mc, z: mc.z(cf[i]) });
                    }
                    p += 1;
                }
            }
        }
    }
    Ok(ValidationReport { rows, paths: cfg.paths, rejected })
}

/// Frozen-drift closed forms against the exact dynamics over a parameter grid.
pub fn validate_closed_forms(grid: &ClosedFormGrid, cfg: &SimulationConfig) -> Result<ValidationReport> {
    report(grid, cfg, 1)
}

/// Largest change in z-score when the drift integral uses twice the step,
/// on the same Brownian paths.
pub fn step_sensitivity(grid: &ClosedFormGrid, cfg: &SimulationConfig) -> Result<f64> {
    let fine = report(grid, cfg, 1)?;
    let coarse = report(grid, cfg, 2)?;
    Ok(fine.rows.iter().zip(&coarse.rows).map(|(a, b)| (a.z - b.z).abs()).fold(0.0, f64::max))
}

/// MC estimates of the two expectations entering a marked-to-market period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MtmEstimates {
    /// `E[X]` (domestic) or `E[1/X]` (foreign).
    pub delayed: Estimate,
    /// `E[X L]` (domestic) or `E[L^f / X]` (foreign).
    pub fx_libor: Estimate,
    pub rejected: usize,
}

fn scale(e: Estimate, c: f64) -> Estimate {
    Estimate { mean: e.mean * c, se: e.se * c.abs() }
}

/// Exact-dynamics estimates for period `i` of a marked-to-market leg whose
/// curve-implied state is `state`. Zero vols return the curve values exactly.
pub fn simulate_mtm_expectations(
    params: &MarketModelParams,
    i: usize,
    state: &PeriodState,
    side: MtmSide,
    cfg: &SimulationConfig,
) -> Result<MtmEstimates> {
    params.validate()?;
    let pp = params.at(i)?;
    let (eta, rho, delta, beta) = match side {
        MtmSide::Domestic => (pp.eta, pp.rho, pp.delta, pp.beta),
        MtmSide::Foreign => (pp.eta_f, pp.rho_f, pp.delta_f, pp.beta_f),
    };
    let grid = ClosedFormGrid {
        sigmas: vec![pp.sigma],
        etas: vec![eta],
        rhos: vec![rho],
        horizons: vec![state.horizon],
        setup: PeriodSetup { e: state.e, f: state.f, tau: state.tau, delta, beta },
    };
    let (m, rejected) = simulate_grid(&grid, cfg, 1)?;
    let (a, b, c) = match side {
        MtmSide::Domestic => (0, 1, state.x),
        MtmSide::Foreign => (2, 3, 1.0 / state.x),
    };
    Ok(MtmEstimates { delayed: scale(m[a].estimate(), c), fx_libor: scale(m[b].estimate(), c), rejected })
}

/// Estimates obtained under the FX rate's own measure and carried to the
/// payment measure by Radon-Nikodym weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RnEstimates {
    /// Sample mean of the weights; one in exact arithmetic.
    pub weight: Estimate,
    pub delayed: Estimate,
    pub fx_libor: Estimate,
    pub rejected: usize,
}

/// Same targets as [`simulate_mtm_expectations`], simulated under the
/// measure in which the FX forward is driftless. The rate then picks up a
/// drift, integrated with log-Euler steps, and every path is weighted by the
/// density of the payment measure.
pub fn simulate_mtm_rn_weighted(
    state: &PeriodState,
    point: &ModelPoint,
    side: MtmSide,
    cfg: &SimulationConfig,
) -> Result<RnEstimates> {
    cfg.validate()?;
    let n = horizon_steps(&[state.horizon], cfg.step, 1)?[0];
    let (sigma, eta, rho) = (point.sigma, point.eta, point.rho);
    let beta = point.beta.unwrap_or(state.f - state.e);
    let shift = point.delta + beta;
    let tau = state.tau;
    let y0 = state.e + shift;
    let d0 = 1.0 + tau * state.e;
    if !(d0 > 0.0) {
        return Err(Error::Singularity(format!("1 + tau*E = {d0} at time zero")));
    }
    let dt = cfg.step;
    let sqdt = dt.sqrt();
    let h = state.horizon;
    let orth = (1.0 - rho * rho).max(0.0).sqrt();
    let signs = cfg.signs();
    let weight = 1.0 / signs.len() as f64;

    let (m, rejected) = run(
        cfg.samples(),
        3,
        || vec![0.0; n],
        |k, dw, out| {
            let mut rng = cfg.rng(TAG_RN, k);
            for x in dw.iter_mut() {
                *x = sqdt * normal(&mut rng);
            }
            let zperp = normal(&mut rng);
            for &sign in signs {
                let (mut logy, mut w) = (y0.ln(), 0.0);
                for x in dw.iter() {
                    let y = logy.exp();
                    let d = 1.0 + tau * (y - shift);
                    if !(d > 0.0) {
                        return false;
                    }
                    let a = tau * y / d;
                    let mu = match side {
                        MtmSide::Domestic => a * eta * eta,
                        MtmSide::Foreign => -(sigma * rho - a * eta) * eta,
                    };
                    logy += eta * sign * x + (mu - 0.5 * eta * eta) * dt;
                    w += sign * x;
                }
                let y = logy.exp();
                let dh = 1.0 + tau * (y - shift);
                if !(dh > 0.0) {
                    return false;
                }
                let wx = rho * w + orth * h.sqrt() * sign * zperp;
                let x = (sigma * wx - 0.5 * sigma * sigma * h).exp();
                let libor = y - point.delta;
                let (z, delayed) = match side {
                    MtmSide::Domestic => (d0 / dh, x),
                    MtmSide::Foreign => (x * d0 / dh, 1.0 / x),
                };
                out[0] += weight * z;
                out[1] += weight * z * delayed;
                out[2] += weight * z * delayed * libor;
            }
            true
        },
    );
    check_rejections(rejected, cfg.samples())?;
    let c = match side {
        MtmSide::Domestic => state.x,
        MtmSide::Foreign => 1.0 / state.x,
    };
    Ok(RnEstimates {
        weight: m[0].estimate(),
        delayed: scale(m[1].estimate(), c),
        fx_libor: scale(m[2].estimate(), c),
        rejected,
    })
}

/// Joint lognormal model for the spot FX rate and the discount factor of the
/// spread between two collateral rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaModel {
    /// Spot FX rate at time zero.
    pub spot: f64,
    /// FX volatility.
    pub sigma: f64,
    /// Deterministic part of the spread (continuous rate).
    pub spread: f64,
    /// Volatility of the spread discount factor.
    pub nu: f64,
    /// Correlation between FX and spread discount factor.
    pub rho: f64,
}

impl GammaModel {
    fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !(self.sigma >= 0.0) || !(self.nu >= 0.0) || !(self.rho.abs() <= 1.0) {
            return Err(Error::Domain(format!("invalid gamma model {self:?}")));
        }
        Ok(())
    }

    /// `exp(rho sigma nu T) - 1`, the model's exact value.
    pub fn closed_form(&self, t: f64) -> f64 {
        (self.rho * self.sigma * self.nu * t).exp_m1()
    }
}

const GAMMA_BATCHES: usize = 64;

/// Covariance-ratio estimate `Cov(chi_T, D_T) / (E[chi_T] E[D_T])` with a
/// batch-means standard error. Positive when FX and the spread discount
/// factor move together.
pub fn estimate_gamma(model: &GammaModel, t: f64, cfg: &SimulationConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    model.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Ordering(format!("negative horizon {t}")));
    }
    if model.sigma == 0.0 || model.nu == 0.0 || t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let samples = cfg.samples();
    if samples < GAMMA_BATCHES * 2 {
        return Err(Error::Domain(format!("need at least {} paths", GAMMA_BATCHES * 4)));
    }
    let st = t.sqrt();
    let orth = (1.0 - model.rho * model.rho).max(0.0).sqrt();
    let d0 = (-model.spread * t).exp();
    let signs = cfg.signs();
    let weight = 1.0 / signs.len() as f64;
    let per_batch = samples / GAMMA_BATCHES;
    let batch = |b: usize| -> [f64; 3] {
        let mut acc = [Moments::default(); 3];
        for k in b * per_batch..(b + 1) * per_batch {
            let mut rng = cfg.rng(TAG_GAMMA, k as u64);
            let (z1, z2) = (normal(&mut rng), normal(&mut rng));
            let mut v = [0.0; 3];
            for &s in signs {
                let chi = model.spot * (model.sigma * st * s * z1 - 0.5 * model.sigma * model.sigma * t).exp();
                let d = d0 * (model.nu * st * s * (model.rho * z1 + orth * z2) - 0.5 * model.nu * model.nu * t).exp();
                v[0] += weight * chi;
                v[1] += weight * d;
                v[2] += weight * chi * d;
            }
            for (m, x) in acc.iter_mut().zip(v) {
                m.push(x);
            }
        }
        [acc[0].mean, acc[1].mean, acc[2].mean]
    };
    let means: Vec<[f64; 3]> = (0..GAMMA_BATCHES).into_par_iter().map(batch).collect();
    let ratio = |m: &[f64; 3]| (m[2] - m[0] * m[1]) / (m[0] * m[1]);
    let total = means.iter().fold([0.0; 3], |a, m| [a[0] + m[0], a[1] + m[1], a[2] + m[2]]);
    let b = GAMMA_BATCHES as f64;
    let gamma = ratio(&[total[0] / b, total[1] / b, total[2] / b]);
    let mut spread = Moments::default();
    for m in &means {
        spread.push(ratio(m));
    }
    Ok((gamma, spread.estimate().se))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(paths: usize) -> SimulationConfig {
        SimulationConfig { paths, ..SimulationConfig::default() }
    }

    #[test]
    fn config_invariants() {
        assert!(cfg(1).validate().is_err());
        assert!(SimulationConfig { step: 0.0, ..cfg(10) }.validate().is_err());
    }

    #[test]
    fn welford_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|x| a.push(*x));
        xs[313..].iter().for_each(|x| b.push(*x));
        let m = Moments::merge(a, b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-8 * all.m2);
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((m.estimate().se - (var / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_vols_are_exact() {
        let grid = ClosedFormGrid {
            sigmas: vec![0.0],
            etas: vec![0.0],
            rhos: vec![0.5],
            horizons: vec![3.0],
            ..Default::default()
        };
        let rep = validate_closed_forms(&grid, &cfg(2000)).unwrap();
        for r in &rep.rows {
            assert_eq!(r.mc.se, 0.0);
            assert_eq!(r.z, 0.0);
        }
        let p = MarketModelParams::uniform(0.0, 0.0, 0.3);
        let state = PeriodState { x: 1.3, e: 0.01, f: 0.015, tau: 0.25, horizon: 2.0 };
        let est = simulate_mtm_expectations(&p, 0, &state, MtmSide::Domestic, &cfg(1000)).unwrap();
        assert_eq!(est.delayed.se, 0.0);
        assert!((est.delayed.mean - 1.3).abs() < 1e-15);
        assert!((est.fx_libor.mean - 1.3 * 0.015).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_delayed_fx_is_forward() {
        let p = MarketModelParams::uniform(0.10, 0.20, 0.0);
        let state = PeriodState { x: 1.0, e: 0.02, f: 0.02, tau: 0.25, horizon: 5.0 };
        let est = simulate_mtm_expectations(&p, 0, &state, MtmSide::Domestic, &cfg(20_000)).unwrap();
        assert!(est.delayed.z(1.0).abs() < 3.0, "{:?}", est.delayed);
    }

    #[test]
    fn rn_weights_normalise_and_agree() {
        let c = SimulationConfig { paths: 40_000, step: 1.0 / 50.0, ..SimulationConfig::default() };
        let state = PeriodState { x: 1.0, e: 0.02, f: 0.025, tau: 0.25, horizon: 5.0 };
        let point = ModelPoint { sigma: 0.2, eta: 0.3, rho: 0.7, delta: 0.01, beta: None };
        for side in [MtmSide::Domestic, MtmSide::Foreign] {
            let rn = simulate_mtm_rn_weighted(&state, &point, side, &c).unwrap();
            assert!(rn.weight.z(1.0).abs() < 3.0, "{side:?} {:?}", rn.weight);
            let params = MarketModelParams {
                delta: vec![0.01],
                delta_f: vec![0.01],
                ..MarketModelParams::uniform(0.2, 0.3, 0.7)
            };
            let native = simulate_mtm_expectations(&params, 0, &state, side, &c).unwrap();
            let gap = rn.delayed.mean - native.delayed.mean;
            let se = (rn.delayed.se.powi(2) + native.delayed.se.powi(2)).sqrt();
            assert!(gap.abs() < 4.0 * se, "{side:?} {gap} vs {se}");
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let grid = ClosedFormGrid { horizons: vec![1.0, 2.0], ..Default::default() };
        let c = cfg(3000);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| validate_closed_forms(&grid, &c)).unwrap().to_csv();
        let b = four.install(|| validate_closed_forms(&grid, &c)).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_must_sit_on_grid() {
        let grid = ClosedFormGrid { horizons: vec![1.01], ..Default::default() };
        assert!(matches!(validate_closed_forms(&grid, &cfg(10)), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_deterministic_spread_is_zero() {
        let m = GammaModel { spot: 1.3, sigma: 0.1, spread: 0.002, nu: 0.0, rho: 0.5 };
        assert_eq!(estimate_gamma(&m, 5.0, &cfg(1000)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn gamma_independent_is_zero() {
        let m = GammaModel { spot: 1.3, sigma: 0.15, spread: 0.002, nu: 0.05, rho: 0.0 };
        let (g, se) = estimate_gamma(&m, 5.0, &cfg(100_000)).unwrap();
        assert!(g.abs() < 3.0 * se, "{g} {se}");
    }

    #[test]
    fn gamma_follows_covariance_sign() {
        for rho in [0.6, -0.6] {
            let m = GammaModel { spot: 1.3, sigma: 0.15, spread: 0.002, nu: 0.05, rho };
            let (g, se) = estimate_gamma(&m, 5.0, &cfg(100_000)).unwrap();
            assert_eq!(g.signum(), rho.signum());
            assert!((g - m.closed_form(5.0)).abs() < 3.0 * se, "{g} {se} {}", m.closed_form(5.0));
        }
    }
}
