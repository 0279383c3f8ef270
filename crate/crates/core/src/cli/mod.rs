//! Command-line front end.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`. The
//! manifest digest covers the command, the resolved settings and the bytes of
//! every input file, so two runs with the same digest produce the same bytes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{
    apply_spot_quotes, calibrate_system, compare_triplet, triplet_report_csv, triplet_scheme_a, triplet_scheme_b,
    BootstrapConfig, CcsLayout, TripletScheme, TRIPLET_MONTHS,
};
use crate::collateral::FxSystem;
use crate::convexity::MarketModelParams;
use crate::currency::Currency;
use crate::error::Error;
use crate::instruments::{npv, par_spread, CcsInstrument, PricingMode};
use crate::mc::{validate_closed_forms, ClosedFormGrid, SimulationConfig};
use crate::timegrid::{parse_quotes, DateStamp, Tenor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CALIBRATION: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_BREACH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "xccy", version, about = "Collateral-aware cross-currency curves and swaps")]
pub struct Cli {
    /// Worker threads for the Monte Carlo oracle (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Valuation date; must match the curve file when given.
    #[arg(long)]
    pub asof: Option<DateStamp>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Effective,
    Adjusted,
}

impl From<ModeArg> for PricingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Effective => PricingMode::Effective,
            ModeArg::Adjusted => PricingMode::Adjusted,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate implied basis curves and write them with a round-trip report.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        quotes: PathBuf,
        /// Market file: spots, OIS and forwarding curves.
        #[arg(long)]
        curves: PathBuf,
        /// Bootstrap settings (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Collateral currency; defaults to the base of the market file.
        #[arg(long)]
        collateral: Option<Currency>,
    },
    /// NPV and par spread of one CCS.
    Price {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pricing: PricingArgs,
    },
    /// Marked-to-market and constant-notional par spreads over a maturity grid.
    ParSpread {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pricing: PricingArgs,
        /// Comma-separated maturities; defaults to the instrument maturity.
        #[arg(long, value_delimiter = ',')]
        maturities: Vec<Tenor>,
    },
    /// Compare the two triangulation schemes on implied cross par spreads.
    TripletCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        quotes: PathBuf,
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scheme whose minor-currency curve is written out.
        #[arg(long, default_value = "a", value_parser = parse_scheme)]
        scheme: TripletScheme,
        #[arg(long, default_value = "EUR")]
        domestic: Currency,
        #[arg(long, default_value = "USD")]
        pivot: Currency,
        #[arg(long, default_value = "HKD")]
        minor: Currency,
    },
    /// Monte Carlo z-scores of the convexity closed forms.
    ConvexityCheck {
        #[command(flatten)]
        common: Common,
        /// Parameter grid (JSON); defaults to the standard 81-point grid.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        /// Simulation step in years.
        #[arg(long, default_value_t = 1.0 / 12.0)]
        step: f64,
        /// Largest acceptable |z|.
        #[arg(long, default_value_t = 3.0)]
        z_limit: f64,
    },
}

#[derive(Debug, Args)]
pub struct PricingArgs {
    /// Calibrated curve file written by `bootstrap`.
    #[arg(long)]
    pub curves: PathBuf,
    /// Instrument description (JSON).
    #[arg(long)]
    pub instrument: PathBuf,
    #[arg(long, value_enum, default_value = "effective")]
    pub mode: ModeArg,
    /// Market-model parameters (JSON), required in adjusted mode.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<TripletScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Standard quarterly CCS: the `mtm_currency` leg pays flat Libor, the
/// `spread_currency` leg pays Libor plus `spread` on `notional`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub maturity: Tenor,
    pub mtm_currency: Currency,
    pub spread_currency: Currency,
    #[serde(default)]
    pub spread: f64,
    #[serde(default = "yes")]
    pub marked_to_market: bool,
    #[serde(default)]
    pub collateral: Option<Currency>,
    #[serde(default = "quarterly")]
    pub frequency_months: u32,
    #[serde(default = "unit")]
    pub notional: f64,
}

fn yes() -> bool {
    true
}
fn quarterly() -> u32 {
    3
}
fn unit() -> f64 {
    1.0
}

impl InstrumentSpec {
    pub fn build(&self, fx: &FxSystem, maturity: Tenor, marked_to_market: bool) -> crate::Result<CcsInstrument> {
        let layout = CcsLayout { mtm: self.mtm_currency, spread: self.spread_currency, marked_to_market };
        let collateral = self.collateral.unwrap_or(fx.base());
        let mut ccs = layout.instrument(fx.asof(), maturity, self.spread, collateral, self.frequency_months)?;
        ccs.receive.notional = self.notional;
        Ok(ccs)
    }
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub asof: DateStamp,
    pub inputs: Vec<InputFile>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub settings: serde_json::Value,
    /// SHA-256 over every other field except `out`, with inputs by content.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl RunManifest {
    fn new(
        command: &str,
        asof: DateStamp,
        inputs: &[&Loaded],
        out: &Path,
        seed: Option<u64>,
        settings: serde_json::Value,
    ) -> Self {
        let mut m = RunManifest {
            command: command.into(),
            asof,
            inputs: inputs.iter().map(|l| InputFile { path: l.path.clone(), sha256: l.sha256.clone() }).collect(),
            out: out.to_path_buf(),
            seed,
            settings,
            digest: String::new(),
        };
        // the output directory is recorded but is not an input
        let body = serde_json::to_vec(&(&m.command, m.asof, &m.inputs, m.seed, &m.settings))
            .expect("manifest serialisation cannot fail");
        m.digest = hex::encode(Sha256::digest(&body));
        m
    }
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) | Error::Singularity(_) => EXIT_CALIBRATION,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome = std::result::Result<i32, Failure>;

struct Loaded {
    path: PathBuf,
    text: String,
    sha256: String,
}

fn load(path: &Path) -> std::result::Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(Loaded { path: path.to_path_buf(), text, sha256 })
}

fn with_path<T>(l: &Loaded, r: crate::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", l.path.display(), f.message);
        f
    })
}

fn load_market(path: &Path, asof: Option<DateStamp>) -> std::result::Result<(Loaded, FxSystem), Failure> {
    let l = load(path)?;
    let fx = with_path(&l, FxSystem::from_json(&l.text))?;
    if let Some(d) = asof {
        if d != fx.asof() {
            return Err(Failure::input(format!("--asof {d} does not match {} dated {}", path.display(), fx.asof())));
        }
    }
    Ok((l, fx))
}

fn load_config(path: Option<&Path>) -> std::result::Result<(Option<Loaded>, BootstrapConfig), Failure> {
    match path {
        None => Ok((None, BootstrapConfig::default())),
        Some(p) => {
            let l = load(p)?;
            let cfg: BootstrapConfig = with_path(&l, serde_json::from_str(&l.text).map_err(Error::from))?;
            with_path(&l, cfg.validate())?;
            Ok((Some(l), cfg))
        }
    }
}

fn write(out: &Path, name: &str, contents: &str) -> std::result::Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_manifest(out: &Path, m: &RunManifest) -> std::result::Result<(), Failure> {
    write(out, "manifest.json", &(serde_json::to_string_pretty(m).expect("manifest serialisation cannot fail") + "\n"))
}

fn settings<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("settings serialisation cannot fail")
}

fn cmd_bootstrap(
    common: &Common,
    quotes: &Path,
    curves: &Path,
    config: Option<&Path>,
    collateral: Option<Currency>,
) -> Outcome {
    let (market_file, mut market) = load_market(curves, common.asof)?;
    let quote_file = load(quotes)?;
    let q = with_path(&quote_file, parse_quotes(&quote_file.text))?;
    let (config_file, cfg) = load_config(config)?;
    if let Some(c) = collateral {
        apply_spot_quotes(&mut market, &q)?;
        market = market.with_base(c)?;
    }
    let cal = calibrate_system(&market, &q, &cfg)?;

    let mut inputs = vec![&market_file, &quote_file];
    inputs.extend(config_file.as_ref());
    let manifest = RunManifest::new(
        "bootstrap",
        market.asof(),
        &inputs,
        &common.out,
        None,
        serde_json::json!({ "config": settings(&cfg), "collateral": market.base() }),
    );
    write(&common.out, "curves.json", &(cal.fx.to_json() + "\n"))?;
    write(&common.out, "roundtrip.csv", &cal.report_csv())?;
    write_manifest(&common.out, &manifest)?;

    let worst = cal.max_abs_npv();
    println!("calibrated {} curve(s), {} instruments, max |NPV| {worst:.3e}", cal.pairs.len(), cal.rows().count());
    if !(worst < cfg.tolerance) {
        eprintln!("round-trip failure: max |NPV| {worst:e} exceeds tolerance {:e}", cfg.tolerance);
        return Ok(EXIT_CALIBRATION);
    }
    Ok(EXIT_OK)
}

struct PricingInputs {
    files: Vec<Loaded>,
    fx: FxSystem,
    spec: InstrumentSpec,
    mode: PricingMode,
    params: Option<MarketModelParams>,
}

fn load_pricing(common: &Common, p: &PricingArgs) -> std::result::Result<PricingInputs, Failure> {
    let (market_file, fx) = load_market(&p.curves, common.asof)?;
    let inst_file = load(&p.instrument)?;
    let spec: InstrumentSpec = with_path(&inst_file, serde_json::from_str(&inst_file.text).map_err(Error::from))?;
    let mut files = vec![market_file, inst_file];
    let params = match &p.params {
        Some(path) => {
            let l = load(path)?;
            let params = with_path(&l, MarketModelParams::from_json(&l.text))?;
            files.push(l);
            Some(params)
        }
        None => None,
    };
    let mode = PricingMode::from(p.mode);
    if mode == PricingMode::Adjusted && params.is_none() {
        return Err(Failure::input("adjusted mode needs --params"));
    }
    Ok(PricingInputs { files, fx, spec, mode, params })
}

fn cmd_price(common: &Common, p: &PricingArgs) -> Outcome {
    let inp = load_pricing(common, p)?;
    let ccs = inp.spec.build(&inp.fx, inp.spec.maturity, inp.spec.marked_to_market)?;
    let mut csv = String::from("mode,npv,par_spread,diff_bp\n");
    let value = npv(&ccs, &inp.fx, PricingMode::Effective, None)?;
    let eff = par_spread(&ccs, &inp.fx, PricingMode::Effective, None)?;
    println!("effective: NPV {value:.10e}  par spread {:.6}bp", eff * 1e4);
    csv.push_str(&format!("effective,{value:e},{eff:e},0\n"));
    if inp.mode == PricingMode::Adjusted {
        let params = inp.params.as_ref();
        let value = npv(&ccs, &inp.fx, PricingMode::Adjusted, params)?;
        let adj = par_spread(&ccs, &inp.fx, PricingMode::Adjusted, params)?;
        let diff = (adj - eff) * 1e4;
        println!("adjusted:  NPV {value:.10e}  par spread {:.6}bp  (adjusted - effective {diff:.6}bp)", adj * 1e4);
        csv.push_str(&format!("adjusted,{value:e},{adj:e},{diff:e}\n"));
    }
    let files: Vec<&Loaded> = inp.files.iter().collect();
    let manifest =
        RunManifest::new("price", inp.fx.asof(), &files, &common.out, None, serde_json::json!({ "mode": inp.mode }));
    write(&common.out, "price.csv", &csv)?;
    write_manifest(&common.out, &manifest)?;
    Ok(EXIT_OK)
}

fn cmd_par_spread(common: &Common, p: &PricingArgs, maturities: &[Tenor]) -> Outcome {
    let inp = load_pricing(common, p)?;
    let grid = if maturities.is_empty() { vec![inp.spec.maturity] } else { maturities.to_vec() };
    let params = inp.params.as_ref();
    let mut csv = String::from("maturity,mtm,cn,diff_bp\n");
    for m in &grid {
        let mtm = par_spread(&inp.spec.build(&inp.fx, *m, true)?, &inp.fx, inp.mode, params)?;
        let cn = par_spread(&inp.spec.build(&inp.fx, *m, false)?, &inp.fx, inp.mode, params)?;
        println!("{m:>5}  mtm {:.6}bp  cn {:.6}bp  diff {:.6}bp", mtm * 1e4, cn * 1e4, (mtm - cn) * 1e4);
        csv.push_str(&format!("{m},{mtm:e},{cn:e},{:e}\n", (mtm - cn) * 1e4));
    }
    let files: Vec<&Loaded> = inp.files.iter().collect();
    let grid_text: Vec<String> = grid.iter().map(Tenor::to_string).collect();
    let manifest = RunManifest::new(
        "par-spread",
        inp.fx.asof(),
        &files,
        &common.out,
        None,
        serde_json::json!({ "mode": inp.mode, "maturities": grid_text }),
    );
    write(&common.out, "par_spreads.csv", &csv)?;
    write_manifest(&common.out, &manifest)?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_triplet_check(
    common: &Common,
    quotes: &Path,
    curves: &Path,
    config: Option<&Path>,
    scheme: TripletScheme,
    domestic: Currency,
    pivot: Currency,
    minor: Currency,
) -> Outcome {
    let (market_file, market) = load_market(curves, common.asof)?;
    let quote_file = load(quotes)?;
    let q = with_path(&quote_file, parse_quotes(&quote_file.text))?;
    let (config_file, cfg) = load_config(config)?;
    let a = triplet_scheme_a(&market, &q, &cfg, domestic, pivot, minor)?;
    let b = triplet_scheme_b(&market, &q, &cfg, domestic, pivot, minor)?;
    let rows = compare_triplet(&a, &b, domestic, minor, &TRIPLET_MONTHS, &cfg)?;
    for r in &rows {
        println!(
            "{:>4}m  (a) {:.4}%  (b) {:.4}%  diff {:+.4}bp",
            r.months,
            r.spread_a * 100.0,
            r.spread_b * 100.0,
            r.diff_bp
        );
    }
    let chosen = match scheme {
        TripletScheme::A => &a,
        TripletScheme::B => &b,
    };
    let mut inputs = vec![&market_file, &quote_file];
    inputs.extend(config_file.as_ref());
    let manifest = RunManifest::new(
        "triplet-check",
        market.asof(),
        &inputs,
        &common.out,
        None,
        serde_json::json!({
            "config": settings(&cfg),
            "scheme": scheme,
            "domestic": domestic,
            "pivot": pivot,
            "minor": minor,
        }),
    );
    write(&common.out, "triplet.csv", &triplet_report_csv(&rows))?;
    write(&common.out, "curves.json", &(chosen.to_json() + "\n"))?;
    write_manifest(&common.out, &manifest)?;
    Ok(EXIT_OK)
}

fn cmd_convexity_check(common: &Common, params: Option<&Path>, sim: SimulationConfig, z_limit: f64) -> Outcome {
    let (grid_file, grid) = match params {
        Some(p) => {
            let l = load(p)?;
            let g: ClosedFormGrid = with_path(&l, serde_json::from_str(&l.text).map_err(Error::from))?;
            (Some(l), g)
        }
        None => (None, ClosedFormGrid::default()),
    };
    let report = validate_closed_forms(&grid, &sim)?;
    let worst = report.max_abs_z();
    let inputs: Vec<&Loaded> = grid_file.iter().collect();
    let asof = common.asof.unwrap_or(DateStamp::from_ymd(1970, 1, 1)?);
    let manifest = RunManifest::new(
        "convexity-check",
        asof,
        &inputs,
        &common.out,
        Some(sim.seed),
        serde_json::json!({ "grid": settings(&grid), "simulation": settings(&sim), "z_limit": z_limit }),
    );
    write(&common.out, "zscores.csv", &report.to_csv())?;
    write_manifest(&common.out, &manifest)?;
    println!("{} comparisons, {} paths, max |z| {worst:.3}", report.rows.len(), report.paths);
    if !(worst <= z_limit) {
        eprintln!("z-score breach: max |z| {worst:.3} exceeds {z_limit}");
        return Ok(EXIT_BREACH);
    }
    Ok(EXIT_OK)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Bootstrap { common, quotes, curves, config, collateral } => {
            cmd_bootstrap(common, quotes, curves, config.as_deref(), *collateral)
        }
        Command::Price { common, pricing } => cmd_price(common, pricing),
        Command::ParSpread { common, pricing, maturities } => cmd_par_spread(common, pricing, maturities),
        Command::TripletCheck { common, quotes, curves, config, scheme, domestic, pivot, minor } => {
            cmd_triplet_check(common, quotes, curves, config.as_deref(), *scheme, *domestic, *pivot, *minor)
        }
        Command::ConvexityCheck { common, params, seed, paths, step, z_limit } => {
            let sim = SimulationConfig { paths: *paths, step: *step, seed: *seed, ..SimulationConfig::default() };
            cmd_convexity_check(common, params.as_deref(), sim, *z_limit)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::input(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
