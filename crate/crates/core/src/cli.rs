//! Command-line front end. Each subcommand loads its inputs, calls one
//! library operation and writes the result; no numerics live here.
//!
//! Exit status is 0 on success, 1 when the problem itself is invalid
//! (domain, rank, instability, weak instrument) and 2 when a file, format
//! or configuration is at fault. Failures print one line on stderr,
//! prefixed by the subcommand.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::bounds::{bound_vs_n, theorem_bound, write_bound_series_csv, BoundInputs};
use crate::control::{simulate_closed_loop, t_infinity, ClosedLoop, Controller, NoiseSpec, Trajectory};
use crate::error::{Error, Result};
use crate::estimation::{
    batch_iv, batch_ls, build_matrices, instrument_diagnostics, run_recursive, write_estimate_csv, Mode,
    RegressorConfig,
};
use crate::experiments::{
    apply_override, export_results, import_trajectory, parse_tree, resolve_plant, run_experiment, ControllerSpec,
    ExperimentConfig, ImportMode,
};
use crate::lti::LaurentBlock;
use crate::realization::{frequency_grid, frequency_response, reconstruct, HankelSpec, Order};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Debug, Parser)]
#[command(name = "ncfir", version = VERSION, about = "Closed-loop non-causal FIR identification")]
pub struct Cli {
    /// Seed for simulation, or base seed for experiments.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Trials per experiment cell.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Override a config key, e.g. `--set sigma_w=0.5` or `--set sweep.count=3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a closed loop and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Estimate the Laurent coefficients from a trajectory CSV.
    Identify(IdentifyArgs),
    /// Realize a coefficient estimate and write its frequency response.
    Realize(RealizeArgs),
    /// Evaluate the finite-sample error bound.
    Bound(BoundArgs),
    /// Run a Monte-Carlo experiment from a TOML or JSON config.
    Experiment(ExperimentArgs),
    /// Report instrument strength and loop gain for a trajectory.
    Diagnose(DiagnoseArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Identify(_) => "identify",
            Command::Realize(_) => "realize",
            Command::Bound(_) => "bound",
            Command::Experiment(_) => "experiment",
            Command::Diagnose(_) => "diagnose",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML or JSON document with the keys below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `example1`, `example4`, `stable_siso` or a model JSON path.
    #[arg(long)]
    pub plant: Option<String>,
    /// `lqr`, `zero` or a controller JSON path.
    #[arg(long)]
    pub controller: Option<String>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub sigma_c: Option<f64>,
    #[arg(long)]
    pub sigma_w: Option<f64>,
    #[arg(long)]
    pub sigma_v: Option<f64>,
    /// Also write the ground-truth channels `f, w, v, x`.
    #[arg(long)]
    pub truth: bool,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentifyMode {
    Ls,
    Iv,
    Rls,
    Riv,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    pub trajectory: PathBuf,
    #[arg(long, value_enum)]
    pub mode: IdentifyMode,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub d: usize,
    /// Forgetting factor of the recursive modes.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_f: f64,
    /// Initial covariance scale `P₀ = η⁻¹I` of the recursive modes.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Excitation level used for `λ_IV`; defaults to the RMS of `c`.
    #[arg(long)]
    pub sigma_c: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RealizeArgs {
    /// Coefficient CSV (`lag_index,out_row,in_col,value`).
    pub estimate: PathBuf,
    #[arg(long, default_value = "auto")]
    pub order_s: String,
    #[arg(long, default_value = "auto")]
    pub order_u: String,
    /// Block rows of both Hankel matrices.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Frequency points on `[0, π]`.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Bound inputs as JSON or TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Also evaluate at these sample sizes and write a CSV series.
    #[arg(long, value_delimiter = ',')]
    pub series: Vec<usize>,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub trajectory: PathBuf,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub sigma_c: Option<f64>,
    /// Plant and controller for the loop-gain report.
    #[arg(long, requires = "controller")]
    pub plant: Option<String>,
    #[arg(long, requires = "plant")]
    pub controller: Option<String>,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Configuration of `simulate`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub plant: String,
    #[serde(default)]
    pub controller: ControllerSpec,
    pub length: usize,
    #[serde(default = "one")]
    pub sigma_c: f64,
    #[serde(default)]
    pub sigma_w: f64,
    #[serde(default)]
    pub sigma_v: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Entry point of the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first) and dispatches.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let name = cli.command.name();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{name}: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

/// 2 for input errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        1
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Identify(a) => identify(a),
        Command::Realize(a) => realize(a),
        Command::Bound(a) => bound(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn load_tree(path: Option<&Path>) -> Result<toml::Value> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            parse_tree(&text, p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))
        }
        None => Ok(toml::Value::Table(toml::Table::new())),
    }
}

fn set(tree: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    tree.as_table_mut()
        .ok_or_else(|| Error::Config("config root must be a table".into()))?
        .insert(key.to_string(), value);
    Ok(())
}

fn controller_value(spec: &str) -> toml::Value {
    let mut t = toml::Table::new();
    match spec {
        "lqr" | "zero" => {
            t.insert("type".into(), toml::Value::String(spec.into()));
        }
        path => {
            t.insert("type".into(), toml::Value::String("file".into()));
            t.insert("path".into(), toml::Value::String(path.into()));
        }
    }
    toml::Value::Table(t)
}

fn controller_from_flag(spec: &str, model: &crate::lti::StateSpaceModel) -> Result<Controller> {
    let parsed: ControllerSpec =
        controller_value(spec).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    parsed.build(model)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let mut tree = load_tree(a.config.as_deref())?;
    let flags = [
        ("plant", a.plant.clone().map(toml::Value::String)),
        ("controller", a.controller.as_deref().map(controller_value)),
        ("length", a.length.map(|v| toml::Value::Integer(v as i64))),
        ("sigma_c", a.sigma_c.map(toml::Value::Float)),
        ("sigma_w", a.sigma_w.map(toml::Value::Float)),
        ("sigma_v", a.sigma_v.map(toml::Value::Float)),
        ("seed", cli.seed.map(|v| toml::Value::Integer(v as i64))),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            set(&mut tree, key, v)?;
        }
    }
    for ov in &cli.overrides {
        apply_override(&mut tree, ov)?;
    }
    let cfg: SimulateConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let model = resolve_plant(&cfg.plant)?;
    let ctrl = cfg.controller.build(&model)?;
    let noise = NoiseSpec::new(cfg.sigma_c, cfg.sigma_w, cfg.sigma_v, cfg.seed)?;
    let traj = simulate_closed_loop(&model, &ctrl, &noise, cfg.length)?;
    let mut w = create(&a.out)?;
    traj.write_csv(&mut w, a.truth)?;
    w.flush()?;
    log::info!("wrote {} samples to {}", traj.len(), a.out.display());
    Ok(())
}

fn rms(m: &nalgebra::DMatrix<f64>) -> f64 {
    (m.norm_squared() / m.len().max(1) as f64).sqrt()
}

fn identify(a: &IdentifyArgs) -> Result<()> {
    let needs_c = matches!(a.mode, IdentifyMode::Iv | IdentifyMode::Riv);
    let traj = import_trajectory(&a.trajectory, if needs_c { ImportMode::Iv } else { ImportMode::Ls })?;
    let cfg = RegressorConfig::fit(a.r, a.d, &traj)?;
    let sigma_c = a.sigma_c.or_else(|| traj.c.as_ref().map(rms));
    let mut diag = json!({
        "schema_version": crate::SCHEMA_VERSION,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "r": cfg.r,
        "d": cfg.d,
        "N": cfg.n,
    });
    let theta = match a.mode {
        IdentifyMode::Ls | IdentifyMode::Iv => {
            let dm = build_matrices(&traj, &cfg, false)?;
            if let (Some(s), true) = (sigma_c, dm.phi_c.is_some()) {
                let d = instrument_diagnostics(&dm, s)?;
                diag["s_iv"] = json!(d.s_iv);
                diag["lambda_iv"] = json!(d.lambda_iv);
                diag["sigma_c"] = json!(s);
            }
            if a.mode == IdentifyMode::Iv {
                batch_iv(&dm)?
            } else {
                batch_ls(&dm)?
            }
        }
        IdentifyMode::Rls | IdentifyMode::Riv => {
            let mode = if a.mode == IdentifyMode::Riv { Mode::Iv } else { Mode::Ls };
            let eta = match (a.eta, mode, a.sigma_c) {
                (Some(e), _, _) => Some(e),
                (None, Mode::Iv, Some(s)) => Some(crate::estimation::default_eta_iv(s)),
                _ => None,
            };
            let run = run_recursive(&traj, &cfg, mode, a.lambda_f, eta, &[])?;
            diag["lambda_f"] = json!(a.lambda_f);
            diag["eta"] = json!(run.eta);
            diag["updates"] = json!(run.firings.len());
            diag["skipped_updates"] = json!(run.skips.len());
            run.theta
        }
    };
    std::fs::create_dir_all(&a.out_dir)?;
    let mut w = create(&a.out_dir.join("estimate.csv"))?;
    write_estimate_csv(&mut w, &theta, &cfg)?;
    w.flush()?;
    emit(Some(&a.out_dir.join("diagnostics.json")), &serde_json::to_string_pretty(&diag)?)
}

fn realize(a: &RealizeArgs) -> Result<()> {
    let theta = LaurentBlock::read_csv(File::open(&a.estimate)?)?;
    let spec = |order: &str| -> Result<HankelSpec> {
        Ok(HankelSpec { rows: a.rows, cols: None, order: order.parse::<Order>()? })
    };
    let model = reconstruct(&theta, &spec(&a.order_s)?, &spec(&a.order_u)?)?;
    std::fs::create_dir_all(&a.out_dir)?;
    model.save(a.out_dir.join("model.json"))?;
    let fr = frequency_response(&model, &frequency_grid(a.points))?;
    let mut w = create(&a.out_dir.join("freq.csv"))?;
    fr.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn bound(cli: &Cli, a: &BoundArgs) -> Result<()> {
    let mut tree = load_tree(Some(&a.config))?;
    for ov in &cli.overrides {
        apply_override(&mut tree, ov)?;
    }
    let inputs: BoundInputs = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let report = theorem_bound(&inputs)?;
    emit(a.out.as_deref(), &report.to_json()?)?;
    if !a.series.is_empty() {
        let series = bound_vs_n(&inputs, &a.series)?;
        let path = match &a.out {
            Some(p) => p.with_extension("csv"),
            None => PathBuf::from("bound_series.csv"),
        };
        let mut w = create(&path)?;
        write_bound_series_csv(&mut w, &series)?;
        w.flush()?;
    }
    Ok(())
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let mut overrides = Vec::new();
    if let Some(s) = cli.seed {
        overrides.push(format!("base_seed={s}"));
    }
    if let Some(t) = cli.trials {
        overrides.push(format!("trials={t}"));
    }
    if let Some(dir) = &a.out_dir {
        overrides.push(format!("output_dir={:?}", dir.to_string_lossy()));
    }
    overrides.extend(cli.overrides.iter().cloned());
    let cfg = ExperimentConfig::load(&a.config, &overrides)?;
    let table = run_experiment(&cfg)?;
    let written = export_results(&table, &cfg.output_dir)?;
    log::info!("wrote {} files under {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let (traj, feedback): (Trajectory, _) = Trajectory::read_csv_with_feedback(File::open(&a.trajectory)?)?;
    if traj.c.is_none() {
        return Err(Error::Parse { line: 1, msg: "diagnose requires the excitation columns c_1..c_p".into() });
    }
    let cfg = RegressorConfig::fit(a.r, a.d, &traj)?;
    let sigma_c = a.sigma_c.unwrap_or_else(|| rms(traj.c.as_ref().expect("checked above")));
    let mut dm = build_matrices(&traj, &cfg, false)?;
    if let Some(f) = &feedback {
        dm = dm.with_feedback(f)?;
    }
    let inst = instrument_diagnostics(&dm, sigma_c)?;
    let mut doc = json!({
        "schema_version": crate::SCHEMA_VERSION,
        "N": cfg.n,
        "r": cfg.r,
        "d": cfg.d,
        "sigma_c": sigma_c,
        "s_iv": inst.s_iv,
        "lambda_iv": inst.lambda_iv,
        "triangularity_residual": inst.triangularity_residual,
    });
    if let (Some(plant), Some(ctrl)) = (&a.plant, &a.controller) {
        let model = resolve_plant(plant)?;
        let ctrl = controller_from_flag(ctrl, &model)?;
        let gain = t_infinity(&model, &ctrl)?;
        doc["rho_cl"] = json!(ClosedLoop::new(&model, &ctrl)?.spectral_radius()?);
        doc["t_infinity"] = json!(gain.value);
        doc["t_infinity_tail_bound"] = json!(gain.tail_bound);
        doc["t_infinity_terms"] = json!(gain.terms);
    }
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&doc)?)
}
