//! Command-line wiring: configuration parsing with pointer-precise
//! validation, run manifests, and the simulate / fit / forecast / housing
//! commands. The `dpdd` binary is a thin dispatcher over this module.
//!
//! Every command is deterministic given (inputs, config, seed), writes only
//! under `--output-dir`, and drops a `manifest.json` next to its outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::basis::{build_dictionary, BasisKind, Standardization};
use crate::density::{importance_weights, kde_fit, Bandwidth};
use crate::forecast::{dpdd_forecast, Grid};
use crate::housing::{
    load_panel, normalize_panel, run_housing_experiment, HousingConfig, YearMonth,
};
use crate::koopman::{
    fit_koopman, moment_matrices, truncate_modes, FitOptions, KoopmanModel, TruncationRule,
};
use crate::sim::{run_benchmark, BenchmarkConfig, Method};
use crate::{DpddError, Points, Result};

#[derive(Debug, Parser)]
#[command(name = "dpdd", version, about = "Distributional time-series forecasting toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the simulation benchmark and write result tables.
    Simulate(SimulateArgs),
    /// Fit a Koopman spectral model from a trajectory CSV.
    Fit(FitArgs),
    /// Forecast a density from a fitted model and a sample CSV.
    Forecast(ForecastArgs),
    /// Run the housing-panel experiment from a wide-format CSV.
    Housing(HousingArgs),
    /// Print the tool version.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    /// Reduced repetition count for quick runs.
    Desk,
    /// Full repetition count.
    Paper,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "dpdd-out")]
    pub output_dir: PathBuf,
    /// Worker threads for repetitions (0 = automatic).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Repetition scale when the config does not pin n_exp.
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    pub scale: Scale,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trajectory CSV: one row per step, d numeric columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Dictionary family: hermite | monomial.
    #[arg(long, default_value = "hermite")]
    pub kind: String,
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Keep exactly this many modes (overrides --mode-ratio).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Modulus-ratio truncation threshold.
    #[arg(long, default_value_t = 0.9)]
    pub mode_ratio: f64,
    /// Bandwidth: "auto", "cv", or a positive number.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Disable the whitened eigensolve.
    #[arg(long)]
    pub no_whiten: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dpdd-out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Fitted model JSON from `dpdd fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Sample CSV of the most recent distribution.
    #[arg(long)]
    pub samples: PathBuf,
    /// Forecast horizon in the model's time units.
    #[arg(long)]
    pub horizon: f64,
    /// Grid nodes per axis (defaults: 512 in 1D, 128 in 2D).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Explicit 1D grid bounds.
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dpdd-out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct HousingArgs {
    /// Wide-format panel CSV.
    #[arg(long)]
    pub panel: PathBuf,
    /// First test month (YYYY-MM).
    #[arg(long)]
    pub split: String,
    /// Optional JSON config (refit, bandwidth_cv, volatile_ranges, reference).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dpdd-out")]
    pub output_dir: PathBuf,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Forecast(args) => cmd_forecast(&args),
        Command::Housing(args) => cmd_housing(&args),
        Command::Version => {
            println!("dpdd {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run record written next to every command's outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub output_dir: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
}

fn write_manifest(
    output_dir: &Path,
    command: &str,
    config_path: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let manifest = RunManifest {
        schema: "dpdd-run-manifest/1".into(),
        command: command.into(),
        config_path: config_path.map(|p| p.display().to_string()),
        seed,
        output_dir: output_dir.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    std::fs::write(
        output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SimulateSummaryFile {
    scenarios: Vec<String>,
    methods: Vec<String>,
    n_exp: usize,
    n_paths: usize,
    t_len: usize,
    train_fraction: f64,
    seed: u64,
    seed_stride: u64,
    summaries: Vec<crate::sim::MethodSummary>,
}

#[derive(Debug)]
struct SimulatePlan {
    scenarios: Vec<String>,
    config: BenchmarkConfig,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p)?),
        None => None,
    };
    let mut plan = parse_simulate_config(text.as_deref(), args.scale)?;
    if let Some(seed) = args.seed {
        plan.config.base_seed = seed;
    }
    std::fs::create_dir_all(&args.output_dir)?;

    let table = run_benchmark(&plan.config, &plan.scenarios, args.threads)?;
    std::fs::write(args.output_dir.join("results.csv"), table.to_csv_string())?;
    if !table.sw_diagnostics.is_empty() {
        std::fs::write(
            args.output_dir.join("sw_diagnostics.jsonl"),
            table.sw_diagnostics.join("\n") + "\n",
        )?;
    }
    let summary = SimulateSummaryFile {
        scenarios: plan.scenarios.clone(),
        methods: plan.config.methods.iter().map(|m| m.to_string()).collect(),
        n_exp: plan.config.n_exp,
        n_paths: plan.config.n_paths,
        t_len: plan.config.t_len,
        train_fraction: plan.config.train_fraction,
        seed: plan.config.base_seed,
        seed_stride: plan.config.seed_stride,
        summaries: table.summaries.clone(),
    };
    std::fs::write(
        args.output_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    write_manifest(
        &args.output_dir,
        "simulate",
        args.config.as_deref(),
        plan.config.base_seed,
    )?;
    for s in &summary.summaries {
        println!(
            "{:12} {:8} mean={:.6} median={:.6} (failures: {})",
            s.scenario, s.method, s.mean, s.median, s.failures
        );
    }
    Ok(())
}

fn parse_simulate_config(text: Option<&str>, scale: Scale) -> Result<SimulatePlan> {
    let default_n_exp = match scale {
        Scale::Desk => 50,
        Scale::Paper => 500,
    };
    let mut config = BenchmarkConfig {
        n_exp: default_n_exp,
        ..Default::default()
    };
    let mut scenarios: Vec<String> = ["ar1", "ar2", "ou", "ou2d", "ar_plus_ou"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let Some(text) = text else {
        return Ok(SimulatePlan { scenarios, config });
    };
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| DpddError::config("", format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DpddError::config("", "config must be a JSON object"))?;

    const KNOWN: [&str; 8] = [
        "scenarios",
        "methods",
        "n_exp",
        "n_paths",
        "t_len",
        "train_fraction",
        "seed",
        "seed_stride",
    ];
    for key in obj.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(DpddError::config(format!("/{key}"), "unknown field"));
        }
    }

    if let Some(v) = obj.get("scenarios") {
        let arr = v
            .as_array()
            .ok_or_else(|| DpddError::config("/scenarios", "expected an array of names"))?;
        if arr.is_empty() {
            return Err(DpddError::config("/scenarios", "at least one scenario required"));
        }
        scenarios = Vec::new();
        for (i, item) in arr.iter().enumerate() {
            let name = item.as_str().ok_or_else(|| {
                DpddError::config(format!("/scenarios/{i}"), "expected a string")
            })?;
            crate::sim::scenario_kind(name).map_err(|e| {
                DpddError::config(format!("/scenarios/{i}"), e.to_string())
            })?;
            scenarios.push(name.to_string());
        }
    }
    if let Some(v) = obj.get("methods") {
        let arr = v
            .as_array()
            .ok_or_else(|| DpddError::config("/methods", "expected an array of names"))?;
        let mut methods = Vec::new();
        for (i, item) in arr.iter().enumerate() {
            let name = item.as_str().ok_or_else(|| {
                DpddError::config(format!("/methods/{i}"), "expected a string")
            })?;
            let m = match name {
                "dpdd" => Method::Dpdd,
                "war" => Method::War,
                "sw_dpdd" => Method::SwDpdd,
                other => {
                    return Err(DpddError::config(
                        format!("/methods/{i}"),
                        format!("unknown method '{other}' (expected dpdd, war, sw_dpdd)"),
                    ))
                }
            };
            methods.push(m);
        }
        if methods.is_empty() {
            return Err(DpddError::config("/methods", "at least one method required"));
        }
        config.methods = methods;
    }

    let get_usize = |key: &str, min: u64| -> Result<Option<usize>> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => {
                let n = v.as_u64().ok_or_else(|| {
                    DpddError::config(format!("/{key}"), "expected a nonnegative integer")
                })?;
                if n < min {
                    return Err(DpddError::config(
                        format!("/{key}"),
                        format!("must be >= {min}"),
                    ));
                }
                Ok(Some(n as usize))
            }
        }
    };
    if let Some(n) = get_usize("n_exp", 1)? {
        config.n_exp = n;
    }
    if let Some(n) = get_usize("n_paths", 2)? {
        config.n_paths = n;
    }
    if let Some(n) = get_usize("t_len", 5)? {
        config.t_len = n;
    }
    if let Some(v) = obj.get("train_fraction") {
        let f = v
            .as_f64()
            .ok_or_else(|| DpddError::config("/train_fraction", "expected a number"))?;
        if !(0.0 < f && f < 1.0) {
            return Err(DpddError::config("/train_fraction", "must lie in (0, 1)"));
        }
        config.train_fraction = f;
    }
    if let Some(v) = obj.get("seed") {
        config.base_seed = v
            .as_u64()
            .ok_or_else(|| DpddError::config("/seed", "expected a nonnegative integer"))?;
    }
    if let Some(v) = obj.get("seed_stride") {
        config.seed_stride = v
            .as_u64()
            .ok_or_else(|| DpddError::config("/seed_stride", "expected a nonnegative integer"))?;
    }
    config.validate().map_err(|e| match e {
        DpddError::InvalidInput(msg) => DpddError::config("", msg),
        other => other,
    })?;
    Ok(SimulatePlan { scenarios, config })
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Parse a numeric CSV into points; a single leading non-numeric row is
/// treated as a header.
pub fn read_points_csv(path: &Path) -> Result<Points> {
    let text = std::fs::read_to_string(path)?;
    let mut dim = 0usize;
    let mut data: Vec<f64> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if dim == 0 {
                    dim = row.len();
                } else if row.len() != dim {
                    return Err(DpddError::InvalidInput(format!(
                        "line {} has {} columns, expected {}",
                        line_no + 1,
                        row.len(),
                        dim
                    )));
                }
                data.extend(row);
            }
            Err(_) if dim == 0 && data.is_empty() && line_no == 0 => continue, // header
            Err(_) => {
                return Err(DpddError::InvalidInput(format!(
                    "non-numeric value on line {}",
                    line_no + 1
                )))
            }
        }
    }
    if dim == 0 || data.is_empty() {
        return Err(DpddError::InvalidInput("no numeric rows found".into()));
    }
    Points::new(data, dim)
}

fn parse_bandwidth(s: &str, dim: usize) -> Result<Bandwidth> {
    match s {
        "auto" => Ok(Bandwidth::Auto),
        "cv" => Ok(Bandwidth::CrossValidated),
        other => {
            let v: f64 = other.parse().map_err(|_| {
                DpddError::InvalidInput(format!(
                    "bandwidth must be 'auto', 'cv', or a positive number, got '{other}'"
                ))
            })?;
            if !(v > 0.0) {
                return Err(DpddError::InvalidInput("bandwidth must be positive".into()));
            }
            Ok(Bandwidth::Fixed(vec![v; dim]))
        }
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let trajectory = read_points_csv(&args.input)?;
    if trajectory.len() < 2 {
        return Err(DpddError::InvalidInput("need >= 2 points".into()));
    }
    let kind = match args.kind.as_str() {
        "hermite" => BasisKind::Hermite,
        "monomial" => BasisKind::Monomial,
        other => {
            return Err(DpddError::InvalidInput(format!(
                "unknown dictionary kind '{other}' (expected hermite or monomial)"
            )))
        }
    };
    let model = fit_trajectory_model(
        &trajectory,
        args.dt,
        kind,
        args.degree,
        parse_bandwidth(&args.bandwidth, trajectory.dim())?,
        !args.no_whiten,
        match args.modes {
            Some(r) => TruncationRule::Fixed(r),
            None => TruncationRule::ModulusRatio(args.mode_ratio),
        },
    )?;
    std::fs::create_dir_all(&args.output_dir)?;
    std::fs::write(args.output_dir.join("model.json"), model.to_json()?)?;
    write_manifest(&args.output_dir, "fit", Some(&args.input), args.seed)?;
    let rates: Vec<String> = model
        .retained_rates()
        .iter()
        .map(|l| format!("{:.4}{:+.4}i", l.re, l.im))
        .collect();
    println!(
        "fitted J={} modes={} rates=[{}]",
        model.dictionary().size(),
        model.mode_count(),
        rates.join(", ")
    );
    Ok(())
}

/// Shared fit pipeline for a single contiguous trajectory.
pub fn fit_trajectory_model(
    trajectory: &Points,
    dt: f64,
    kind: BasisKind,
    degree: usize,
    bandwidth: Bandwidth,
    whiten: bool,
    truncation: TruncationRule,
) -> Result<KoopmanModel> {
    let standardization = Standardization::from_points(trajectory)?;
    let dict = build_dictionary(kind, degree, trajectory.dim(), standardization)?;
    let kde = kde_fit(trajectory.clone(), bandwidth)?;
    let mut x_side = Points::empty(trajectory.dim());
    for k in 0..trajectory.len() - 1 {
        x_side.push_row(trajectory.row(k));
    }
    let weights = importance_weights(&kde, &x_side)?;
    let mm = moment_matrices(trajectory, &weights, &dict)?;
    let options = FitOptions {
        whiten,
        ..Default::default()
    };
    let model = fit_koopman(&mm, dt, &options, &dict, &kde)?;
    truncate_modes(&model, truncation)
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ForecastMeta {
    horizon: f64,
    mode_count: usize,
    clipped_mass: f64,
    integral: f64,
    grid_points: usize,
    dim: usize,
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let model = KoopmanModel::from_json(&std::fs::read_to_string(&args.model)?)?;
    let samples = read_points_csv(&args.samples)?;
    if samples.dim() != model.dictionary().dim() {
        return Err(DpddError::DimensionMismatch {
            expected: model.dictionary().dim(),
            got: samples.dim(),
        });
    }
    if !(args.horizon >= 0.0) {
        return Err(DpddError::InvalidInput("horizon must be >= 0".into()));
    }
    let dim = model.stationary_density().dim();
    let n = args.grid_points.unwrap_or(if dim == 1 { 512 } else { 128 });
    let grid = match (args.grid_min, args.grid_max) {
        (Some(lo), Some(hi)) if dim == 1 => Grid::uniform_1d(lo, hi, n)?,
        (None, None) => Grid::for_model(&model, n)?,
        _ => {
            return Err(DpddError::InvalidInput(
                "explicit grid bounds need both --grid-min and --grid-max and a 1D model".into(),
            ))
        }
    };
    let fd = dpdd_forecast(&model, &samples, args.horizon, &grid)?;

    std::fs::create_dir_all(&args.output_dir)?;
    let mut csv = String::new();
    match dim {
        1 => {
            csv.push_str("x,density\n");
            for (x, v) in grid.axis(0).iter().zip(fd.values()) {
                csv.push_str(&format!("{x},{v}\n"));
            }
        }
        _ => {
            csv.push_str("x,y,density\n");
            let ny = grid.axis(1).len();
            for (i, x) in grid.axis(0).iter().enumerate() {
                for (j, y) in grid.axis(1).iter().enumerate() {
                    csv.push_str(&format!("{x},{y},{}\n", fd.values()[i * ny + j]));
                }
            }
        }
    }
    std::fs::write(args.output_dir.join("forecast.csv"), csv)?;
    let meta = ForecastMeta {
        horizon: fd.horizon,
        mode_count: fd.mode_count,
        clipped_mass: fd.clipped_mass,
        integral: fd.integral(),
        grid_points: n,
        dim,
    };
    std::fs::write(
        args.output_dir.join("forecast_meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    write_manifest(&args.output_dir, "forecast", Some(&args.model), args.seed)?;
    println!(
        "forecast h={} r={} clipped_mass={:.6} integral={:.9}",
        fd.horizon,
        fd.mode_count,
        fd.clipped_mass,
        fd.integral()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// housing
// ---------------------------------------------------------------------------

pub fn cmd_housing(args: &HousingArgs) -> Result<()> {
    let split = YearMonth::parse(&args.split).ok_or_else(|| {
        DpddError::InvalidInput(format!("--split must be YYYY-MM, got '{}'", args.split))
    })?;
    let config: HousingConfig = match &args.config {
        None => HousingConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| {
                DpddError::config("", format!("housing config: {e}"))
            })?
        }
    };
    let panel = load_panel(&args.panel)?;
    let linked = normalize_panel(&panel)?;
    let report = run_housing_experiment(&linked, &panel.dates, split, &config)?;

    std::fs::create_dir_all(&args.output_dir)?;
    std::fs::write(
        args.output_dir.join("housing_monthly.csv"),
        report.to_monthly_csv(),
    )?;
    std::fs::write(
        args.output_dir.join("housing_summary.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    write_manifest(&args.output_dir, "housing", Some(&args.panel), args.seed)?;
    println!(
        "months={} dpdd_mean={:.6} war_mean={:.6} persistence_mean={:.6}",
        report.test_months, report.dpdd.mean, report.war.mean, report.persistence.mean
    );
    if let Some(r) = report.reference {
        println!(
            "reference comparison: dpdd {:.4} (measured {:.4}), war {:.4} (measured {:.4})",
            r.dpdd, report.dpdd.mean, r.war, report.war.mean
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_covers_the_five_stationary_scenarios() {
        let plan = parse_simulate_config(None, Scale::Desk).unwrap();
        assert_eq!(plan.scenarios.len(), 5);
        assert_eq!(plan.config.n_exp, 50);
        let paper = parse_simulate_config(None, Scale::Paper).unwrap();
        assert_eq!(paper.config.n_exp, 500);
    }

    #[test]
    fn unknown_scenario_reports_a_pointer() {
        let err = parse_simulate_config(Some(r#"{"scenarios": ["ar1", "arX"]}"#), Scale::Desk)
            .unwrap_err();
        match err {
            DpddError::Config { pointer, .. } => assert_eq!(pointer, "/scenarios/1"),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn unknown_field_reports_a_pointer() {
        let err =
            parse_simulate_config(Some(r#"{"n_expp": 3}"#), Scale::Desk).unwrap_err();
        match err {
            DpddError::Config { pointer, .. } => assert_eq!(pointer, "/n_expp"),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn config_overrides_apply() {
        let plan = parse_simulate_config(
            Some(r#"{"scenarios": ["ou"], "methods": ["dpdd", "sw_dpdd"], "n_exp": 7, "seed": 99}"#),
            Scale::Desk,
        )
        .unwrap();
        assert_eq!(plan.scenarios, vec!["ou".to_string()]);
        assert_eq!(plan.config.n_exp, 7);
        assert_eq!(plan.config.base_seed, 99);
        assert_eq!(plan.config.methods, vec![Method::Dpdd, Method::SwDpdd]);
    }

    #[test]
    fn points_csv_accepts_optional_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "x\n1.0\n2.0\n3.0\n").unwrap();
        let pts = read_points_csv(&p).unwrap();
        assert_eq!(pts.as_1d(), &[1.0, 2.0, 3.0]);
        std::fs::write(&p, "1.0,2.0\n3.0,4.0\n").unwrap();
        let pts = read_points_csv(&p).unwrap();
        assert_eq!(pts.dim(), 2);
    }

    #[test]
    fn points_csv_rejects_ragged_and_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "1.0,2.0\n3.0\n").unwrap();
        assert!(read_points_csv(&p).is_err());
        std::fs::write(&p, "1.0\nbad\n").unwrap();
        assert!(read_points_csv(&p).is_err());
    }
}
