//! The `lieswarm` command line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::deformation::{shape_preset, DeformationSpec, SHAPE_PRESETS};
use crate::embedding::{sample_curve, EmbeddingConfig};
use crate::harness::telemetry::{self, format_g, SIGNIFICANT_DIGITS};
use crate::harness::{run, RunOptions, Scenario};
use crate::metrics::{self, MetricsOptions, MetricsSummary, TickMetrics};
use crate::presets::{scenario_preset, SCENARIO_PRESETS};
use crate::so3::Vec3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lieswarm", version, about = "Swarm simulation on SO(3)-deformed circular embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file or bundled preset.
    Run(RunArgs),
    /// Sample a deformed curve to CSV (phi,x,y,z).
    Shape(ShapeArgs),
    /// List bundled scenario and shape presets.
    Presets {
        #[arg(long)]
        json: bool,
    },
    /// Recompute metrics from a telemetry CSV.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON path or bundled preset name.
    pub scenario: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON bounds file; exit 3 if any bound is violated.
    #[arg(long)]
    pub check: Option<PathBuf>,
    /// Run agent ticks on a thread pool.
    #[arg(long)]
    pub parallel: bool,
    #[command(flatten)]
    pub metrics: MetricsFlags,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct MetricsFlags {
    /// Convergence band in degrees (default: 1 for n ≥ 10, else 5).
    #[arg(long)]
    pub band_deg: Option<f64>,
    /// Convergence hold window in seconds.
    #[arg(long)]
    pub hold_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[arg(long, conflicts_with_all = ["omega_x", "omega_y"])]
    pub preset: Option<String>,
    #[arg(long, requires = "omega_y")]
    pub omega_x: Option<String>,
    #[arg(long, requires = "omega_x")]
    pub omega_y: Option<String>,
    /// Distortion factor; defaults to the preset's, or 1 for expressions.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub r_d: f64,
    /// Embedding center as x,y,z.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0], allow_hyphen_values = true)]
    pub center: Vec<f64>,
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub telemetry: PathBuf,
    /// Also write metrics.json, series.csv and separations.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub metrics: MetricsFlags,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("check failed:\n  {}", .0.join("\n  "))]
    Check(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Shape(a) => cmd_shape(&a),
        Command::Presets { json } => cmd_presets(json),
        Command::Metrics(a) => cmd_metrics(&a),
    }
}

/// Reads a scenario from a path, falling back to a bundled preset of the
/// same name.
pub fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        fs::read_to_string(path).map_err(|e| io_err(path, e))?
    } else if let Some(p) = scenario_preset(arg) {
        p.json.to_string()
    } else {
        return Err(CliError::Io(format!("{arg}: no such file or bundled preset")));
    };
    Scenario::from_json(&text).map_err(|e| CliError::Config(format!("{arg}: {e}")))
}

fn metrics_options(s: Option<&Scenario>, f: MetricsFlags) -> MetricsOptions {
    MetricsOptions { band_deg: f.band_deg.or(s.and_then(|s| s.metrics.band_deg)), hold_s: f.hold_s.or(s.and_then(|s| s.metrics.hold_s)) }
}

fn write_metrics_files(dir: &Path, per_tick: &[TickMetrics], summary: &mut MetricsSummary) -> Result<(), CliError> {
    let series = dir.join("series.csv");
    let seps = dir.join("separations.csv");
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| io_err(p, e));
    metrics::write_series_csv(create(&series)?, per_tick).map_err(|e| io_err(&series, e))?;
    metrics::write_separations_csv(create(&seps)?, per_tick).map_err(|e| io_err(&seps, e))?;
    summary.series_csv = Some("series.csv".into());
    summary.separations_csv = Some("separations.csv".into());
    let path = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

fn print_summary(name: &str, s: &MetricsSummary) {
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.3}"));
    let mut text = format!("{name}:\n");
    text += &format!("  convergence time   {} s (band {}°, hold {} s)\n", opt(s.convergence_time_s), s.band_deg, s.hold_s);
    text += &format!("  steady oscillation {} °\n", opt(s.steady_oscillation_deg));
    text += &format!("  distance range     {:.3} .. {:.3} m\n", s.min_distance_m, s.max_distance_m);
    text += &format!("  Lyapunov (final)   {:.3e}\n", s.lyapunov_final);
    for (i, seg) in s.segments.iter().enumerate().skip(1) {
        text += &format!("  segment {i}: n={} from {:.1} s, settled after {} s\n", seg.n, seg.start_s, opt(seg.settle_s));
    }
    say(&text);
}

/// Writes to stdout, ignoring a closed pipe.
fn say(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let bounds = a.check.as_deref().map(read_bounds).transpose()?;
    let opts = metrics_options(Some(&scenario), a.metrics);
    let name = if scenario.name.is_empty() { a.scenario.clone() } else { scenario.name.clone() };
    let out = run(scenario, RunOptions { parallel: a.parallel }).map_err(|e| CliError::Config(e.to_string()))?;

    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let path = a.out.join("telemetry.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = telemetry::write_csv(BufWriter::new(file), &out.records).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;

    let (per_tick, mut summary) = metrics::summarize(&out.records, opts).expect("a run has at least one tick");
    write_metrics_files(&a.out, &per_tick, &mut summary)?;
    print_summary(&name, &summary);
    say(&format!("  wrote {}\n", a.out.display()));
    match bounds {
        Some(b) => check_bounds(&summary, &b),
        None => Ok(()),
    }
}

fn read_bounds(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Config(format!("{}: expected an object of bounds", path.display())));
    }
    Ok(v)
}

/// Bounds are `{"field": {"min": a, "max": b}}`; nested fields use dots,
/// e.g. `segments.1.settle_s`. A missing or null metric violates its bound.
pub fn check_bounds(summary: &MetricsSummary, bounds: &Value) -> Result<(), CliError> {
    let doc = serde_json::to_value(summary).expect("summary serializes");
    let mut failures = Vec::new();
    for (key, bound) in bounds.as_object().into_iter().flatten() {
        let pointer = format!("/{}", key.replace('.', "/"));
        let got = doc.pointer(&pointer).and_then(Value::as_f64);
        let lo = bound.get("min").and_then(Value::as_f64);
        let hi = bound.get("max").and_then(Value::as_f64);
        if lo.is_none() && hi.is_none() {
            return Err(CliError::Config(format!("bound `{key}` needs min and/or max")));
        }
        match got {
            None => failures.push(format!("{key}: missing")),
            Some(v) => {
                if lo.is_some_and(|lo| !(v >= lo)) || hi.is_some_and(|hi| !(v <= hi)) {
                    failures.push(format!("{key} = {v} outside [{}, {}]", fmt_opt(lo), fmt_opt(hi)));
                }
            }
        }
    }
    if failures.is_empty() {
        say(&format!("  check passed ({} bounds)\n", bounds.as_object().map_or(0, |o| o.len())));
        Ok(())
    } else {
        Err(CliError::Check(failures))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| v.to_string())
}

fn cmd_shape(a: &ShapeArgs) -> Result<(), CliError> {
    if a.samples < 3 {
        return Err(CliError::Config(format!("--samples must be at least 3, got {}", a.samples)));
    }
    let deformation = match (&a.preset, &a.omega_x, &a.omega_y) {
        (_, Some(x), Some(y)) => DeformationSpec::from_text(x, y, a.s.unwrap_or(1.0)),
        (p, _, _) => {
            let p = shape_preset(p.as_deref().unwrap_or("eq23")).map_err(|e| CliError::Config(e.to_string()))?;
            let spec = p.spec();
            match a.s {
                Some(s) => spec.with_s(s),
                None => Ok(spec),
            }
        }
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = EmbeddingConfig { r_d: a.r_d, omega_zd: 1.0, center: Vec3::new(a.center[0], a.center[1], a.center[2]), deformation };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let curve = sample_curve(&cfg, a.samples).map_err(|e| CliError::Config(e.to_string()))?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    };
    let label = a.out.as_deref().unwrap_or(Path::new("<stdout>"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let g = |v: f64| format_g(v, SIGNIFICANT_DIGITS);
    w.write_record(["phi", "x", "y", "z"]).map_err(|e| io_err(label, e))?;
    for (phi, p) in curve {
        w.write_record([g(phi), g(p.x), g(p.y), g(p.z)]).map_err(|e| io_err(label, e))?;
    }
    w.flush().map_err(|e| io_err(label, e))
}

#[derive(Serialize)]
struct PresetEntry {
    kind: &'static str,
    name: &'static str,
    description: String,
}

fn cmd_presets(json: bool) -> Result<(), CliError> {
    let entries: Vec<PresetEntry> = SCENARIO_PRESETS
        .iter()
        .map(|p| PresetEntry { kind: "scenario", name: p.name, description: p.description() })
        .chain(SHAPE_PRESETS.iter().map(|p| PresetEntry { kind: "shape", name: p.name, description: p.description.into() }))
        .collect();
    if json {
        say(&(serde_json::to_string_pretty(&entries).expect("preset list serializes") + "\n"));
    } else {
        for e in &entries {
            say(&format!("{:<9} {:<12} {}\n", e.kind, e.name, e.description));
        }
    }
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let file = File::open(&a.telemetry).map_err(|e| io_err(&a.telemetry, e))?;
    let records = telemetry::read_csv(io::BufReader::new(file)).map_err(|e| match e {
        telemetry::TelemetryError::Io(e) => io_err(&a.telemetry, e),
        e => CliError::Config(format!("{}: {e}", a.telemetry.display())),
    })?;
    let (per_tick, mut summary) = metrics::summarize(&records, metrics_options(None, a.metrics))
        .ok_or_else(|| CliError::Config(format!("{}: no telemetry rows", a.telemetry.display())))?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_metrics_files(dir, &per_tick, &mut summary)?;
    }
    say(&(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"));
    Ok(())
}
