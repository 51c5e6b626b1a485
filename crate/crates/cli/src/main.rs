use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use biphoton_core::audit::{delay_grid, failures, run_audit, AuditReport};
use biphoton_core::config::{preset, ConfigError, EngineChoice, ScanAxis, ScanConfig, PRESET_NAMES};
use biphoton_core::freq_engine::{resolve_engine, scan_with, Engine, Interferogram, ScanMetadata};
use biphoton_core::io::{
    read_interferogram, write_density_csv, write_envelope_csv, write_interferogram, write_jsi_csv, write_json,
};
use biphoton_core::numeric::UniformGrid;
use biphoton_core::spectroscopy::{
    extract_envelopes, reconstruct, CorrelationClass, FitSummary, TimeScales, Visibilities,
};
use biphoton_core::JointSpectralAmplitude;

/// Exit codes of the command-line contract.
const EXIT_CONFIG: u8 = 2;
const EXIT_ENGINE: u8 = 3;
const EXIT_RECONSTRUCTION: u8 = 4;

#[derive(Parser)]
#[command(name = "biphoton", version, about = "Simulate and invert combined NOON/HOM two-photon interferograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute interferograms from a config file or a preset.
    Simulate(SimulateArgs),
    /// Recover spectra, JSI and correlation type from an interferogram.
    Reconstruct(ReconstructArgs),
    /// Compare quadrature, closed form and time domain on a small delay grid.
    Audit(AuditArgs),
    /// Preset utilities.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List available presets.
    List,
}

#[derive(Args)]
struct Source {
    /// JSON scan configuration.
    config: Option<PathBuf>,
    /// Use a built-in preset instead of a config file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Override the engine (auto, quadrature, closed_form, time_domain, all).
    #[arg(long)]
    engine: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the file stem (single-member runs only).
    #[arg(long)]
    stem: Option<String>,
    /// Also write a downsampled envelope CSV.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Interferogram sidecar (.json) or data file (.csv).
    input: PathBuf,
    /// Output directory; defaults to the input's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write recovered densities and the JSI as CSV.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    source: Source,
    /// Half-width of the delay grid in units of 1/sigma_plus.
    #[arg(long, default_value_t = 5.0)]
    span: f64,
    /// Points per delay axis.
    #[arg(long, default_value_t = 5)]
    points: usize,
    /// Report path; defaults to `<out dir>/<name>_audit.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error tagged with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

trait Tag<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("BIPHOTON_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: BIPHOTON_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Audit(a) => audit(a),
        Command::Presets { action: PresetAction::List } => {
            list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn list_presets() {
    for name in PRESET_NAMES {
        let p = preset(name).expect("built-in preset");
        println!("{:<6} {}", p.name, p.description);
    }
}

/// Named configs from a file or a preset.
fn load(source: &Source) -> Result<(String, Vec<(String, ScanConfig)>), Failure> {
    match (&source.config, &source.preset) {
        (_, Some(name)) => {
            let p = preset(name).code(EXIT_CONFIG)?;
            Ok((p.name.to_string(), p.members))
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .code(EXIT_CONFIG)?;
            let cfg = ScanConfig::from_json(&text).code(EXIT_CONFIG)?;
            let stem = cfg.output.stem.clone();
            Ok((stem.clone(), vec![(stem, cfg)]))
        }
        (None, None) => Err(Failure {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("give a config file or --preset"),
        }),
    }
}

fn parse_engine(s: &str) -> Result<EngineChoice, Failure> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| ConfigError::Parse(format!("unknown engine {s:?}")))
        .code(EXIT_CONFIG)
}

fn engines_for(choice: EngineChoice, jsa: &JointSpectralAmplitude) -> Result<Vec<Engine>, Failure> {
    if choice == EngineChoice::All {
        let mut out = vec![Engine::Quadrature];
        if resolve_engine(EngineChoice::ClosedForm, jsa).is_ok() {
            out.push(Engine::ClosedForm);
        }
        out.push(Engine::TimeDomain);
        Ok(out)
    } else {
        Ok(vec![resolve_engine(choice, jsa).code(EXIT_CONFIG)?])
    }
}

#[derive(Serialize)]
struct RunInfo {
    tool: &'static str,
    version: &'static str,
    source: String,
    timestamp: String,
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (source_name, mut members) = load(&args.source)?;
    if args.stem.is_some() && members.len() != 1 {
        return Err(Failure {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("--stem needs a single-member run"),
        });
    }
    let engine_override = args.engine.as_deref().map(parse_engine).transpose()?;
    for (name, cfg) in members.iter_mut() {
        if let Some(e) = engine_override {
            cfg.engine = e;
        }
        if let Some(dir) = &args.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(stem) = &args.stem {
            cfg.output.stem = stem.clone();
            *name = stem.clone();
        }
        cfg.output.emit_plot_data |= args.emit_plot_data;
    }
    for (name, cfg) in &members {
        let jsa = cfg.validate().code(EXIT_CONFIG)?;
        let engines = engines_for(cfg.engine, &jsa)?;
        let multi = engines.len() > 1;
        for engine in engines {
            let ig = scan_with(cfg, &jsa, engine)
                .with_context(|| format!("{name}: {} engine", engine.name()))
                .code(EXIT_ENGINE)?;
            let stem = if multi { format!("{name}_{}", engine.name()) } else { name.clone() };
            let run = RunInfo {
                tool: "biphoton",
                version: env!("CARGO_PKG_VERSION"),
                source: source_name.clone(),
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            };
            let run = serde_json::to_value(run).expect("serializable");
            let files = write_interferogram(&cfg.output.dir, &stem, &ig, Some(cfg), Some(run)).code(EXIT_CONFIG)?;
            println!("{} {} points -> {}", stem, ig.len(), files.csv.display());
            if cfg.output.emit_plot_data {
                emit_envelope(&cfg.output.dir, &stem, &ig)?;
            }
        }
    }
    Ok(())
}

fn emit_envelope(dir: &Path, stem: &str, ig: &Interferogram) -> Result<(), Failure> {
    if ig.scan_axis != ScanAxis::Tau2AtFixedTau1 {
        eprintln!("note: {stem}: envelopes are written for tau2 scans only");
        return Ok(());
    }
    let env = extract_envelopes(ig).code(EXIT_RECONSTRUCTION)?;
    let stride = ig.len().div_ceil(2000);
    let path = dir.join(format!("{stem}_envelope.csv"));
    write_envelope_csv(&path, &ig.rates, &env, stride).code(EXIT_CONFIG)
}

#[derive(Serialize)]
struct Report {
    schema: u32,
    input: String,
    classification: CorrelationClass,
    sigma_plus_hat: f64,
    sigma_minus_hat: f64,
    tau1_hat: f64,
    time_scales: TimeScales,
    measured_time_scales: TimeScales,
    visibilities: Visibilities,
    fit_plus: FitSummary,
    fit_minus: FitSummary,
    /// Parameters recorded by the producer of the interferogram.
    source_metadata: ScanMetadata,
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("interferogram").to_string()
}

fn reconstruct_cmd(args: ReconstructArgs) -> Result<(), Failure> {
    let ig = read_interferogram(&args.input).code(EXIT_CONFIG)?;
    let result = reconstruct(&ig)
        .with_context(|| format!("reconstructing {}", args.input.display()))
        .code(EXIT_RECONSTRUCTION)?;
    let class = result.classification();
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = stem_of(&args.input);
    let report = Report {
        schema: 1,
        input: args.input.display().to_string(),
        classification: class,
        sigma_plus_hat: result.sigma_plus_hat,
        sigma_minus_hat: result.sigma_minus_hat,
        tau1_hat: result.tau1_hat,
        time_scales: result.time_scales,
        measured_time_scales: result.measured_time_scales,
        visibilities: result.visibilities,
        fit_plus: result.fit_plus.clone(),
        fit_minus: result.fit_minus.clone(),
        source_metadata: ig.metadata,
    };
    let report_path = dir.join(format!("{stem}_report.json"));
    write_json(&report_path, &report).code(EXIT_CONFIG)?;
    if args.emit_plot_data {
        write_density_csv(&dir.join(format!("{stem}_f_plus.csv")), &result.f_plus).code(EXIT_CONFIG)?;
        write_density_csv(&dir.join(format!("{stem}_f_minus.csv")), &result.f_minus).code(EXIT_CONFIG)?;
        let coarse = biphoton_core::spectroscopy::reconstruct_jsi(&every(&result.f_plus, 8), &every(&result.f_minus, 8))
            .code(EXIT_RECONSTRUCTION)?;
        write_jsi_csv(&dir.join(format!("{stem}_jsi.csv")), &coarse).code(EXIT_CONFIG)?;
    }
    println!(
        "verdict {:?} ratio_hat {:.4} sigma_plus_hat {:.5} sigma_minus_hat {:.5} tau1_hat {:.5}",
        class.verdict, class.ratio_hat, result.sigma_plus_hat, result.sigma_minus_hat, result.tau1_hat
    );
    println!("report -> {}", report_path.display());
    Ok(())
}

/// Every `k`-th sample of a density.
fn every(d: &biphoton_core::SpectralDensity, k: usize) -> biphoton_core::SpectralDensity {
    let values: Vec<f64> = d.values.iter().step_by(k).cloned().collect();
    let grid = UniformGrid {
        start: d.detunings.start,
        step: d.detunings.step * k as f64,
        len: values.len(),
    };
    biphoton_core::SpectralDensity::new(d.coordinate, grid, values).expect("subsampled density stays valid")
}

#[derive(Serialize)]
struct AuditFile {
    source: String,
    members: Vec<(String, AuditReport)>,
}

fn audit(args: AuditArgs) -> Result<(), Failure> {
    if args.points < 2 || args.points > 9 {
        return Err(Failure {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("--points must lie in 2..=9 to keep the audit small"),
        });
    }
    let (source_name, members) = load(&args.source)?;
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (name, cfg) in &members {
        let jsa = cfg.validate().code(EXIT_CONFIG)?;
        let delays = delay_grid(args.span / jsa.sigma_plus, args.points);
        let report = run_audit(&jsa, &delays, &cfg.quadrature)
            .with_context(|| format!("{name}: audit"))
            .code(EXIT_ENGINE)?;
        println!(
            "{name}: time_domain_vs_quadrature {:.3e} closed_form_vs_quadrature {} cross_term_groups {} residual {}",
            report.max_dual_domain,
            fmt_opt(report.max_closed_vs_quadrature),
            fmt_opt(report.max_group_error),
            fmt_opt(report.max_residual)
        );
        println!(
            "{name}: hom_dip {:.3e} hom_antisymmetric_peak {:.9} noon_period {:.9} (expected {:.9})",
            report.baselines.hom_symmetric_at_zero,
            report.baselines.hom_antisymmetric_at_zero,
            report.baselines.noon_period,
            report.baselines.noon_period_expected
        );
        for f in failures(&report) {
            failed.push(format!("{name}: {} = {:.3e} exceeds {:.1e}", f.check, f.value, f.tolerance));
        }
        reports.push((name.clone(), report));
    }
    let path = match args.out {
        Some(p) => p,
        None => members[0].1.output.dir.join(format!("{source_name}_audit.json")),
    };
    write_json(
        &path,
        &AuditFile {
            source: source_name,
            members: reports,
        },
    )
    .code(EXIT_CONFIG)?;
    println!("audit -> {}", path.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_ENGINE,
            error: anyhow::anyhow!("audit failed: {}", failed.join("; ")),
        })
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "n/a".into())
}
