use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bearing_core::{
    bound_report, circle_scenario, fit_decay_rate, pe_report, simulate, BoundOptions, BoundReport,
    DirectionSignal, Horizon, NoiseSpec, PeReport, Scenario, SimulationTrace,
};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, Verbosity};
use crate::trace_io::{load_trace, write_csv, write_json};
use crate::{exit, CliError, SEED_ENV};

const DEFAULT_DELTA: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Parser)]
#[command(
    name = "bearing-obs",
    version,
    about = "Bearing-only position and velocity-bias observer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario in a config file and write its trace.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the circular experiment and write trace and plot data.
    ReproducePaper {
        #[arg(long, value_enum, default_value_t = Variant::Noisefree)]
        variant: Variant,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check both excitation criteria on the bearing of a trace.
    PeCheck {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check every convergence bound on a trace.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// interval pairs for the transition-matrix audit
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Noisefree,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

/// Parses `args` (program name first) and runs the command, returning the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return exit::INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return exit::SUCCESS;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Simulate {
            config,
            out_dir,
            format,
            seed,
        } => cmd_simulate(config.as_deref(), &out_dir, format, seed, out),
        Command::ReproducePaper {
            variant,
            out_dir,
            format,
            seed,
        } => cmd_reproduce_paper(variant, &out_dir, format, seed, out),
        Command::PeCheck {
            trace,
            delta,
            epsilon,
            config,
            out_dir,
        } => cmd_pe_check(
            &trace,
            delta,
            epsilon,
            config.as_deref(),
            out_dir.as_deref(),
            out,
        ),
        Command::Analyze {
            trace,
            config,
            delta,
            epsilon,
            pairs,
            seed,
            format,
            out_dir,
        } => {
            let opts = BoundOptions {
                delta,
                epsilon,
                pairs,
                seed,
            };
            cmd_analyze(
                &trace,
                config.as_deref(),
                &opts,
                format,
                out_dir.as_deref(),
                out,
            )
        }
    }
}

/// `--seed`, then the environment, then the config.
pub fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "{SEED_ENV}: expected an unsigned integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(config_seed),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_trace(trace: &SimulationTrace<f64>, path: &Path, format: Format) -> Result<(), CliError> {
    let mut w = create(path)?;
    match format {
        Format::Csv => write_csv(trace, &mut w)?,
        Format::Json => write_json(trace, &mut w)?,
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn summary(trace: &SimulationTrace<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    let Some(last) = trace.last() else {
        return writeln!(out, "no samples recorded").map_err(out_err);
    };
    let span = trace.span();
    writeln!(
        out,
        "samples            {} (t = 0 .. {span} s)",
        trace.samples.len()
    )
    .map_err(out_err)?;
    writeln!(out, "final |x - z|      {:.6e}", last.err_xz).map_err(out_err)?;
    writeln!(out, "final |x - xhat|   {:.6e}", last.err_x).map_err(out_err)?;
    writeln!(out, "final |ahat - a|   {:.6e}", last.err_a).map_err(out_err)?;
    let a: Vec<String> = last
        .output
        .a_hat
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect();
    writeln!(out, "final ahat         ({})", a.join(", ")).map_err(out_err)?;
    let times = trace.times();
    for (name, series) in [
        ("|x - z|", trace.series(|s| s.err_xz)),
        ("|x - xhat|", trace.series(|s| s.err_x)),
        ("|ahat - a|", trace.series(|s| s.err_a)),
    ] {
        match fit_decay_rate(&times, &series, 0.1 * span, 0.8 * span) {
            Ok(f) => writeln!(
                out,
                "decay rate {name:<11} {:.6e} 1/s (R^2 {:.4})",
                f.rate, f.r_squared
            ),
            Err(_) => writeln!(out, "decay rate {name:<11} n/a"),
        }
        .map_err(out_err)?;
    }
    Ok(())
}

fn pe_summary(rep: &PeReport<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        out,
        "excitation         delta {:.4} s, mu {:.6e}, integral {}, derivative {}, gamma {:.6e} 1/s",
        rep.delta,
        rep.mu,
        pass(rep.passes_integral),
        pass(rep.passes_derivative),
        rep.gamma
    )
    .map_err(out_err)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn fault(trace: &SimulationTrace<f64>) -> Option<CliError> {
    trace
        .failure
        .as_ref()
        .map(|f| CliError::Runtime(format!("simulation stopped at t = {}: {}", f.t, f.error)))
}

pub fn cmd_simulate(
    config: Option<&Path>,
    out_dir: &Path,
    format: Option<Format>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("")?,
    };
    let mut scenario = cfg.scenario.to_scenario()?;
    scenario.seed = resolve_seed(seed, scenario.seed)?;
    let trace = simulate(&scenario).map_err(|e| CliError::Validation(e.to_string()))?;

    let mut targets = Vec::new();
    let named = |f: Format| match f {
        Format::Csv => cfg.output.csv.clone(),
        Format::Json => cfg.output.json.clone(),
    };
    match format {
        Some(f) => targets.push((f, named(f).unwrap_or_else(|| default_name(f).into()))),
        None => {
            for f in [Format::Csv, Format::Json] {
                if let Some(p) = named(f) {
                    targets.push((f, p));
                }
            }
            if targets.is_empty() {
                targets.push((Format::Csv, default_name(Format::Csv).into()));
            }
        }
    }
    for (f, name) in &targets {
        let path = out_dir.join(name);
        write_trace(&trace, &path, *f)?;
        if cfg.report.verbosity != Verbosity::Quiet {
            writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
        }
    }

    if cfg.report.verbosity != Verbosity::Quiet {
        summary(&trace, out)?;
    }
    let full = cfg.report.verbosity == Verbosity::Full;
    if trace.samples.len() > 1 {
        let delta = cfg.analysis.delta;
        if cfg.analysis.pe_check {
            let sig =
                DirectionSignal::bearing(&trace).map_err(|e| CliError::Runtime(e.to_string()))?;
            let rep = pe_report(&sig, delta, cfg.analysis.epsilon, scenario.gains.k)
                .map_err(|e| CliError::Validation(format!("analysis.delta: {e}")))?;
            pe_summary(&rep, out)?;
        }
        if cfg.analysis.bounds {
            let opts = BoundOptions {
                delta,
                epsilon: cfg.analysis.epsilon,
                ..BoundOptions::default()
            };
            let (rep, _) = bound_report(&trace, &opts)
                .map_err(|e| CliError::Validation(format!("analysis.delta: {e}")))?;
            writeln!(out, "bound violations   {}", rep.violations.len()).map_err(out_err)?;
            if full {
                bound_table(&rep, out)?;
            }
        }
    }
    if let Some(e) = fault(&trace) {
        return Err(e);
    }
    Ok(exit::SUCCESS)
}

fn default_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "trace.csv",
        Format::Json => "trace.json",
    }
}

/// The circular experiment, noise-free or with uniform position noise of half-width 0.5 m.
pub fn reference_scenario(variant: Variant, seed: u64) -> Scenario<f64> {
    let mut sc = circle_scenario();
    sc.seed = seed;
    if variant == Variant::Noisy {
        sc.noise = NoiseSpec::uniform(0.5);
    }
    sc
}

pub fn cmd_reproduce_paper(
    variant: Variant,
    out_dir: &Path,
    format: Format,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let seed = resolve_seed(seed, circle_scenario::<f64>().seed)?;
    let scenario = reference_scenario(variant, seed);
    let trace = simulate(&scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    let dir = out_dir.join(match variant {
        Variant::Noisefree => "noisefree",
        Variant::Noisy => "noisy",
    });

    write_trace(&trace, &dir.join(default_name(format)), format)?;
    let mut cfg = RunConfig::from_scenario(&scenario);
    cfg.output.csv = Some("trace.csv".into());
    let mut w = create(&dir.join("scenario.cfg"))?;
    w.write_all(cfg.to_toml().as_bytes()).map_err(out_err)?;

    let n = trace.dim();
    let idx = |p: &str| (1..=n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    plot_file(
        &dir.join("paths.csv"),
        [vec!["t".to_string()], idx("x"), idx("xhat_")].concat(),
        &trace,
        |s| [&[s.t][..], s.x_true.as_slice(), s.output.x_hat.as_slice()].concat(),
    )?;
    plot_file(
        &dir.join("errors.csv"),
        ["t", "err_xz", "err_x", "err_a"].map(String::from).to_vec(),
        &trace,
        |s| vec![s.t, s.err_xz, s.err_x, s.err_a],
    )?;
    plot_file(
        &dir.join("bias.csv"),
        [vec!["t".to_string()], idx("ahat_"), idx("a_")].concat(),
        &trace,
        |s| {
            [
                &[s.t][..],
                s.output.a_hat.as_slice(),
                trace.scenario.a_true.as_slice(),
            ]
            .concat()
        },
    )?;

    writeln!(out, "wrote {}", dir.display()).map_err(out_err)?;
    summary(&trace, out)?;
    if let Some(e) = fault(&trace) {
        return Err(e);
    }
    Ok(exit::SUCCESS)
}

fn plot_file(
    path: &Path,
    head: Vec<String>,
    trace: &SimulationTrace<f64>,
    row: impl Fn(&bearing_core::TraceSample<f64>) -> Vec<f64>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let e = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&head).map_err(e)?;
    for s in &trace.samples {
        w.write_record(row(s).iter().map(|v| format!("{v:.16e}")))
            .map_err(e)?;
    }
    w.flush().map_err(out_err)
}

/// Trace plus the scenario behind it: from `--config`, the JSON file, or estimated.
fn resolve_trace(path: &Path, config: Option<&Path>) -> Result<SimulationTrace<f64>, CliError> {
    let loaded = load_trace(path)?;
    let scenario = match (config, loaded.scenario) {
        (Some(c), _) => RunConfig::load(c)?.scenario.to_scenario()?,
        (None, Some(s)) => s,
        (None, None) => loaded.table.estimate_scenario()?,
    };
    let h = loaded.table.step()?;
    if (h - scenario.h).abs() > 1e-9 * scenario.h {
        return Err(CliError::Input(format!(
            "trace step {h} differs from config h = {}",
            scenario.h
        )));
    }
    loaded.table.into_trace(&scenario)
}

pub fn cmd_pe_check(
    path: &Path,
    delta: f64,
    epsilon: f64,
    config: Option<&Path>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let trace = resolve_trace(path, config)?;
    let sig = DirectionSignal::bearing(&trace).map_err(|e| CliError::Input(e.to_string()))?;
    let rep = pe_report(&sig, delta, epsilon, trace.scenario.gains.k)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    if let Some(dir) = out_dir {
        let mut w = create(&dir.join("pe_report.json"))?;
        w.write_all(json.as_bytes()).map_err(out_err)?;
    }
    writeln!(out, "{json}").map_err(out_err)?;
    Ok(if rep.passes_integral && rep.passes_derivative {
        exit::SUCCESS
    } else {
        exit::ANALYSIS_FAILURE
    })
}

pub fn cmd_analyze(
    path: &Path,
    config: Option<&Path>,
    opts: &BoundOptions<f64>,
    format: ReportFormat,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let trace = resolve_trace(path, config)?;
    let (rep, _) = bound_report(&trace, opts).map_err(|e| CliError::Input(e.to_string()))?;
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    if let Some(dir) = out_dir {
        let mut w = create(&dir.join("bound_report.json"))?;
        w.write_all(json.as_bytes()).map_err(out_err)?;
    }
    match format {
        ReportFormat::Json => writeln!(out, "{json}").map_err(out_err)?,
        ReportFormat::Table => bound_table(&rep, out)?,
    }
    Ok(if rep.passed() {
        exit::SUCCESS
    } else {
        exit::ANALYSIS_FAILURE
    })
}

fn late(v: Option<f64>, h: Horizon) -> String {
    match (v, h) {
        (Some(v), _) => format!("{v:.6e}"),
        (None, Horizon::InsufficientHorizon) => "insufficient horizon".into(),
        (None, _) => "n/a".into(),
    }
}

pub fn bound_table(rep: &BoundReport<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    let rows = [
        (
            "gamma (1/s)",
            format!("{:.6e}", rep.gamma_theory),
            opt(rep.gamma_empirical),
        ),
        (
            "ultimate bound |a|/gamma (m)",
            format!("{:.6e}", rep.ultimate_bound_theory),
            late(rep.ultimate_bound_observed, rep.late_time),
        ),
        (
            "late det M floor",
            format!("{:.6e}", rep.det_floor_theory),
            late(rep.det_late_min_observed, rep.late_time),
        ),
        (
            "min det M",
            "> 0".into(),
            format!("{:.6e}", rep.det_min_observed),
        ),
        (
            "condition number",
            format!("{:.6e}", rep.cond_bound_theory),
            format!("{:.6e}", rep.cond_max_observed),
        ),
        (
            "jacobi residual",
            "1e-3".into(),
            opt(rep.jacobi_max_residual),
        ),
        (
            "transition pairs",
            rep.transition_pairs_checked.to_string(),
            "checked".into(),
        ),
    ];
    writeln!(out, "{:<30} {:>22} {:>22}", "bound", "theory", "observed").map_err(out_err)?;
    for (name, theory, observed) in rows {
        writeln!(out, "{name:<30} {theory:>22} {observed:>22}").map_err(out_err)?;
    }
    writeln!(out, "violations: {}", rep.violations.len()).map_err(out_err)?;
    for v in rep.violations.iter().take(20) {
        writeln!(
            out,
            "  t = {:<12} {:<18} margin {:.6e}",
            v.t,
            format!("{:?}", v.bound),
            v.margin
        )
        .map_err(out_err)?;
    }
    if rep.violations.len() > 20 {
        writeln!(out, "  ... {} more", rep.violations.len() - 20).map_err(out_err)?;
    }
    writeln!(
        out,
        "result: {}",
        if rep.passed() { "PASS" } else { "FAIL" }
    )
    .map_err(out_err)
}
