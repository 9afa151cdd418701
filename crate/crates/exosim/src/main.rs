//! Command-line front end.
//!
//! Data-only interface: every subcommand reads JSON configs or CSV sessions
//! and writes CSV/JSON artifacts for external plotting. Exit codes: 0
//! success, 1 configuration or validation failure, 2 runtime instability,
//! 3 I/O failure.

use clap::{Args, Parser, Subcommand};
use exosim::calibrate::calibrate_passive;
use exosim::config::{load_scenario, load_sweep};
use exosim::dynamics::simulate;
use exosim::error::Error;
use exosim::metrics::compute_metrics;
use exosim::signals::session::{load_session, process_session, PipelineParams};
use exosim::sweep::run_sweep;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "exosim", version, about = "Exoskeleton-finger co-simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory; falls back to $EXOSIM_OUT, then the working
    /// directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> exosim::Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| std::env::var_os("EXOSIM_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and metrics.json.
    Simulate {
        /// Scenario config (JSON).
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a controller parameter sweep; writes sweep.csv.
    Sweep {
        /// Sweep grid config (JSON).
        config: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Find the passive drive damping reproducing a target peak lateral
    /// force; writes calibrated.json (a config overlay).
    Calibrate {
        /// Base scenario config (JSON).
        config: PathBuf,
        /// Target peak |f_z| (N).
        #[arg(long)]
        target: f64,
        /// Relative convergence tolerance.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Process a recorded session directory; writes cycle_averages.csv.
    Signals {
        /// Directory with manifest.json, kinetics.csv and emg.csv.
        session: PathBuf,
        #[command(flatten)]
        params: SignalFlags,
        #[command(flatten)]
        out: OutDir,
    },
    /// Parse and validate a scenario config, reporting every offending key.
    Validate {
        /// Scenario config (JSON).
        config: PathBuf,
    },
    /// Print a gnuplot column layout for a CSV written by this tool.
    Layout {
        csv: PathBuf,
    },
}

#[derive(Args)]
struct SignalFlags {
    /// Common analysis rate (Hz).
    #[arg(long)]
    target_fs: Option<f64>,
    /// Butterworth filter order.
    #[arg(long)]
    filter_order: Option<u32>,
    /// Position lowpass cutoff (Hz).
    #[arg(long)]
    position_cutoff: Option<f64>,
    /// Force lowpass cutoff (Hz).
    #[arg(long)]
    force_cutoff: Option<f64>,
    /// EMG highpass cutoff at the native rate (Hz).
    #[arg(long)]
    emg_highpass: Option<f64>,
    /// EMG lowpass cutoff at the native rate (Hz).
    #[arg(long)]
    emg_lowpass: Option<f64>,
    /// RMS envelope window (samples at the analysis rate).
    #[arg(long)]
    rms_window: Option<usize>,
    /// RMS envelope overlap (samples).
    #[arg(long)]
    rms_overlap: Option<usize>,
    /// Leading samples averaged for force bias removal; 0 disables.
    #[arg(long)]
    bias_samples: Option<usize>,
    /// Minimum separation between cycle boundaries (s).
    #[arg(long)]
    min_separation: Option<f64>,
    /// Cycle-boundary prominence threshold, as a fraction of motion range.
    #[arg(long)]
    prominence: Option<f64>,
}

impl SignalFlags {
    fn apply(&self) -> PipelineParams {
        let mut p = PipelineParams::default();
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { p.$field = v; })*
            };
        }
        set!(
            target_fs => target_fs,
            filter_order => filter_order,
            position_cutoff => position_cutoff,
            force_cutoff => force_cutoff,
            emg_highpass => emg_highpass,
            emg_lowpass => emg_lowpass,
            rms_window => rms_window,
            rms_overlap => rms_overlap,
            bias_samples => bias_samples,
            min_separation => min_separation_s,
            prominence => prominence_fraction
        );
        p
    }
}

/// Exit code for an error: 1 configuration/validation, 2 runtime
/// instability, 3 I/O.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) | Error::IkSingularity { .. } | Error::Unstable { .. } => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn cmd_simulate(config: &Path, out: &OutDir) -> exosim::Result<u8> {
    let scenario = load_scenario(config)?;
    let dir = out.resolve()?;
    let trace = simulate(&scenario)?;
    let metrics = compute_metrics(&trace, None);

    std::fs::write(dir.join("trace.csv"), trace.to_csv_string())?;
    let mut doc = serde_json::to_string_pretty(&metrics)?;
    doc.push('\n');
    std::fs::write(dir.join("metrics.json"), doc)?;

    println!(
        "wrote {} samples to {}; peak |f_z| = {:.4} N",
        trace.len(),
        dir.join("trace.csv").display(),
        metrics.peak_fz
    );
    if trace.unstable {
        eprintln!(
            "simulation went unstable at t = {:.6} s",
            trace.unstable_time.unwrap_or(f64::NAN)
        );
        return Ok(2);
    }
    Ok(0)
}

fn cmd_sweep(config: &Path, jobs: Option<usize>, out: &OutDir) -> exosim::Result<u8> {
    let grid = load_sweep(config)?;
    let dir = out.resolve()?;
    let table = run_sweep(&grid, jobs)?;
    let path = dir.join("sweep.csv");
    table.write_csv(&path)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(0)
}

fn cmd_calibrate(
    config: &Path,
    target: f64,
    tolerance: f64,
    out: &OutDir,
) -> exosim::Result<u8> {
    let scenario = load_scenario(config)?;
    let dir = out.resolve()?;
    let result = calibrate_passive(&scenario, target, tolerance)?;

    // The overlay is itself a loadable scenario config fragment.
    let overlay = json!({ "assembly": { "passive_damping": result.c_passive } });
    let mut doc = serde_json::to_string_pretty(&overlay)?;
    doc.push('\n');
    std::fs::write(dir.join("calibrated.json"), doc)?;

    println!(
        "calibrated passive_damping = {:.6} N*m*s/rad \
         (peak |f_z| = {:.4} N after {} iterations)",
        result.c_passive, result.achieved_peak, result.iterations
    );
    Ok(0)
}

fn cmd_signals(session: &Path, flags: &SignalFlags, out: &OutDir) -> exosim::Result<u8> {
    let data = load_session(session)?;
    let dir = out.resolve()?;
    let processed = process_session(&data, &flags.apply())?;

    let mut buf = Vec::new();
    processed.write_cycle_averages_csv(&mut buf)?;
    std::fs::write(dir.join("cycle_averages.csv"), buf)?;

    println!(
        "{} complete cycles, mean duration {:.4} s, EMG reference {:.6}",
        processed.n_cycles(),
        processed.mean_cycle_duration(),
        processed.emg_reference
    );
    Ok(0)
}

fn cmd_validate(config: &Path) -> exosim::Result<u8> {
    load_scenario(config)?;
    println!("{}: ok", config.display());
    Ok(0)
}

fn cmd_layout(csv: &Path) -> exosim::Result<u8> {
    let content = std::fs::read_to_string(csv)?;
    let header = content
        .lines()
        .next()
        .ok_or_else(|| Error::Validation(format!("{}: empty file", csv.display())))?;
    let mut out = format!("# gnuplot column layout for {}\n", csv.display());
    for (i, name) in header.split(',').enumerate() {
        out.push_str(&format!("# {:>3}  {}\n", i + 1, name));
    }
    if let Some(second) = header.split(',').nth(1) {
        out.push_str(&format!(
            "# example: plot '{}' using 1:2 with lines title '{}'\n",
            csv.display(),
            second
        ));
    }
    // A closed pipe (e.g. piping into head) is not an error.
    use std::io::Write as _;
    match std::io::stdout().write_all(out.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(0),
    }
}

fn run(cli: &Cli) -> exosim::Result<u8> {
    match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Sweep { config, jobs, out } => cmd_sweep(config, *jobs, out),
        Command::Calibrate {
            config,
            target,
            tolerance,
            out,
        } => cmd_calibrate(config, *target, *tolerance, out),
        Command::Signals {
            session,
            params,
            out,
        } => cmd_signals(session, params, out),
        Command::Validate { config } => cmd_validate(config),
        Command::Layout { csv } => cmd_layout(csv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
