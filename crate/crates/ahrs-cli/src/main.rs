//! `ahrs` — replay flight logs through the attitude estimators,
//! synthesize corrupted sensor logs, and run bias/noise tolerance
//! sweeps.
//!
//! Exit codes: 0 success, 1 malformed input data (message names the
//! offending line), 2 configuration/script/spec validation failure,
//! 3 estimator divergence during replay.

mod config;
mod csvio;
mod script;
mod sweepspec;

use ahrs_core::{EstimatorKind, Pipeline, StepAction};
use ahrs_sim::{
    corrupt, generate_trajectory, tolerance_sweep, EvalConfig, SweptKind, TruthSample,
};
use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ahrs",
    about = "Attitude estimation harness: replay, simulate, sweep",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Ukf,
    Ekf,
    /// Run both estimators (sweep mode only).
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a sensor log through the configured estimator.
    Replay {
        /// Input sensor log CSV.
        log: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output attitude CSV.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured estimator.
        #[arg(long)]
        estimator: Option<EstimatorArg>,
    },
    /// Generate a truth trajectory from a maneuver script and corrupt
    /// it into a sensor log.
    Simulate {
        /// Maneuver script; pass `canonical` for the built-in
        /// evaluation flight.
        script: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output truth+sensor log CSV.
        #[arg(long)]
        out: PathBuf,
        /// Override the corruption seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bisect per-channel bias/noise tolerances.
    Sweep {
        /// Sweep specification file.
        spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output tolerance table CSV.
        #[arg(long)]
        out: PathBuf,
        /// Estimator(s) to sweep; defaults to both.
        #[arg(long)]
        estimator: Option<EstimatorArg>,
        /// Override the sweep seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Error carrying the process exit code.
struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Replay {
            log,
            config,
            out,
            estimator,
        } => replay(&log, &config, &out, estimator),
        Command::Simulate {
            script,
            config,
            out,
            seed,
        } => simulate(&script, &config, &out, seed),
        Command::Sweep {
            spec,
            config,
            out,
            estimator,
            seed,
        } => sweep(&spec, &config, &out, estimator, seed),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliFailure> {
    RunConfig::from_file(path).map_err(|e| CliFailure::new(2, format!("config: {e}")))
}

fn replay(
    log_path: &Path,
    config_path: &Path,
    out_path: &Path,
    estimator: Option<EstimatorArg>,
) -> Result<(), CliFailure> {
    let mut cfg = load_config(config_path)?;
    match estimator {
        Some(EstimatorArg::Ukf) => cfg.pipeline.estimator = EstimatorKind::Ukf,
        Some(EstimatorArg::Ekf) => cfg.pipeline.estimator = EstimatorKind::Ekf,
        Some(EstimatorArg::Both) => {
            return Err(CliFailure::new(2, "replay runs one estimator at a time"));
        }
        None => {}
    }

    let text = std::fs::read_to_string(log_path)
        .map_err(|e| CliFailure::new(1, format!("cannot read {}: {e}", log_path.display())))?;
    let rows = csvio::parse_sensor_log(&text)
        .map_err(|e| CliFailure::new(1, format!("{}: {e}", log_path.display())))?;

    let mut pipeline = Pipeline::new(cfg.pipeline);
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(csvio::REPLAY_HEADER);
    out.push('\n');

    let mut corrections = 0u32;
    let mut skips = 0u32;
    let mut rejected = 0u32;
    let mut n_err = 0u64;
    let mut sum_sq = [0.0f64; 3];
    let mut max_err = [0.0f64; 3];
    let mut diverged = false;
    let divergence_rad = cfg.eval.divergence_deg.to_radians();

    for row in &rows {
        let action = match pipeline.step(&row.frame) {
            Ok(action) => action,
            Err(e) => {
                eprintln!("warning: {}:{}: frame rejected: {e}", log_path.display(), row.line);
                rejected += 1;
                continue;
            }
        };
        let (corrected, reason) = match action {
            StepAction::Propagate => (false, None),
            StepAction::PropagateAndCorrect(_) => {
                corrections += 1;
                (true, None)
            }
            StepAction::PropagateSkipCorrection(reason) => {
                skips += 1;
                (false, Some(reason.as_str()))
            }
        };
        let state = pipeline.state().expect("state exists after a step");
        let euler = state.attitude().to_euler();
        csvio::render_replay_row(&mut out, row.frame.t, euler, state.bias(), corrected, reason);

        if let Some(truth) = row.truth {
            let errs = [
                ahrs_sim::angle_diff(euler.roll, truth.roll),
                ahrs_sim::angle_diff(euler.pitch, truth.pitch),
                ahrs_sim::angle_diff(euler.yaw, truth.yaw),
            ];
            if row.frame.t >= cfg.eval.settle_s {
                for (i, e) in errs.iter().enumerate() {
                    max_err[i] = max_err[i].max(e.abs());
                    sum_sq[i] += e * e;
                }
                n_err += 1;
            }
            if errs.iter().any(|e| e.abs() > divergence_rad) {
                diverged = true;
            }
        }
    }
    if pipeline.hard_failures() >= 2 {
        diverged = true;
    }

    csvio::write_file(out_path, &out)
        .map_err(|e| CliFailure::new(1, format!("cannot write {}: {e}", out_path.display())))?;

    // Summary block.
    println!("frames:       {}", rows.len());
    println!("rejected:     {rejected}");
    println!("corrections:  {corrections}");
    println!("skips:        {skips}");
    if n_err > 0 {
        let names = ["roll", "pitch", "yaw"];
        println!("errors vs truth after {:.0} s settle:", cfg.eval.settle_s);
        for i in 0..3 {
            let rms = (sum_sq[i] / n_err as f64).sqrt();
            println!(
                "  {:<5} max {:.6} rad ({:.3} deg)   rms {:.6} rad ({:.3} deg)",
                names[i],
                max_err[i],
                max_err[i].to_degrees(),
                rms,
                rms.to_degrees()
            );
        }
    }
    println!("diverged:     {diverged}");

    if diverged {
        return Err(CliFailure::new(3, "estimator diverged during replay"));
    }
    Ok(())
}

fn load_script(path: &Path) -> Result<Vec<ahrs_sim::Maneuver>, CliFailure> {
    if path.as_os_str() == "canonical" {
        return Ok(ahrs_sim::canonical_flight_script());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::new(2, format!("cannot read {}: {e}", path.display())))?;
    script::parse_script(&text).map_err(|e| CliFailure::new(2, format!("{}: {e}", path.display())))
}

fn simulate(
    script_path: &Path,
    config_path: &Path,
    out_path: &Path,
    seed: Option<u64>,
) -> Result<(), CliFailure> {
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = seed {
        config::override_seed(&mut cfg, seed);
    }
    let maneuvers = load_script(script_path)?;
    let truth: Vec<TruthSample> = generate_trajectory(&maneuvers, &cfg.world)
        .map_err(|e| CliFailure::new(2, format!("{e}")))?;
    let frames = corrupt(&truth, &cfg.corruption);
    let text = csvio::render_sensor_log(&truth, &frames);
    csvio::write_file(out_path, &text)
        .map_err(|e| CliFailure::new(1, format!("cannot write {}: {e}", out_path.display())))?;
    println!(
        "simulated {} frames over {:.1} s (seed {})",
        frames.len(),
        truth.last().map(|s| s.t).unwrap_or(0.0),
        cfg.corruption.seed
    );
    Ok(())
}

fn sweep(
    spec_path: &Path,
    config_path: &Path,
    out_path: &Path,
    estimator: Option<EstimatorArg>,
    seed: Option<u64>,
) -> Result<(), CliFailure> {
    let cfg = load_config(config_path)?;
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliFailure::new(2, format!("cannot read {}: {e}", spec_path.display())))?;
    let requests = sweepspec::parse_sweep_spec(&text)
        .map_err(|e| CliFailure::new(2, format!("{}: {e}", spec_path.display())))?;

    let kinds: &[EstimatorKind] = match estimator.unwrap_or(EstimatorArg::Both) {
        EstimatorArg::Ukf => &[EstimatorKind::Ukf],
        EstimatorArg::Ekf => &[EstimatorKind::Ekf],
        EstimatorArg::Both => &[EstimatorKind::Ukf, EstimatorKind::Ekf],
    };
    let sweep_seed = seed.unwrap_or(cfg.corruption.seed);

    let truth = generate_trajectory(&ahrs_sim::canonical_flight_script(), &cfg.world)
        .map_err(|e| CliFailure::new(2, format!("{e}")))?;
    let eval: EvalConfig = cfg.eval;

    let mut out = String::from(
        "channel,kind,estimator,tolerance,unit,trials,pass_fraction,evaluations,non_monotone\n",
    );
    for request in &requests {
        for kind in kinds {
            let mut pipeline_cfg = cfg.pipeline;
            pipeline_cfg.estimator = *kind;
            let spec = request.to_spec(sweep_seed);
            let outcome = tolerance_sweep(&spec, &truth, &pipeline_cfg, &eval);
            let (unit, scale) = sweepspec::channel_unit(request.channel);
            let estimator_name = match kind {
                EstimatorKind::Ukf => "ukf",
                EstimatorKind::Ekf => "ekf",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                request.channel.as_str(),
                match request.kind {
                    SweptKind::Bias => "bias",
                    SweptKind::Noise => "noise",
                },
                estimator_name,
                outcome.tolerance / scale,
                unit,
                request.trials,
                outcome.pass_fraction_at_tolerance,
                outcome.evaluations.len(),
                u8::from(outcome.non_monotone),
            );
            println!(
                "{} {} {}: tolerance {:.4} {} (pass fraction {:.2})",
                estimator_name,
                request.channel.as_str(),
                match request.kind {
                    SweptKind::Bias => "bias",
                    SweptKind::Noise => "noise",
                },
                outcome.tolerance / scale,
                unit,
                outcome.pass_fraction_at_tolerance
            );
        }
    }
    csvio::write_file(out_path, &out)
        .map_err(|e| CliFailure::new(1, format!("cannot write {}: {e}", out_path.display())))?;
    Ok(())
}
