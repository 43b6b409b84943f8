//! Command line front end: `ik`, `shape-reg`, `tip-track` and `check`.
//!
//! Exit codes: 0 on success, 1 for invalid arguments or configuration, 2 for
//! numerical or IO failures. Errors go to stderr as `ERROR:<code>: message`.

pub mod config;
pub mod csv;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checks;
use crate::error::{Error, Result};
use crate::sim::{run_ik_experiment, run_shape_regulation, run_tip_tracking, ControllerKind};

pub use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "pcs-rod", version, about = "Piecewise constant strain rod: inverse kinematics and quasi-static control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the tip-pose inverse kinematics from two initial guesses.
    Ik(Common),
    /// Strain-space set-point regulation.
    ShapeReg(Common),
    /// Circular tip tracking.
    TipTrack {
        #[command(flatten)]
        common: Common,
        /// Controller; overrides `sim.controller`.
        #[arg(long, value_parser = ["strain", "task"])]
        mode: Option<String>,
    },
    /// Run the numerical invariant checks on the configured rod.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("ERROR:config: {}", e.to_string().trim_end());
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("ERROR:{}: {e}", e.code());
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.code() == "config" {
        1
    } else {
        2
    }
}

fn output_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    if cfg.output.csv || cfg.output.svg {
        std::fs::create_dir_all(&dir)?;
    }
    Ok(dir)
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::Ik(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            let dir = output_dir(&cfg, &c.out)?;
            ik(&cfg, &dir)
        }
        Command::ShapeReg(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            let dir = output_dir(&cfg, &c.out)?;
            shape_reg(&cfg, &dir)
        }
        Command::TipTrack { common, mode } => {
            let mut cfg = ExperimentConfig::load(&common.config)?;
            if let Some(m) = mode {
                cfg.sim.controller = m.parse()?;
            }
            let dir = output_dir(&cfg, &common.out)?;
            tip_track(&cfg, &dir)
        }
        Command::Check { config, seed } => {
            let spec = match config {
                Some(p) => ExperimentConfig::load(&p)?.rod,
                None => crate::rod::RodSpec::soft_cantilever(2)?,
            };
            check(&spec, seed)
        }
    }
}

fn join_f64(values: impl IntoIterator<Item = f64>, prec: usize) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:.prec$e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Inverse kinematics experiment; writes one shape CSV per solution.
pub fn ik(cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
    let report = run_ik_experiment(&cfg.rod, &cfg.ik, cfg.sim.samples_per_section)?;
    if cfg.output.csv {
        for (i, s) in report.solutions.iter().enumerate() {
            csv::write_shape_csv(&s.shape, &dir.join(format!("ik_solution_{}_shape.csv", i + 1)))?;
        }
    }
    if cfg.output.svg {
        let shapes: Vec<_> = report
            .solutions
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("guess {}: {:.4} J", i + 1, s.energy), s.shape.clone()))
            .collect();
        svg::shape_plot("Inverse kinematics solutions", &shapes).write(&dir.join("ik_shape_xy.svg"))?;
    }
    let sols = &report.solutions;
    Ok(format!(
        "ik: converged={} iterations={} final_error={} energy_J={} shape_separation_m={:.4e}",
        sols.iter().all(|s| s.result.converged),
        sols.iter().map(|s| s.result.iterations.to_string()).collect::<Vec<_>>().join(","),
        join_f64(sols.iter().map(|s| s.result.final_error), 3),
        sols.iter().map(|s| format!("{:.6}", s.energy)).collect::<Vec<_>>().join(","),
        report.shape_separation()
    ))
}

pub fn shape_reg(cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
    let q_d = cfg.target_strain()?;
    let report = run_shape_regulation(&cfg.rod, &q_d, &cfg.strain_gains()?, &cfg.sim)?;
    let trace = &report.trace;
    if cfg.output.csv {
        csv::write_trace_csv(trace, &dir.join("shape_reg_trace.csv"))?;
        for (t, shape) in &report.snapshots {
            csv::write_shape_csv(shape, &dir.join(format!("shape_reg_shape_t{t:.2}.csv")))?;
        }
    }
    if cfg.output.svg {
        let shapes: Vec<_> = report
            .snapshots
            .iter()
            .map(|(t, s)| (format!("t = {t:.1} s"), s.clone()))
            .collect();
        svg::shape_plot("Shape regulation", &shapes).write(&dir.join("shape_reg_shape_xy.svg"))?;
        svg::wrench_plot(trace).write(&dir.join("shape_reg_wrench.svg"))?;
        svg::error_plot(trace, "strain error norm").write(&dir.join("shape_reg_error.svg"))?;
    }
    let e0 = trace.errors[0];
    let decay = trace
        .index_near(2.5)
        .filter(|&i| (trace.times[i] - 2.5).abs() <= 0.5 * cfg.sim.dt)
        .map(|i| format!(" error_ratio_2.5s={:.4e}", trace.errors[i] / e0))
        .unwrap_or_default();
    Ok(format!(
        "shape-reg: samples={} final_error={:.4e} energy_J={:.6}{decay}",
        trace.len(),
        trace.errors.last().copied().unwrap_or(f64::NAN),
        trace.energies.last().copied().unwrap_or(f64::NAN),
    ))
}

pub fn tip_track(cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
    let report = run_tip_tracking(
        &cfg.rod,
        &cfg.sim,
        &cfg.trajectory,
        &cfg.strain_gains()?,
        &cfg.task_gains()?,
        &cfg.ik,
    )?;
    let mode = match cfg.sim.controller {
        ControllerKind::Strain => "strain",
        ControllerKind::Task => "task",
    };
    let trace = &report.trace;
    if cfg.output.csv {
        csv::write_trace_csv(trace, &dir.join(format!("tip_track_{mode}_trace.csv")))?;
    }
    if cfg.output.svg {
        svg::tip_path_plot(trace, &report.desired).write(&dir.join(format!("tip_track_{mode}_tip_path.svg")))?;
        svg::wrench_plot(trace).write(&dir.join(format!("tip_track_{mode}_wrench.svg")))?;
        let label = match cfg.sim.controller {
            ControllerKind::Strain => "strain error norm",
            ControllerKind::Task => "tip position error (m)",
        };
        svg::error_plot(trace, label).write(&dir.join(format!("tip_track_{mode}_error.svg")))?;
    }
    let settle = (3.0 / cfg.sim.dt).round() as usize;
    let after = report.stats.step_errors.iter().skip(settle + 1).copied().fold(f64::NAN, f64::max);
    let mut line = format!(
        "tip-track ({mode}): steps={} final_tip_error_m={:.4e} max_tip_error_after_3s_m={:.4e} energy_J={:.6}",
        report.stats.step_errors.len().saturating_sub(1),
        report.stats.step_errors.last().copied().unwrap_or(f64::NAN),
        after,
        trace.energies.last().copied().unwrap_or(f64::NAN),
    );
    match cfg.sim.controller {
        ControllerKind::Task => line += &format!(" max_residual={:.3e}", report.stats.max_residual),
        ControllerKind::Strain => {
            let warm = report.stats.ik_iterations.iter().skip(1).max().copied().unwrap_or(0);
            line += &format!(" max_warm_ik_iterations={warm}");
        }
    }
    Ok(line)
}

pub fn check(spec: &crate::rod::RodSpec, seed: u64) -> Result<String> {
    let outcomes = checks::run_all(spec, seed)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(format!("check: {} of {} passed", outcomes.len(), outcomes.len()))
    } else {
        Err(Error::CheckFailed(failed.join(", ")))
    }
}
