use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use amot_core::driver::InitialCondition;
use amot_core::driver::{parse_config, require_self_check, run_with, Mode, Overrides};
use amot_core::error::AmotError;
use amot_core::velocity::{FieldKind, VelocityField};

#[derive(Parser)]
#[command(
    name = "amot-ac",
    version,
    about = "Adaptive Rosenbrock/SIPG solver for the advective Allen-Cahn equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a simulation.
    Run(RunArgs),
    /// Check the Rosenbrock tableau, quadrature rules and core invariants.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Sheering,
    Expanding,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Uniform,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    experiment: Option<ExperimentArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Cells per side of the uniform start mesh.
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Snapshot cadence in accepted steps (0 disables snapshots).
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Affine velocity for the custom experiment: `vx0,vx_x,vx_y,vy0,vy_x,vy_y`.
    #[arg(long, allow_hyphen_values = true)]
    velocity: Option<String>,
    /// Indicator box of the initial condition: `xmin,xmax,ymin,ymax`.
    #[arg(long, allow_hyphen_values = true)]
    ic_box: Option<String>,
    /// Passes through the adaptive loop allowed per time step.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Suppress per-step progress lines.
    #[arg(long)]
    quiet: bool,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, AmotError> {
        Ok(Overrides {
            experiment: self.experiment.map(|e| match e {
                ExperimentArg::Sheering => FieldKind::Sheering,
                ExperimentArg::Expanding => FieldKind::Expanding,
                ExperimentArg::Custom => FieldKind::Custom,
            }),
            mode: self.mode.map(|m| match m {
                ModeArg::Adaptive => Mode::Adaptive,
                ModeArg::Uniform => Mode::Uniform,
            }),
            tol: self.tol,
            alpha: self.alpha,
            epsilon: self.epsilon,
            sigma: self.sigma,
            theta: self.theta,
            tau0: self.tau0,
            tfinal: self.tfinal,
            mesh_n: self.mesh_n,
            snapshot_every: self.snapshot_every,
            out: self.out.clone(),
            velocity: self.velocity.as_deref().map(VelocityField::parse_affine).transpose()?,
            ic_box: self.ic_box.as_deref().map(InitialCondition::parse_box).transpose()?,
            max_iterations: self.max_iterations,
        })
    }
}

fn run(args: RunArgs) -> Result<(), AmotError> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| AmotError::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_config(&text, path)?
        }
        None => Overrides::default(),
    };
    let mut cfg = base.merge(args.overrides()?).into_config()?;
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(PathBuf::from("amot-out"));
    }
    let out = cfg.out_dir.clone().unwrap_or_default();
    let quiet = args.quiet;
    let summary = run_with(cfg, |r| {
        if !quiet {
            eprintln!(
                "step {:>5}  t = {:.6}  tau = {:.3e}  dofs = {:>7}  eps_T = {:.2e}  eps_S = {:.2e}  rejects = {}/{}  u in [{:.4}, {:.4}]",
                r.k, r.t, r.tau, r.dofs, r.eps_t, r.eps_s, r.rejects_t, r.rejects_s, r.u_min, r.u_max
            );
        }
    })?;
    println!(
        "done: {} steps to t = {} in {:.1} s, max dofs {}, u in [{:.4}, {:.4}], output in {}",
        summary.steps(),
        summary.final_time(),
        summary.wall_ms / 1e3,
        summary.max_dofs(),
        summary.extremes.min,
        summary.extremes.max,
        out.display()
    );
    Ok(())
}

fn validate() -> Result<(), AmotError> {
    for line in require_self_check()? {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate => validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e
                .to_string()
                .replace('\\', "\\\\")
                .replace('"', "\\\"")
                .replace('\n', " ");
            eprintln!("error: kind={} msg=\"{msg}\"", e.kind());
            ExitCode::FAILURE
        }
    }
}
