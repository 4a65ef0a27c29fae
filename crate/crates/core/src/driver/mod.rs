//! The adaptive time-layer loop, the uniform baseline, and run orchestration.

mod config;
mod output;
mod selfcheck;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub use config::{parse_config, Overrides};
pub use output::{read_vtk, write_vtk, Output, VtkData, CSV_HEADER};
pub use selfcheck::{require_self_check, self_check, CheckLine, CheckStatus};

use crate::adapt::{
    bulk_mark, mark_space, propose_tau, residual_indicator, spatial_estimator, temporal_estimator, AmotConfig, Problem,
};
use crate::dgspace::{project, transfer, DgFunction};
use crate::error::{AmotError, Result};
use crate::mesh::{Mesh, TriKey};
use crate::ros3p::{step, StepStats};
use crate::sipg::{diffusion_coercivity, ModelParams};
use crate::velocity::{FieldKind, VelocityField};

/// Red subdivision levels used to integrate the initial condition on cut elements.
const IC_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Adaptive,
    Uniform,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::Uniform => "uniform",
        })
    }
}

impl FromStr for Mode {
    type Err = AmotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "uniform" => Ok(Mode::Uniform),
            _ => Err(AmotError::InvalidArgument(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// 1 on `[lo, hi]` (axis-aligned), 0 elsewhere.
    Indicator {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Constant(f64),
}

impl InitialCondition {
    pub fn square(half: f64) -> Self {
        InitialCondition::Indicator {
            lo: [-half, -half],
            hi: [half, half],
        }
    }

    /// Parses `xmin,xmax,ymin,ymax`.
    pub fn parse_box(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| AmotError::InvalidArgument(format!("initial box '{s}': {e}")))?;
        match v[..] {
            [x0, x1, y0, y1] if x0 < x1 && y0 < y1 => Ok(InitialCondition::Indicator {
                lo: [x0, y0],
                hi: [x1, y1],
            }),
            _ => Err(AmotError::InvalidArgument(format!(
                "initial box '{s}' must be xmin,xmax,ymin,ymax with min < max"
            ))),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            InitialCondition::Indicator { lo, hi } => {
                if x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] {
                    1.0
                } else {
                    0.0
                }
            }
            InitialCondition::Constant(c) => c,
        }
    }

    /// Element-wise L2 projection; triangles cut by the indicator boundary are
    /// integrated on a red-refined submesh.
    pub fn project(&self, mesh: Arc<Mesh>) -> DgFunction {
        match *self {
            InitialCondition::Constant(c) => DgFunction::constant(mesh, c),
            InitialCondition::Indicator { lo, hi } => {
                let levels = |_: usize, p: &[[f64; 2]; 3]| {
                    let inside = p
                        .iter()
                        .all(|q| q[0] >= lo[0] && q[0] <= hi[0] && q[1] >= lo[1] && q[1] <= hi[1]);
                    let min = [0, 1].map(|d| p.iter().map(|q| q[d]).fold(f64::INFINITY, f64::min));
                    let max = [0, 1].map(|d| p.iter().map(|q| q[d]).fold(f64::NEG_INFINITY, f64::max));
                    let disjoint = (0..2).any(|d| max[d] <= lo[d] || min[d] >= hi[d]);
                    if inside || disjoint {
                        0
                    } else {
                        IC_LEVELS
                    }
                };
                project(mesh, |x, y| self.value(x, y), levels)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: FieldKind,
    pub field: VelocityField,
    pub initial: InitialCondition,
    pub t_final: f64,
    pub epsilon: f64,
}

impl Experiment {
    pub fn sheering() -> Self {
        Experiment {
            kind: FieldKind::Sheering,
            field: VelocityField::sheering(),
            initial: InitialCondition::square(0.1),
            t_final: 0.06,
            epsilon: 0.01,
        }
    }

    pub fn expanding() -> Self {
        Experiment {
            kind: FieldKind::Expanding,
            field: VelocityField::expanding(),
            initial: InitialCondition::square(0.3),
            t_final: 0.06,
            epsilon: 0.01,
        }
    }

    pub fn custom(field: VelocityField, initial: InitialCondition) -> Self {
        Experiment {
            kind: FieldKind::Custom,
            field,
            initial,
            t_final: 0.06,
            epsilon: 0.01,
        }
    }

    pub fn preset(kind: FieldKind) -> Self {
        match kind {
            FieldKind::Sheering => Self::sheering(),
            FieldKind::Expanding => Self::expanding(),
            FieldKind::Custom => Self::custom(VelocityField::zero(), InitialCondition::square(0.1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub mode: Mode,
    pub amot: AmotConfig,
    pub sigma: f64,
    /// Cells per side of the uniform start mesh.
    pub mesh_n: usize,
    /// Fixed step of the uniform mode.
    pub uniform_tau: f64,
    /// Write a snapshot every this many accepted steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub out_dir: Option<PathBuf>,
    /// Passes through the adaptive loop allowed per time step.
    pub max_iterations: usize,
}

impl RunConfig {
    pub fn new(experiment: Experiment, mode: Mode) -> Self {
        let amot = AmotConfig {
            tau_max: experiment.t_final / 10.0,
            ..AmotConfig::default()
        };
        RunConfig {
            experiment,
            mode,
            amot,
            sigma: 10.0,
            mesh_n: 64,
            uniform_tau: 1e-3,
            snapshot_every: 1,
            out_dir: None,
            max_iterations: 50,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams::new(self.experiment.epsilon, self.sigma)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.amot.validate()?;
        let t = self.experiment.t_final;
        if !(t > 0.0 && t.is_finite()) {
            return Err(AmotError::InvalidArgument(format!(
                "final time must be positive, got {t}"
            )));
        }
        if self.mesh_n == 0 {
            return Err(AmotError::InvalidArgument("mesh size must be at least 1".into()));
        }
        if !(self.uniform_tau > 0.0) {
            return Err(AmotError::InvalidArgument("uniform step must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(AmotError::InvalidArgument("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Telemetry of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub tau: f64,
    pub dofs: usize,
    pub eps_t: f64,
    pub eps_s: f64,
    pub eta: f64,
    pub rejects_t: usize,
    pub rejects_s: usize,
    pub wall_ms: f64,
    /// Range of the accepted solution.
    pub u_min: f64,
    pub u_max: f64,
    /// Linear solver work including rejected attempts and auxiliary meshes.
    pub linear: StepStats,
}

/// Range of the solution over all accepted steps (the initial state excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub max: f64,
    pub min: f64,
}

impl Extremes {
    fn empty() -> Self {
        Extremes {
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
        }
    }

    fn include(&mut self, u: &DgFunction) {
        self.max = self.max.max(u.max());
        self.min = self.min.min(u.min());
    }

    /// `max(u) - 1`, clipped at 0.
    pub fn overshoot(&self) -> f64 {
        (self.max - 1.0).max(0.0)
    }

    /// `-min(u)`, clipped at 0.
    pub fn undershoot(&self) -> f64 {
        (-self.min).max(0.0)
    }
}

/// A run in progress: state, controller memory and history.
#[derive(Debug)]
pub struct Simulation {
    config: RunConfig,
    problem: Problem,
    u: DgFunction,
    t: f64,
    k: usize,
    tau_next: f64,
    records: Vec<StepRecord>,
    extremes: Extremes,
    initial_extremes: Extremes,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let params = config.params()?;
        let mesh = Arc::new(Mesh::uniform(config.mesh_n)?);
        let coercivity = diffusion_coercivity(&mesh, &params);
        if coercivity < -1e-12 {
            return Err(AmotError::InvalidArgument(format!(
                "penalty sigma = {} does not make the diffusion form coercive (relative eigenvalue {coercivity:.3e})",
                params.sigma
            )));
        }
        crate::ros3p::validate_tableau(&crate::ros3p::Ros3pTableau::ros3p())?;
        let u = config.experiment.initial.project(mesh);
        let mut initial_extremes = Extremes::empty();
        initial_extremes.include(&u);
        let tau_next = match config.mode {
            Mode::Adaptive => config.amot.tau0,
            Mode::Uniform => config.uniform_tau,
        };
        Ok(Simulation {
            problem: Problem::new(params, config.experiment.field),
            config,
            u,
            t: 0.0,
            k: 0,
            tau_next,
            records: Vec::new(),
            extremes: Extremes::empty(),
            initial_extremes,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn solution(&self) -> &DgFunction {
        &self.u
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u.mesh()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Solution range over accepted steps.
    pub fn extremes(&self) -> Extremes {
        self.extremes
    }

    /// Solution range of the projected initial condition.
    pub fn initial_extremes(&self) -> Extremes {
        self.initial_extremes
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.experiment.t_final
    }

    /// Advances by one accepted step; `None` once the final time is reached.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let started = Instant::now();
        let mut record = match self.config.mode {
            Mode::Adaptive => self.adaptive_step()?,
            Mode::Uniform => self.uniform_step()?,
        };
        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        if !self.u.is_finite() {
            return Err(AmotError::NonFinite(self.t));
        }
        self.extremes.include(&self.u);
        self.records.push(record.clone());
        Ok(Some(record))
    }

    fn advance(&mut self, tau: f64, last: bool) -> f64 {
        self.k += 1;
        self.t = if last {
            self.config.experiment.t_final
        } else {
            self.t + tau
        };
        self.t
    }

    fn uniform_step(&mut self) -> Result<StepRecord> {
        let t_final = self.config.experiment.t_final;
        let tau_nominal = self.config.uniform_tau;
        let total = ((t_final / tau_nominal) - 1e-9).ceil() as usize;
        let last = self.k + 1 >= total;
        let tau = if last { t_final - self.t } else { tau_nominal };
        let op = self.problem.operator(self.u.mesh().clone());
        let p = &self.problem;
        let out = step(&p.tableau, &self.u, tau, &op, &p.params, &p.solver)?;
        let eps_t = temporal_estimator(&out.u3, &out.u2)?;
        self.u = out.u3;
        let t = self.advance(tau, last);
        Ok(StepRecord {
            k: self.k,
            t,
            tau,
            dofs: self.u.mesh().num_dofs(),
            eps_t,
            eps_s: 0.0,
            eta: 0.0,
            rejects_t: 0,
            rejects_s: 0,
            wall_ms: 0.0,
            u_min: self.u.min(),
            u_max: self.u.max(),
            linear: out.stats,
        })
    }

    /// One pass of the time-layer algorithm: repeat the step on the working
    /// mesh until both the temporal and the spatial estimate meet tolerance.
    fn adaptive_step(&mut self) -> Result<StepRecord> {
        let cfg = &self.config.amot;
        let p = &self.problem;
        let t_final = self.config.experiment.t_final;
        let remaining = t_final - self.t;
        let u_prev = &self.u;
        let mut mesh = u_prev.mesh().clone();
        let mut tau_star = self.tau_next;
        let mut rejects_t = 0;
        let mut rejects_s = 0;
        let mut linear = StepStats::default();
        let mut failure = ("temporal", f64::NAN, cfg.tol_t());

        for _ in 0..self.config.max_iterations {
            let last = tau_star >= remaining;
            let tau = if last { remaining } else { tau_star };
            let start = transfer(u_prev, &mesh)?;
            let op = p.operator(mesh.clone());
            let out = match step(&p.tableau, &start, tau, &op, &p.params, &p.solver) {
                Ok(out) => out,
                Err(AmotError::SolverFailure { residual, .. }) => {
                    failure = ("linear solver", residual, p.solver.tol);
                    tau_star = (0.5 * tau).max(cfg.tau_min);
                    rejects_t += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            linear += out.stats;

            let eps_t = temporal_estimator(&out.u3, &out.u2)?;
            if !eps_t.is_finite() {
                return Err(AmotError::NonFinite(self.t + tau));
            }
            if eps_t > cfg.tol_t() {
                failure = ("temporal", eps_t, cfg.tol_t());
                rejects_t += 1;
                tau_star = propose_tau(eps_t, tau, cfg);
                continue;
            }

            let indicator = residual_indicator(&out.u3, &start, tau, &p.params, &p.field)?;
            let bulk = bulk_mark(&indicator.eta, cfg.theta);
            let spatial = spatial_estimator(&out.u3, u_prev, tau, &bulk, p)?;
            linear += spatial.stats;
            if spatial.total > cfg.tol_s() {
                failure = ("spatial", spatial.total, cfg.tol_s());
                rejects_s += 1;
                let (refine, coarsen) = mark_space(&spatial.per_element, cfg);
                mesh = Arc::new(adapt_mesh(&mesh, &refine, &coarsen)?);
                continue;
            }

            self.u = out.u3;
            self.tau_next = propose_tau(eps_t, tau, cfg);
            let t = self.advance(tau, last);
            return Ok(StepRecord {
                k: self.k,
                t,
                tau,
                dofs: mesh.num_dofs(),
                eps_t,
                eps_s: spatial.total,
                eta: indicator.total,
                rejects_t,
                rejects_s,
                wall_ms: 0.0,
                u_min: self.u.min(),
                u_max: self.u.max(),
                linear,
            });
        }
        Err(AmotError::IterationCap {
            iterations: self.config.max_iterations,
            t: self.t,
            estimator: failure.0,
            value: failure.1,
            tol: failure.2,
        })
    }
}

/// Refines `refine`, then coarsens those of `coarsen` that are still leaves.
pub fn adapt_mesh(mesh: &Mesh, refine: &[usize], coarsen: &[usize]) -> Result<Mesh> {
    let keys: std::collections::HashSet<TriKey> = coarsen.iter().map(|&t| mesh.triangle(t).key).collect();
    let refined = mesh.refine(refine)?;
    if keys.is_empty() {
        return Ok(refined);
    }
    let marked: Vec<usize> = refined
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, tri)| keys.contains(&tri.key))
        .map(|(t, _)| t)
        .collect();
    refined.coarsen(&marked)
}

/// Outcome of a complete run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub mode: Mode,
    pub experiment: FieldKind,
    pub records: Vec<StepRecord>,
    pub extremes: Extremes,
    pub initial_extremes: Extremes,
    pub final_solution: DgFunction,
    pub wall_ms: f64,
}

impl RunSummary {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn max_dofs(&self) -> usize {
        self.records.iter().map(|r| r.dofs).max().unwrap_or(0)
    }
}

/// Runs to the final time, writing output if the configuration names a directory.
pub fn run(config: RunConfig) -> Result<RunSummary> {
    run_with(config, |_| {})
}

/// Like [`run`], calling `progress` after every accepted step.
pub fn run_with(config: RunConfig, mut progress: impl FnMut(&StepRecord)) -> Result<RunSummary> {
    let started = Instant::now();
    let mut output = match &config.out_dir {
        Some(dir) => Some(Output::create(dir)?),
        None => None,
    };
    let snapshot_every = config.snapshot_every;
    let mut sim = Simulation::new(config)?;
    if let Some(out) = output.as_mut() {
        if snapshot_every > 0 {
            out.snapshot(0, 0.0, sim.solution())?;
        }
    }
    while let Some(record) = sim.step()? {
        if let Some(out) = output.as_mut() {
            out.record(&record)?;
            if snapshot_every > 0 && (record.k % snapshot_every == 0 || sim.is_finished()) {
                out.snapshot(record.k, record.t, sim.solution())?;
            }
        }
        progress(&record);
    }
    let summary = RunSummary {
        mode: sim.config.mode,
        experiment: sim.config.experiment.kind,
        records: sim.records.clone(),
        extremes: sim.extremes,
        initial_extremes: sim.initial_extremes,
        final_solution: sim.u.clone(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    if let Some(out) = output.as_mut() {
        out.finish(&sim.config, &summary)?;
    }
    Ok(summary)
}
