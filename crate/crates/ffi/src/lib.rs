//! C interface to `amot-core`.
//!
//! Every function returns an [`AmotStatus`]; results go through out-pointers.
//! Objects are opaque handles created by `*_new`/`*_uniform` calls and
//! released by the matching `*_free`. After a failure,
//! [`amot_last_error_message`] describes it for the calling thread.
//!
//! Handles are not thread-safe: one handle must not be used from two threads
//! at once. Distinct handles are independent.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use amot_core::driver::{require_self_check, Experiment, Mode, RunConfig, Simulation, StepRecord};
use amot_core::error::AmotError;
use amot_core::mesh::Mesh;
use amot_core::velocity::FieldKind;

/// Result codes. `AMOT_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MeshError = 3,
    SolverFailure = 4,
    IterationCap = 5,
    NonFinite = 6,
    Io = 7,
    SelfCheck = 8,
    BufferTooSmall = 9,
    Finished = 10,
    Panic = 11,
}

impl From<&AmotError> for AmotStatus {
    fn from(e: &AmotError) -> Self {
        match e {
            AmotError::InvalidArgument(_)
            | AmotError::DimensionMismatch { .. }
            | AmotError::InvalidTableau(_)
            | AmotError::Config { .. } => AmotStatus::InvalidArgument,
            AmotError::InvalidTriangle { .. } | AmotError::MeshMismatch | AmotError::HierarchyMismatch => {
                AmotStatus::MeshError
            }
            AmotError::SolverFailure { .. } | AmotError::SingularBlock(_) => AmotStatus::SolverFailure,
            AmotError::IterationCap { .. } => AmotStatus::IterationCap,
            AmotError::NonFinite(_) => AmotStatus::NonFinite,
            AmotError::Io { .. } => AmotStatus::Io,
            AmotError::SelfCheck(_) => AmotStatus::SelfCheck,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmotExperiment {
    Sheering = 0,
    Expanding = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmotMode {
    Adaptive = 0,
    Uniform = 1,
}

/// Run settings. Fill with [`amot_config_default`], then adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmotRunConfig {
    pub experiment: AmotExperiment,
    pub mode: AmotMode,
    pub tol: f64,
    pub alpha: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub tau0: f64,
    pub t_final: f64,
    /// Cells per side of the uniform start mesh.
    pub mesh_n: usize,
    /// Passes through the adaptive loop allowed per time step.
    pub max_iterations: usize,
}

/// Telemetry of one accepted step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AmotStepRecord {
    pub k: usize,
    pub t: f64,
    pub tau: f64,
    pub dofs: usize,
    pub eps_t: f64,
    pub eps_s: f64,
    pub eta: f64,
    pub rejects_t: usize,
    pub rejects_s: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub wall_ms: f64,
}

impl From<&StepRecord> for AmotStepRecord {
    fn from(r: &StepRecord) -> Self {
        AmotStepRecord {
            k: r.k,
            t: r.t,
            tau: r.tau,
            dofs: r.dofs,
            eps_t: r.eps_t,
            eps_s: r.eps_s,
            eta: r.eta,
            rejects_t: r.rejects_t,
            rejects_s: r.rejects_s,
            u_min: r.u_min,
            u_max: r.u_max,
            wall_ms: r.wall_ms,
        }
    }
}

/// Opaque triangulation handle.
pub struct AmotMesh {
    inner: Arc<Mesh>,
}

/// Opaque simulation handle.
pub struct AmotSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: AmotStatus, msg: impl Into<String>) -> AmotStatus {
    set_error(msg.into());
    status
}

fn from_error(e: AmotError) -> AmotStatus {
    let status = AmotStatus::from(&e);
    fail(status, format!("{}: {e}", e.kind()))
}

/// Runs `f`, clears the error slot on success and turns panics into
/// `AMOT_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), AmotStatus>) -> AmotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AmotStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(AmotStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), AmotStatus> {
    if p.is_null() {
        Err(fail(AmotStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `marked` must point to `count` readable elements unless `count` is 0.
unsafe fn index_slice<'a>(marked: *const usize, count: usize) -> Result<&'a [usize], AmotStatus> {
    if count == 0 {
        return Ok(&[]);
    }
    non_null(marked, "marked")?;
    Ok(std::slice::from_raw_parts(marked, count))
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len` bytes. Returns the full
/// message length without the terminator; empty after a success.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn amot_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates the `n` x `n` criss-cross start mesh of [-1, 1]^2.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn amot_mesh_uniform(n: usize, out: *mut *mut AmotMesh) -> AmotStatus {
    guard(|| {
        non_null(out, "out")?;
        let mesh = Mesh::uniform(n).map_err(from_error)?;
        *out = Box::into_raw(Box::new(AmotMesh { inner: Arc::new(mesh) }));
        Ok(())
    })
}

/// Bisects the `count` triangles in `marked` plus the closure needed for
/// conformity. `mesh` is left unchanged.
///
/// # Safety
/// `mesh` must be a live handle, `marked` must hold `count` indices and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amot_mesh_refine(
    mesh: *const AmotMesh,
    marked: *const usize,
    count: usize,
    out: *mut *mut AmotMesh,
) -> AmotStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        non_null(out, "out")?;
        let marked = index_slice(marked, count)?;
        let refined = (*mesh).inner.refine(marked).map_err(from_error)?;
        *out = Box::into_raw(Box::new(AmotMesh {
            inner: Arc::new(refined),
        }));
        Ok(())
    })
}

/// Merges marked sibling pairs whose partners are marked too. Triangles of
/// the start mesh are never removed.
///
/// # Safety
/// Same as [`amot_mesh_refine`].
#[no_mangle]
pub unsafe extern "C" fn amot_mesh_coarsen(
    mesh: *const AmotMesh,
    marked: *const usize,
    count: usize,
    out: *mut *mut AmotMesh,
) -> AmotStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        non_null(out, "out")?;
        let marked = index_slice(marked, count)?;
        let coarse = (*mesh).inner.coarsen(marked).map_err(from_error)?;
        *out = Box::into_raw(Box::new(AmotMesh {
            inner: Arc::new(coarse),
        }));
        Ok(())
    })
}

/// Writes the triangle, vertex and degree-of-freedom counts; any of the
/// out-pointers may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn amot_mesh_counts(
    mesh: *const AmotMesh,
    triangles: *mut usize,
    vertices: *mut usize,
    dofs: *mut usize,
) -> AmotStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        let m = &(*mesh).inner;
        if !triangles.is_null() {
            *triangles = m.num_triangles();
        }
        if !vertices.is_null() {
            *vertices = m.num_vertices();
        }
        if !dofs.is_null() {
            *dofs = m.num_dofs();
        }
        Ok(())
    })
}

/// Releases a mesh handle. Null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn amot_mesh_free(mesh: *mut AmotMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

fn run_config(c: &AmotRunConfig) -> Result<RunConfig, AmotStatus> {
    let kind = match c.experiment {
        AmotExperiment::Sheering => FieldKind::Sheering,
        AmotExperiment::Expanding => FieldKind::Expanding,
    };
    let mut exp = Experiment::preset(kind);
    exp.epsilon = c.epsilon;
    exp.t_final = c.t_final;
    let mode = match c.mode {
        AmotMode::Adaptive => Mode::Adaptive,
        AmotMode::Uniform => Mode::Uniform,
    };
    let mut cfg = RunConfig::new(exp, mode);
    cfg.amot.tol = c.tol;
    cfg.amot.alpha = c.alpha;
    cfg.amot.theta = c.theta;
    cfg.amot.tau0 = c.tau0;
    cfg.sigma = c.sigma;
    cfg.mesh_n = c.mesh_n;
    cfg.max_iterations = c.max_iterations;
    cfg.snapshot_every = 0;
    cfg.validate().map_err(from_error)?;
    Ok(cfg)
}

/// Fills `out` with the preset values of `experiment` in `mode`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amot_config_default(
    experiment: AmotExperiment,
    mode: AmotMode,
    out: *mut AmotRunConfig,
) -> AmotStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind = match experiment {
            AmotExperiment::Sheering => FieldKind::Sheering,
            AmotExperiment::Expanding => FieldKind::Expanding,
        };
        let m = match mode {
            AmotMode::Adaptive => Mode::Adaptive,
            AmotMode::Uniform => Mode::Uniform,
        };
        let cfg = RunConfig::new(Experiment::preset(kind), m);
        *out = AmotRunConfig {
            experiment,
            mode,
            tol: cfg.amot.tol,
            alpha: cfg.amot.alpha,
            theta: cfg.amot.theta,
            epsilon: cfg.experiment.epsilon,
            sigma: cfg.sigma,
            tau0: cfg.amot.tau0,
            t_final: cfg.experiment.t_final,
            mesh_n: cfg.mesh_n,
            max_iterations: cfg.max_iterations,
        };
        Ok(())
    })
}

/// Projects the initial condition and prepares a run. Nothing is written to
/// disk; steps are driven with [`amot_simulation_step`].
///
/// # Safety
/// `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn amot_simulation_new(
    config: *const AmotRunConfig,
    out: *mut *mut AmotSimulation,
) -> AmotStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let cfg = run_config(&*config)?;
        let sim = Simulation::new(cfg).map_err(from_error)?;
        *out = Box::into_raw(Box::new(AmotSimulation { inner: sim }));
        Ok(())
    })
}

/// Advances by one accepted step and writes its record to `record` (may be
/// null). Returns `AMOT_STATUS_FINISHED` once the final time is reached.
///
/// # Safety
/// `sim` must be a live handle; `record` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn amot_simulation_step(sim: *mut AmotSimulation, record: *mut AmotStepRecord) -> AmotStatus {
    guard(|| {
        non_null(sim, "sim")?;
        match (*sim).inner.step().map_err(from_error)? {
            Some(r) => {
                if !record.is_null() {
                    *record = AmotStepRecord::from(&r);
                }
                Ok(())
            }
            None => Err(fail(AmotStatus::Finished, "the simulation has reached its final time")),
        }
    })
}

/// Current time and number of accepted steps; either pointer may be null.
///
/// # Safety
/// `sim` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn amot_simulation_state(
    sim: *const AmotSimulation,
    t: *mut f64,
    steps: *mut usize,
) -> AmotStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let s = &(*sim).inner;
        if !t.is_null() {
            *t = s.time();
        }
        if !steps.is_null() {
            *steps = s.step_index();
        }
        Ok(())
    })
}

/// Copies the current solution coefficients, three per triangle in vertex
/// order, into `buf`. `needed` (may be null) receives the coefficient count;
/// if `len` is smaller, nothing is copied and `AMOT_STATUS_BUFFER_TOO_SMALL`
/// is returned.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn amot_simulation_solution(
    sim: *const AmotSimulation,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> AmotStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let coeffs = (*sim).inner.solution().coeffs();
        if !needed.is_null() {
            *needed = coeffs.len();
        }
        if len < coeffs.len() {
            return Err(fail(
                AmotStatus::BufferTooSmall,
                format!("solution has {} coefficients, buffer holds {len}", coeffs.len()),
            ));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(coeffs.as_ptr(), buf, coeffs.len());
        Ok(())
    })
}

/// Releases a simulation handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn amot_simulation_free(sim: *mut AmotSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs the built-in self-tests (tableau, quadrature, mesh, assembly,
/// solver).
#[no_mangle]
pub extern "C" fn amot_validate() -> AmotStatus {
    guard(|| require_self_check().map(drop).map_err(from_error))
}
