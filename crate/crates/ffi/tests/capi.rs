//! Exercises the C interface through its exported symbols.

use std::ffi::CStr;
use std::os::raw::c_char;
use std::path::Path;
use std::process::Command;
use std::ptr;

use amot_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        amot_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn counts(mesh: *const AmotMesh) -> (usize, usize, usize) {
    let (mut t, mut v, mut d) = (0, 0, 0);
    assert_eq!(
        unsafe { amot_mesh_counts(mesh, &mut t, &mut v, &mut d) },
        AmotStatus::Ok
    );
    (t, v, d)
}

#[test]
fn mesh_lifecycle() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(amot_mesh_uniform(4, &mut mesh), AmotStatus::Ok);
        assert_eq!(counts(mesh), (32, 25, 96));

        let marked = [0usize, 5];
        let mut fine = ptr::null_mut();
        assert_eq!(
            amot_mesh_refine(mesh, marked.as_ptr(), marked.len(), &mut fine),
            AmotStatus::Ok
        );
        let (nt, _, nd) = counts(fine);
        assert!(nt > 32 && nd == 3 * nt);

        let all: Vec<usize> = (0..nt).collect();
        let mut coarse = ptr::null_mut();
        assert_eq!(
            amot_mesh_coarsen(fine, all.as_ptr(), all.len(), &mut coarse),
            AmotStatus::Ok
        );
        assert_eq!(counts(coarse).0, 32);

        let bad = [1000usize];
        let mut out = ptr::null_mut();
        assert_eq!(amot_mesh_refine(mesh, bad.as_ptr(), 1, &mut out), AmotStatus::MeshError);
        assert!(out.is_null());
        assert!(last_error().starts_with("invalid_triangle"), "{}", last_error());

        amot_mesh_free(coarse);
        amot_mesh_free(fine);
        amot_mesh_free(mesh);
        amot_mesh_free(ptr::null_mut());
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(amot_mesh_uniform(4, ptr::null_mut()), AmotStatus::NullPointer);
        assert_eq!(last_error(), "out is null");
        let mut mesh = ptr::null_mut();
        assert_eq!(amot_mesh_uniform(0, &mut mesh), AmotStatus::InvalidArgument);
        assert!(mesh.is_null());
        assert_eq!(
            amot_mesh_counts(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            AmotStatus::NullPointer
        );

        let mut cfg = std::mem::zeroed::<AmotRunConfig>();
        assert_eq!(
            amot_config_default(AmotExperiment::Sheering, AmotMode::Adaptive, &mut cfg),
            AmotStatus::Ok
        );
        assert!(last_error().is_empty());
        cfg.tol = -1.0;
        let mut sim = ptr::null_mut();
        assert_eq!(amot_simulation_new(&cfg, &mut sim), AmotStatus::InvalidArgument);
        assert!(sim.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn error_message_truncates_and_reports_length() {
    unsafe {
        amot_mesh_uniform(4, ptr::null_mut());
        let full = amot_last_error_message(ptr::null_mut(), 0);
        assert_eq!(full, "out is null".len());
        let mut buf = [1 as c_char; 4];
        assert_eq!(amot_last_error_message(buf.as_mut_ptr(), buf.len()), full);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "out");
    }
}

#[test]
fn uniform_run_to_completion() {
    unsafe {
        let mut cfg = std::mem::zeroed::<AmotRunConfig>();
        assert_eq!(
            amot_config_default(AmotExperiment::Expanding, AmotMode::Uniform, &mut cfg),
            AmotStatus::Ok
        );
        assert_eq!(cfg.mesh_n, 64);
        assert_eq!(cfg.tol, 1e-3);
        cfg.mesh_n = 4;
        cfg.t_final = 0.004;
        let mut sim = ptr::null_mut();
        assert_eq!(amot_simulation_new(&cfg, &mut sim), AmotStatus::Ok, "{}", last_error());

        let mut rec = AmotStepRecord::default();
        let mut steps = 0;
        loop {
            match amot_simulation_step(sim, &mut rec) {
                AmotStatus::Ok => steps += 1,
                AmotStatus::Finished => break,
                s => panic!("{s:?}: {}", last_error()),
            }
            assert_eq!(rec.k, steps);
            assert_eq!(rec.dofs, 96);
        }
        assert_eq!(steps, 4);
        let (mut t, mut k) = (0.0, 0);
        assert_eq!(amot_simulation_state(sim, &mut t, &mut k), AmotStatus::Ok);
        assert_eq!((t, k), (0.004, 4));

        let mut needed = 0;
        let mut small = [0.0; 3];
        assert_eq!(
            amot_simulation_solution(sim, small.as_mut_ptr(), small.len(), &mut needed),
            AmotStatus::BufferTooSmall
        );
        assert_eq!(needed, 96);
        let mut buf = vec![f64::NAN; needed];
        assert_eq!(
            amot_simulation_solution(sim, buf.as_mut_ptr(), buf.len(), ptr::null_mut()),
            AmotStatus::Ok
        );
        assert!(buf.iter().all(|v| v.is_finite()));
        amot_simulation_free(sim);
    }
}

#[test]
fn adaptive_steps_match_record_invariants() {
    unsafe {
        let mut cfg = std::mem::zeroed::<AmotRunConfig>();
        amot_config_default(AmotExperiment::Sheering, AmotMode::Adaptive, &mut cfg);
        cfg.mesh_n = 4;
        cfg.tol = 0.05;
        let mut sim = ptr::null_mut();
        assert_eq!(amot_simulation_new(&cfg, &mut sim), AmotStatus::Ok, "{}", last_error());
        let mut rec = AmotStepRecord::default();
        for k in 1..=3 {
            assert_eq!(amot_simulation_step(sim, &mut rec), AmotStatus::Ok, "{}", last_error());
            assert_eq!(rec.k, k);
            assert!(rec.eps_t <= 0.5 * cfg.tol && rec.eps_s <= 0.5 * cfg.tol);
            assert!(rec.u_min <= rec.u_max);
        }
        amot_simulation_free(sim);
    }
}

#[test]
fn validate_passes() {
    assert_eq!(amot_validate(), AmotStatus::Ok);
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("amot.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "amot_mesh_uniform",
        "amot_simulation_step",
        "amot_last_error_message",
        "AMOT_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"amot.h\"\nint f(void) { AmotMesh *m = 0; return (int)amot_mesh_uniform(2, &m) + AMOT_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(e) => eprintln!("no C compiler available ({e}); syntax check skipped"),
    }
}
