//! Randomized invariants of marking, step control, meshes and transfer.

mod common;

use std::sync::Arc;

use amot_core::adapt::{bulk_mark, mark_space, propose_tau, AmotConfig};
use amot_core::dgspace::{l2_norm, transfer, DgFunction};
use amot_core::driver::adapt_mesh;
use amot_core::mesh::Mesh;
use proptest::prelude::*;

fn eta_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-6..10.0f64], 1..60)
}

fn marked_subset(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..n, 0..n.min(12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bulk_set_carries_theta_share_and_is_minimal(eta in eta_vec(), theta in 0.05..0.99f64) {
        let total: f64 = eta.iter().map(|e| e * e).sum();
        let set = bulk_mark(&eta, theta);
        prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        if total == 0.0 {
            prop_assert!(set.is_empty());
            return Ok(());
        }
        let share: f64 = set.iter().map(|&i| eta[i] * eta[i]).sum();
        prop_assert!(share >= theta * total * (1.0 - 1e-12));
        // No set with one element fewer reaches the share: dropping the
        // smallest member of a greedy set must fall short.
        let smallest = set.iter().map(|&i| eta[i] * eta[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(share - smallest < theta * total);
        // Every unmarked indicator is at most the smallest marked one.
        for (i, e) in eta.iter().enumerate() {
            if !set.contains(&i) {
                prop_assert!(e * e <= smallest);
            }
        }
    }

    #[test]
    fn larger_theta_marks_a_superset_in_size(eta in eta_vec(), a in 0.05..0.95f64, b in 0.05..0.95f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bulk_mark(&eta, lo).len() <= bulk_mark(&eta, hi).len());
    }

    #[test]
    fn step_proposal_is_monotone_and_clamped(e1 in 1e-9..1.0f64, e2 in 1e-9..1.0f64, tau in 1e-6..5e-3f64) {
        let cfg = AmotConfig::default();
        let (small, large) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = propose_tau(small, tau, &cfg);
        let b = propose_tau(large, tau, &cfg);
        prop_assert!(a >= b);
        for t in [a, b] {
            prop_assert!(t >= cfg.tau_min && t <= cfg.tau_max);
            prop_assert!(t <= cfg.growth_max * tau + 1e-18 || t == cfg.tau_min);
            prop_assert!(t >= cfg.shrink_min * tau - 1e-18 || t == cfg.tau_max);
        }
        if large > cfg.tol_t() {
            prop_assert!(b < tau || b == cfg.tau_min);
        }
    }

    #[test]
    fn space_marks_are_disjoint(values in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e-3f64], 0..80)) {
        let cfg = AmotConfig::default();
        let (refine, coarsen) = mark_space(&values, &cfg);
        for i in &refine {
            prop_assert!(!coarsen.contains(i));
            prop_assert!(values[*i] > cfg.refine_frac * cfg.tol_s());
        }
        for i in &coarsen {
            prop_assert!(values[*i] < cfg.coarsen_abs);
        }
    }

    #[test]
    fn refine_and_coarsen_keep_mesh_invariants(n in 1usize..5, rounds in prop::collection::vec(marked_subset(32), 1..4)) {
        let mut mesh = Mesh::uniform(n).unwrap();
        for marks in rounds {
            let nt = mesh.num_triangles();
            let marks: Vec<usize> = marks.into_iter().map(|m| m % nt).collect();
            let refined = mesh.refine(&marks).unwrap();
            prop_assert!(refined.check_invariants().is_ok());
            prop_assert!((refined.total_area() - 4.0).abs() < 1e-12);
            prop_assert!(refined.num_triangles() >= nt + marks.iter().collect::<std::collections::HashSet<_>>().len());
            let all: Vec<usize> = (0..refined.num_triangles()).collect();
            let coarse = refined.coarsen(&all).unwrap();
            prop_assert!(coarse.check_invariants().is_ok());
            prop_assert!(coarse.num_triangles() <= refined.num_triangles());
            prop_assert!(coarse.num_triangles() >= 2 * n * n);
            mesh = refined;
        }
    }

    #[test]
    fn refine_then_transfer_back_is_identity(seed in 0u64..1000, marks in marked_subset(18)) {
        let mut r = common::rng(seed);
        let coarse = common::uniform(3);
        let u = common::random_function(coarse.clone(), &mut r, -1.0, 1.0);
        let fine = Arc::new(coarse.refine(&marks).unwrap());
        let up = transfer(&u, &fine).unwrap();
        prop_assert!((l2_norm(&up) - l2_norm(&u)).abs() <= 1e-13 * l2_norm(&u).max(1.0));
        let all: Vec<usize> = (0..fine.num_triangles()).collect();
        let back_mesh = Arc::new(adapt_mesh(&fine, &[], &all).unwrap());
        prop_assume!(back_mesh.same_partition(&coarse));
        let back = transfer(&up, &back_mesh).unwrap();
        for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn constants_survive_any_adaptation(c in -2.0..2.0f64, marks in marked_subset(8), coarsen_all in any::<bool>()) {
        let mesh = common::uniform(2);
        let u = DgFunction::constant(mesh.clone(), c);
        let refined = Arc::new(mesh.refine(&marks).unwrap());
        let coarsen: Vec<usize> = if coarsen_all { (0..refined.num_triangles()).collect() } else { vec![] };
        let target = Arc::new(adapt_mesh(&refined, &[0], &coarsen).unwrap());
        let on_refined = transfer(&u, &refined).unwrap();
        let moved = transfer(&on_refined, &target).unwrap();
        prop_assert!(moved.coeffs().iter().all(|v| (v - c).abs() <= 1e-13));
    }
}
