//! Solver invariants on random systems.

use hyperhydro::nnls::{lawson_hanson, rescale_rows, ConstraintSystem, NnlsOptions, Termination};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(seed: u64, nc: usize, j: usize, planted: bool) -> ConstraintSystem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DMatrix::from_fn(nc, j, |_, _| rng.gen_range(-1.0..1.0));
    let b: Vec<f64> = if planted {
        let x = DVector::from_fn(j, |_, _| rng.gen_range(0.0..1.0));
        (&c * x).as_slice().to_vec()
    } else {
        (0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let eps = b.iter().map(|v| 1e-6 * v.abs().max(1e-3)).collect();
    ConstraintSystem::new(c, b, eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn weights_nonnegative_and_thresholds_honoured(seed in any::<u64>(), nc in 1usize..12, extra in 0usize..50, planted in any::<bool>()) {
        let sys = system(seed, nc, nc + extra, planted);
        if let Ok(s) = lawson_hanson(&sys, &NnlsOptions::default()) {
            prop_assert!(s.weights.iter().all(|w| *w >= 0.0));
            prop_assert_eq!(s.nnz, s.weights.iter().filter(|w| **w > 0.0).count());
            if s.termination == Termination::Thresholds {
                prop_assert!(sys.is_feasible(&s.weights));
            }
        }
    }

    #[test]
    fn planted_systems_are_solved(seed in any::<u64>(), nc in 1usize..10, extra in 1usize..40) {
        let sys = system(seed, nc, nc + extra, true);
        let s = lawson_hanson(&sys, &NnlsOptions { max_iter: Some(100 * nc), ..Default::default() }).unwrap();
        prop_assert!(sys.is_feasible(&s.weights));
        prop_assert!(s.nnz <= nc);
    }

    #[test]
    fn rescaling_preserves_feasibility(seed in any::<u64>(), nc in 1usize..8, j in 1usize..20) {
        let sys = system(seed, nc, j, true);
        let (scaled, kept) = rescale_rows(&sys);
        prop_assert_eq!(kept.len(), nc);
        prop_assert!(scaled.c.iter().all(|v| v.abs() <= 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let r: Vec<f64> = (0..j).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (a, b) = (sys.worst_ratio(&r).1, scaled.worst_ratio(&r).1);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
