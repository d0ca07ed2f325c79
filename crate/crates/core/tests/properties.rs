//! Randomized properties of the reservoir dynamics, the readout and trial
//! statistics.

use hetesn::pipeline::{mean_std, TrialResult};
use hetesn::readout::{classify, fit_ridge, predict_rows, ReadoutWeights, RidgeConfig};
use hetesn::reservoir::{CsrMatrix, Layer, LayerConfig, LayerWeights, Reservoir, SubGroupPartition, Variant};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uniform(r: &mut ChaCha8Rng, rows: usize, cols: usize, half: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-half..half))
}

fn model(variant: Variant, seed: u64, rho: f64, input_scale: f64) -> Reservoir {
    let base = LayerConfig { size: 24, spectral_radius: rho, input_scale, seed, ..Default::default() };
    let (layers, partition) = match variant {
        Variant::Shallow => (vec![base], None),
        Variant::HeteroShallow => (vec![base], Some(SubGroupPartition::equal(24, vec![0, 2, 5]).unwrap())),
        Variant::Deep => ((0..3).map(|i| LayerConfig { seed: seed + 100 * i, ..base }).collect(), None),
        Variant::HeteroDeep => {
            ((0..3).map(|i| LayerConfig { seed: seed + 100 * i, delay: 2 * i as usize + 1, ..base }).collect(), None)
        }
    };
    Reservoir::build(variant, 2, &layers, partition).unwrap()
}

#[test]
fn trajectories_are_bitwise_deterministic() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let u = uniform(&mut r, 150, 2, 1.0);
    for v in Variant::ALL {
        let a = model(v, 9, 0.9, 0.5).run_sequence(&u, 0).unwrap();
        let b = model(v, 9, 0.9, 0.5).run_sequence(&u, 0).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()), "{v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The leaky update is a convex combination of the previous state and a
    /// tanh, so states starting in [-1, 1] stay there whatever the input.
    #[test]
    fn states_stay_in_unit_box(seed in 0u64..1000, rho in 0.1f64..3.0, scale in 0.1f64..50.0, amp in 0.1f64..100.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let u = uniform(&mut r, 80, 2, amp);
        for v in Variant::ALL {
            let x = model(v, seed, rho, scale).run_sequence(&u, 0).unwrap();
            prop_assert!(x.iter().all(|s| s.abs() <= 1.0), "{}", v);
        }
    }

    /// Renumbering neurons inside each sub-group, with the matching rows and
    /// columns of the weights, renumbers the states the same way.
    #[test]
    fn relabeling_within_groups_permutes_states(seed in 0u64..1000) {
        let original = model(Variant::HeteroShallow, seed, 0.9, 0.5);
        let part = original.partition().unwrap().clone();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..24).collect();
        for (range, _) in part.ranges() {
            perm[range].shuffle(&mut r);
        }
        let layer = &original.layers()[0];
        let w = &layer.weights;
        let triplets: Vec<(u32, u32, f64)> =
            w.recurrent().triplets().map(|(i, j, v)| (perm[i as usize] as u32, perm[j as usize] as u32, v)).collect();
        let mut w_in = DMatrix::zeros(24, 2);
        let mut theta = vec![0.0; 24];
        for i in 0..24 {
            w_in.set_row(perm[i], &w.input().row(i));
            theta[perm[i]] = w.bias()[i];
        }
        let weights = LayerWeights::new(CsrMatrix::from_triplets(24, 24, &triplets).unwrap(), w_in, theta).unwrap();
        let relabeled =
            Reservoir::from_layers(Variant::HeteroShallow, 2, vec![Layer { config: layer.config, weights }], Some(part)).unwrap();

        let u = uniform(&mut r, 120, 2, 1.0);
        let (a, b) = (original.run_sequence(&u, 0).unwrap(), relabeled.run_sequence(&u, 0).unwrap());
        for t in 0..120 {
            for i in 0..24 {
                prop_assert!((a[(t, i)] - b[(t, perm[i])]).abs() <= 1e-12);
            }
        }
    }

    /// With gamma > 0 the solution minimizes the regularized objective: no
    /// small perturbation lowers it.
    #[test]
    fn ridge_solution_is_a_minimum(seed in 0u64..1000, gamma in 0.01f64..2.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (d, m, c) = (r.random_range(2..12), r.random_range(5..60), r.random_range(1..4));
        let z = uniform(&mut r, d, m, 1.0);
        let y = uniform(&mut r, c, m, 1.0);
        let w = fit_ridge(&z, &y, &RidgeConfig::new(gamma).unwrap()).unwrap();
        let objective = |w: &DMatrix<f64>| (&y - w * &z).norm_squared() + gamma * gamma * w.norm_squared();
        let best = objective(w.matrix());
        for _ in 0..20 {
            let delta = uniform(&mut r, c, d, 1e-3);
            prop_assert!(objective(&(w.matrix() + delta)) >= best);
        }
    }

    /// Scaling the readout by any positive factor never changes a decision.
    #[test]
    fn decisions_ignore_positive_scaling(seed in 0u64..1000, factor in 1e-6f64..1e6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let w = ReadoutWeights::new(uniform(&mut r, 5, 8, 1.0)).unwrap();
        let rows = uniform(&mut r, 30, 8, 1.0);
        let decide = |w: &ReadoutWeights| -> Vec<usize> {
            predict_rows(w, &rows).unwrap().row_iter().map(|s| classify(&s.iter().copied().collect::<Vec<_>>()).unwrap()).collect()
        };
        prop_assert_eq!(decide(&w), decide(&w.scaled(factor)));
    }

    /// Mean and standard deviation agree with a one-pass (Welford)
    /// recomputation, and the mean lies within the per-seed range.
    #[test]
    fn trial_statistics_recompute(rates in prop::collection::vec(0.0f64..100.0, 1..12)) {
        let t = TrialResult::from_rates((0..rates.len() as u64).collect(), rates.clone(), None, 0);
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for &x in &rates {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let std = if rates.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
        prop_assert!((t.mean - mean).abs() <= 1e-12 && (t.std - std).abs() <= 1e-12);
        prop_assert_eq!((t.mean, t.std), mean_std(&rates));
        let (lo, hi) = rates.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(lo - 1e-12 <= t.mean && t.mean <= hi + 1e-12);
    }
}

/// With gamma = 0 and full row rank the residual is orthogonal to the
/// design rows.
#[test]
fn least_squares_residual_is_orthogonal() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (d, m) = (r.random_range(2..30), r.random_range(40..200));
        let z = uniform(&mut r, d, m, 1.0);
        let y = uniform(&mut r, 3, m, 1.0);
        let w = fit_ridge(&z, &y, &RidgeConfig::new(0.0).unwrap()).unwrap();
        let normal = &z * (&y - w.matrix() * &z).transpose();
        assert!(normal.amax() <= 1e-8, "{}", normal.amax());
    }
}
