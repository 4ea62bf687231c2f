mod common;

use bayes_pce::instances::random_pce;
use bayes_pce::moments::{cross_moment, sorted_tuples, sym_moment};
use bayes_pce::MomentCache;
use common::grid_for;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quad_moment(y: &bayes_pce::PceVector<f64>, t: &[usize]) -> (f64, f64) {
    // degree <= 3 per factor, order <= 4: integrand degree <= 12
    let grid = grid_for(&[y], 7);
    let v = grid.integrate(|th| {
        let yv = y.eval(th).unwrap();
        t.iter().map(|&j| yv[j]).product()
    });
    let a = grid.integrate(|th| {
        let yv = y.eval(th).unwrap();
        t.iter().map(|&j| yv[j].abs()).product()
    });
    (v, a)
}

#[test]
fn moments_match_quadrature_to_order_four() {
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = 1 + (seed as usize % 3);
        let dims: Vec<usize> = (0..g).collect();
        let y = random_pce(&mut rng, &dims, 3, 2, g, 0.7).unwrap();
        let cache = MomentCache::new(y.clone());
        for k in 0..=4 {
            let s = cache.sym_moment(k).unwrap();
            for t in sorted_tuples(2, k) {
                let (want, scale) = quad_moment(&y, &t);
                let got = s.get(&t);
                assert!(
                    (got - want).abs() <= 1e-10 * scale.max(1e-300),
                    "seed {seed} t {t:?}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn moments_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y = random_pce(&mut rng, &[0, 1, 2], 3, 2, 3, 0.6).unwrap();
    let cache = MomentCache::new(y.clone());
    let n = 200_000;
    let paths = y.sample_paths(n, 5);
    for k in 1..=4 {
        for t in sorted_tuples(2, k) {
            let vals: Vec<f64> = paths.iter().map(|p| t.iter().map(|&j| p[j]).product()).collect();
            let m = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let exact = cache.raw_moment(&t).unwrap();
            assert!((exact - m).abs() < 4.0 * se, "t {t:?}: {exact} vs {m} ± {se}");
        }
    }
}

#[test]
fn cross_moment_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = random_pce(&mut rng, &[0, 1], 2, 2, 2, 0.7).unwrap();
    let r = random_pce(&mut rng, &[1], 3, 1, 2, 0.7).unwrap();
    let c = cross_moment(&r, &y, 2).unwrap();
    let grid = grid_for(&[&y, &r], 5);
    for t in sorted_tuples(2, 2) {
        let want = grid.integrate(|th| {
            let yv = y.eval(th).unwrap();
            r.eval(th).unwrap()[0] * yv[t[0]] * yv[t[1]]
        });
        assert!((c.get(0, &t) - want).abs() < 1e-10 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sym_moment_is_permutation_invariant(seed in any::<u64>(), i in 0usize..3, j in 0usize..3, k in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_pce(&mut rng, &[0, 1], 2, 3, 2, 0.8).unwrap();
        let s = sym_moment(&y, 3).unwrap();
        let base = s.get(&[i, j, k]);
        for p in [[i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
            prop_assert_eq!(s.get(&p), base);
        }
    }

    #[test]
    fn second_moment_is_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_pce(&mut rng, &[0, 1, 2], 2, 3, 3, 0.8).unwrap();
        let s = sym_moment(&y, 2).unwrap();
        let m = nalgebra::DMatrix::from_fn(3, 3, |a, b| s.get(&[a, b]));
        let ev = m.symmetric_eigen().eigenvalues;
        prop_assert!(ev.min() >= -1e-12 * ev.max().abs());
    }
}
