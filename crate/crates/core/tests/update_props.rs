mod common;

use bayes_pce::instances::{polynomial_pair, random_pce, LinearGaussian};
use bayes_pce::moments::{covariance, mean, sorted_tuples};
use bayes_pce::oracle::kalman_reference;
use bayes_pce::update::{
    bayes_update, bayes_update_general, conditional_probability, covariance_match, indicator_pce, posterior_covariance_exact,
    qbu_closed_form, solve_general_basis, solve_optimal_map, MAX_COMPOSITION_DEGREE,
};
use bayes_pce::{BasisDictionary, PceVector, PolyMap};
use common::{grid_for, rel_diff};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm_l2(x: &PceVector<f64>) -> f64 {
    (covariance(x, x).unwrap().trace() + mean(x).norm_squared()).sqrt()
}

#[test]
fn galerkin_residual_is_orthogonal_and_maps_are_nested() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (r, y) = polynomial_pair(&mut rng, 2, 1 + seed as usize % 2, 2, 0.3).unwrap();
        let rn = norm_l2(&r);
        let mut prev = 0.0;
        for m in 0..=3usize {
            let (phi, w) = solve_optimal_map(&r, &y, m).unwrap();
            assert!(w.is_none());
            // integrand degree <= 2 + 2*6
            let grid = grid_for(&[&r, &y], 9);
            for k in 0..=m {
                for t in sorted_tuples(y.value_dim(), k) {
                    let pair = grid.integrate(|th| {
                        let yv = y.eval(th).unwrap();
                        let res = r.eval(th).unwrap()[0] - phi.apply(yv.as_slice()).unwrap()[0];
                        res * t.iter().map(|&j| yv[j]).product::<f64>()
                    });
                    let psi = grid
                        .integrate(|th| {
                            let yv = y.eval(th).unwrap();
                            t.iter().map(|&j| yv[j] * yv[j]).product::<f64>()
                        })
                        .sqrt();
                    assert!(pair.abs() <= 1e-8 * rn * psi, "seed {seed} m {m} t {t:?}: {pair}");
                }
            }
            let (img, _) = phi.apply_rv(&y, MAX_COMPOSITION_DEGREE).unwrap();
            let pn = norm_l2(&img);
            let res = r.axpby(1.0, &img, -1.0).unwrap();
            let tot = pn * pn + norm_l2(&res).powi(2);
            assert!((tot - rn * rn).abs() < 1e-8 * rn * rn, "Pythagoras m {m}");
            assert!(pn >= prev - 1e-10 && pn <= rn + 1e-8, "nestedness m {m}: {prev} -> {pn} (R {rn})");
            prev = pn;
        }
    }
}

#[test]
fn polynomial_of_measurement_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (_, y) = polynomial_pair(&mut rng, 2, 2, 1, 0.5).unwrap();
    let tensors = vec![
        DMatrix::from_row_slice(1, 1, &[0.7]),
        DMatrix::from_row_slice(1, 2, &[1.5, -0.4]),
        DMatrix::from_row_slice(1, 3, &[0.3, 0.2, -0.1]),
    ];
    let truth = PolyMap::new(2, tensors).unwrap();
    let (r, _) = truth.apply_rv(&y, MAX_COMPOSITION_DEGREE).unwrap();
    let (phi, _) = solve_optimal_map(&r, &y, 2).unwrap();
    for k in 0..=2 {
        let d = (phi.tensor(k) - truth.tensor(k)).abs().max();
        assert!(d < 1e-9, "order {k}: {d}");
    }
}

#[test]
fn linear_gaussian_update_is_the_kalman_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for r in 1..=3 {
            let inst = LinearGaussian::random(&mut rng, n, r);
            let (x, y) = inst.to_pce().unwrap();
            let (xa, _) = bayes_update(&x, &y, inst.y_hat.as_slice(), 1).unwrap();
            let (km, kc) = kalman_reference(&inst.mean, &inst.cov(), &inst.h, &inst.noise_cov(), &inst.y_hat).unwrap();
            assert!(rel_diff(mean(&xa).as_slice(), km.as_slice()) < 1e-8);
            assert!(rel_diff(covariance(&xa, &xa).unwrap().as_slice(), kc.as_slice()) < 1e-8);
            let (cp, _) = posterior_covariance_exact(&x, &y, inst.y_hat.as_slice(), 1).unwrap();
            assert!(rel_diff(cp.as_slice(), kc.as_slice()) < 1e-8);
        }
    }
}

#[test]
fn scalar_conjugate_update() {
    let x = PceVector::<f64>::gaussian(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1), &[0], 2).unwrap();
    let v = PceVector::gaussian(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1), &[1], 2).unwrap();
    let y = x.axpby(1.0, &v, 1.0).unwrap();
    let (xa, _) = bayes_update(&x, &y, &[1.0], 1).unwrap();
    assert!((mean(&xa)[0] - 0.5).abs() < 1e-10);
    assert!((covariance(&xa, &xa).unwrap()[(0, 0)] - 0.5).abs() < 1e-10);
}

#[test]
fn qbu_closed_form_agrees_with_gram_solve() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (r, y) = polynomial_pair(&mut rng, 2, 1 + seed as usize % 3, 2, 0.4).unwrap();
        let (q, _) = qbu_closed_form(&r, &y).unwrap();
        let (g, _) = solve_optimal_map(&r, &y, 2).unwrap();
        let scale = g.tensors().iter().map(|t| t.abs().max()).fold(0.0, f64::max);
        for k in 0..=2 {
            let d = (q.tensor(k) - g.tensor(k)).abs().max();
            assert!(d <= 1e-8 * scale, "seed {seed} order {k}: {d} / {scale}");
        }
    }
}

#[test]
fn monomial_dictionary_agrees_with_gram_solve() {
    for m in 1..=3 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + m as u64);
        let (r, y) = polynomial_pair(&mut rng, 2, 2, 2, 0.4).unwrap();
        let dict = BasisDictionary::monomials(2, m);
        let (gm, _) = solve_general_basis(&r, &y, &dict, None).unwrap();
        let (pm, _) = solve_optimal_map(&r, &y, m).unwrap();
        assert!(rel_diff(gm.coeffs().as_slice(), pm.monomial_coeffs().as_slice()) < 1e-8, "m {m}");
    }
}

#[test]
fn dictionary_update_matches_polynomial_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (r, y) = polynomial_pair(&mut rng, 2, 1, 2, 0.5).unwrap();
    let dict = BasisDictionary::monomials(1, 2);
    let (a, _, _) = bayes_update_general(&r, &y, &[0.4], &dict, None).unwrap();
    let (b, _) = bayes_update(&r, &y, &[0.4], 2).unwrap();
    let d = a.axpby(1.0, &b, -1.0).unwrap();
    assert!(norm_l2(&d) < 1e-9 * norm_l2(&b));
}

#[test]
fn covariance_match_hits_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in 1..=3 {
        let dims: Vec<usize> = (0..3).collect();
        let xa = random_pce(&mut rng, &dims, 2, n, 3, 0.8).unwrap();
        let f = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.3 } * (i + 2 * j + 1) as f64 / 3.0);
        let target = &f * f.transpose();
        let (xc, w) = covariance_match(&xa, &target).unwrap();
        assert!(w.is_empty());
        assert!(rel_diff(covariance(&xc, &xc).unwrap().as_slice(), target.as_slice()) < 1e-8);
        assert_eq!(mean(&xc), mean(&xa));
    }
}

#[test]
fn conditional_probability_of_half_line() {
    // x = θ0, y = x + 0.5 θ1: Φ_1(ŷ) = 1/2 + φ(0) ŷ / 1.25
    let x = PceVector::<f64>::gaussian(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1), &[0], 2).unwrap();
    let v = PceVector::gaussian(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1), &[1], 2).unwrap();
    let y = x.axpby(1.0, &v, 0.5).unwrap();
    let ind = indicator_pce(&x, |s| s[0] > 0.0, 5, 60).unwrap();
    let (raw, clipped, _) = conditional_probability(&ind, &y, &[0.4], 1).unwrap();
    let want = 0.5 + (1.0 / (2.0 * std::f64::consts::PI).sqrt()) * 0.4 / 1.25;
    assert!((raw - want).abs() < 5e-3, "{raw} vs {want}");
    assert_eq!(raw, clipped);
    let (_, clipped, _) = conditional_probability(&ind, &y, &[6.0], 1).unwrap();
    assert_eq!(clipped, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degree_zero_update_is_a_noop(seed in any::<u64>(), yh in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, y) = polynomial_pair(&mut rng, 2, 1, 2, 0.5).unwrap();
        let (ra, w) = bayes_update(&r, &y, &[yh], 0).unwrap();
        prop_assert!(w.is_empty());
        prop_assert_eq!(ra, r);
    }

    #[test]
    fn posterior_mean_is_map_at_observation(seed in any::<u64>(), yh in -2.0..2.0f64, m in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, y) = polynomial_pair(&mut rng, 2, 1, 2, 0.5).unwrap();
        let (phi, _) = solve_optimal_map(&r, &y, m).unwrap();
        let (ra, _) = bayes_update(&r, &y, &[yh], m).unwrap();
        let want = phi.apply(&[yh]).unwrap()[0];
        prop_assert!((mean(&ra)[0] - want).abs() < 1e-8 * (1.0 + want.abs() + norm_l2(&r)));
    }
}
