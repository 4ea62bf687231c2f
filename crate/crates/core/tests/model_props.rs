use bayes_pce::models::diffusion::{diffusion1d_observe, solve_nodal, Diffusion1DSetup};
use bayes_pce::models::lorenz::{lorenz84_integrate, lorenz84_jacobian, lorenz84_rhs, Lorenz84Params};
use std::f64::consts::PI;

#[test]
fn rk4_error_ratio_under_step_halving() {
    let p = Lorenz84Params::default();
    let x0 = [1.0, 0.5, -0.5];
    let reference: Vec<f64> = lorenz84_integrate(&x0, &p, 2.0, 0.05 / 64.0);
    let err = |dt: f64| {
        let x: Vec<f64> = lorenz84_integrate(&x0, &p, 2.0, dt);
        x.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let ratio = err(0.05) / err(0.025);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn jacobian_matches_finite_differences_and_divergence() {
    let p = Lorenz84Params::default();
    let x: [f64; 3] = [0.7, -1.1, 0.4];
    let j = lorenz84_jacobian(&x, &p);
    let h = 1e-6;
    for c in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (lorenz84_rhs(&xp, &p), lorenz84_rhs(&xm, &p));
        for r in 0..3 {
            assert!(((fp[r] - fm[r]) / (2.0 * h) - j[r][c]).abs() < 1e-7);
        }
    }
    let div = j[0][0] + j[1][1] + j[2][2];
    assert!((div - (2.0 * x[0] - p.a - 2.0)).abs() < 1e-14);
}

#[test]
fn diffusion_scheme_is_second_order() {
    let kappa = 1.5;
    let err = |n: usize| {
        let f: Vec<f64> = (0..=n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let u = solve_nodal(&vec![kappa; n + 1], &f);
        (0..=n)
            .map(|i| (u[i] - f[i] / (kappa * 4.0 * PI * PI)).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(16), err(32), err(64));
    for r in [e1 / e2, e2 / e3] {
        assert!((3.6..=4.4).contains(&r), "ratio {r}");
    }
}

#[test]
fn higher_conductivity_means_smaller_response() {
    let setup = Diffusion1DSetup::standard(32, vec![0.0, 0.0, 0.0], 3);
    setup.validate().unwrap();
    let lo: Vec<f64> = diffusion1d_observe(&[0.0, 0.0, 0.0], &setup);
    let hi: Vec<f64> = diffusion1d_observe(&[0.5, 0.5, 0.5], &setup);
    assert_eq!(lo.len(), setup.meas_dim());
    for (a, b) in lo.iter().zip(&hi) {
        assert!((b - a * (-0.5f64).exp()).abs() < 1e-12);
    }
}
