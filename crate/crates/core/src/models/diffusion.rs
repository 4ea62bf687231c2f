//! `-(e^{q(x)} u')' = f` on `[0, 1]` with `u(0) = u(1) = 0`.
//!
//! Three-point finite-volume scheme on a uniform grid: `κ = e^q` is sampled
//! at nodes and harmonically averaged onto faces.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion1DSetup {
    /// Number of elements; nodes are `x_i = i / n_el`.
    pub n_el: usize,
    /// Number of piecewise-constant patches of `q` (equal widths).
    pub n_params: usize,
    /// Nodal load vectors (`n_el + 1` values; boundary values unused).
    pub loads: Vec<Vec<f64>>,
    /// Interior node indices where `u` is observed.
    pub obs: Vec<usize>,
    pub q_true: Vec<f64>,
}

impl Diffusion1DSetup {
    /// Uniform loads `f = 1` and `f = 10 sin(2πx)`, observations at
    /// `n_obs` equally spaced interior nodes.
    pub fn standard(n_el: usize, q_true: Vec<f64>, n_obs: usize) -> Self {
        let nodes = |g: &dyn Fn(f64) -> f64| (0..=n_el).map(|i| g(i as f64 / n_el as f64)).collect();
        let loads = vec![
            nodes(&|_| 1.0),
            nodes(&|x| 10.0 * (2.0 * std::f64::consts::PI * x).sin()),
        ];
        let obs = (1..=n_obs).map(|k| k * n_el / (n_obs + 1)).collect();
        Self {
            n_el,
            n_params: q_true.len(),
            loads,
            obs,
            q_true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_el < 2 || self.n_params == 0 || self.n_params > self.n_el {
            return Err(Error::InvalidArgument("diffusion grid or patch count".into()));
        }
        if self.q_true.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                context: "true parameter",
                expected: self.n_params,
                got: self.q_true.len(),
            });
        }
        if self.loads.iter().any(|l| l.len() != self.n_el + 1) {
            return Err(Error::InvalidArgument("load vectors need n_el + 1 nodal values".into()));
        }
        if self.obs.iter().any(|&i| i == 0 || i >= self.n_el) {
            return Err(Error::InvalidArgument("observation nodes must be interior".into()));
        }
        Ok(())
    }

    /// Measurement dimension: every load observed at every point.
    pub fn meas_dim(&self) -> usize {
        self.loads.len() * self.obs.len()
    }

    /// Patch owning node `i`.
    pub fn patch(&self, i: usize) -> usize {
        (i * self.n_params / self.n_el).min(self.n_params - 1)
    }

    /// Nodal conductivity `e^{q}`.
    pub fn kappa<T: Real>(&self, q: &[T]) -> Vec<T> {
        (0..=self.n_el).map(|i| q[self.patch(i)].exp()).collect()
    }
}

/// Nodal solution (including the zero boundary values) for nodal `κ`, `f`.
pub fn solve_nodal<T: Real>(kappa: &[T], f: &[T]) -> Vec<T> {
    let n = kappa.len() - 1;
    let h = T::one() / T::lit(n as f64);
    let h2 = h * h;
    let face: Vec<T> = (0..n)
        .map(|i| T::lit(2.0) * kappa[i] * kappa[i + 1] / (kappa[i] + kappa[i + 1]))
        .collect();
    // Thomas algorithm on unknowns 1..n-1
    let m = n - 1;
    let mut diag: Vec<T> = (1..n).map(|i| face[i - 1] + face[i]).collect();
    let mut rhs: Vec<T> = (1..n).map(|i| f[i] * h2).collect();
    let off = |k: usize| -face[k + 1];
    for k in 1..m {
        let w = off(k - 1) / diag[k - 1];
        diag[k] -= w * off(k - 1);
        let prev = rhs[k - 1];
        rhs[k] -= w * prev;
    }
    let mut u = vec![T::zero(); n + 1];
    for k in (0..m).rev() {
        let next = if k + 1 < m { u[k + 2] } else { T::zero() };
        u[k + 1] = (rhs[k] - off(k) * next) / diag[k];
    }
    u
}

/// `u` at the observation nodes for load `load`.
pub fn diffusion1d_solve<T: Real>(q: &[T], load: usize, setup: &Diffusion1DSetup) -> Vec<T> {
    let f: Vec<T> = setup.loads[load].iter().map(|&v| T::lit(v)).collect();
    let u = solve_nodal(&setup.kappa(q), &f);
    setup.obs.iter().map(|&i| u[i]).collect()
}

/// All observations, load-major.
pub fn diffusion1d_observe<T: Real>(q: &[T], setup: &Diffusion1DSetup) -> Vec<T> {
    (0..setup.loads.len())
        .flat_map(|l| diffusion1d_solve(q, l, setup))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_conductivity_poisson() {
        let n = 16;
        let u = solve_nodal(&vec![1.0; n + 1], &vec![1.0; n + 1]);
        for (i, v) in u.iter().enumerate() {
            let x = i as f64 / n as f64;
            assert!((v - x * (1.0 - x) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn second_order_convergence() {
        let pi = std::f64::consts::PI;
        let err = |n: usize| {
            let f: Vec<f64> = (0..=n).map(|i| pi * pi * (pi * i as f64 / n as f64).sin()).collect();
            let u = solve_nodal(&vec![1.0; n + 1], &f);
            u.iter()
                .enumerate()
                .map(|(i, v)| (v - (pi * i as f64 / n as f64).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn shift_scales_solution() {
        let setup = Diffusion1DSetup::standard(32, vec![0.1, -0.3, 0.4], 5);
        let base = diffusion1d_solve(&[0.1, -0.3, 0.4], 0, &setup);
        let c: f64 = 0.7;
        let shifted = diffusion1d_solve(&[0.1 + c, -0.3 + c, 0.4 + c], 0, &setup);
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b - a * (-c).exp()).abs() < 1e-14 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn mirror_symmetry() {
        let n = 20;
        let kappa: Vec<f64> = (0..=n).map(|i| 1.0 + (i as f64 / n as f64 - 0.3).powi(2)).collect();
        let mirrored: Vec<f64> = kappa.iter().rev().copied().collect();
        let f = vec![1.0; n + 1];
        let u = solve_nodal(&kappa, &f);
        let v = solve_nodal(&mirrored, &f);
        for i in 0..=n {
            assert!((u[i] - v[n - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn setup_checks() {
        let s = Diffusion1DSetup::standard(32, vec![0.0; 4], 3);
        assert!(s.validate().is_ok());
        assert_eq!(s.meas_dim(), 6);
        assert_eq!(s.obs, vec![8, 16, 24]);
        let bad = Diffusion1DSetup { obs: vec![0], ..s };
        assert!(bad.validate().is_err());
    }
}
