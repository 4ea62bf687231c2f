//! Forward models for the virtual experiments.

pub mod diffusion;
pub mod lorenz;
pub mod scalar;

use crate::scalar::Real;

/// One classical Runge-Kutta step of `x' = f(x)`.
pub fn rk4_step<T: Real, F>(f: &F, x: &[T], dt: T) -> Vec<T>
where
    F: Fn(&[T]) -> Vec<T>,
{
    let half = dt * T::lit(0.5);
    let k1 = f(x);
    let x2: Vec<T> = x.iter().zip(&k1).map(|(a, k)| *a + half * *k).collect();
    let k2 = f(&x2);
    let x3: Vec<T> = x.iter().zip(&k2).map(|(a, k)| *a + half * *k).collect();
    let k3 = f(&x3);
    let x4: Vec<T> = x.iter().zip(&k3).map(|(a, k)| *a + dt * *k).collect();
    let k4 = f(&x4);
    let sixth = dt / T::lit(6.0);
    (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

/// Integrates over `duration` with steps of at most `dt` (the last interval
/// is split evenly so the endpoint is hit exactly).
pub fn rk4_integrate<T: Real, F>(f: &F, x: &[T], duration: T, dt: T) -> Vec<T>
where
    F: Fn(&[T]) -> Vec<T>,
{
    if duration <= T::zero() {
        return x.to_vec();
    }
    let n = (duration / dt).ceil().as_f64().max(1.0) as usize;
    let h = duration / T::lit(n as f64);
    let mut cur = x.to_vec();
    for _ in 0..n {
        cur = rk4_step(f, &cur, h);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let f = |x: &[f64]| vec![-x[0]];
        let x = rk4_integrate(&f, &[1.0], 1.0, 0.01);
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(rk4_integrate(&f, &[1.0], 0.0, 0.01), vec![1.0]);
    }

    #[test]
    fn single_step_matches_taylor() {
        // for x' = λx one RK4 step is the degree-4 Taylor polynomial of e^{λh}
        let f = |x: &[f64]| vec![-2.0 * x[0]];
        for h in [0.1, 0.05] {
            let z: f64 = -2.0 * h;
            let taylor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
            assert!((rk4_step(&f, &[1.0], h)[0] - taylor).abs() < 1e-15);
            assert!((taylor - z.exp()).abs() < z.abs().powi(5));
        }
    }
}
