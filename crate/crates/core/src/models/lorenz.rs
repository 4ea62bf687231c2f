//! Lorenz-84 low-order atmospheric circulation model.

use crate::scalar::Real;

use super::rk4_integrate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz84Params {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub g: f64,
    pub dt_inner: f64,
    /// Model time units between assimilation steps.
    pub days_per_update: f64,
}

impl Default for Lorenz84Params {
    fn default() -> Self {
        Self {
            a: 0.25,
            b: 4.0,
            f: 8.0,
            g: 1.0,
            dt_inner: 0.05,
            days_per_update: 1.0,
        }
    }
}

pub fn lorenz84_rhs<T: Real>(x: &[T], p: &Lorenz84Params) -> Vec<T> {
    let (a, b, f, g) = (T::lit(p.a), T::lit(p.b), T::lit(p.f), T::lit(p.g));
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    vec![
        -x2 * x2 - x3 * x3 - a * x1 + a * f,
        x1 * x2 - b * x1 * x3 - x2 + g,
        b * x1 * x2 + x1 * x3 - x3,
    ]
}

/// Jacobian of the right-hand side, row-major.
pub fn lorenz84_jacobian<T: Real>(x: &[T], p: &Lorenz84Params) -> [[T; 3]; 3] {
    let (a, b) = (T::lit(p.a), T::lit(p.b));
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let two = T::lit(2.0);
    [
        [-a, -two * x2, -two * x3],
        [x2 - b * x3, x1 - T::one(), -b * x1],
        [b * x2 + x3, b * x1, x1 - T::one()],
    ]
}

/// State after `days_per_update` time units.
pub fn lorenz84_step<T: Real>(x: &[T], p: &Lorenz84Params) -> Vec<T> {
    lorenz84_integrate(x, p, p.days_per_update, p.dt_inner)
}

pub fn lorenz84_integrate<T: Real>(x: &[T], p: &Lorenz84Params, duration: f64, dt: f64) -> Vec<T> {
    rk4_integrate(&|s: &[T]| lorenz84_rhs(s, p), x, T::lit(duration), T::lit(dt))
}
