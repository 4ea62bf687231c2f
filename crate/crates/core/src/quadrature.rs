//! Gauss-Hermite rules for the standard normal measure and their tensor grids.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Full tensor grids are refused beyond this many germ dimensions.
pub const MAX_TENSOR_DIMS: usize = 6;

/// Nodes and weights (summing to one) of the `n`-point rule for `N(0,1)`,
/// exact for polynomials of degree `2n - 1`.
pub fn gauss_hermite(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    type Rule = Arc<(Vec<f64>, Vec<f64>)>;
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return hit.clone();
    }
    let rule = Arc::new(compute_rule(n));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' recursion
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Newton polish on orthonormal h_n; weights 1 / (n · ĥ_{n-1}(x)^2)
    let mut weights = vec![0.0; n];
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (hn, hn1) = orthonormal_pair(n, *x);
            let dx = hn / ((n as f64).sqrt() * hn1);
            if dx.is_finite() {
                *x -= dx;
            }
        }
        let (_, hn1) = orthonormal_pair(n, *x);
        *w = 1.0 / (n as f64 * hn1 * hn1);
    }
    // exact symmetry of the rule
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// `(ĥ_n(x), ĥ_{n-1}(x))` with `ĥ_k = h_k / sqrt(k!)`.
fn orthonormal_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Full tensor product of one Gauss-Hermite rule over selected germ dims.
#[derive(Debug, Clone)]
pub struct TensorGrid<T> {
    dims: Vec<usize>,
    germ_dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> TensorGrid<T> {
    /// `level` nodes per dimension on each of `dims` (other germ variables
    /// are fixed at zero in [`Self::theta`]).
    pub fn new(dims: &[usize], level: usize, germ_dim: usize) -> Result<Self> {
        if dims.len() > MAX_TENSOR_DIMS {
            return Err(Error::QuadratureTooLarge {
                dims: dims.len(),
                limit: MAX_TENSOR_DIMS,
            });
        }
        if level == 0 {
            return Err(Error::InvalidArgument("quadrature level must be at least 1".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d >= germ_dim) {
            return Err(Error::DimensionMismatch {
                context: "tensor grid dimension",
                expected: germ_dim,
                got: d + 1,
            });
        }
        let rule = gauss_hermite(level);
        let (x, w) = (&rule.0, &rule.1);
        let k = dims.len();
        let count = level.pow(k as u32);
        let mut points = Vec::with_capacity(count * k);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; k];
        for _ in 0..count {
            let mut wt = 1.0;
            for &i in &idx {
                points.push(T::lit(x[i]));
                wt *= w[i];
            }
            weights.push(T::lit(wt));
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < level {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            germ_dim,
            points,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn germ_dim(&self) -> usize {
        self.germ_dim
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    /// Node `i` in the coordinates of the grid dims.
    pub fn point(&self, i: usize) -> &[T] {
        let k = self.dims.len();
        &self.points[i * k..(i + 1) * k]
    }

    /// Node `i` written into a full germ vector (zeros off the grid dims).
    pub fn theta(&self, i: usize, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (&d, &v) in self.dims.iter().zip(self.point(i)) {
            out[d] = v;
        }
    }

    /// `Σ_i w_i f(θ_i)`.
    pub fn integrate<F: FnMut(&[T]) -> T>(&self, mut f: F) -> T {
        let mut theta = vec![T::zero(); self.germ_dim];
        let mut acc = T::zero();
        for i in 0..self.len() {
            self.theta(i, &mut theta);
            acc += self.weights[i] * f(&theta);
        }
        acc
    }
}
