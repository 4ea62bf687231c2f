#![allow(dead_code)]

use bayes_pce::quadrature::TensorGrid;
use bayes_pce::PceVector;

/// Tensor Gauss-Hermite rule over the active dims of all `parts`, exact for
/// polynomial integrands of total degree below `2 * level`.
pub fn grid_for(parts: &[&PceVector<f64>], level: usize) -> TensorGrid<f64> {
    let mut dims: Vec<usize> = parts.iter().flat_map(|p| p.index_set().active_dims()).collect();
    dims.sort_unstable();
    dims.dedup();
    TensorGrid::new(&dims, level, parts[0].germ_dim()).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
