//! Seeded random problem generators for verification suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::index::IndexSet;
use crate::pce::PceVector;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Random expansion of total degree `degree` on germ dims `dims`; the
/// coefficient of a degree-`d` mode has scale `decay^d / sqrt(α!)`.
pub fn random_pce<R: Rng>(
    rng: &mut R,
    dims: &[usize],
    degree: u32,
    value_dim: usize,
    germ_dim: usize,
    decay: f64,
) -> Result<PceVector<f64>> {
    let set = IndexSet::total_degree_on(dims, degree, germ_dim).into_arc();
    let mut coeffs = DMatrix::zeros(set.len(), value_dim);
    for (i, a) in set.members().iter().enumerate() {
        let n: f64 = set.norm_sq(i)?;
        let s = decay.powi(a.degree() as i32) / n.sqrt();
        for c in 0..value_dim {
            coeffs[(i, c)] = s * normal(rng);
        }
    }
    PceVector::new(set, coeffs)
}

/// Linear-Gaussian data: prior `N(mean, L Lᵀ)`, `y = H x + S v`.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    pub mean: DVector<f64>,
    pub factor: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub noise_factor: DMatrix<f64>,
    pub y_hat: DVector<f64>,
}

impl LinearGaussian {
    pub fn random<R: Rng>(rng: &mut R, n: usize, r: usize) -> Self {
        let mean = DVector::from_fn(n, |_, _| normal(rng));
        let mut factor = DMatrix::from_fn(n, n, |_, _| 0.5 * normal(rng));
        for i in 0..n {
            factor[(i, i)] += 1.0;
        }
        let h = DMatrix::from_fn(r, n, |_, _| normal(rng));
        let mut noise_factor = DMatrix::from_fn(r, r, |_, _| 0.2 * normal(rng));
        for i in 0..r {
            noise_factor[(i, i)] += 0.5 + rng.random::<f64>();
        }
        let y_hat = &h * &mean + DVector::from_fn(r, |_, _| 2.0 * normal(rng));
        Self {
            mean,
            factor,
            h,
            noise_factor,
            y_hat,
        }
    }

    pub fn cov(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn noise_cov(&self) -> DMatrix<f64> {
        &self.noise_factor * self.noise_factor.transpose()
    }

    /// `(x_f, y_f)` on a germ of `n + r` variables: state on the first `n`,
    /// noise on the last `r`.
    pub fn to_pce(&self) -> Result<(PceVector<f64>, PceVector<f64>)> {
        let n = self.mean.len();
        let r = self.h.nrows();
        let g = n + r;
        let dims_x: Vec<usize> = (0..n).collect();
        let dims_v: Vec<usize> = (n..g).collect();
        let x = PceVector::gaussian(&self.mean, &self.factor, &dims_x, g)?;
        let v = PceVector::gaussian(&DVector::zeros(r), &self.noise_factor, &dims_v, g)?;
        let y = x.affine(&self.h, None)?.axpby(1.0, &v, 1.0)?;
        Ok((x, y))
    }
}

/// A nondegenerate polynomial pair: `R` and the noise-free part of `y`
/// share `n_state` germ dims; `y` gets independent additive noise of size
/// `noise` on `meas_dim` further dims.
pub fn polynomial_pair<R: Rng>(
    rng: &mut R,
    n_state: usize,
    meas_dim: usize,
    degree: u32,
    noise: f64,
) -> Result<(PceVector<f64>, PceVector<f64>)> {
    let g = n_state + meas_dim;
    let dims: Vec<usize> = (0..n_state).collect();
    let r = random_pce(rng, &dims, degree, 1, g, 0.6)?;
    let clean = random_pce(rng, &dims, degree, meas_dim, g, 0.6)?;
    let noise_dims: Vec<usize> = (n_state..g).collect();
    let v = PceVector::gaussian(
        &DVector::zeros(meas_dim),
        &(DMatrix::identity(meas_dim, meas_dim) * noise),
        &noise_dims,
        g,
    )?;
    Ok((r, clean.axpby(1.0, &v, 1.0)?))
}
