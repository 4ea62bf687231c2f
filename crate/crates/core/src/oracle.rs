//! Independent reference computations used for verification only.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Warning};
use crate::linalg::{solve_psd_equilibrated, DEFAULT_RCOND};
use crate::moments::packed_len;
use crate::pce::{check_germ, BasisEvaluator, GermSampler, PceVector};
use crate::scalar::Real;
use crate::update::PolyMap;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const BOOTSTRAP_BLOCKS: usize = 1000;

/// Least-squares fit of a degree-`m` polynomial map from samples.
#[derive(Debug, Clone)]
pub struct McRegressionResult {
    pub map: PolyMap<f64>,
    pub n_samples: usize,
    /// Root mean square of `R - Φ(y)` over the samples.
    pub residual_norm: f64,
    /// Bootstrap standard errors in the layout of
    /// [`PolyMap::monomial_coeffs`].
    pub std_errors: DMatrix<f64>,
    pub warnings: Vec<Warning>,
}

impl McRegressionResult {
    /// Fitted monomial weights, same layout as `std_errors`.
    pub fn monomial_coeffs(&self) -> DMatrix<f64> {
        self.map.monomial_coeffs()
    }
}

struct Suff {
    xtx: DMatrix<f64>,
    xtr: DMatrix<f64>,
    rtr: f64,
    n: usize,
}

impl Suff {
    fn zeros(p: usize, mo: usize) -> Self {
        Self {
            xtx: DMatrix::zeros(p, p),
            xtr: DMatrix::zeros(p, mo),
            rtr: 0.0,
            n: 0,
        }
    }

    fn add(&mut self, other: &Suff) {
        self.xtx += &other.xtx;
        self.xtr += &other.xtr;
        self.rtr += other.rtr;
        self.n += other.n;
    }

    fn solve(&self) -> Result<(DMatrix<f64>, Option<Warning>)> {
        let (beta, _, w) = solve_psd_equilibrated(&self.xtx, &self.xtr, DEFAULT_RCOND, "regression design")?;
        Ok((beta, w))
    }
}

/// Sample estimate of the degree-`m` optimal map: draws `n_samples` germ
/// points, evaluates `(R, y)`, and fits raw monomials of `y` by least
/// squares (normal equations, equilibrated). Standard errors come from a
/// bootstrap over contiguous sample blocks.
pub fn mc_optimal_map(
    r: &PceVector<f64>,
    y: &PceVector<f64>,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McRegressionResult> {
    check_germ(r, y)?;
    let n_meas = y.value_dim();
    let mo = r.value_dim();
    let p: usize = (0..=m).map(|k| packed_len(n_meas, k)).sum();
    if n_samples < 10 * p || n_samples < BOOTSTRAP_BLOCKS {
        return Err(Error::InvalidArgument(format!(
            "{n_samples} samples are too few for {p} coefficients"
        )));
    }
    let mut br = BasisEvaluator::new(r.index_set());
    let mut by = BasisEvaluator::new(y.index_set());
    let mut hr = vec![0.0; r.index_set().len()];
    let mut hy = vec![0.0; y.index_set().len()];
    let mut blocks: Vec<Suff> = (0..BOOTSTRAP_BLOCKS).map(|_| Suff::zeros(p, mo)).collect();
    let mut x = vec![0.0; p];
    for (i, theta) in GermSampler::<f64>::new(y.germ_dim(), seed).take(n_samples).enumerate() {
        br.eval(&theta, &mut hr);
        by.eval(&theta, &mut hy);
        let rv = r.combine(&hr);
        let yv = y.combine(&hy);
        let mut c = 0;
        for k in 0..=m {
            for v in crate::update::monomial_values(yv.as_slice(), k) {
                x[c] = v;
                c += 1;
            }
        }
        let b = &mut blocks[i * BOOTSTRAP_BLOCKS / n_samples];
        for a in 0..p {
            for bb in a..p {
                b.xtx[(a, bb)] += x[a] * x[bb];
            }
            for o in 0..mo {
                b.xtr[(a, o)] += x[a] * rv[o];
            }
        }
        b.rtr += rv.norm_squared();
        b.n += 1;
    }
    for b in &mut blocks {
        b.xtx.fill_lower_triangle_with_upper_triangle();
    }
    let mut total = Suff::zeros(p, mo);
    for b in &blocks {
        total.add(b);
    }
    let mut warnings = Vec::new();
    let (beta, w) = total.solve()?;
    warnings.extend(w);
    // ‖R - Xβ‖² = RᵀR - 2 βᵀXᵀR + βᵀXᵀXβ
    let fit = beta.transpose() * &total.xtr;
    let quad = beta.transpose() * &total.xtx * &beta;
    let ss = total.rtr - 2.0 * fit.trace() + quad.trace();
    let residual_norm = (ss.max(0.0) / n_samples as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut sum = DMatrix::<f64>::zeros(p, mo);
    let mut sum_sq = DMatrix::<f64>::zeros(p, mo);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut s = Suff::zeros(p, mo);
        for _ in 0..BOOTSTRAP_BLOCKS {
            s.add(&blocks[rng.random_range(0..BOOTSTRAP_BLOCKS)]);
        }
        let (b, _) = s.solve()?;
        sum += &b;
        sum_sq += b.component_mul(&b);
    }
    let nb = BOOTSTRAP_RESAMPLES as f64;
    let std_errors = DMatrix::from_fn(mo, p, |o, a| {
        let mean = sum[(a, o)] / nb;
        ((sum_sq[(a, o)] / nb - mean * mean).max(0.0) * nb / (nb - 1.0)).sqrt()
    });

    // monomial weights → symmetric tensor entries
    let mut tensors = Vec::with_capacity(m + 1);
    let mut row = 0;
    for k in 0..=m {
        let len = packed_len(n_meas, k);
        let mut t = beta.rows(row, len).transpose();
        for (slot, tuple) in crate::moments::sorted_tuples(n_meas, k).iter().enumerate() {
            let mult = crate::moments::multiplicity(tuple) as f64;
            let mut col = t.column_mut(slot);
            col /= mult;
        }
        tensors.push(t);
        row += len;
    }
    Ok(McRegressionResult {
        map: PolyMap::new(n_meas, tensors)?,
        n_samples,
        residual_norm,
        std_errors,
        warnings,
    })
}

/// Textbook Kalman update: `K = P Hᵀ (H P Hᵀ + R)⁻¹`, mean `x + K(ŷ - Hx)`,
/// covariance in Joseph form `(I - KH) P (I - KH)ᵀ + K R Kᵀ`.
pub fn kalman_reference(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
    y_hat: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mean.len();
    let r = y_hat.len();
    if cov.shape() != (n, n) || h.shape() != (r, n) || noise_cov.shape() != (r, r) {
        return Err(Error::DimensionMismatch {
            context: "Kalman reference",
            expected: n,
            got: cov.nrows(),
        });
    }
    let s = h * cov * h.transpose() + noise_cov;
    let lu = s.clone().lu();
    // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P
    let kt = lu
        .solve(&(h * cov))
        .ok_or_else(|| Error::InvalidArgument("singular innovation covariance".into()))?;
    let k = kt.transpose();
    let post_mean = mean + &k * (y_hat - h * mean);
    let i_kh = DMatrix::identity(n, n) - &k * h;
    let post_cov = &i_kh * cov * i_kh.transpose() + &k * noise_cov * k.transpose();
    Ok((post_mean, post_cov))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// `1.06 σ n^{-1/5}`.
    Silverman,
    Fixed(f64),
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde_pdf<T: Real>(samples: &[T], grid: &[T], bandwidth: Bandwidth) -> Result<(Vec<T>, Option<Warning>)> {
    if samples.len() < 100 {
        return Err(Error::InvalidArgument(format!(
            "density estimate needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.as_f64()).collect();
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut warning = None;
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::InvalidArgument(format!("bandwidth {h} must be positive"))),
        Bandwidth::Silverman => {
            let spread = var.sqrt();
            if spread > 1e-12 * mean.abs().max(1.0) {
                1.06 * spread * n.powf(-0.2)
            } else {
                let h = 1e-3 * mean.abs().max(1.0);
                warning = Some(Warning::DegenerateSamples { bandwidth: h });
                h
            }
        }
    };
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let dens = grid
        .iter()
        .map(|g| {
            let g = g.as_f64();
            let s: f64 = xs.iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum();
            T::lit(s * norm)
        })
        .collect();
    Ok((dens, warning))
}

/// Trapezoid rule on a (possibly nonuniform) grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}
