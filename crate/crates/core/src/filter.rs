//! Sequential tracking: forecast through a model, append fresh measurement
//! noise germs, assimilate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::index::IndexSet;
use crate::linalg::sym_sqrt;
use crate::moments::{covariance, mean};
use crate::pce::{BasisEvaluator, PceVector};
use crate::quadrature::TensorGrid;
use crate::scalar::Real;
use crate::update::{
    bayes_update_general, bayes_update_with_map_capped, solve_optimal_map, BasisDictionary, GeneralMap, PolyMap,
    MAX_COMPOSITION_DEGREE,
};

type VecFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// A map between vector spaces, applied exactly when affine and by
/// pseudo-spectral projection otherwise.
#[derive(Clone)]
pub enum VectorMap<T: Real> {
    Affine { a: DMatrix<T>, b: DVector<T> },
    Nonlinear {
        f: VecFn<T>,
        out_dim: usize,
        /// Polynomial degree of `f` if it is a polynomial; sizes the output
        /// index set and the quadrature rule.
        degree: Option<u32>,
    },
}

impl<T: Real> fmt::Debug for VectorMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorMap::Affine { a, b } => f.debug_struct("Affine").field("a", a).field("b", b).finish(),
            VectorMap::Nonlinear { out_dim, degree, .. } => f
                .debug_struct("Nonlinear")
                .field("out_dim", out_dim)
                .field("degree", degree)
                .finish(),
        }
    }
}

impl<T: Real> VectorMap<T> {
    pub fn identity(n: usize) -> Self {
        VectorMap::Affine {
            a: DMatrix::identity(n, n),
            b: DVector::zeros(n),
        }
    }

    pub fn linear(a: DMatrix<T>) -> Self {
        let b = DVector::zeros(a.nrows());
        VectorMap::Affine { a, b }
    }

    pub fn nonlinear<F>(out_dim: usize, degree: Option<u32>, f: F) -> Self
    where
        F: Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    {
        VectorMap::Nonlinear {
            f: Arc::new(f),
            out_dim,
            degree,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            VectorMap::Affine { a, .. } => a.nrows(),
            VectorMap::Nonlinear { out_dim, .. } => *out_dim,
        }
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        match self {
            VectorMap::Affine { a, b } => (a * DVector::from_column_slice(x) + b).iter().copied().collect(),
            VectorMap::Nonlinear { f, .. } => f(x),
        }
    }

    /// The map applied to a random vector. Nonlinear maps are projected onto
    /// `out` (default: total degree `degree · deg(x)` on the active germ
    /// dims, or `x`'s own index set when no degree is known).
    pub fn apply_rv(&self, x: &PceVector<T>, level: Option<usize>, out: Option<Arc<IndexSet>>) -> Result<PceVector<T>> {
        match self {
            VectorMap::Affine { a, b } => x.affine(a, Some(b)),
            VectorMap::Nonlinear { f, out_dim, degree } => {
                let dims = x.index_set().active_dims();
                let out = match (out, degree) {
                    (Some(o), _) => o,
                    (None, Some(d)) => IndexSet::total_degree_on(&dims, d * x.max_degree(), x.germ_dim())
                        .union(x.index_set())
                        .into_arc(),
                    (None, None) => x.index_set().clone(),
                };
                let level = level.unwrap_or_else(|| {
                    let d = degree.unwrap_or(3);
                    ((d * x.max_degree() + out.max_degree()) / 2 + 1) as usize
                });
                let grid = TensorGrid::new(&dims, level, x.germ_dim())?;
                let mut b = BasisEvaluator::new(x.index_set());
                let mut basis = vec![T::zero(); x.index_set().len()];
                PceVector::project(out, *out_dim, &grid, |theta| {
                    b.eval(theta, &mut basis);
                    let v = f(x.combine(&basis).as_slice());
                    if v.iter().any(|e| !e.is_finite()) {
                        return Err(Error::NonFinite("model evaluation"));
                    }
                    Ok(DVector::from_vec(v))
                })
            }
        }
    }
}

/// `x_{n+1} = f(x_n) + S_x w_n` with `S_x` already scaled by `ε`.
#[derive(Debug, Clone)]
pub struct StateModel<T: Real> {
    pub step: VectorMap<T>,
    pub process_noise: Option<DMatrix<T>>,
}

impl<T: Real> StateModel<T> {
    pub fn new(step: VectorMap<T>) -> Self {
        Self {
            step,
            process_noise: None,
        }
    }

    pub fn with_process_noise(mut self, s: DMatrix<T>) -> Self {
        self.process_noise = Some(s);
        self
    }
}

/// `y = h(x) + ε S_y v` with `v` standard Gaussian on fresh germ dims.
#[derive(Debug, Clone)]
pub struct MeasurementModel<T: Real> {
    pub h: VectorMap<T>,
    pub eps: T,
    pub shaping: DMatrix<T>,
}

impl<T: Real> MeasurementModel<T> {
    pub fn new(h: VectorMap<T>, eps: T) -> Result<Self> {
        let r = h.out_dim();
        Self::with_shaping(h, eps, DMatrix::identity(r, r))
    }

    pub fn with_shaping(h: VectorMap<T>, eps: T, shaping: DMatrix<T>) -> Result<Self> {
        if eps < T::zero() {
            return Err(Error::InvalidArgument("measurement noise scale must be nonnegative".into()));
        }
        let r = h.out_dim();
        if shaping.nrows() != r || shaping.ncols() != r {
            return Err(Error::DimensionMismatch {
                context: "noise shaping matrix",
                expected: r,
                got: shaping.nrows(),
            });
        }
        Ok(Self { h, eps, shaping })
    }

    pub fn meas_dim(&self) -> usize {
        self.h.out_dim()
    }

    /// Fresh germ variables consumed per forecast.
    pub fn noise_width(&self) -> usize {
        self.meas_dim()
    }

    /// Covariance of the additive noise, `ε² S_y S_yᵀ`.
    pub fn noise_cov(&self) -> DMatrix<T> {
        &self.shaping * self.shaping.transpose() * (self.eps * self.eps)
    }
}

/// `Σ_k s[:,k] θ_{g+k}` on a germ extended by `s.ncols()` dims, plus `x`.
fn add_fresh_noise<T: Real>(x: &PceVector<T>, s: &DMatrix<T>) -> Result<(PceVector<T>, PceVector<T>)> {
    let g = x.germ_dim();
    let w = s.ncols();
    let ext = x.germ_extend(w);
    let dims: Vec<usize> = (g..g + w).collect();
    let noise = PceVector::gaussian(&DVector::zeros(s.nrows()), s, &dims, g + w)?;
    // disjoint germ support makes the cross covariance vanish identically
    if covariance(&ext, &noise)?.iter().any(|v| *v != T::zero()) {
        return Err(Error::InvalidArgument("fresh noise correlated with state".into()));
    }
    Ok((ext.axpby(T::one(), &noise, T::one())?, ext))
}

/// Forecast step through the state model.
pub fn propagate<T: Real>(
    z: &PceVector<T>,
    model: &StateModel<T>,
    level: Option<usize>,
    out: Option<Arc<IndexSet>>,
) -> Result<PceVector<T>> {
    let x = model.step.apply_rv(z, level, out)?;
    match &model.process_noise {
        Some(s) => Ok(add_fresh_noise(&x, s)?.0),
        None => Ok(x),
    }
}

/// Measurement forecast. Returns the state on the extended germ, `y_f`, and
/// the first fresh noise dimension.
pub fn forecast_measurement<T: Real>(
    x_f: &PceVector<T>,
    mm: &MeasurementModel<T>,
    level: Option<usize>,
) -> Result<(PceVector<T>, PceVector<T>, usize)> {
    let first_noise = x_f.germ_dim();
    let hx = mm.h.apply_rv(x_f, level, None)?;
    let s = &mm.shaping * mm.eps;
    let (y_f, _) = add_fresh_noise(&hx, &s)?;
    Ok((x_f.germ_extend(mm.noise_width()), y_f, first_noise))
}

/// Gaussian re-expansion matching mean and covariance, on fresh germ dims
/// appended after the current ones.
pub fn recompress<T: Real>(z: &PceVector<T>) -> Result<PceVector<T>> {
    let n = z.value_dim();
    let c = covariance(z, z)?;
    let l = sym_sqrt(&c)?;
    let g = z.germ_dim();
    let dims: Vec<usize> = (g..g + n).collect();
    PceVector::gaussian(&mean(z), &l, &dims, g + n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOptions {
    /// Quadrature points per germ dimension when projecting the state model
    /// (derived from degrees if unset).
    pub model_level: Option<usize>,
    /// Same for the measurement operator.
    pub measurement_level: Option<usize>,
    /// Total degree of the forecast state for nonlinear models.
    pub state_degree: Option<u32>,
    /// Degree cap when composing the update map with `y_f`.
    pub composition_degree: u32,
    pub recompress: bool,
    pub quantile_samples: usize,
    pub seed: u64,
    /// Model time per assimilation step.
    pub time_per_step: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            model_level: None,
            measurement_level: None,
            state_degree: None,
            composition_degree: MAX_COMPOSITION_DEGREE,
            recompress: false,
            quantile_samples: 2000,
            seed: 0,
            time_per_step: 1.0,
        }
    }
}

/// Which conditional-expectation map an assimilation step uses.
#[derive(Debug, Clone)]
pub enum UpdateRule<T: Real> {
    /// Polynomial map of degree `m` in the measurement.
    Degree(usize),
    /// Galerkin map over a dictionary, with an optional quadrature level.
    Dictionary(BasisDictionary<T>, Option<usize>),
}

impl<T: Real> UpdateRule<T> {
    /// Degree reported in the history.
    pub fn degree(&self) -> usize {
        match self {
            UpdateRule::Degree(m) => *m,
            UpdateRule::Dictionary(d, _) => d.degree().unwrap_or(0) as usize,
        }
    }
}

/// The map fitted in an assimilation step.
#[derive(Debug, Clone)]
pub enum FittedMap<T: Real> {
    Poly(PolyMap<T>),
    General(GeneralMap<T>),
}

impl<T: Real> FittedMap<T> {
    pub fn write_text<W: std::io::Write>(&self, w: W) -> Result<()> {
        match self {
            FittedMap::Poly(p) => p.write_text(w),
            FittedMap::General(g) => g.write_text(w),
        }
    }
}

/// Everything produced by one cycle.
#[derive(Debug, Clone)]
pub struct StepOutput<T: Real> {
    pub state: TrackingState<T>,
    pub forecast: PceVector<T>,
    pub map: FittedMap<T>,
    pub warnings: Vec<Warning>,
}

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow<T: Real> {
    pub step: usize,
    pub time: f64,
    pub forecast_mean: DVector<T>,
    pub assim_mean: DVector<T>,
    pub cov_trace: T,
    pub degree: usize,
    /// One row per state component, columns as in [`QUANTILES`].
    pub quantiles: Vec<[T; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState<T: Real> {
    pub z: PceVector<T>,
    pub step: usize,
    pub time: f64,
    pub history: Vec<HistoryRow<T>>,
}

impl<T: Real> TrackingState<T> {
    pub fn new(z: PceVector<T>) -> Self {
        Self {
            z,
            step: 0,
            time: 0.0,
            history: Vec::new(),
        }
    }

    pub fn germ_dim(&self) -> usize {
        self.z.germ_dim()
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sample_quantiles<T: Real>(z: &PceVector<T>, n: usize, seed: u64) -> Vec<[T; 5]> {
    if n == 0 {
        return Vec::new();
    }
    let samples = z.sample_paths(n, seed);
    (0..z.value_dim())
        .map(|i| {
            let mut col: Vec<T> = samples.iter().map(|s| s[i]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            QUANTILES.map(|p| quantile_sorted(&col, p))
        })
        .collect()
}

/// Forecast state for the next cycle: the model applied to `ts.z`, with
/// nonlinear models projected onto total degree `opts.state_degree`.
pub fn forecast_state<T: Real>(ts: &TrackingState<T>, model: &StateModel<T>, opts: &FilterOptions) -> Result<PceVector<T>> {
    let out = match (&model.step, opts.state_degree) {
        (VectorMap::Nonlinear { .. }, Some(p)) => Some(
            IndexSet::total_degree_on(&ts.z.index_set().active_dims(), p, ts.z.germ_dim())
                .union(ts.z.index_set())
                .into_arc(),
        ),
        _ => None,
    };
    propagate(&ts.z, model, opts.model_level, out)
}

/// One forecast/assimilate cycle with the degree-`m` map.
pub fn assimilate_step<T: Real>(
    ts: &TrackingState<T>,
    model: &StateModel<T>,
    mm: &MeasurementModel<T>,
    y_hat: &[T],
    m: usize,
    opts: &FilterOptions,
) -> Result<(TrackingState<T>, Vec<Warning>)> {
    let out = assimilate_with(ts, model, mm, y_hat, &UpdateRule::Degree(m), opts)?;
    Ok((out.state, out.warnings))
}

/// One forecast/assimilate cycle under an arbitrary update rule.
pub fn assimilate_with<T: Real>(
    ts: &TrackingState<T>,
    model: &StateModel<T>,
    mm: &MeasurementModel<T>,
    y_hat: &[T],
    rule: &UpdateRule<T>,
    opts: &FilterOptions,
) -> Result<StepOutput<T>> {
    if y_hat.len() != mm.meas_dim() {
        return Err(Error::DimensionMismatch {
            context: "observation",
            expected: mm.meas_dim(),
            got: y_hat.len(),
        });
    }
    let x_f = forecast_state(ts, model, opts)?;
    let (x_ext, y_f, _) = forecast_measurement(&x_f, mm, opts.measurement_level)?;
    let (mut z, map, mut warnings) = match rule {
        UpdateRule::Degree(m) => {
            let (phi, w) = if *m == 0 {
                (PolyMap::constant(&mean(&x_ext), y_f.value_dim()), None)
            } else {
                solve_optimal_map(&x_ext, &y_f, *m)?
            };
            let (z, mut ws) = bayes_update_with_map_capped(&x_ext, &y_f, y_hat, &phi, opts.composition_degree)?;
            ws.extend(w);
            (z, FittedMap::Poly(phi), ws)
        }
        UpdateRule::Dictionary(dict, level) => {
            let (z, g, ws) = bayes_update_general(&x_ext, &y_f, y_hat, dict, *level)?;
            (z, FittedMap::General(g), ws)
        }
    };
    let step = ts.step + 1;
    if opts.recompress {
        let before = z.index_set().active_dims().len();
        z = recompress(&z)?;
        warnings.push(Warning::Recompressed {
            step,
            dropped_dims: before.saturating_sub(z.value_dim()),
        });
    }
    let c = covariance(&z, &z)?;
    let time = ts.time + opts.time_per_step;
    let mut history = ts.history.clone();
    history.push(HistoryRow {
        step,
        time,
        forecast_mean: mean(&x_f),
        assim_mean: mean(&z),
        cov_trace: c.trace(),
        degree: rule.degree(),
        quantiles: sample_quantiles(&z, opts.quantile_samples, opts.seed.wrapping_add(step as u64)),
    });
    Ok(StepOutput {
        state: TrackingState { z, step, time, history },
        forecast: x_f,
        map,
        warnings,
    })
}

/// Folds [`assimilate_step`] over the observations.
pub fn run_sequence<T: Real>(
    ts0: &TrackingState<T>,
    model: &StateModel<T>,
    mm: &MeasurementModel<T>,
    observations: &[Vec<T>],
    m: usize,
    opts: &FilterOptions,
) -> Result<(TrackingState<T>, Vec<Warning>)> {
    let mut ts = ts0.clone();
    let mut warnings = Vec::new();
    for y in observations {
        let (next, w) = assimilate_step(&ts, model, mm, y, m, opts)?;
        ts = next;
        warnings.extend(w);
    }
    Ok((ts, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MultiIndex;
    use approx::assert_relative_eq;

    fn theta1() -> PceVector<f64> {
        PceVector::from_terms(1, 1, &[(MultiIndex::unit(0, 1), vec![1.0])]).unwrap()
    }

    #[test]
    fn identity_propagation() {
        let z = PceVector::from_terms(
            2,
            1,
            &[
                (MultiIndex::zero(), vec![0.5]),
                (MultiIndex::from_dense(&[1, 1]), vec![0.3]),
            ],
        )
        .unwrap();
        let model = StateModel::new(VectorMap::nonlinear(1, None, |x: &[f64]| x.to_vec()));
        let x = propagate(&z, &model, Some(4), None).unwrap();
        assert_relative_eq!(x.coeffs(), z.coeffs(), epsilon = 1e-12);
    }

    #[test]
    fn exponential_decay_projection() {
        let model = StateModel::new(VectorMap::nonlinear(1, None, |x: &[f64]| {
            crate::models::rk4_integrate(&|s: &[f64]| vec![-s[0]], x, 1.0, 0.01)
        }));
        let x = propagate(&theta1(), &model, Some(4), None).unwrap();
        assert!((x.coeff(&MultiIndex::unit(0, 1))[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn measurement_forecasts() {
        let x = theta1();
        let mm = MeasurementModel::new(VectorMap::identity(1), 0.0).unwrap();
        let (xe, y, first) = forecast_measurement(&x, &mm, None).unwrap();
        assert_eq!(first, 1);
        assert_eq!(y.germ_dim(), 2);
        assert_relative_eq!(y.coeff(&MultiIndex::unit(0, 1))[0], 1.0);
        assert_eq!(xe.germ_dim(), 2);

        let mm = MeasurementModel::new(VectorMap::linear(DMatrix::zeros(1, 1)), 1.0).unwrap();
        let (_, y, _) = forecast_measurement(&x, &mm, None).unwrap();
        assert_relative_eq!(covariance(&y, &y).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn cubic_measurement_mean() {
        let (mu, sd) = (0.7, 0.4);
        let x = PceVector::gaussian(
            &DVector::from_element(1, mu),
            &DMatrix::from_element(1, 1, sd),
            &[0],
            1,
        )
        .unwrap();
        let mm = MeasurementModel::new(VectorMap::nonlinear(1, Some(3), |x: &[f64]| vec![x[0].powi(3)]), 0.1).unwrap();
        let (_, y, _) = forecast_measurement(&x, &mm, None).unwrap();
        assert_relative_eq!(mean(&y)[0], 3.0 * sd * sd * mu + mu.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn zero_degree_step_is_pure_forecast() {
        let ts = TrackingState::new(theta1());
        let model = StateModel::new(VectorMap::linear(DMatrix::from_element(1, 1, 0.9)));
        let mm = MeasurementModel::new(VectorMap::identity(1), 0.5).unwrap();
        let (next, _) = assimilate_step(&ts, &model, &mm, &[3.0], 0, &FilterOptions::default()).unwrap();
        assert_relative_eq!(next.z.coeff(&MultiIndex::unit(0, 1))[0], 0.9);
        assert_eq!(next.germ_dim(), 2);
        assert_eq!(next.history.len(), 1);
    }

    #[test]
    fn empty_sequence_returns_initial_state() {
        let ts = TrackingState::new(theta1());
        let model = StateModel::new(VectorMap::identity(1));
        let mm = MeasurementModel::new(VectorMap::identity(1), 0.5).unwrap();
        let (out, w) = run_sequence(&ts, &model, &mm, &[], 1, &FilterOptions::default()).unwrap();
        assert_eq!(out, ts);
        assert!(w.is_empty());
    }

    #[test]
    fn quantile_helper() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_eq!(quantile_sorted(&v, 0.05), 1.2);
    }
}
