use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result, Warning};
use crate::index::IndexSet;
use crate::linalg::{floor_psd, sym_inv_sqrt, sym_sqrt, symmetrize, DEFAULT_RCOND};
use crate::moments::{covariance, mean};
use crate::pce::{check_germ, product, PceVector};
use crate::quadrature::TensorGrid;
use crate::scalar::Real;

use super::general::{solve_general_basis, BasisDictionary, GeneralMap};
use super::gram::solve_optimal_map;
use super::polymap::PolyMap;

/// Default degree cap for composing a map with a random vector.
pub const MAX_COMPOSITION_DEGREE: u32 = 8;

/// `K = C_xy C_yy⁺` through the SVD of `C_yy`, discarding singular values
/// below `1e-12 σ_max`.
pub fn kalman_gain<T: Real>(c_xy: &DMatrix<T>, c_yy: &DMatrix<T>) -> Result<(DMatrix<T>, Option<Warning>)> {
    if c_yy.nrows() != c_yy.ncols() || c_xy.ncols() != c_yy.nrows() {
        return Err(Error::DimensionMismatch {
            context: "Kalman gain",
            expected: c_yy.nrows(),
            got: c_xy.ncols(),
        });
    }
    let n = c_yy.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(c_xy.nrows(), 0), None));
    }
    let svd = SVD::new(c_yy.clone(), true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let top = svd.singular_values.iter().fold(T::zero(), |m, s| m.max(*s));
    let cut = top * T::lit(DEFAULT_RCOND);
    let mut rank = 0;
    // C⁺ = V Σ⁺ Uᵀ
    let mut v_scaled = vt.transpose();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cut && s > T::zero() {
            rank += 1;
            T::one() / s
        } else {
            T::zero()
        };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    let k = c_xy * v_scaled * u.transpose();
    let warn = (rank < n).then_some(Warning::RankTruncated {
        context: "Kalman gain",
        rank,
        full: n,
    });
    Ok((k, warn))
}

/// `R_a = R_f + Φ(ŷ) - Φ(y_f)` for a given map. The constant term cancels
/// and is never formed; a degree-0 map returns the forecast unchanged.
pub fn bayes_update_with_map<T: Real>(
    r_f: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    phi: &PolyMap<T>,
) -> Result<(PceVector<T>, Vec<Warning>)> {
    bayes_update_with_map_capped(r_f, y_f, y_hat, phi, MAX_COMPOSITION_DEGREE)
}

/// As [`bayes_update_with_map`], truncating `Φ(y_f)` at total degree `cap`.
pub fn bayes_update_with_map_capped<T: Real>(
    r_f: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    phi: &PolyMap<T>,
    cap: u32,
) -> Result<(PceVector<T>, Vec<Warning>)> {
    check_germ(r_f, y_f)?;
    if phi.degree() == 0 {
        return Ok((r_f.clone(), Vec::new()));
    }
    let shift = phi.apply_nonconstant(y_hat)?;
    let (at_forecast, w) = phi.apply_rv_from(1, y_f, cap)?;
    let r_a = r_f.axpby(T::one(), &at_forecast, -T::one())?.shift_mean(&shift);
    Ok((r_a, w.into_iter().collect()))
}

/// Bayesian update with the degree-`m` optimal map.
pub fn bayes_update<T: Real>(
    r_f: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    m: usize,
) -> Result<(PceVector<T>, Vec<Warning>)> {
    if m == 0 {
        check_germ(r_f, y_f)?;
        return Ok((r_f.clone(), Vec::new()));
    }
    let (phi, w) = solve_optimal_map(r_f, y_f, m)?;
    let (r_a, mut ws) = bayes_update_with_map(r_f, y_f, y_hat, &phi)?;
    ws.extend(w);
    Ok((r_a, ws))
}

/// Bayesian update over a general dictionary. `Φ(y_f)` is projected onto
/// total degree `deg(dict) · deg(y_f)` on the germ dims of `y_f` (plus the
/// modes of `R_f`); `level` sets both quadratures and is required for
/// non-polynomial dictionaries.
pub fn bayes_update_general<T: Real>(
    r_f: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    dict: &BasisDictionary<T>,
    level: Option<usize>,
) -> Result<(PceVector<T>, GeneralMap<T>, Vec<Warning>)> {
    let (map, w) = solve_general_basis(r_f, y_f, dict, level)?;
    let d = dict.degree().unwrap_or(1) * y_f.max_degree();
    let dims = y_f.index_set().active_dims();
    let out = IndexSet::total_degree_on(&dims, d, y_f.germ_dim())
        .union(r_f.index_set())
        .into_arc();
    let proj_level = level.unwrap_or((d + 1) as usize);
    let at_forecast = map.apply_rv(y_f, out, proj_level)?;
    let shift = map.apply(y_hat)?;
    let r_a = r_f.axpby(T::one(), &at_forecast, -T::one())?.shift_mean(&shift);
    Ok((r_a, map, w.into_iter().collect()))
}

/// Upper-triangle products `x_i x_j` (`i ≤ j`) as one random vector.
pub fn outer_products<T: Real>(x: &PceVector<T>) -> Result<PceVector<T>> {
    let n = x.value_dim();
    let parts = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| product(x, i, x, j))
        .collect::<Result<Vec<_>>>()?;
    PceVector::stack(&parts.iter().collect::<Vec<_>>())
}

/// `C_p = Φ_{x⊗x}(ŷ) - Φ_x(ŷ) ⊗ Φ_x(ŷ)`, symmetrized and floored to PSD.
///
/// `Φ_x` has degree `m`; `Φ_{x⊗x}` has degree `2m`, which is what the
/// second conditional moment needs to be exact in the Gaussian case.
pub fn posterior_covariance_exact<T: Real>(
    x_f: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    m: usize,
) -> Result<(DMatrix<T>, Vec<Warning>)> {
    check_germ(x_f, y_f)?;
    let n = x_f.value_dim();
    let mut warnings = Vec::new();
    let (phi_x, w) = solve_optimal_map(x_f, y_f, m)?;
    warnings.extend(w);
    let (phi_xx, w) = solve_optimal_map(&outer_products(x_f)?, y_f, 2 * m)?;
    warnings.extend(w);
    let mx = phi_x.apply(y_hat)?;
    let mxx = phi_xx.apply(y_hat)?;
    let mut c = DMatrix::zeros(n, n);
    let mut slot = 0;
    for i in 0..n {
        for j in i..n {
            let v = mxx[slot] - mx[i] * mx[j];
            c[(i, j)] = v;
            c[(j, i)] = v;
            slot += 1;
        }
    }
    let (c, w) = floor_psd(&c)?;
    warnings.extend(w);
    Ok((c, warnings))
}

/// `x_c = x̄ + C_p^{1/2} C_aa^{-1/2} (x_a - x̄)`: rescales the fluctuation so
/// that the covariance becomes `c_p`, keeping the mean.
pub fn covariance_match<T: Real>(x_a: &PceVector<T>, c_p: &DMatrix<T>) -> Result<(PceVector<T>, Vec<Warning>)> {
    let n = x_a.value_dim();
    if c_p.nrows() != n || c_p.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "target covariance",
            expected: n,
            got: c_p.nrows(),
        });
    }
    let c_aa = covariance(x_a, x_a)?;
    let (inv_sqrt, rank) = sym_inv_sqrt(&c_aa, DEFAULT_RCOND)?;
    let mut warnings = Vec::new();
    if rank < n {
        warnings.push(Warning::RankTruncated {
            context: "assimilated covariance",
            rank,
            full: n,
        });
    }
    let t = sym_sqrt(&symmetrize(c_p))? * inv_sqrt;
    let mut out = x_a.clone();
    let fluct = x_a.coeffs().rows(1, x_a.coeffs().nrows() - 1) * t.transpose();
    out.coeffs_mut()
        .rows_mut(1, fluct.nrows())
        .copy_from(&fluct);
    Ok((out, warnings))
}

/// `P(E | ŷ)` from the degree-`m` map of an indicator expansion; returns
/// the raw value and its clip to `[0, 1]`.
pub fn conditional_probability<T: Real>(
    indicator: &PceVector<T>,
    y_f: &PceVector<T>,
    y_hat: &[T],
    m: usize,
) -> Result<(T, T, Vec<Warning>)> {
    if indicator.value_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "indicator expansion",
            expected: 1,
            got: indicator.value_dim(),
        });
    }
    let (phi, w) = solve_optimal_map(indicator, y_f, m)?;
    let raw = phi.apply(y_hat)?[0];
    Ok((raw, raw.max(T::zero()).min(T::one()), w.into_iter().collect()))
}

/// Projection of `χ_E(x(θ))` onto total degree `degree` over the germ
/// variables of `x`, by a `level`-point rule per dimension.
pub fn indicator_pce<T: Real, F>(x: &PceVector<T>, event: F, degree: u32, level: usize) -> Result<PceVector<T>>
where
    F: Fn(&[T]) -> bool,
{
    let dims = x.index_set().active_dims();
    let out = IndexSet::total_degree_on(&dims, degree, x.germ_dim()).into_arc();
    let grid = TensorGrid::new(&dims, level, x.germ_dim())?;
    PceVector::project(out, 1, &grid, |theta| {
        let v = x.eval(theta)?;
        Ok(DVector::from_element(1, if event(v.as_slice()) { T::one() } else { T::zero() }))
    })
}

/// Mean of the update correction, handy for diagnostics.
pub fn innovation_mean<T: Real>(y_f: &PceVector<T>, y_hat: &[T]) -> DVector<T> {
    DVector::from_column_slice(y_hat) - mean(y_f)
}
