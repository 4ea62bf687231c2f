//! Small dense helpers on top of nalgebra for symmetric PSD matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result, Warning};
use crate::scalar::Real;

/// Relative eigenvalue cutoff used by the pseudo-inverses.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Flooring more negative mass than this fraction of the trace is reported.
pub const PSD_FLOOR_TOL: f64 = 1e-8;

pub fn symmetrize<T: Real>(c: &DMatrix<T>) -> DMatrix<T> {
    (c + c.transpose()) * T::lit(0.5)
}

fn check_square<T: Real>(c: &DMatrix<T>, context: &'static str) -> Result<()> {
    if c.nrows() != c.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: c.nrows(),
            got: c.ncols(),
        });
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Apply `f` to the eigenvalues kept by the cutoff and zero the rest.
/// Returns the reconstructed matrix and the number of kept eigenvalues.
fn spectral_map<T: Real>(
    c: &DMatrix<T>,
    rcond: f64,
    f: impl Fn(T) -> T,
) -> (DMatrix<T>, usize) {
    let n = c.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(symmetrize(c));
    let top = eig.eigenvalues.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cut = top * T::lit(rcond);
    let mut rank = 0;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = if lam > cut && lam > T::zero() {
            rank += 1;
            f(lam)
        } else {
            T::zero()
        };
        scaled.column_mut(j).scale_mut(s);
    }
    (&scaled * eig.eigenvectors.transpose(), rank)
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix and its numerical rank.
pub fn sym_pinv<T: Real>(c: &DMatrix<T>, rcond: f64) -> Result<(DMatrix<T>, usize)> {
    check_square(c, "pseudo-inverse")?;
    Ok(spectral_map(c, rcond, |l| T::one() / l))
}

/// Principal square root of a symmetric PSD matrix (negative modes dropped).
pub fn sym_sqrt<T: Real>(c: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_square(c, "matrix square root")?;
    Ok(spectral_map(c, 0.0, |l| l.sqrt()).0)
}

/// Pseudo-inverse square root and numerical rank.
pub fn sym_inv_sqrt<T: Real>(c: &DMatrix<T>, rcond: f64) -> Result<(DMatrix<T>, usize)> {
    check_square(c, "inverse square root")?;
    Ok(spectral_map(c, rcond, |l| T::one() / l.sqrt()))
}

/// `A · C⁺` for symmetric PSD `C`; warns when `C` is rank deficient.
pub fn right_solve_psd<T: Real>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    context: &'static str,
) -> Result<(DMatrix<T>, Option<Warning>)> {
    if a.ncols() != c.nrows() {
        return Err(Error::DimensionMismatch {
            context,
            expected: c.nrows(),
            got: a.ncols(),
        });
    }
    let (p, rank) = sym_pinv(c, DEFAULT_RCOND)?;
    let warn = (rank < c.nrows()).then(|| Warning::RankTruncated {
        context,
        rank,
        full: c.nrows(),
    });
    Ok((a * p, warn))
}

/// Minimal-norm solution of `G V = B` for symmetric PSD `G` after Jacobi
/// equilibration, with one step of iterative refinement. Zero-diagonal rows
/// are left unscaled. Returns the solution, the numerical rank, and a
/// warning when the rank is deficient.
pub fn solve_psd_equilibrated<T: Real>(
    g: &DMatrix<T>,
    b: &DMatrix<T>,
    rcond: f64,
    context: &'static str,
) -> Result<(DMatrix<T>, usize, Option<Warning>)> {
    check_square(g, context)?;
    if b.nrows() != g.nrows() {
        return Err(Error::DimensionMismatch {
            context,
            expected: g.nrows(),
            got: b.nrows(),
        });
    }
    let n = g.nrows();
    let d: Vec<T> = (0..n)
        .map(|i| {
            let v = g[(i, i)];
            if v > T::zero() {
                T::one() / v.sqrt()
            } else {
                T::one()
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * g[(i, j)] * d[j]);
    let (p, rank) = sym_pinv(&scaled, rcond)?;
    let apply = |rhs: &DMatrix<T>| {
        let mut x = DMatrix::from_fn(n, rhs.ncols(), |i, j| d[i] * rhs[(i, j)]);
        x = &p * x;
        for (i, &di) in d.iter().enumerate() {
            let mut row = x.row_mut(i);
            row *= di;
        }
        x
    };
    let mut v = apply(b);
    let residual = b - g * &v;
    v += apply(&residual);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    let warn = (rank < n).then_some(Warning::RankTruncated {
        context,
        rank,
        full: n,
    });
    Ok((v, rank, warn))
}

/// Clip negative eigenvalues of a symmetric matrix to zero. A warning is
/// returned only when the clipped mass is above roundoff level.
pub fn floor_psd<T: Real>(c: &DMatrix<T>) -> Result<(DMatrix<T>, Option<Warning>)> {
    check_square(c, "PSD floor")?;
    let n = c.nrows();
    if n == 0 {
        return Ok((c.clone(), None));
    }
    let eig = SymmetricEigen::new(symmetrize(c));
    let trace: T = eig.eigenvalues.iter().fold(T::zero(), |s, &v| s + v.abs());
    let floored: T = eig
        .eigenvalues
        .iter()
        .filter(|v| **v < T::zero())
        .fold(T::zero(), |s, &v| s - v);
    if floored == T::zero() {
        return Ok((symmetrize(c), None));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam.max(T::zero()));
    }
    let out = symmetrize(&(&scaled * eig.eigenvectors.transpose()));
    let tol = T::lit(PSD_FLOOR_TOL) * trace;
    let warn = (floored > tol).then(|| Warning::PsdFloored {
        floored: floored.as_f64(),
        trace: trace.as_f64(),
    });
    Ok((out, warn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_of_singular_matrix() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, r) = sym_pinv(&c, DEFAULT_RCOND).unwrap();
        assert_eq!(r, 1);
        assert_relative_eq!(&c * &p * &c, c, epsilon = 1e-12);
        assert_relative_eq!(p[(0, 0)], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_and_inverse_sqrt() {
        let c = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_sqrt(&c).unwrap();
        assert_relative_eq!(&s * &s, c, epsilon = 1e-12);
        let (is, r) = sym_inv_sqrt(&c, DEFAULT_RCOND).unwrap();
        assert_eq!(r, 2);
        assert_relative_eq!(&is * &c * &is, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn floor_reports_only_real_negativity() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let (f, w) = floor_psd(&c).unwrap();
        assert!(w.is_some());
        assert_relative_eq!(f[(1, 1)], 0.0, epsilon = 1e-15);
        let (_, w) = floor_psd(&DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        assert!(w.is_none());
    }

    #[test]
    fn right_solve_warns_on_rank_loss() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (k, w) = right_solve_psd(&a, &c, "gain").unwrap();
        assert!(matches!(w, Some(Warning::RankTruncated { rank: 1, full: 2, .. })));
        assert_relative_eq!(k[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn equilibrated_solve_handles_bad_scaling() {
        let g = DMatrix::from_row_slice(2, 2, &[1e8, 1e3, 1e3, 1.0]);
        let x = DMatrix::from_row_slice(2, 1, &[1e-4, 2.0]);
        let b = &g * &x;
        let (v, r, w) = solve_psd_equilibrated(&g, &b, DEFAULT_RCOND, "test").unwrap();
        assert_eq!(r, 2);
        assert!(w.is_none());
        assert_relative_eq!(v, x, max_relative = 1e-10);
    }
}
