use nalgebra::{DMatrix, DVector};

use crate::error::{Result, Warning};
use crate::linalg::{right_solve_psd, sym_pinv, symmetrize, DEFAULT_RCOND};
use crate::moments::{multiplicity, sorted_tuples, MomentCache};
use crate::pce::{check_germ, PceVector};
use crate::scalar::Real;

use super::polymap::PolyMap;

/// Quadratic update map by block elimination of the degree-2 normal
/// equations, with uncentered moments.
///
/// With pair monomials `φ_p = y_j y_k` (`j ≤ k`), `S = E[φ]` and
/// `D3_{p,i} = E[φ_p y_i] - S_p ȳ_i`:
/// `F = D3 C_yy⁻¹`, `E_q = Cov(R, φ_q) - K D3_qᵀ`,
/// `G_pq = Cov(φ_p, φ_q) - F_p · D3_q`, and then
/// `c2 = E G⁻¹`, `c1 = K - c2 F`, `c0 = R̄ - K ȳ - c2 (S - F ȳ)`.
pub fn qbu_closed_form<T: Real>(r: &PceVector<T>, y: &PceVector<T>) -> Result<(PolyMap<T>, Vec<Warning>)> {
    check_germ(r, y)?;
    let n = y.value_dim();
    let mo = r.value_dim();
    let cache = MomentCache::new(y.clone());
    let m1 = cache.sym_moment(1)?;
    let m2 = cache.sym_moment(2)?;
    let m3 = cache.sym_moment(3)?;
    let m4 = cache.sym_moment(4)?;
    let r0 = cache.cross_moment(r, 0)?;
    let r1 = cache.cross_moment(r, 1)?;
    let r2 = cache.cross_moment(r, 2)?;

    let ybar = DVector::from_fn(n, |i, _| m1.get(&[i]));
    let rbar = r0.values().column(0).into_owned();
    let pairs = sorted_tuples(n, 2);
    let np = pairs.len();
    let s = DVector::from_fn(np, |p, _| m2.get(&pairs[p]));

    let cyy = DMatrix::from_fn(n, n, |i, j| m2.get(&[i, j]) - ybar[i] * ybar[j]);
    let cry = DMatrix::from_fn(mo, n, |a, i| r1.get(a, &[i]) - rbar[a] * ybar[i]);
    let d3 = DMatrix::from_fn(np, n, |p, i| {
        let (j, k) = (pairs[p][0], pairs[p][1]);
        m3.get(&[j, k, i]) - s[p] * ybar[i]
    });

    let mut warnings = Vec::new();
    let (k_gain, w) = right_solve_psd(&cry, &cyy, "measurement covariance")?;
    warnings.extend(w);
    let (f, _) = right_solve_psd(&d3, &cyy, "measurement covariance")?;

    let e = DMatrix::from_fn(mo, np, |a, q| {
        let cov = r2.get(a, &pairs[q]) - rbar[a] * s[q];
        cov - (0..n).map(|i| k_gain[(a, i)] * d3[(q, i)]).fold(T::zero(), |x, y| x + y)
    });
    let g = DMatrix::from_fn(np, np, |p, q| {
        let (j, k) = (pairs[p][0], pairs[p][1]);
        let (l, m) = (pairs[q][0], pairs[q][1]);
        let cov = m4.get(&[j, k, l, m]) - s[p] * s[q];
        cov - (0..n).map(|i| f[(p, i)] * d3[(q, i)]).fold(T::zero(), |x, y| x + y)
    });
    let (g_pinv, rank) = sym_pinv(&symmetrize(&g), DEFAULT_RCOND)?;
    if rank < np {
        warnings.push(Warning::RankTruncated {
            context: "quadratic Schur complement",
            rank,
            full: np,
        });
    }
    let c2 = &e * g_pinv;
    let c1 = &k_gain - &c2 * &f;
    let c0 = &rbar - &k_gain * &ybar - &c2 * (&s - &f * &ybar);

    let mut h2 = c2;
    for (p, t) in pairs.iter().enumerate() {
        let mut col = h2.column_mut(p);
        col /= T::lit(multiplicity(t) as f64);
    }
    let map = PolyMap::new(n, vec![DMatrix::from_column_slice(mo, 1, c0.as_slice()), c1, h2])?;
    Ok((map, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MultiIndex;
    use approx::assert_relative_eq;

    fn pce(germ: usize, terms: &[(&[u32], f64)]) -> PceVector<f64> {
        let t: Vec<_> = terms
            .iter()
            .map(|(a, c)| (MultiIndex::from_dense(a), vec![*c]))
            .collect();
        PceVector::from_terms(germ, 1, &t).unwrap()
    }

    #[test]
    fn gaussian_pair_has_no_quadratic_part() {
        let x = pce(2, &[(&[1], 1.0)]);
        let y = pce(2, &[(&[1], 1.0), (&[0, 1], 1.0)]);
        let (phi, w) = qbu_closed_form(&x, &y).unwrap();
        assert!(w.is_empty());
        assert_relative_eq!(phi.tensor(2)[(0, 0)], 0.0, epsilon = 1e-13);
        assert_relative_eq!(phi.tensor(1)[(0, 0)], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn square_of_measurement() {
        let t = pce(1, &[(&[1], 1.0)]);
        let r = pce(1, &[(&[], 1.0), (&[2], 1.0)]);
        let (phi, _) = qbu_closed_form(&r, &t).unwrap();
        assert_relative_eq!(phi.tensor(0)[(0, 0)], 0.0, epsilon = 1e-13);
        assert_relative_eq!(phi.tensor(1)[(0, 0)], 0.0, epsilon = 1e-13);
        assert_relative_eq!(phi.tensor(2)[(0, 0)], 1.0, epsilon = 1e-13);
    }
}
