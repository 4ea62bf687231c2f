use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::linalg::{solve_psd_equilibrated, DEFAULT_RCOND};
use crate::moments::{mean, sorted_tuples, MomentCache};
use crate::pce::{check_germ, PceVector};
use crate::scalar::Real;

use super::polymap::PolyMap;

/// Normal equations of the degree-`m` projection onto polynomials in `y`.
///
/// The basis is the monomials of the centered measurement `ỹ = y - ȳ`,
/// orders `0..=m`, sorted tuples within each order. `gram[a][b] = E[ỹ^a ỹ^b]`
/// and `rhs[a] = E[R ỹ^a]`; all `M` outputs share the one Gram matrix.
#[derive(Debug, Clone)]
pub struct GramSystem<T: Real> {
    degree: usize,
    center: DVector<T>,
    basis: Vec<Vec<usize>>,
    gram: DMatrix<T>,
    rhs: DMatrix<T>,
    rcond: f64,
}

impl<T: Real> GramSystem<T> {
    pub fn build(r: &PceVector<T>, y: &PceVector<T>, m: usize) -> Result<Self> {
        check_germ(r, y)?;
        let center = mean(y);
        let centered = MomentCache::new(y.shift_mean(&-&center));
        let n = y.value_dim();
        let basis: Vec<Vec<usize>> = (0..=m).flat_map(|k| sorted_tuples(n, k)).collect();
        let moments = (0..=2 * m)
            .map(|k| centered.sym_moment(k))
            .collect::<Result<Vec<_>>>()?;
        let p = basis.len();
        let mut gram = DMatrix::zeros(p, p);
        let mut merged = Vec::with_capacity(2 * m);
        for a in 0..p {
            for b in a..p {
                merged.clear();
                merged.extend_from_slice(&basis[a]);
                merged.extend_from_slice(&basis[b]);
                let v = moments[merged.len()].get(&merged);
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        let mut rhs = DMatrix::zeros(p, r.value_dim());
        let mut row = 0;
        for k in 0..=m {
            let cm = centered.cross_moment(r, k)?;
            let block = cm.values().transpose();
            rhs.rows_mut(row, block.nrows()).copy_from(&block);
            row += block.nrows();
        }
        if gram.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Overflow("moment assembly".into()));
        }
        Ok(Self {
            degree: m,
            center,
            basis,
            gram,
            rhs,
            rcond: DEFAULT_RCOND,
        })
    }

    pub fn with_rcond(mut self, rcond: f64) -> Self {
        self.rcond = rcond;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn center(&self) -> &DVector<T> {
        &self.center
    }

    /// Sorted index tuples of the centered monomial basis.
    pub fn basis(&self) -> &[Vec<usize>] {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    /// `P × M` right-hand sides.
    pub fn rhs(&self) -> &DMatrix<T> {
        &self.rhs
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    /// Minimal-norm (in the equilibrated basis) coefficients `P × M`.
    pub fn solve_coefficients(&self) -> Result<(DMatrix<T>, Option<Warning>)> {
        let (v, _, w) = solve_psd_equilibrated(&self.gram, &self.rhs, self.rcond, "moment Gram matrix")?;
        Ok((v, w))
    }

    /// The optimal map, expressed in raw `y`.
    pub fn solve(&self) -> Result<(PolyMap<T>, Option<Warning>)> {
        let (v, w) = self.solve_coefficients()?;
        let n = self.center.len();
        let mut blocks = Vec::with_capacity(self.degree + 1);
        let mut row = 0;
        for k in 0..=self.degree {
            let len = crate::moments::packed_len(n, k);
            blocks.push(v.rows(row, len).transpose());
            row += len;
        }
        Ok((PolyMap::from_centered_monomials(&blocks, &self.center)?, w))
    }
}

/// `Φ_m` projecting `R` onto polynomials of degree `≤ m` in `y`.
pub fn solve_optimal_map<T: Real>(
    r: &PceVector<T>,
    y: &PceVector<T>,
    m: usize,
) -> Result<(PolyMap<T>, Option<Warning>)> {
    GramSystem::build(r, y, m)?.solve()
}
