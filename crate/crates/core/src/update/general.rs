use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::index::IndexSet;
use crate::linalg::{solve_psd_equilibrated, DEFAULT_RCOND};
use crate::moments::sorted_tuples;
use crate::pce::{check_germ, BasisEvaluator, PceVector};
use crate::quadrature::TensorGrid;
use crate::scalar::Real;

type BasisFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Ordered list of scalar functions `ψ_α` on measurement space.
#[derive(Clone)]
pub struct BasisDictionary<T> {
    funcs: Vec<BasisFn<T>>,
    names: Vec<String>,
    meas_dim: usize,
    spans_linear: bool,
    // polynomial degree of the functions, when known; sets quadrature size
    degree: Option<u32>,
}

impl<T> fmt::Debug for BasisDictionary<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisDictionary")
            .field("names", &self.names)
            .field("meas_dim", &self.meas_dim)
            .field("spans_linear", &self.spans_linear)
            .field("degree", &self.degree)
            .finish()
    }
}

impl<T: Real> BasisDictionary<T> {
    pub fn new(meas_dim: usize) -> Self {
        Self {
            funcs: Vec::new(),
            names: Vec::new(),
            meas_dim,
            spans_linear: false,
            degree: None,
        }
    }

    pub fn push<F>(mut self, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        self.funcs.push(Arc::new(f));
        self.names.push(name.into());
        self
    }

    /// Declares the functions polynomial of at most this degree.
    pub fn with_degree(mut self, d: u32) -> Self {
        self.degree = Some(d);
        self
    }

    pub fn with_spans_linear(mut self, yes: bool) -> Self {
        self.spans_linear = yes;
        self
    }

    /// Raw monomials `y^t` for sorted tuples of orders `0..=m`.
    pub fn monomials(meas_dim: usize, m: usize) -> Self {
        let mut d = Self::new(meas_dim).with_degree(m as u32).with_spans_linear(m >= 1);
        for k in 0..=m {
            for t in sorted_tuples(meas_dim, k) {
                let name = if t.is_empty() {
                    "1".to_string()
                } else {
                    t.iter().map(|j| format!("y{j}")).collect::<Vec<_>>().join("*")
                };
                d = d.push(name, move |y: &[T]| t.iter().fold(T::one(), |acc, &j| acc * y[j]));
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    pub fn spans_linear(&self) -> bool {
        self.spans_linear
    }

    pub fn degree(&self) -> Option<u32> {
        self.degree
    }

    pub fn eval(&self, y: &[T], out: &mut [T]) {
        for (o, f) in out.iter_mut().zip(&self.funcs) {
            *o = f(y);
        }
    }
}

/// `Φ(y) = Σ_α v_α ψ_α(y)` over a dictionary.
#[derive(Debug, Clone)]
pub struct GeneralMap<T: Real> {
    dict: BasisDictionary<T>,
    coeffs: DMatrix<T>,
}

impl<T: Real> GeneralMap<T> {
    pub fn new(dict: BasisDictionary<T>, coeffs: DMatrix<T>) -> Result<Self> {
        if coeffs.ncols() != dict.len() {
            return Err(Error::DimensionMismatch {
                context: "dictionary coefficients",
                expected: dict.len(),
                got: coeffs.ncols(),
            });
        }
        Ok(Self { dict, coeffs })
    }

    pub fn dictionary(&self) -> &BasisDictionary<T> {
        &self.dict
    }

    /// `M × P`: column `α` is `v_α`.
    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn apply(&self, y: &[T]) -> Result<DVector<T>> {
        if y.len() != self.dict.meas_dim {
            return Err(Error::DimensionMismatch {
                context: "measurement dimension",
                expected: self.dict.meas_dim,
                got: y.len(),
            });
        }
        let mut psi = vec![T::zero(); self.dict.len()];
        self.dict.eval(y, &mut psi);
        Ok(&self.coeffs * DVector::from_vec(psi))
    }

    /// One row per dictionary function: `name v_1 ... v_M`.
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# generalmap P={} M={}", self.dict.len(), self.coeffs.nrows())?;
        for (a, name) in self.dict.names.iter().enumerate() {
            write!(w, "{name}")?;
            for i in 0..self.coeffs.nrows() {
                write!(w, " {:.16e}", self.coeffs[(i, a)].as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `Φ(y)` as a random vector by pseudo-spectral projection onto `out`.
    pub fn apply_rv(&self, y: &PceVector<T>, out: Arc<IndexSet>, level: usize) -> Result<PceVector<T>> {
        let mut dims = y.index_set().active_dims();
        dims.extend(out.active_dims());
        dims.sort_unstable();
        dims.dedup();
        let grid = TensorGrid::new(&dims, level, y.germ_dim())?;
        let mut b = BasisEvaluator::new(y.index_set());
        let mut basis = vec![T::zero(); y.index_set().len()];
        PceVector::project(out, self.coeffs.nrows(), &grid, |theta| {
            b.eval(theta, &mut basis);
            let yv = y.combine(&basis);
            self.apply(yv.as_slice())
        })
    }
}

/// Quadrature level integrating `ψ_α(y) ψ_β(y)` and `ψ_α(y) R` exactly
/// when the dictionary is polynomial.
pub fn default_level(dict_degree: u32, r_degree: u32, y_degree: u32) -> usize {
    let top = (2 * dict_degree * y_degree).max(dict_degree * y_degree + r_degree);
    (top / 2 + 1) as usize
}

/// Galerkin solve `(G ⊗ I) v = r` with `G_αβ = E[ψ_α(y) ψ_β(y)]` and
/// `r_α = E[ψ_α(y) R]`, both by tensor Gauss-Hermite quadrature over the
/// germ variables that `R` or `y` depend on.
pub fn solve_general_basis<T: Real>(
    r: &PceVector<T>,
    y: &PceVector<T>,
    dict: &BasisDictionary<T>,
    level: Option<usize>,
) -> Result<(GeneralMap<T>, Option<Warning>)> {
    check_germ(r, y)?;
    if dict.meas_dim != y.value_dim() {
        return Err(Error::DimensionMismatch {
            context: "dictionary measurement dimension",
            expected: y.value_dim(),
            got: dict.meas_dim,
        });
    }
    let level = match (level, dict.degree) {
        (Some(l), _) => l,
        (None, Some(d)) => default_level(d, r.max_degree(), y.max_degree()),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "non-polynomial dictionary needs an explicit quadrature level".into(),
            ))
        }
    };
    let mut dims = y.index_set().active_dims();
    dims.extend(r.index_set().active_dims());
    dims.sort_unstable();
    dims.dedup();
    let grid = TensorGrid::new(&dims, level, y.germ_dim())?;

    let p = dict.len();
    let mo = r.value_dim();
    let mut by = BasisEvaluator::new(y.index_set());
    let mut br = BasisEvaluator::new(r.index_set());
    let mut hy = vec![T::zero(); y.index_set().len()];
    let mut hr = vec![T::zero(); r.index_set().len()];
    let mut psi = vec![T::zero(); p];
    let mut theta = vec![T::zero(); y.germ_dim()];
    let mut gram = DMatrix::<T>::zeros(p, p);
    let mut rhs = DMatrix::<T>::zeros(p, mo);
    for i in 0..grid.len() {
        grid.theta(i, &mut theta);
        by.eval(&theta, &mut hy);
        br.eval(&theta, &mut hr);
        let yv = y.combine(&hy);
        let rv = r.combine(&hr);
        dict.eval(yv.as_slice(), &mut psi);
        let w = grid.weight(i);
        for a in 0..p {
            let wa = w * psi[a];
            for b in a..p {
                gram[(a, b)] += wa * psi[b];
            }
            for c in 0..mo {
                rhs[(a, c)] += wa * rv[c];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let (v, _, w) = solve_psd_equilibrated(&gram, &rhs, DEFAULT_RCOND, "dictionary Gram matrix")?;
    Ok((GeneralMap::new(dict.clone(), v.transpose())?, w))
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
    fn constant_dictionary_gives_mean() {
        let r = pce(1, &[(&[], 1.25), (&[2], 0.5)]);
        let dict = BasisDictionary::new(1).push("1", |_: &[f64]| 1.0).with_degree(0);
        let (map, _) = solve_general_basis(&r, &r, &dict, None).unwrap();
        assert_relative_eq!(map.coeffs()[(0, 0)], 1.25, epsilon = 1e-13);
    }

    #[test]
    fn reproduces_function_in_span() {
        let t = pce(1, &[(&[1], 1.0)]);
        let dict = BasisDictionary::new(1)
            .push("1", |_: &[f64]| 1.0)
            .push("y", |y: &[f64]| y[0])
            .push("y^3", |y: &[f64]| y[0].powi(3))
            .with_degree(3);
        let (map, w) = solve_general_basis(&t, &t, &dict, None).unwrap();
        assert!(w.is_none());
        let v = map.coeffs();
        assert_relative_eq!(v[(0, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(v[(0, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[(0, 2)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn non_polynomial_needs_level() {
        let t = pce(1, &[(&[1], 1.0)]);
        let dict = BasisDictionary::new(1).push("tanh", |y: &[f64]| y[0].tanh());
        assert!(solve_general_basis(&t, &t, &dict, None).is_err());
        assert!(solve_general_basis(&t, &t, &dict, Some(10)).is_ok());
    }
}
