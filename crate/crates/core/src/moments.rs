//! Closed-form moments of PCE random vectors.
//!
//! Uncentered symmetric moments `⟨y^∨k⟩` are obtained from exact products of
//! expansions: `E[y_{t_1}⋯y_{t_k}] = ⟨Ψ_a, Ψ_b⟩` where `Ψ_a`, `Ψ_b` are the
//! monomial expansions of the two halves of the sorted tuple `t`, and the
//! inner product is read off with the orthogonality relation.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::pce::{check_germ, inner, product, PceVector};
use crate::scalar::Real;
use crate::structure::StructureTable;

/// `binomial(n + k - 1, k)`: number of sorted `k`-tuples over `n` symbols.
pub fn packed_len(n: usize, k: usize) -> usize {
    if n == 0 {
        return usize::from(k == 0);
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n + i) as u128 / (i as u128 + 1);
    }
    acc as usize
}

/// All sorted `k`-tuples over `0..n` in lexicographic order.
pub fn sorted_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, lo: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in lo..n {
            cur.push(v);
            rec(n, k, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::with_capacity(packed_len(n, k));
    rec(n, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Position of a sorted tuple in [`sorted_tuples`] order.
pub fn packed_rank(n: usize, t: &[usize]) -> usize {
    let k = t.len();
    let mut rank = 0;
    let mut lo = 0;
    for (i, &ti) in t.iter().enumerate() {
        let rest = k - i - 1;
        for v in lo..ti {
            rank += packed_len(n - v, rest);
        }
        lo = ti;
    }
    rank
}

/// Number of distinct orderings of the tuple, `k! / Π_j c_j!`.
pub fn multiplicity(t: &[usize]) -> usize {
    let mut sorted = t.to_vec();
    sorted.sort_unstable();
    let mut acc: u128 = 1;
    let mut run = 0u128;
    for i in 0..sorted.len() {
        run = if i > 0 && sorted[i] == sorted[i - 1] { run + 1 } else { 1 };
        acc = acc * (i as u128 + 1) / run;
    }
    acc as usize
}

/// Fully symmetric tensor of order `k` on `R^n`, packed over sorted tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T> {
    order: usize,
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> SymTensor<T> {
    pub fn zeros(order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            values: vec![T::zero(); packed_len(dim, order)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Packed values in [`sorted_tuples`] order.
    pub fn packed(&self) -> &[T] {
        &self.values
    }

    /// Entry at any (not necessarily sorted) index tuple.
    pub fn get(&self, idx: &[usize]) -> T {
        assert_eq!(idx.len(), self.order, "index tuple length");
        let mut t = idx.to_vec();
        t.sort_unstable();
        self.values[packed_rank(self.dim, &t)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let mut t = idx.to_vec();
        t.sort_unstable();
        let r = packed_rank(self.dim, &t);
        self.values[r] = v;
    }

    /// Debug dump in the same plain-text layout as PCE coefficient files.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# symtensor order={} dim={}", self.order, self.dim)?;
        for (t, v) in sorted_tuples(self.dim, self.order).iter().zip(&self.values) {
            let idx: Vec<String> = t.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{} {:.16e}", idx.join(" "), v)?;
        }
        Ok(())
    }
}

/// `⟨R ⊗ y^∨k⟩` stored as one packed row per component of `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossMoment<T: Real> {
    order: usize,
    dim: usize,
    values: DMatrix<T>,
}

impl<T: Real> CrossMoment<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn get(&self, component: usize, idx: &[usize]) -> T {
        let mut t = idx.to_vec();
        t.sort_unstable();
        self.values[(component, packed_rank(self.dim, &t))]
    }
}

/// `E[x] = x^0`.
pub fn mean<T: Real>(x: &PceVector<T>) -> DVector<T> {
    x.coeffs().row(0).transpose()
}

/// `C_xy = Σ_{α≠0} α! x^α ⊗ y^α`.
pub fn covariance<T: Real>(x: &PceVector<T>, y: &PceVector<T>) -> Result<DMatrix<T>> {
    check_germ(x, y)?;
    let mut c = DMatrix::zeros(x.value_dim(), y.value_dim());
    for (i, alpha) in x.index_set().members().iter().enumerate().skip(1) {
        if let Some(j) = y.index_set().position(alpha) {
            let n: T = x.index_set().norm_sq(i)?;
            let xa = x.coeffs().row(i);
            let ya = y.coeffs().row(j);
            c.ger(n, &xa.transpose(), &ya.transpose(), T::one());
        }
    }
    Ok(c)
}

/// `⟨y^∨k⟩`.
pub fn sym_moment<T: Real>(y: &PceVector<T>, k: usize) -> Result<SymTensor<T>> {
    MomentCache::new(y.clone()).sym_moment(k).map(|t| (*t).clone())
}

/// `⟨R ⊗ y^∨k⟩`.
pub fn cross_moment<T: Real>(r: &PceVector<T>, y: &PceVector<T>, k: usize) -> Result<CrossMoment<T>> {
    MomentCache::new(y.clone()).cross_moment(r, k)
}

/// `E[Π_i H_{α_i}]` by folding structure-coefficient products and reading
/// the constant mode.
pub fn hermite_product_expectation(alphas: &[MultiIndex]) -> Result<f64> {
    let (first, rest) = alphas
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty Hermite product".into()))?;
    let total: u32 = alphas.iter().map(MultiIndex::degree).sum();
    if total % 2 == 1 {
        return Ok(0.0);
    }
    let table = StructureTable::global();
    let mut acc: HashMap<MultiIndex, f64> = HashMap::from([(first.clone(), 1.0)]);
    let mut remaining = total - first.degree();
    for a in rest {
        remaining -= a.degree();
        let mut next: HashMap<MultiIndex, f64> = HashMap::new();
        for (g, c) in &acc {
            for (h, d) in table.linearize(g, a)?.iter() {
                // modes above the remaining degree cannot reach the constant
                if h.degree() <= remaining {
                    *next.entry(h.clone()).or_insert(0.0) += c * d;
                }
            }
        }
        acc = next;
    }
    let v = acc.get(&MultiIndex::zero()).copied().unwrap_or(0.0);
    if !v.is_finite() {
        return Err(Error::Overflow("Hermite product expectation".into()));
    }
    Ok(v)
}

/// Per-expansion memo of monomial products and symmetric moments.
///
/// Entries are filled at most once under a lock and never modified, so
/// cached values equal a fresh recomputation exactly.
pub struct MomentCache<T: Real> {
    y: PceVector<T>,
    monomials: Mutex<HashMap<Vec<usize>, Arc<PceVector<T>>>>,
    moments: Mutex<HashMap<usize, Arc<SymTensor<T>>>>,
}

impl<T: Real> MomentCache<T> {
    pub fn new(y: PceVector<T>) -> Self {
        Self {
            y,
            monomials: Mutex::new(HashMap::new()),
            moments: Mutex::new(HashMap::new()),
        }
    }

    pub fn pce(&self) -> &PceVector<T> {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.y.value_dim()
    }

    /// Exact expansion of `Π_i y_{t_i}` for a sorted tuple `t`.
    pub fn monomial(&self, t: &[usize]) -> Result<Arc<PceVector<T>>> {
        let mut map = self.monomials.lock().expect("moment cache poisoned");
        self.monomial_locked(&mut map, t)
    }

    fn monomial_locked(
        &self,
        map: &mut HashMap<Vec<usize>, Arc<PceVector<T>>>,
        t: &[usize],
    ) -> Result<Arc<PceVector<T>>> {
        if let Some(hit) = map.get(t) {
            return Ok(hit.clone());
        }
        let v = match t.split_last() {
            None => Arc::new(PceVector::constant(&[T::one()], self.y.germ_dim())),
            Some((&last, [])) => Arc::new(self.y.component(last)),
            Some((&last, head)) => {
                let prefix = self.monomial_locked(map, head)?;
                Arc::new(product(&prefix, 0, &self.y, last)?)
            }
        };
        map.insert(t.to_vec(), v.clone());
        Ok(v)
    }

    /// `E[Π_i y_{t_i}]` for a sorted tuple.
    pub fn raw_moment(&self, t: &[usize]) -> Result<T> {
        let split = t.len().div_ceil(2);
        let a = self.monomial(&t[..split])?;
        let b = self.monomial(&t[split..])?;
        inner(&a, 0, &b, 0)
    }

    pub fn sym_moment(&self, k: usize) -> Result<Arc<SymTensor<T>>> {
        if let Some(hit) = self.moments.lock().expect("moment cache poisoned").get(&k) {
            return Ok(hit.clone());
        }
        let n = self.dim();
        let mut s = SymTensor::zeros(k, n);
        for (slot, t) in sorted_tuples(n, k).iter().enumerate() {
            s.values[slot] = self.raw_moment(t)?;
        }
        let s = Arc::new(s);
        Ok(self
            .moments
            .lock()
            .expect("moment cache poisoned")
            .entry(k)
            .or_insert(s)
            .clone())
    }

    pub fn cross_moment(&self, r: &PceVector<T>, k: usize) -> Result<CrossMoment<T>> {
        check_germ(r, &self.y)?;
        let n = self.dim();
        let tuples = sorted_tuples(n, k);
        let mut values = DMatrix::zeros(r.value_dim(), tuples.len());
        for (slot, t) in tuples.iter().enumerate() {
            let psi = self.monomial(t)?;
            for i in 0..r.value_dim() {
                values[(i, slot)] = inner(r, i, &psi, 0)?;
            }
        }
        Ok(CrossMoment { order: k, dim: n, values })
    }
}
