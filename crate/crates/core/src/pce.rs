//! Random vectors as polynomial chaos expansions on a Gaussian germ.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smallvec::SmallVec;

use crate::error::{Error, Result, Warning};
use crate::hermite::hermite_table;
use crate::index::{IndexSet, MultiIndex};
use crate::quadrature::TensorGrid;
use crate::scalar::Real;
use crate::structure::StructureTable;

/// `x(θ) = Σ_{α∈J} x^α H_α(θ)` with `x^α ∈ R^M`.
///
/// Coefficients are stored densely, one row per member of the index set.
#[derive(Clone, Debug, PartialEq)]
pub struct PceVector<T: Real> {
    index_set: Arc<IndexSet>,
    coeffs: DMatrix<T>,
}

impl<T: Real> PceVector<T> {
    pub fn new(index_set: Arc<IndexSet>, coeffs: DMatrix<T>) -> Result<Self> {
        if coeffs.nrows() != index_set.len() {
            return Err(Error::DimensionMismatch {
                context: "PCE coefficient rows",
                expected: index_set.len(),
                got: coeffs.nrows(),
            });
        }
        Ok(Self { index_set, coeffs })
    }

    pub fn zeros(index_set: Arc<IndexSet>, value_dim: usize) -> Self {
        let coeffs = DMatrix::zeros(index_set.len(), value_dim);
        Self { index_set, coeffs }
    }

    /// Deterministic vector `c` on a germ of `germ_dim` variables.
    pub fn constant(c: &[T], germ_dim: usize) -> Self {
        let coeffs = DMatrix::from_row_slice(1, c.len(), c);
        Self {
            index_set: IndexSet::constant(germ_dim).into_arc(),
            coeffs,
        }
    }

    /// Builds from sparse `(α, x^α)` terms over the downward closure of the
    /// listed indices; modes not listed are zero.
    pub fn from_terms(germ_dim: usize, value_dim: usize, terms: &[(MultiIndex, Vec<T>)]) -> Result<Self> {
        let set = IndexSet::downward_closure(terms.iter().map(|(a, _)| a.clone()), germ_dim)?.into_arc();
        let mut out = Self::zeros(set, value_dim);
        for (a, v) in terms {
            if v.len() != value_dim {
                return Err(Error::DimensionMismatch {
                    context: "PCE term value",
                    expected: value_dim,
                    got: v.len(),
                });
            }
            let i = out.index_set.position(a).expect("closure contains seed");
            for (j, &x) in v.iter().enumerate() {
                out.coeffs[(i, j)] += x;
            }
        }
        Ok(out)
    }

    /// `mean + Σ_k L[:,k] θ_{dims[k]}`: a Gaussian vector with covariance `L Lᵀ`.
    pub fn gaussian(mean: &DVector<T>, factor: &DMatrix<T>, dims: &[usize], germ_dim: usize) -> Result<Self> {
        if factor.ncols() != dims.len() || factor.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "gaussian factor",
                expected: mean.len() * dims.len(),
                got: factor.nrows() * factor.ncols(),
            });
        }
        let mut terms = vec![(MultiIndex::zero(), mean.iter().copied().collect())];
        for (k, &d) in dims.iter().enumerate() {
            terms.push((MultiIndex::unit(d, 1), factor.column(k).iter().copied().collect()));
        }
        Self::from_terms(germ_dim, mean.len(), &terms)
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index_set
    }

    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DMatrix<T> {
        &mut self.coeffs
    }

    pub fn value_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn germ_dim(&self) -> usize {
        self.index_set.germ_dim()
    }

    pub fn max_degree(&self) -> u32 {
        self.index_set.max_degree()
    }

    /// Coefficient vector of mode `α`, zero when `α` is not a member.
    pub fn coeff(&self, alpha: &MultiIndex) -> DVector<T> {
        match self.index_set.position(alpha) {
            Some(i) => self.coeffs.row(i).transpose(),
            None => DVector::zeros(self.value_dim()),
        }
    }

    /// Evaluates the expansion at one germ realization.
    pub fn eval(&self, theta: &[T]) -> Result<DVector<T>> {
        let mut b = BasisEvaluator::new(&self.index_set);
        b.check_theta(theta)?;
        let mut basis = vec![T::zero(); self.index_set.len()];
        b.eval(theta, &mut basis);
        Ok(self.combine(&basis))
    }

    pub(crate) fn combine(&self, basis: &[T]) -> DVector<T> {
        let mut out = DVector::zeros(self.value_dim());
        for (i, &h) in basis.iter().enumerate() {
            if h != T::zero() {
                out.axpy(h, &self.coeffs.row(i).transpose(), T::one());
            }
        }
        out
    }

    /// Same random vector on a germ with `extra_dims` more variables.
    pub fn germ_extend(&self, extra_dims: usize) -> Self {
        if extra_dims == 0 {
            return self.clone();
        }
        self.with_germ_dim(self.germ_dim() + extra_dims)
    }

    pub fn with_germ_dim(&self, germ_dim: usize) -> Self {
        if germ_dim == self.germ_dim() {
            return self.clone();
        }
        Self {
            index_set: self.index_set.with_germ_dim(germ_dim).into_arc(),
            coeffs: self.coeffs.clone(),
        }
    }

    /// Re-expresses on `target`: common modes are copied, modes outside
    /// `target` are dropped (orthogonal projection onto its span).
    pub fn reindexed(&self, target: &Arc<IndexSet>) -> Self {
        if Arc::ptr_eq(target, &self.index_set) || **target == *self.index_set {
            return Self {
                index_set: target.clone(),
                coeffs: self.coeffs.clone(),
            };
        }
        let mut coeffs = DMatrix::zeros(target.len(), self.value_dim());
        for (i, a) in self.index_set.members().iter().enumerate() {
            if let Some(j) = target.position(a) {
                coeffs.row_mut(j).copy_from(&self.coeffs.row(i));
            }
        }
        Self {
            index_set: target.clone(),
            coeffs,
        }
    }

    /// Drops modes above degree `p`, reporting the discarded norm.
    pub fn truncated(&self, p: u32, context: &'static str) -> Result<(Self, Option<Warning>)> {
        if p >= self.max_degree() {
            return Ok((self.clone(), None));
        }
        let mut dropped = 0.0;
        for (i, a) in self.index_set.members().iter().enumerate() {
            if a.degree() > p {
                let n: T = self.index_set.norm_sq(i)?;
                dropped += (n * self.coeffs.row(i).norm_squared()).as_f64();
            }
        }
        let out = self.reindexed(&self.index_set.truncated(p).into_arc());
        let warning = (dropped > 0.0).then(|| Warning::DegreeTruncated {
            context,
            exact_degree: self.max_degree(),
            kept_degree: p,
            dropped_norm: dropped.sqrt(),
        });
        Ok((out, warning))
    }

    /// Scalar expansion of component `i`.
    pub fn component(&self, i: usize) -> Self {
        Self {
            index_set: self.index_set.clone(),
            coeffs: self.coeffs.columns(i, 1).into_owned(),
        }
    }

    /// Concatenates value dimensions on the union index set.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero expansions".into()))?;
        let mut set = (*first.index_set).clone();
        for p in &parts[1..] {
            check_germ(first, p)?;
            set = set.union(&p.index_set);
        }
        let set = set.into_arc();
        let m: usize = parts.iter().map(|p| p.value_dim()).sum();
        let mut coeffs = DMatrix::zeros(set.len(), m);
        let mut col = 0;
        for p in parts {
            let r = p.reindexed(&set);
            coeffs.columns_mut(col, p.value_dim()).copy_from(&r.coeffs);
            col += p.value_dim();
        }
        Ok(Self { index_set: set, coeffs })
    }

    /// `a·self + b·other` on the union index set.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        check_germ(self, other)?;
        if self.value_dim() != other.value_dim() {
            return Err(Error::DimensionMismatch {
                context: "PCE sum",
                expected: self.value_dim(),
                got: other.value_dim(),
            });
        }
        let set = self.index_set.union(&other.index_set).into_arc();
        let mut x = self.reindexed(&set);
        let y = other.reindexed(&set);
        x.coeffs *= a;
        x.coeffs += y.coeffs * b;
        Ok(x)
    }

    /// `A x + b` applied coefficient-wise (exact for affine maps).
    pub fn affine(&self, a: &DMatrix<T>, b: Option<&DVector<T>>) -> Result<Self> {
        if a.ncols() != self.value_dim() {
            return Err(Error::DimensionMismatch {
                context: "affine map columns",
                expected: self.value_dim(),
                got: a.ncols(),
            });
        }
        let mut coeffs = &self.coeffs * a.transpose();
        if let Some(b) = b {
            if b.len() != a.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "affine offset",
                    expected: a.nrows(),
                    got: b.len(),
                });
            }
            let mut row = coeffs.row_mut(0);
            row += b.transpose();
        }
        Ok(Self {
            index_set: self.index_set.clone(),
            coeffs,
        })
    }

    /// Adds `c` to the mean.
    pub fn shift_mean(&self, c: &DVector<T>) -> Self {
        let mut out = self.clone();
        let mut row = out.coeffs.row_mut(0);
        row += c.transpose();
        out
    }

    /// Independent standard-normal germ draws followed by evaluation.
    pub fn sample_paths(&self, n: usize, seed: u64) -> Vec<DVector<T>> {
        let mut b = BasisEvaluator::new(&self.index_set);
        let mut basis = vec![T::zero(); self.index_set.len()];
        GermSampler::new(self.germ_dim(), seed)
            .take(n)
            .map(|theta| {
                b.eval(&theta, &mut basis);
                self.combine(&basis)
            })
            .collect()
    }

    /// Pseudo-spectral projection of `f(θ)` onto `out` using `grid`.
    ///
    /// The grid dims must cover every germ variable referenced by `out` and
    /// by `f`; the result is exact when `f·H_α` is integrated exactly.
    pub fn project<F>(out: Arc<IndexSet>, value_dim: usize, grid: &TensorGrid<T>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T]) -> Result<DVector<T>>,
    {
        let dims = grid.dims();
        if let Some(d) = out.active_dims().into_iter().find(|d| !dims.contains(d)) {
            return Err(Error::InvalidArgument(format!(
                "projection grid does not cover germ dimension {d}"
            )));
        }
        if grid.germ_dim() != out.germ_dim() {
            return Err(Error::GermMismatch {
                left: grid.germ_dim(),
                right: out.germ_dim(),
            });
        }
        let mut b = BasisEvaluator::new(&out);
        let mut basis = vec![T::zero(); out.len()];
        let mut theta = vec![T::zero(); out.germ_dim()];
        let mut coeffs = DMatrix::<T>::zeros(out.len(), value_dim);
        for i in 0..grid.len() {
            grid.theta(i, &mut theta);
            let v = f(&theta)?;
            if v.len() != value_dim {
                return Err(Error::DimensionMismatch {
                    context: "projected function value",
                    expected: value_dim,
                    got: v.len(),
                });
            }
            b.eval(&theta, &mut basis);
            let w = grid.weight(i);
            for (r, &h) in basis.iter().enumerate() {
                let s = w * h;
                if s != T::zero() {
                    for c in 0..value_dim {
                        coeffs[(r, c)] += s * v[c];
                    }
                }
            }
        }
        for r in 0..out.len() {
            let n: T = out.norm_sq(r)?;
            let mut row = coeffs.row_mut(r);
            row /= n;
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pseudo-spectral projection"));
        }
        Self::new(out, coeffs)
    }

    /// Writes the plain-text coefficient format: a header naming the value
    /// dimension and germ size, then one row per mode with its degree, the
    /// dense multi-index and the coefficients in 17-digit scientific notation.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.germ_dim();
        writeln!(w, "# pce value_dim={} germ_dim={} terms={}", self.value_dim(), g, self.index_set.len())?;
        let mut line = String::new();
        for (i, a) in self.index_set.members().iter().enumerate() {
            line.clear();
            write!(line, "{}", a.degree()).unwrap();
            for e in a.to_dense(g) {
                write!(line, " {e}").unwrap();
            }
            for v in self.coeffs.row(i).iter() {
                write!(line, " {:.16e}", v).unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (value_dim, germ_dim) = loop {
            let (n, line) = lines.next().ok_or(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })?;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let header = line.trim().strip_prefix("# pce").ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected '# pce' header".into(),
            })?;
            let mut m = None;
            let mut g = None;
            for kv in header.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
                    line: n + 1,
                    message: format!("malformed header field '{kv}'"),
                })?;
                let v: usize = v.parse().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("non-integer header value '{kv}'"),
                })?;
                match k {
                    "value_dim" => m = Some(v),
                    "germ_dim" => g = Some(v),
                    _ => {}
                }
            }
            match (m, g) {
                (Some(m), Some(g)) => break (m, g),
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: "header needs value_dim and germ_dim".into(),
                    })
                }
            }
        };
        let mut terms = Vec::new();
        for (n, line) in lines {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: n + 1, message };
            if fields.len() != 1 + germ_dim + value_dim {
                return Err(perr(format!(
                    "expected {} fields, found {}",
                    1 + germ_dim + value_dim,
                    fields.len()
                )));
            }
            let entries: Vec<u32> = fields[1..=germ_dim]
                .iter()
                .map(|s| s.parse().map_err(|_| perr(format!("bad multi-index entry '{s}'"))))
                .collect::<Result<_>>()?;
            let a = MultiIndex::from_dense(&entries);
            let deg: u32 = fields[0].parse().map_err(|_| perr("bad degree".into()))?;
            if deg != a.degree() {
                return Err(perr(format!("degree {deg} does not match entries")));
            }
            let vals: Vec<T> = fields[1 + germ_dim..]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| perr(format!("bad coefficient '{s}'")))
                })
                .collect::<Result<_>>()?;
            terms.push((a, vals));
        }
        let set = IndexSet::from_members(terms.iter().map(|(a, _)| a.clone()), germ_dim)
            .map_err(|e| Error::Parse {
                line: 0,
                message: e.to_string(),
            })?
            .into_arc();
        let mut out = Self::zeros(set, value_dim);
        for (a, v) in terms {
            let i = out.index_set.position(&a).unwrap();
            for (j, x) in v.into_iter().enumerate() {
                out.coeffs[(i, j)] = x;
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_germ<T: Real>(a: &PceVector<T>, b: &PceVector<T>) -> Result<()> {
    if a.germ_dim() != b.germ_dim() {
        return Err(Error::GermMismatch {
            left: a.germ_dim(),
            right: b.germ_dim(),
        });
    }
    Ok(())
}

/// `E[a_i b_j] = Σ_α α! a_i^α b_j^α`.
pub fn inner<T: Real>(a: &PceVector<T>, i: usize, b: &PceVector<T>, j: usize) -> Result<T> {
    check_germ(a, b)?;
    let (small, si, large, li) = if a.index_set.len() <= b.index_set.len() {
        (a, i, b, j)
    } else {
        (b, j, a, i)
    };
    let mut acc = T::zero();
    for (r, alpha) in small.index_set.members().iter().enumerate() {
        if let Some(q) = large.index_set.position(alpha) {
            let x = small.coeffs[(r, si)] * large.coeffs[(q, li)];
            if x != T::zero() {
                acc += small.index_set.norm_sq::<T>(r)? * x;
            }
        }
    }
    Ok(acc)
}

/// Exact product of scalar components `a_i · b_j` via structure coefficients.
pub fn product<T: Real>(a: &PceVector<T>, i: usize, b: &PceVector<T>, j: usize) -> Result<PceVector<T>> {
    check_germ(a, b)?;
    let table = StructureTable::global();
    let set = a.index_set.minkowski_sum(&b.index_set).into_arc();
    let mut coeffs = DMatrix::<T>::zeros(set.len(), 1);
    for (r, alpha) in a.index_set.members().iter().enumerate() {
        let x = a.coeffs[(r, i)];
        if x == T::zero() {
            continue;
        }
        for (q, beta) in b.index_set.members().iter().enumerate() {
            let y = b.coeffs[(q, j)];
            if y == T::zero() {
                continue;
            }
            let xy = x * y;
            for (gamma, c) in table.linearize(alpha, beta)?.iter() {
                let g = set.position(gamma).expect("product support inside Minkowski sum");
                coeffs[(g, 0)] += xy * T::lit(*c);
            }
        }
    }
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCE product"));
    }
    PceVector::new(set, coeffs)
}

/// Seeded stream of standard-normal germ vectors shared by every sampler in
/// the crate: draw `k` of a sample is the `k`-th normal of the stream.
pub struct GermSampler<T> {
    rng: ChaCha8Rng,
    dim: usize,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> GermSampler<T> {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
            _t: std::marker::PhantomData,
        }
    }
}

impl<T: Real> Iterator for GermSampler<T> {
    type Item = Vec<T>;

    fn next(&mut self) -> Option<Vec<T>> {
        Some(
            (0..self.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    T::lit(z)
                })
                .collect(),
        )
    }
}

/// Evaluates all basis functions of an index set at a germ point, sharing
/// univariate Hermite tables across members.
pub struct BasisEvaluator<T> {
    // (germ dim, highest power) per active dimension
    dims: Vec<(usize, usize)>,
    members: Vec<SmallVec<[(u16, u32); 4]>>,
    tables: Vec<Vec<T>>,
    required: usize,
}

impl<T: Real> BasisEvaluator<T> {
    pub fn new(set: &IndexSet) -> Self {
        let mut maxpow: std::collections::BTreeMap<usize, u32> = Default::default();
        for a in set.members() {
            for (d, p) in a.terms() {
                let e = maxpow.entry(d).or_insert(0);
                *e = (*e).max(p);
            }
        }
        let dims: Vec<(usize, usize)> = maxpow.iter().map(|(&d, &p)| (d, p as usize)).collect();
        let slot: std::collections::HashMap<usize, u16> =
            dims.iter().enumerate().map(|(s, &(d, _))| (d, s as u16)).collect();
        let members = set
            .members()
            .iter()
            .map(|a| a.terms().map(|(d, p)| (slot[&d], p)).collect())
            .collect();
        let tables = dims.iter().map(|&(_, p)| vec![T::zero(); p + 1]).collect();
        let required = dims.last().map_or(0, |&(d, _)| d + 1);
        Self {
            dims,
            members,
            tables,
            required,
        }
    }

    pub fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() < self.required {
            return Err(Error::DimensionMismatch {
                context: "germ realization",
                expected: self.required,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// `out[i] = H_{α_i}(θ)`; `theta` must cover the referenced dims.
    pub fn eval(&mut self, theta: &[T], out: &mut [T]) {
        for (t, &(d, _)) in self.tables.iter_mut().zip(&self.dims) {
            hermite_table(theta[d], t);
        }
        for (o, m) in out.iter_mut().zip(&self.members) {
            *o = m
                .iter()
                .fold(T::one(), |acc, &(s, p)| acc * self.tables[s as usize][p as usize]);
        }
    }
}
