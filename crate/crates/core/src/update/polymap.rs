use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::moments::{multiplicity, packed_len, sorted_tuples, MomentCache};
use crate::pce::PceVector;
use crate::scalar::Real;

/// Polynomial map `Φ(y) = ⁰H + ¹H y + ²H[y, y] + …` with each `ᵏH` a
/// symmetric `k`-linear map `R^R → R^M`.
///
/// `tensors[k]` is `M × binomial(R+k-1, k)`: column `t` holds the symmetric
/// entry `ᵏH_{t_1…t_k}` for the sorted tuple `t`, so the monomial `y^t`
/// carries the weight `multiplicity(t) · ᵏH_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap<T: Real> {
    value_dim: usize,
    meas_dim: usize,
    tensors: Vec<DMatrix<T>>,
}

/// Products `Π_i y_{t_i}` for all sorted `k`-tuples, in packed order.
pub fn monomial_values<T: Real>(y: &[T], k: usize) -> Vec<T> {
    fn rec<T: Real>(y: &[T], k: usize, lo: usize, acc: T, out: &mut Vec<T>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for j in lo..y.len() {
            rec(y, k - 1, j, acc * y[j], out);
        }
    }
    let mut out = Vec::with_capacity(packed_len(y.len(), k));
    rec(y, k, 0, T::one(), &mut out);
    out
}

impl<T: Real> PolyMap<T> {
    pub fn new(meas_dim: usize, tensors: Vec<DMatrix<T>>) -> Result<Self> {
        let value_dim = tensors
            .first()
            .ok_or_else(|| Error::InvalidArgument("polynomial map needs a constant term".into()))?
            .nrows();
        for (k, t) in tensors.iter().enumerate() {
            if t.nrows() != value_dim || t.ncols() != packed_len(meas_dim, k) {
                return Err(Error::DimensionMismatch {
                    context: "polynomial map tensor",
                    expected: value_dim * packed_len(meas_dim, k),
                    got: t.nrows() * t.ncols(),
                });
            }
        }
        Ok(Self {
            value_dim,
            meas_dim,
            tensors,
        })
    }

    pub fn constant(c: &DVector<T>, meas_dim: usize) -> Self {
        Self {
            value_dim: c.len(),
            meas_dim,
            tensors: vec![DMatrix::from_column_slice(c.len(), 1, c.as_slice())],
        }
    }

    /// Builds from monomial weights in `y - center`: `coeffs[k]` is
    /// `M × packed` with column `t` the weight of `Π (y - c)_{t_i}`.
    pub fn from_centered_monomials(coeffs: &[DMatrix<T>], center: &DVector<T>) -> Result<Self> {
        let r = center.len();
        let m_out = coeffs.first().map_or(0, |c| c.nrows());
        let mut raw: Vec<DMatrix<T>> = (0..coeffs.len())
            .map(|k| DMatrix::zeros(m_out, packed_len(r, k)))
            .collect();
        for (k, ck) in coeffs.iter().enumerate() {
            for (slot, t) in sorted_tuples(r, k).iter().enumerate() {
                let col = ck.column(slot);
                if col.iter().all(|v| *v == T::zero()) {
                    continue;
                }
                // expand Π (y_{t_i} - c_{t_i}) over subsets of positions
                for mask in 0u32..(1 << k) {
                    let mut kept = Vec::with_capacity(k);
                    let mut factor = T::one();
                    for (pos, &j) in t.iter().enumerate() {
                        if mask & (1 << pos) != 0 {
                            kept.push(j);
                        } else {
                            factor *= -center[j];
                        }
                    }
                    if factor == T::zero() {
                        continue;
                    }
                    let target = crate::moments::packed_rank(r, &kept);
                    let mut dst = raw[kept.len()].column_mut(target);
                    dst.axpy(factor, &col, T::one());
                }
            }
        }
        for (k, rk) in raw.iter_mut().enumerate() {
            for (slot, t) in sorted_tuples(r, k).iter().enumerate() {
                let m = T::lit(multiplicity(t) as f64);
                let mut c = rk.column_mut(slot);
                c /= m;
            }
        }
        Self::new(r, raw)
    }

    pub fn degree(&self) -> usize {
        self.tensors.len() - 1
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    /// Packed `ᵏH`.
    pub fn tensor(&self, k: usize) -> &DMatrix<T> {
        &self.tensors[k]
    }

    pub fn tensors(&self) -> &[DMatrix<T>] {
        &self.tensors
    }

    /// Entry `ᵏH_{idx}` of output component `i` for any ordering of `idx`.
    pub fn entry(&self, i: usize, idx: &[usize]) -> T {
        let mut t = idx.to_vec();
        t.sort_unstable();
        self.tensors[t.len()][(i, crate::moments::packed_rank(self.meas_dim, &t))]
    }

    /// Monomial weights `multiplicity(t) · ᵏH_t`, orders concatenated.
    pub fn monomial_coeffs(&self) -> DMatrix<T> {
        let cols: usize = self.tensors.iter().map(|t| t.ncols()).sum();
        let mut out = DMatrix::zeros(self.value_dim, cols);
        let mut c = 0;
        for (k, tk) in self.tensors.iter().enumerate() {
            for (slot, t) in sorted_tuples(self.meas_dim, k).iter().enumerate() {
                let m = T::lit(multiplicity(t) as f64);
                out.column_mut(c).copy_from(&(tk.column(slot) * m));
                c += 1;
            }
        }
        out
    }

    fn check_meas(&self, got: usize) -> Result<()> {
        if got != self.meas_dim {
            return Err(Error::DimensionMismatch {
                context: "measurement dimension",
                expected: self.meas_dim,
                got,
            });
        }
        Ok(())
    }

    /// `Φ(y)`.
    pub fn apply(&self, y: &[T]) -> Result<DVector<T>> {
        self.apply_from(0, y)
    }

    /// `Σ_{k≥1} ᵏH[y^∨k]`, the map without its constant term.
    pub fn apply_nonconstant(&self, y: &[T]) -> Result<DVector<T>> {
        self.apply_from(1, y)
    }

    fn apply_from(&self, from: usize, y: &[T]) -> Result<DVector<T>> {
        self.check_meas(y.len())?;
        let mut out = DVector::zeros(self.value_dim);
        for (k, tk) in self.tensors.iter().enumerate().skip(from) {
            let tuples = sorted_tuples(self.meas_dim, k);
            for ((slot, t), v) in tuples.iter().enumerate().zip(monomial_values(y, k)) {
                let w = v * T::lit(multiplicity(t) as f64);
                if w != T::zero() {
                    out.axpy(w, &tk.column(slot), T::one());
                }
            }
        }
        Ok(out)
    }


    /// `Φ(y)` as a random vector, with products formed exactly by the
    /// Hermite algebra. Modes above `max_degree` are dropped and reported.
    pub fn apply_rv(&self, y: &PceVector<T>, max_degree: u32) -> Result<(PceVector<T>, Option<Warning>)> {
        self.apply_rv_from(0, y, max_degree)
    }

    /// Like [`Self::apply_rv`] but summing only orders `k ≥ from`.
    pub(crate) fn apply_rv_from(
        &self,
        from: usize,
        y: &PceVector<T>,
        max_degree: u32,
    ) -> Result<(PceVector<T>, Option<Warning>)> {
        self.check_meas(y.value_dim())?;
        let cache = MomentCache::new(y.clone());
        let mut terms: Vec<(std::sync::Arc<PceVector<T>>, DVector<T>)> = Vec::new();
        for (k, tk) in self.tensors.iter().enumerate().skip(from) {
            for (slot, t) in sorted_tuples(self.meas_dim, k).iter().enumerate() {
                let col = tk.column(slot) * T::lit(multiplicity(t) as f64);
                if col.iter().all(|v| *v == T::zero()) {
                    continue;
                }
                terms.push((cache.monomial(t)?, col));
            }
        }
        let mut set = crate::index::IndexSet::constant(y.germ_dim());
        for (psi, _) in &terms {
            set = set.union(psi.index_set());
        }
        let set = set.into_arc();
        let mut coeffs = DMatrix::<T>::zeros(set.len(), self.value_dim);
        for (psi, col) in &terms {
            for (r, alpha) in psi.index_set().members().iter().enumerate() {
                let x = psi.coeffs()[(r, 0)];
                if x != T::zero() {
                    let g = set.position(alpha).expect("union contains member");
                    for (c, &v) in col.iter().enumerate() {
                        coeffs[(g, c)] += x * v;
                    }
                }
            }
        }
        let out = PceVector::new(set, coeffs)?;
        out.truncated(max_degree, "map composition")
    }

    /// Plain-text form: a header with `m`, `M`, `R`, then for each order the
    /// packed entries (one line per sorted tuple, `M` values).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# polymap m={} M={} R={}",
            self.degree(),
            self.value_dim,
            self.meas_dim
        )?;
        for (k, tk) in self.tensors.iter().enumerate() {
            for (slot, t) in sorted_tuples(self.meas_dim, k).iter().enumerate() {
                let mut line = format!("{k}");
                for j in t {
                    line.push_str(&format!(" {j}"));
                }
                for i in 0..self.value_dim {
                    line.push_str(&format!(" {:.16e}", tk[(i, slot)]));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(Error::Parse {
                line: 1,
                message: "empty input".into(),
            })?;
        let header = header?;
        let fields: HashMap<&str, usize> = header
            .trim_start_matches('#')
            .split_whitespace()
            .skip(1)
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| v.parse().map(|v| (k, v)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: 1,
                message: format!("bad header: {e}"),
            })?;
        let get = |k: &str| {
            fields.get(k).copied().ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("header lacks {k}"),
            })
        };
        let (m, mo, r) = (get("m")?, get("M")?, get("R")?);
        let mut tensors: Vec<DMatrix<T>> = (0..=m).map(|k| DMatrix::zeros(mo, packed_len(r, k))).collect();
        let mut seen = 0;
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: ln + 1, message };
            let tok: Vec<&str> = line.split_whitespace().collect();
            let k: usize = tok[0].parse().map_err(|e| bad(format!("{e}")))?;
            if k > m || tok.len() != 1 + k + mo {
                return Err(bad("wrong field count".into()));
            }
            let t: Vec<usize> = tok[1..=k]
                .iter()
                .map(|s| s.parse().map_err(|e| bad(format!("{e}"))))
                .collect::<Result<_>>()?;
            if t.iter().any(|&j| j >= r) || t.windows(2).any(|w| w[0] > w[1]) {
                return Err(bad("tuple not sorted or out of range".into()));
            }
            let slot = crate::moments::packed_rank(r, &t);
            for i in 0..mo {
                let v: f64 = tok[1 + k + i].parse().map_err(|e| bad(format!("{e}")))?;
                tensors[k][(i, slot)] = T::lit(v);
            }
            seen += 1;
        }
        let expected: usize = (0..=m).map(|k| packed_len(r, k)).sum();
        if seen != expected {
            return Err(Error::Parse {
                line: seen + 1,
                message: format!("expected {expected} entries, found {seen}"),
            });
        }
        Self::new(r, tensors)
    }
}
