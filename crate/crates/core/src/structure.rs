//! Structure coefficients of the Hermite algebra: `H_α H_β = Σ_γ c^γ_{α,β} H_γ`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::hermite::factorial;
use crate::index::MultiIndex;

/// Nonzero `(γ, c^γ_{α,β})` pairs in graded lexicographic order of `γ`.
pub type Linearization = Arc<[(MultiIndex, f64)]>;

/// Memoizing table of structure coefficients keyed by the canonical pair
/// `(min(α,β), max(α,β))`. Entries are computed at most once per key and are
/// never mutated afterwards.
#[derive(Default)]
pub struct StructureTable {
    cache: RwLock<HashMap<(MultiIndex, MultiIndex), Linearization>>,
}

impl StructureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide table shared by all expansions.
    pub fn global() -> &'static StructureTable {
        static TABLE: OnceLock<StructureTable> = OnceLock::new();
        TABLE.get_or_init(StructureTable::new)
    }

    pub fn linearize(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Result<Linearization> {
        let key = if alpha <= beta {
            (alpha.clone(), beta.clone())
        } else {
            (beta.clone(), alpha.clone())
        };
        if let Some(hit) = self.cache.read().expect("structure table poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let fresh: Linearization = compute_linearization(&key.0, &key.1)?.into();
        let mut w = self.cache.write().expect("structure table poisoned");
        Ok(w.entry(key).or_insert(fresh).clone())
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("structure table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `H_α H_β` expanded in the Hermite basis, using the global table.
pub fn product_linearize(alpha: &MultiIndex, beta: &MultiIndex) -> Result<Linearization> {
    StructureTable::global().linearize(alpha, beta)
}

/// `h_a h_b = Σ_s C(a,s) C(b,s) s! h_{a+b-2s}` as `(a+b-2s, coefficient)` pairs.
pub fn univariate_linearization(a: u32, b: u32) -> Result<Vec<(u32, f64)>> {
    (0..=a.min(b))
        .map(|s| {
            let c = match (binom_exact(a, s), binom_exact(b, s), crate::hermite::factorial_exact(s)) {
                (Some(x), Some(y), Some(f)) => x
                    .checked_mul(y)
                    .and_then(|v| v.checked_mul(f as u128))
                    .map(|v| v as f64),
                _ => None,
            };
            let c = match c {
                Some(c) => c,
                None => binom_f64(a, s) * binom_f64(b, s) * factorial(s)?,
            };
            if !c.is_finite() {
                return Err(Error::Overflow(format!("structure coefficient of h_{a} h_{b}")));
            }
            Ok((a + b - 2 * s, c))
        })
        .collect()
}

fn binom_exact(n: u32, k: u32) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

fn binom_f64(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn compute_linearization(alpha: &MultiIndex, beta: &MultiIndex) -> Result<Vec<(MultiIndex, f64)>> {
    let mut dims: Vec<usize> = alpha.terms().chain(beta.terms()).map(|(d, _)| d).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut acc: Vec<(Vec<(usize, u32)>, f64)> = vec![(Vec::new(), 1.0)];
    for d in dims {
        let uni = univariate_linearization(alpha.get(d), beta.get(d))?;
        let mut next = Vec::with_capacity(acc.len() * uni.len());
        for (terms, c) in &acc {
            for &(g, cu) in &uni {
                let mut t = terms.clone();
                t.push((d, g));
                let v = c * cu;
                if !v.is_finite() {
                    return Err(Error::Overflow(format!("structure coefficient of {alpha:?}·{beta:?}")));
                }
                next.push((t, v));
            }
        }
        acc = next;
    }
    let mut out: Vec<(MultiIndex, f64)> = acc
        .into_iter()
        .map(|(t, c)| (MultiIndex::from_terms(t), c))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_map(l: &Linearization) -> HashMap<MultiIndex, f64> {
        l.iter().cloned().collect()
    }

    #[test]
    fn identity_and_small_products() {
        let b = MultiIndex::from_dense(&[2, 1]);
        let l = product_linearize(&MultiIndex::zero(), &b).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0], (b, 1.0));

        let one = MultiIndex::unit(0, 1);
        let m = as_map(&product_linearize(&one, &one).unwrap());
        assert_eq!(m.len(), 2);
        assert_eq!(m[&MultiIndex::unit(0, 2)], 1.0);
        assert_eq!(m[&MultiIndex::zero()], 1.0);

        let m = as_map(&product_linearize(&one, &MultiIndex::unit(0, 2)).unwrap());
        assert_eq!(m[&MultiIndex::unit(0, 3)], 1.0);
        assert_eq!(m[&MultiIndex::unit(0, 1)], 2.0);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn parity_and_range() {
        for a in 0..7 {
            for b in 0..7 {
                for (g, c) in univariate_linearization(a, b).unwrap() {
                    assert!(c > 0.0);
                    assert!(g <= a + b && g >= a.abs_diff(b));
                    assert_eq!((a + b - g) % 2, 0);
                }
            }
        }
    }

    #[test]
    fn symmetric_and_cached() {
        let t = StructureTable::new();
        let a = MultiIndex::from_dense(&[1, 2]);
        let b = MultiIndex::from_dense(&[3, 0, 1]);
        let ab = t.linearize(&a, &b).unwrap();
        let ba = t.linearize(&b, &a).unwrap();
        assert!(Arc::ptr_eq(&ab, &ba));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn self_product_constant_term_is_norm() {
        for a in [MultiIndex::from_dense(&[2, 1]), MultiIndex::from_dense(&[3, 0, 2])] {
            let l = product_linearize(&a, &a).unwrap();
            let c0 = as_map(&l)[&MultiIndex::zero()];
            assert_eq!(c0, crate::hermite::norm_sq::<f64>(&a).unwrap());
        }
    }
}
