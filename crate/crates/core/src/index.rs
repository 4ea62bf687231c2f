//! Multi-indices and downward-closed index sets of the Hermite basis.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Finitely supported sequence of nonnegative integers.
///
/// Stored sparsely as `(dimension, power)` pairs sorted by dimension with no
/// zero powers, so equality ignores trailing zeros by construction.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    terms: SmallVec<[(u32, u32); 4]>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `power` in a single dimension.
    pub fn unit(dim: usize, power: u32) -> Self {
        let mut terms = SmallVec::new();
        if power > 0 {
            terms.push((dim as u32, power));
        }
        Self { terms }
    }

    pub fn from_dense(entries: &[u32]) -> Self {
        let terms = entries
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0)
            .map(|(d, &p)| (d as u32, p))
            .collect();
        Self { terms }
    }

    /// Builds from arbitrary `(dim, power)` pairs; repeated dims are summed.
    pub fn from_terms<I: IntoIterator<Item = (usize, u32)>>(terms: I) -> Self {
        let mut v: Vec<(u32, u32)> = terms
            .into_iter()
            .filter(|&(_, p)| p > 0)
            .map(|(d, p)| (d as u32, p))
            .collect();
        v.sort_unstable();
        let mut out: SmallVec<[(u32, u32); 4]> = SmallVec::new();
        for (d, p) in v {
            match out.last_mut() {
                Some(last) if last.0 == d => last.1 += p,
                _ => out.push((d, p)),
            }
        }
        Self { terms: out }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, p)| p).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, dim: usize) -> u32 {
        self.terms
            .iter()
            .find(|&&(d, _)| d as usize == dim)
            .map_or(0, |&(_, p)| p)
    }

    /// Nonzero `(dimension, power)` pairs in increasing dimension.
    pub fn terms(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.terms.iter().map(|&(d, p)| (d as usize, p))
    }

    /// Number of germ variables needed to evaluate this index.
    pub fn required_dims(&self) -> usize {
        self.terms.last().map_or(0, |&(d, _)| d as usize + 1)
    }

    pub fn to_dense(&self, len: usize) -> Vec<u32> {
        let mut v = vec![0; len.max(self.required_dims())];
        for (d, p) in self.terms() {
            v[d] = p;
        }
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms().chain(other.terms()))
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &Self) -> bool {
        self.terms().all(|(d, p)| other.get(d) >= p)
    }

    /// Same index with every dimension shifted by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|&(d, p)| (d + offset as u32, p))
                .collect(),
        }
    }

    /// Applies `f` to each dimension; `f` must be strictly increasing.
    pub fn remap_dims<F: Fn(usize) -> usize>(&self, f: F) -> Self {
        Self::from_terms(self.terms().map(|(d, p)| (f(d), p)))
    }

    /// Indices obtained by lowering one entry by one.
    pub(crate) fn predecessors(&self) -> impl Iterator<Item = Self> + '_ {
        (0..self.terms.len()).map(move |i| {
            let mut terms = self.terms.clone();
            if terms[i].1 == 1 {
                terms.remove(i);
            } else {
                terms[i].1 -= 1;
            }
            Self { terms }
        })
    }
}

/// Graded lexicographic order: lower degree first; within a degree, the index
/// with the larger entry at the first differing dimension comes first, so
/// `(1,0) < (0,1)` and `(2,0) < (1,1) < (0,2)`.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(da, pa)), Some(&(db, pb))) => {
                    if da < db {
                        return Ordering::Less;
                    }
                    if db < da {
                        return Ordering::Greater;
                    }
                    if pa != pb {
                        return pb.cmp(&pa);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α{:?}", self.to_dense(self.required_dims()))
    }
}

/// Ordered, downward-closed set of multi-indices containing zero.
#[derive(Clone)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    germ_dim: usize,
    max_degree: u32,
    // α! per member; infinite when outside the f64 range
    norms: Vec<f64>,
}

impl IndexSet {
    /// Builds a set from members; validates zero membership and downward
    /// closure, then sorts in graded lexicographic order.
    pub fn from_members<I: IntoIterator<Item = MultiIndex>>(members: I, germ_dim: usize) -> Result<Self> {
        let uniq: HashSet<MultiIndex> = members.into_iter().collect();
        if !uniq.contains(&MultiIndex::zero()) {
            return Err(Error::InvalidArgument("index set must contain the zero multi-index".into()));
        }
        for a in &uniq {
            if a.required_dims() > germ_dim {
                return Err(Error::InvalidArgument(format!(
                    "{a:?} references more than {germ_dim} germ dimensions"
                )));
            }
            if let Some(p) = a.predecessors().find(|p| !uniq.contains(p)) {
                return Err(Error::InvalidArgument(format!(
                    "index set not downward closed: {a:?} present but {p:?} missing"
                )));
            }
        }
        Ok(Self::from_sorted_unchecked(uniq.into_iter().collect(), germ_dim))
    }

    /// Downward closure of the given indices.
    pub fn downward_closure<I: IntoIterator<Item = MultiIndex>>(seeds: I, germ_dim: usize) -> Result<Self> {
        let mut seen: HashSet<MultiIndex> = HashSet::new();
        let mut stack: Vec<MultiIndex> = seeds.into_iter().collect();
        stack.push(MultiIndex::zero());
        while let Some(a) = stack.pop() {
            if seen.contains(&a) {
                continue;
            }
            stack.extend(a.predecessors());
            seen.insert(a);
        }
        Self::from_members(seen, germ_dim)
    }

    fn from_sorted_unchecked(mut members: Vec<MultiIndex>, germ_dim: usize) -> Self {
        members.sort();
        let lookup = members.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let max_degree = members.iter().map(MultiIndex::degree).max().unwrap_or(0);
        let norms = members
            .iter()
            .map(|a| crate::hermite::norm_sq::<f64>(a).unwrap_or(f64::INFINITY))
            .collect();
        Self {
            members,
            lookup,
            germ_dim,
            max_degree,
            norms,
        }
    }

    /// Only the constant mode.
    pub fn constant(germ_dim: usize) -> Self {
        Self::from_sorted_unchecked(vec![MultiIndex::zero()], germ_dim)
    }

    /// Total-degree truncation `{α : |α| ≤ p}` on the first `dims` germ variables.
    pub fn total_degree(dims: usize, p: u32) -> Self {
        let d: Vec<usize> = (0..dims).collect();
        Self::total_degree_on(&d, p, dims)
    }

    /// Total-degree truncation supported on the listed germ dimensions.
    pub fn total_degree_on(dims: &[usize], p: u32, germ_dim: usize) -> Self {
        fn rec(dims: &[usize], left: u32, cur: &mut Vec<(usize, u32)>, out: &mut Vec<MultiIndex>) {
            match dims.split_first() {
                None => out.push(MultiIndex::from_terms(cur.iter().copied())),
                Some((&d, rest)) => {
                    for k in 0..=left {
                        cur.push((d, k));
                        rec(rest, left - k, cur, out);
                        cur.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        rec(dims, p, &mut Vec::new(), &mut out);
        let germ_dim = germ_dim.max(dims.iter().map(|d| d + 1).max().unwrap_or(0));
        Self::from_sorted_unchecked(out, germ_dim)
    }

    /// Union of two sets on the larger germ.
    pub fn union(&self, other: &Self) -> Self {
        if self.members.len() >= other.members.len() && other.members.iter().all(|a| self.contains(a)) {
            let mut s = self.clone();
            s.germ_dim = s.germ_dim.max(other.germ_dim);
            return s;
        }
        if other.members.len() >= self.members.len() && self.members.iter().all(|a| other.contains(a)) {
            let mut s = other.clone();
            s.germ_dim = s.germ_dim.max(self.germ_dim);
            return s;
        }
        let uniq: HashSet<MultiIndex> = self.members.iter().chain(&other.members).cloned().collect();
        Self::from_sorted_unchecked(uniq.into_iter().collect(), self.germ_dim.max(other.germ_dim))
    }

    /// `{α + β}`: the support of any product of expansions on the two sets.
    pub fn minkowski_sum(&self, other: &Self) -> Self {
        let mut uniq: HashSet<MultiIndex> = HashSet::with_capacity(self.len() * 2);
        for a in &self.members {
            for b in &other.members {
                uniq.insert(a.add(b));
            }
        }
        Self::from_sorted_unchecked(uniq.into_iter().collect(), self.germ_dim.max(other.germ_dim))
    }

    /// Members of degree at most `p`.
    pub fn truncated(&self, p: u32) -> Self {
        if p >= self.max_degree {
            return self.clone();
        }
        Self::from_sorted_unchecked(
            self.members.iter().filter(|a| a.degree() <= p).cloned().collect(),
            self.germ_dim,
        )
    }

    /// Same members on a germ with `extra` more variables.
    pub fn with_germ_dim(&self, germ_dim: usize) -> Self {
        assert!(germ_dim >= self.germ_dim, "germ can only be enlarged");
        let mut s = self.clone();
        s.germ_dim = germ_dim;
        s
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn germ_dim(&self) -> usize {
        self.germ_dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// `α!` of the member at position `i`.
    pub fn norm_sq<T: crate::scalar::Real>(&self, i: usize) -> Result<T> {
        let v = self.norms[i];
        let t = T::lit(v);
        if v.is_finite() && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::Overflow(format!("{:?}! exceeds the scalar range", self.members[i])))
        }
    }

    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.lookup.get(a).copied()
    }

    pub fn contains(&self, a: &MultiIndex) -> bool {
        self.lookup.contains_key(a)
    }

    /// Germ dimensions referenced by at least one member, ascending.
    pub fn active_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self
            .members
            .iter()
            .filter(|a| a.degree() == 1)
            .flat_map(|a| a.terms().map(|(d, _)| d))
            .collect();
        dims.sort_unstable();
        dims.dedup();
        dims
    }

    pub fn into_arc(self) -> Arc<Self> {
        Arc::new(self)
    }
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.germ_dim == other.germ_dim && self.members == other.members
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexSet")
            .field("len", &self.members.len())
            .field("germ_dim", &self.germ_dim)
            .field("max_degree", &self.max_degree)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_zeros_do_not_matter() {
        assert_eq!(MultiIndex::from_dense(&[1, 2, 0, 0]), MultiIndex::from_dense(&[1, 2]));
        assert_eq!(MultiIndex::from_dense(&[0, 0]), MultiIndex::zero());
        assert_eq!(MultiIndex::from_dense(&[3, 0, 2]).degree(), 5);
    }

    #[test]
    fn graded_lex_order() {
        let a = |v: &[u32]| MultiIndex::from_dense(v);
        let mut v = vec![a(&[0, 2]), a(&[1]), a(&[]), a(&[1, 1]), a(&[0, 1]), a(&[2])];
        v.sort();
        assert_eq!(v, vec![a(&[]), a(&[1]), a(&[0, 1]), a(&[2]), a(&[1, 1]), a(&[0, 2])]);
    }

    #[test]
    fn total_degree_size_and_closure() {
        let s = IndexSet::total_degree(3, 3);
        assert_eq!(s.len(), 20);
        assert_eq!(s.members()[0], MultiIndex::zero());
        assert_eq!(s.max_degree(), 3);
        assert_eq!(s.active_dims(), vec![0, 1, 2]);
        assert!(IndexSet::from_members(s.members().to_vec(), 3).is_ok());
    }

    #[test]
    fn rejects_non_closed_sets() {
        let r = IndexSet::from_members([MultiIndex::zero(), MultiIndex::unit(0, 2)], 1);
        assert!(r.is_err());
        let r = IndexSet::from_members([MultiIndex::unit(0, 1)], 1);
        assert!(r.is_err());
    }

    #[test]
    fn minkowski_sum_is_closed() {
        let a = IndexSet::total_degree(2, 2);
        let b = IndexSet::total_degree_on(&[2], 1, 3);
        let s = a.minkowski_sum(&b);
        assert!(IndexSet::from_members(s.members().to_vec(), 3).is_ok());
        assert_eq!(s.len(), a.len() * 2);
    }
}
