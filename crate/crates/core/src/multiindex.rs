//! Truncated multi-index families in graded lexicographic order.
//!
//! Members are sorted by total degree first; within a degree they are
//! compared lexicographically with the first variable most significant, so
//! `(0,2) < (1,1) < (2,0)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{DgpcError, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<usize>,
    degree: usize,
}

impl MultiIndex {
    pub fn new(exponents: Vec<usize>) -> Self {
        let degree = exponents.iter().sum();
        Self { exponents, degree }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0; dim])
    }

    /// Unit index `e_i` in `dim` variables.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self::new(e)
    }

    pub fn exponents(&self) -> &[usize] {
        &self.exponents
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_zero(&self) -> bool {
        self.degree == 0
    }

    /// Componentwise `self <= other`.
    pub fn componentwise_le(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim()
            && self
                .exponents
                .iter()
                .zip(&other.exponents)
                .all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference; `None` unless `other <= self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.componentwise_le(self) {
            return None;
        }
        Some(MultiIndex::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// If this is a unit index `e_i`, return `i`.
    pub fn unit_position(&self) -> Option<usize> {
        if self.degree != 1 {
            return None;
        }
        self.exponents.iter().position(|&e| e == 1)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// The family `J_{K,N}` of all multi-indices in `K` variables with total
/// degree at most `N`.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    dim: usize,
    max_degree: usize,
    members: Vec<MultiIndex>,
    rank_of: HashMap<MultiIndex, usize>,
}

impl MultiIndexSet {
    /// Build `J_{K,N}`. A zero-dimensional set (`K = 0`) is rejected.
    pub fn new(dim: usize, max_degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(DgpcError::InvalidArgument(
                "multi-index set needs at least one variable".into(),
            ));
        }
        Ok(Self::build(dim, max_degree))
    }

    /// The set containing only the empty multi-index. Used for a state space
    /// without random components, where the only basis function is `T_0 = 1`.
    pub fn constant_only() -> Self {
        Self::build(0, 0)
    }

    fn build(dim: usize, max_degree: usize) -> Self {
        let mut members = Vec::with_capacity(binomial(dim + max_degree, max_degree) as usize);
        let mut buf = vec![0usize; dim];
        for deg in 0..=max_degree {
            compositions(deg, 0, &mut buf, &mut members);
            if dim == 0 {
                break;
            }
        }
        let rank_of = members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Self {
            dim,
            max_degree,
            members,
            rank_of,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn get(&self, rank: usize) -> &MultiIndex {
        &self.members[rank]
    }

    pub fn rank(&self, index: &MultiIndex) -> Option<usize> {
        self.rank_of.get(index).copied()
    }

    /// Rank of the unit index `e_i`, present whenever `max_degree >= 1`.
    pub fn unit_rank(&self, i: usize) -> Option<usize> {
        if i >= self.dim {
            return None;
        }
        self.rank(&MultiIndex::unit(self.dim, i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }
}

/// Push every composition of `remaining` into the tail `buf[pos..]`, in
/// ascending lexicographic order.
fn compositions(remaining: usize, pos: usize, buf: &mut [usize], out: &mut Vec<MultiIndex>) {
    if pos + 1 >= buf.len() {
        if let Some(last) = buf.last_mut() {
            *last = remaining;
        }
        out.push(MultiIndex::new(buf.to_vec()));
        return;
    }
    for first in 0..=remaining {
        buf[pos] = first;
        compositions(remaining - first, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

/// Product family `a ⊗ b`. Position of `(i, j)` is `i * |b| + j`: the `a`
/// index is major and the `b` index is minor.
#[derive(Debug, Clone)]
pub struct TensorIndexSet {
    a_len: usize,
    b_len: usize,
}

impl TensorIndexSet {
    pub fn new(a: &MultiIndexSet, b: &MultiIndexSet) -> Self {
        Self::from_sizes(a.len(), b.len())
    }

    pub fn from_sizes(a_len: usize, b_len: usize) -> Self {
        Self { a_len, b_len }
    }

    pub fn len(&self) -> usize {
        self.a_len * self.b_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn a_len(&self) -> usize {
        self.a_len
    }

    pub fn b_len(&self) -> usize {
        self.b_len
    }

    #[inline]
    pub fn rank(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < self.a_len && b < self.b_len);
        a * self.b_len + b
    }

    #[inline]
    pub fn unrank(&self, r: usize) -> (usize, usize) {
        (r / self.b_len, r % self.b_len)
    }
}

/// Binomial coefficient as an exact integer (small arguments only).
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}
