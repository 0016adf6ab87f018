//! Sparse symmetric 3-tensors of basis triple products.

use std::collections::HashMap;

/// Symmetric tensor `E[T_i T_j T_k]` over a basis of `size` functions.
///
/// `canonical` holds each nonzero once with `i <= j <= k`; `expanded` holds
/// every distinct permutation and is what contractions iterate over.
#[derive(Debug, Clone)]
pub struct SparseTriple {
    size: usize,
    canonical: Vec<(u32, u32, u32, f64)>,
    expanded: Vec<(u32, u32, u32, f64)>,
    lookup: HashMap<(u32, u32, u32), f64>,
}

impl SparseTriple {
    /// Build from canonical entries (`i <= j <= k`); zeros are dropped.
    pub fn from_canonical(size: usize, mut entries: Vec<(u32, u32, u32, f64)>) -> Self {
        entries.retain(|e| e.3 != 0.0);
        entries.sort_by_key(|e| (e.0, e.1, e.2));
        let mut expanded = Vec::with_capacity(entries.len() * 6);
        for &(i, j, k, v) in &entries {
            debug_assert!(i <= j && j <= k);
            let mut perms = [
                (i, j, k),
                (i, k, j),
                (j, i, k),
                (j, k, i),
                (k, i, j),
                (k, j, i),
            ];
            perms.sort();
            let mut last = None;
            for p in perms {
                if Some(p) != last {
                    expanded.push((p.0, p.1, p.2, v));
                    last = Some(p);
                }
            }
        }
        // Group by output slot for locality in contractions.
        expanded.sort_by_key(|e| (e.2, e.0, e.1));
        let lookup = entries.iter().map(|&(i, j, k, v)| ((i, j, k), v)).collect();
        Self {
            size,
            canonical: entries,
            expanded,
            lookup,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.canonical.len()
    }

    pub fn canonical(&self) -> &[(u32, u32, u32, f64)] {
        &self.canonical
    }

    pub fn expanded(&self) -> &[(u32, u32, u32, f64)] {
        &self.expanded
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut idx = [i as u32, j as u32, k as u32];
        idx.sort_unstable();
        self.lookup
            .get(&(idx[0], idx[1], idx[2]))
            .copied()
            .unwrap_or(0.0)
    }

    /// Fraction of the `size^3` dense entries that are nonzero.
    pub fn density(&self) -> f64 {
        self.expanded.len() as f64 / (self.size as f64).powi(3)
    }

    /// The one-function tensor `E[1 * 1 * 1] = 1`.
    pub fn constant() -> Self {
        Self::from_canonical(1, vec![(0, 0, 0, 1.0)])
    }
}
