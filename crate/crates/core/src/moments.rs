//! Tables of (mixed) raw moments indexed by exponent multi-indices.

use crate::error::{DgpcError, Result};
use crate::multiindex::{binomial, MultiIndex, MultiIndexSet};

/// Raw moments `E[Π_i v_i^{l_i}]` for all exponents with `Σ l_i <= max_order`,
/// stored in the graded-lex order of `J_{dim, max_order}`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    index: MultiIndexSet,
    values: Vec<f64>,
}

impl MomentTable {
    pub fn from_values(dim: usize, max_order: usize, values: Vec<f64>) -> Result<Self> {
        let index = MultiIndexSet::new(dim, max_order)?;
        if values.len() != index.len() {
            return Err(DgpcError::InvalidArgument(format!(
                "moment table of dim {dim}, order {max_order} needs {} values, got {}",
                index.len(),
                values.len()
            )));
        }
        Ok(Self { index, values })
    }

    /// Fill a table by evaluating `f` on every exponent.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(dim: usize, max_order: usize, mut f: F) -> Result<Self> {
        let index = MultiIndexSet::new(dim, max_order)?;
        let values = index.iter().map(|m| f(m.exponents())).collect();
        Ok(Self { index, values })
    }

    /// Univariate table from the sequence `m_0, m_1, ..., m_n`.
    pub fn univariate(moments: &[f64]) -> Result<Self> {
        if moments.is_empty() {
            return Err(DgpcError::InvalidArgument("empty moment sequence".into()));
        }
        Self::from_values(1, moments.len() - 1, moments.to_vec())
    }

    /// Joint table of independent components from their marginal sequences.
    pub fn independent(marginals: &[Vec<f64>]) -> Result<Self> {
        let order = marginals.iter().map(|m| m.len()).min().unwrap_or(0);
        if order == 0 {
            return Err(DgpcError::InvalidArgument("empty marginal".into()));
        }
        Self::from_fn(marginals.len(), order - 1, |e| {
            e.iter().zip(marginals).map(|(&k, m)| m[k]).product()
        })
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn max_order(&self) -> usize {
        self.index.max_degree()
    }

    pub fn index(&self) -> &MultiIndexSet {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, exponents: &[usize]) -> Option<f64> {
        if exponents.len() != self.dim() {
            return None;
        }
        self.index
            .rank(&MultiIndex::new(exponents.to_vec()))
            .map(|r| self.values[r])
    }

    pub fn require(&self, exponents: &[usize]) -> Result<f64> {
        self.get(exponents).ok_or_else(|| DgpcError::MissingMoment {
            order: exponents.to_vec(),
            time: None,
        })
    }

    /// Pure moment `E[v_i^k]`.
    pub fn marginal(&self, i: usize, k: usize) -> Option<f64> {
        let mut e = vec![0; self.dim()];
        e[i] = k;
        self.get(&e)
    }

    /// Moments of the affine image `w_i = center_i + scale_i * v_i`.
    pub fn affine(&self, center: &[f64], scale: &[f64]) -> Self {
        let d = self.dim();
        let values = self
            .index
            .iter()
            .map(|target| {
                // Sum over all sub-exponents b <= target.
                let t = target.exponents();
                let mut acc = 0.0;
                let mut b = vec![0usize; d];
                loop {
                    let mut w = 1.0;
                    for i in 0..d {
                        w *= binomial(t[i], b[i]) as f64
                            * (scale[i]).powi(b[i] as i32)
                            * center[i].powi((t[i] - b[i]) as i32);
                    }
                    acc += w * self.get(&b).expect("sub-exponent within table");
                    // odometer increment over b <= t
                    let mut pos = 0;
                    loop {
                        if pos == d {
                            return acc;
                        }
                        if b[pos] < t[pos] {
                            b[pos] += 1;
                            break;
                        }
                        b[pos] = 0;
                        pos += 1;
                    }
                }
            })
            .collect();
        Self {
            index: self.index.clone(),
            values,
        }
    }

    /// Keep only the exponents of total order `<= order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.max_order() {
            return Err(DgpcError::MissingMoment {
                order: vec![order],
                time: None,
            });
        }
        Self::from_fn(self.dim(), order, |e| self.get(e).expect("lower order present"))
    }

    /// Restrict to a subset of the components.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Self> {
        let d = self.dim();
        Self::from_fn(keep.len(), self.max_order(), |e| {
            let mut full = vec![0; d];
            for (&k, &ex) in keep.iter().zip(e) {
                full[k] = ex;
            }
            self.get(&full).expect("same total order")
        })
    }
}

/// Moments `E[X^k]`, `k = 0..=order`, of `N(mean, var)`.
pub fn gaussian_moments(mean: f64, var: f64, order: usize) -> Vec<f64> {
    // m_k = mean m_{k-1} + (k-1) var m_{k-2}
    let mut m = vec![0.0; order + 1];
    m[0] = 1.0;
    if order >= 1 {
        m[1] = mean;
    }
    for k in 2..=order {
        m[k] = mean * m[k - 1] + (k - 1) as f64 * var * m[k - 2];
    }
    m
}

/// Moments of the uniform law on `[lo, hi]`.
pub fn uniform_moments(lo: f64, hi: f64, order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| {
            let k1 = (k + 1) as i32;
            if (hi - lo).abs() < f64::EPSILON * hi.abs().max(1.0) {
                lo.powi(k as i32)
            } else {
                (hi.powi(k1) - lo.powi(k1)) / ((k + 1) as f64 * (hi - lo))
            }
        })
        .collect()
}

/// Moments of the point mass at `c`.
pub fn point_mass_moments(c: f64, order: usize) -> Vec<f64> {
    (0..=order).map(|k| c.powi(k as i32)).collect()
}
