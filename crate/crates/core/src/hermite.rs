//! Normalized probabilists' Hermite polynomials and their Gaussian triple
//! products.
//!
//! `H_n = He_n / sqrt(n!)`, so that `E[H_n(ξ) H_m(ξ)] = δ_nm` for a standard
//! normal `ξ`. A Wick polynomial `T_α(ξ) = Π_i H_{α_i}(ξ_i)` inherits the
//! orthonormality, and its triple products factor over coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{DgpcError, Result};
use crate::multiindex::{binomial, MultiIndex, MultiIndexSet};
use crate::tensor::SparseTriple;

/// `H_n(x)` by the normalized three-term recurrence.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `T_α(ξ)` for a multi-index over `ξ`.
pub fn wick_eval(alpha: &MultiIndex, xi: &[f64]) -> f64 {
    alpha
        .exponents()
        .iter()
        .zip(xi)
        .map(|(&a, &x)| hermite_eval(a, x))
        .product()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

/// `E[H_a H_b H_c]` for a standard normal argument.
///
/// Nonzero only when `a + b + c` is even and each degree is at most the sum
/// of the other two; then it equals `sqrt(a! b! c!) / ((s-a)! (s-b)! (s-c)!)`
/// with `s = (a + b + c) / 2`.
pub fn triple_product_1d(a: usize, b: usize, c: usize) -> f64 {
    let total = a + b + c;
    if !total.is_multiple_of(2) {
        return 0.0;
    }
    let s = total / 2;
    if a > s || b > s || c > s {
        return 0.0;
    }
    if a.max(b).max(c) <= 20 {
        (factorial(a) * factorial(b) * factorial(c)).sqrt()
            / (factorial(s - a) * factorial(s - b) * factorial(s - c))
    } else {
        (0.5 * (ln_factorial(a) + ln_factorial(b) + ln_factorial(c))
            - ln_factorial(s - a)
            - ln_factorial(s - b)
            - ln_factorial(s - c))
            .exp()
    }
}

/// `E[T_α T_β T_γ]` as a product of one-dimensional factors.
pub fn triple_product(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> f64 {
    let mut acc = 1.0;
    for ((&a, &b), &c) in alpha
        .exponents()
        .iter()
        .zip(beta.exponents())
        .zip(gamma.exponents())
    {
        let t = triple_product_1d(a, b, c);
        if t == 0.0 {
            return 0.0;
        }
        acc *= t;
    }
    acc
}

/// Coefficient `C(α, β, γ)` of the Hermite product formula:
/// `sqrt(Π_i binom(α_i, β_i) binom(β_i + γ_i, γ_i) binom(α_i - β_i + γ_i, γ_i))`.
pub fn product_coefficient(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> Result<f64> {
    if !beta.componentwise_le(alpha) || gamma.dim() != alpha.dim() {
        return Err(DgpcError::InvalidArgument(format!(
            "product coefficient needs beta <= alpha, got alpha={alpha:?} beta={beta:?}"
        )));
    }
    let mut acc = 1.0f64;
    for i in 0..alpha.dim() {
        let (a, b, g) = (
            alpha.exponents()[i],
            beta.exponents()[i],
            gamma.exponents()[i],
        );
        acc *= binomial(a, b) as f64
            * binomial(b + g, g) as f64
            * binomial(a - b + g, g) as f64;
    }
    Ok(acc.sqrt())
}

/// Product of two Hermite chaos expansions over `basis` by the Hermite
/// product formula, truncated to `basis`:
/// `(uv)_α = Σ_γ Σ_{β<=α} C(α,β,γ) u_{α-β+γ} v_{β+γ}`.
pub fn hermite_product(u: &[f64], v: &[f64], basis: &MultiIndexSet) -> Result<Vec<f64>> {
    if u.len() != basis.len() || v.len() != basis.len() {
        return Err(DgpcError::BasisMismatch(
            "coefficient length differs from basis size".into(),
        ));
    }
    let mut out = vec![0.0; basis.len()];
    for (ai, alpha) in basis.iter().enumerate() {
        let mut acc = 0.0;
        for beta in basis.iter().filter(|b| b.componentwise_le(alpha)) {
            let rest = alpha.checked_sub(beta).expect("beta <= alpha");
            for gamma in basis.iter() {
                let (Some(ui), Some(vi)) = (
                    basis.rank(&rest.add(gamma)),
                    basis.rank(&beta.add(gamma)),
                ) else {
                    continue;
                };
                acc += product_coefficient(alpha, beta, gamma)? * u[ui] * v[vi];
            }
        }
        out[ai] = acc;
    }
    Ok(out)
}

/// Triple products of the Wick polynomials of a multi-index set.
#[derive(Debug, Clone)]
pub struct XiTripleTensor {
    basis: MultiIndexSet,
    entries: SparseTriple,
}

impl XiTripleTensor {
    pub fn build(basis: &MultiIndexSet) -> Self {
        let n = basis.len();
        let members = basis.members();
        let canonical: Vec<(u32, u32, u32, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut row = Vec::new();
                for j in i..n {
                    for k in j..n {
                        let (a, b, c) = (&members[i], &members[j], &members[k]);
                        // Degree triangle on the totals prunes most triples early.
                        if c.degree() > a.degree() + b.degree()
                            || (a.degree() + b.degree() + c.degree()) % 2 != 0
                        {
                            continue;
                        }
                        let t = triple_product(a, b, c);
                        if t != 0.0 {
                            row.push((i as u32, j as u32, k as u32, t));
                        }
                    }
                }
                row
            })
            .collect();
        Self {
            basis: basis.clone(),
            entries: SparseTriple::from_canonical(n, canonical),
        }
    }

    pub fn basis(&self) -> &MultiIndexSet {
        &self.basis
    }

    pub fn entries(&self) -> &SparseTriple {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries.get(i, j, k)
    }

    /// Write the canonical entries as a little-endian binary cache:
    /// `K: u32, N: u32, count: u64`, then `count` records of
    /// `i: u32, j: u32, k: u32, value: f64`.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.basis.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.basis.max_degree() as u32).to_le_bytes())?;
        w.write_all(&(self.entries.nnz() as u64).to_le_bytes())?;
        for &(i, j, k, v) in self.entries.canonical() {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&j.to_le_bytes())?;
            w.write_all(&k.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Load a cache written by [`write_cache`](Self::write_cache). The header
    /// must match `(K, N)` of the requested basis.
    pub fn read_cache(path: &Path, dim: usize, max_degree: usize) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let k = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        if (k, n) != (dim, max_degree) {
            return Err(DgpcError::BasisMismatch(format!(
                "cache holds (K={k}, N={n}), requested (K={dim}, N={max_degree})"
            )));
        }
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let basis = MultiIndexSet::new(dim, max_degree)?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let mut idx = [0u32; 3];
            for slot in idx.iter_mut() {
                r.read_exact(&mut b4)?;
                *slot = u32::from_le_bytes(b4);
            }
            r.read_exact(&mut b8)?;
            entries.push((idx[0], idx[1], idx[2], f64::from_le_bytes(b8)));
        }
        Ok(Self {
            entries: SparseTriple::from_canonical(basis.len(), entries),
            basis,
        })
    }
}
