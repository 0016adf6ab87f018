//! Orthonormal polynomials of an arbitrary (multivariate, correlated)
//! measure, built from its moments alone.
//!
//! Components are first standardized to `z_i = (x_i - mean_i) / std_i`;
//! the monomials `z^α` over `J_{d,L}` are then orthonormalized in graded-lex
//! order by modified Gram-Schmidt with one re-orthogonalization pass, using
//! the moment (Hankel) Gram matrix as inner product. Since every shifted
//! monomial differs from the raw one by lower-order terms that precede it in
//! graded-lex order, the resulting polynomials are the same functions that a
//! Gram-Schmidt pass over the raw monomials would produce.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chaos::{BasisProducts, ChaosExpansion};
use crate::error::{DgpcError, Result};
use crate::moments::MomentTable;
use crate::multiindex::{binomial, MultiIndex, MultiIndexSet};
use crate::tensor::SparseTriple;

/// Relative pivot tolerance: a squared norm below this fraction of the
/// monomial's own squared norm is treated as a collapsed direction.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Triple products `E[T_k T_l T_m]` of an [`OrthonormalBasis`].
pub type StateTripleTensor = SparseTriple;

#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    monomials: MultiIndexSet,
    /// Physical means of the components.
    center: Vec<f64>,
    /// Physical standard deviations of the components.
    scale: Vec<f64>,
    /// Row `k` holds the coefficients of `T_k` over the standardized
    /// monomials; lower triangular.
    coeffs: Vec<Vec<f64>>,
    /// Moments of the standardized components.
    source_moments: MomentTable,
    gram_condition: f64,
}

fn add_exponents(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Build the orthonormal basis of degree `degree` for the measure described
/// by `moments` (raw moments of the physical components).
pub fn orthonormalize(moments: &MomentTable, degree: usize) -> Result<OrthonormalBasis> {
    let d = moments.dim();
    if moments.max_order() < 2 * degree.max(1) {
        return Err(DgpcError::MissingMoment {
            order: vec![2 * degree.max(1)],
            time: None,
        });
    }
    let mut center = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for i in 0..d {
        let m1 = moments.marginal(i, 1).expect("order >= 2");
        let m2 = moments.marginal(i, 2).expect("order >= 2");
        let var = m2 - m1 * m1;
        if !(var > PIVOT_TOLERANCE * m2.abs().max(f64::MIN_POSITIVE)) {
            return Err(DgpcError::degenerate(format!(
                "component {i} has variance {var:e} (second moment {m2:e})"
            )));
        }
        center.push(m1);
        scale.push(var.sqrt());
    }
    let inv_scale: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let shift: Vec<f64> = center.iter().zip(&scale).map(|(c, s)| -c / s).collect();
    let standardized = moments.affine(&shift, &inv_scale);
    build_standardized(standardized, degree, center, scale)
}

/// Gram-Schmidt on a table that already describes standardized components.
/// `center`/`scale` record how to map back to physical variables.
pub fn orthonormalize_standardized(
    moments: MomentTable,
    degree: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
) -> Result<OrthonormalBasis> {
    if moments.max_order() < 2 * degree.max(1) {
        return Err(DgpcError::MissingMoment {
            order: vec![2 * degree.max(1)],
            time: None,
        });
    }
    build_standardized(moments, degree, center, scale)
}

fn build_standardized(
    moments: MomentTable,
    degree: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
) -> Result<OrthonormalBasis> {
    let d = moments.dim();
    let monomials = MultiIndexSet::new(d, degree)?;
    let m = monomials.len();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let e = add_exponents(monomials.get(i).exponents(), monomials.get(j).exponents());
            let v = moments.require(&e)?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let inner = |p: &[f64], q: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            if p[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..m {
                row += gram[(i, j)] * q[j];
            }
            acc += p[i] * row;
        }
        acc
    };

    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = vec![0.0; m];
        v[k] = 1.0;
        for _pass in 0..2 {
            for t in &coeffs {
                let c = inner(&v, t);
                for (vi, ti) in v.iter_mut().zip(t) {
                    *vi -= c * ti;
                }
            }
        }
        let nrm2 = inner(&v, &v);
        if !(nrm2 > PIVOT_TOLERANCE * gram[(k, k)]) {
            return Err(DgpcError::degenerate(format!(
                "pivot {nrm2:e} for monomial {:?} (reference {:e})",
                monomials.get(k),
                gram[(k, k)]
            )));
        }
        let inv = 1.0 / nrm2.sqrt();
        v.iter_mut().for_each(|x| *x *= inv);
        coeffs.push(v);
    }

    let eig = SymmetricEigen::new(gram).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let gram_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };

    Ok(OrthonormalBasis {
        monomials,
        center,
        scale,
        coeffs,
        source_moments: moments,
        gram_condition,
    })
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.monomials.dim()
    }

    pub fn degree(&self) -> usize {
        self.monomials.max_degree()
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &MultiIndexSet {
        &self.monomials
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Coefficients of each `T_k` over the standardized monomials.
    pub fn standardized_coefficients(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn source_moments(&self) -> &MomentTable {
        &self.source_moments
    }

    /// Condition number of the monomial Gram matrix of the standardized
    /// components.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    /// Coefficients of each `T_k` over the raw physical monomials `x^α`.
    pub fn raw_monomial_coefficients(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let m = self.len();
        let mut out = vec![vec![0.0; m]; m];
        // z^α = Π_i s_i^{-α_i} Σ_{β_i <= α_i} binom(α_i, β_i) x_i^{β_i} (-c_i)^{α_i - β_i}
        for (a, alpha) in self.monomials.iter().enumerate() {
            let mut expansion: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for i in 0..d {
                let ai = alpha.exponents()[i];
                let mut next = Vec::new();
                for (partial, w) in &expansion {
                    for b in 0..=ai {
                        let mut e = partial.clone();
                        e.push(b);
                        let c = binomial(ai, b) as f64
                            * (-self.center[i]).powi((ai - b) as i32)
                            / self.scale[i].powi(ai as i32);
                        next.push((e, w * c));
                    }
                }
                expansion = next;
            }
            for (e, w) in expansion {
                let r = self
                    .monomials
                    .rank(&MultiIndex::new(e))
                    .expect("sub-monomial in set");
                for k in 0..m {
                    out[k][r] += self.coeffs[k][a] * w;
                }
            }
        }
        out
    }

    /// Standardized coordinates of a physical point.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((x, c), s)| (x - c) / s)
            .collect()
    }

    /// `T_k(x)` at a physical point.
    pub fn eval(&self, k: usize, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        self.monomials
            .iter()
            .zip(&self.coeffs[k])
            .filter(|(_, &c)| c != 0.0)
            .map(|(mono, c)| {
                c * mono
                    .exponents()
                    .iter()
                    .zip(&z)
                    .map(|(&e, &zi)| zi.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// `E[T_k T_l]` evaluated through the source moments.
    pub fn gram_through_moments(&self) -> Result<Vec<Vec<f64>>> {
        let m = self.len();
        let mut g = vec![vec![0.0; m]; m];
        for k in 0..m {
            for l in 0..m {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        let (ca, cb) = (self.coeffs[k][a], self.coeffs[l][b]);
                        if ca == 0.0 || cb == 0.0 {
                            continue;
                        }
                        let e = add_exponents(
                            self.monomials.get(a).exponents(),
                            self.monomials.get(b).exponents(),
                        );
                        acc += ca * cb * self.source_moments.require(&e)?;
                    }
                }
                g[k][l] = acc;
            }
        }
        Ok(g)
    }

    /// Coefficients of each physical component over the basis:
    /// `x_i = Σ_k c_{i,k} T_k`. Exact because `x_i` lies in the span of the
    /// polynomials of degree at most one.
    pub fn component_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        let m = self.len();
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            let mut row = vec![0.0; m];
            for k in 0..m {
                if self.monomials.get(k).degree() > 1 {
                    continue;
                }
                // E[z_i T_k] = Σ_a C_ka E[z_i z^α_a]
                let mut acc = 0.0;
                for a in 0..=k {
                    let c = self.coeffs[k][a];
                    if c == 0.0 {
                        continue;
                    }
                    let mut e = self.monomials.get(a).exponents().to_vec();
                    e[i] += 1;
                    acc += c * self.source_moments.require(&e)?;
                }
                row[k] = self.scale[i] * acc;
            }
            row[0] += self.center[i];
            out.push(row);
        }
        Ok(out)
    }
}

/// Triple products of the basis polynomials, contracted against the
/// source moments (which must reach order `3L`).
pub fn state_triple_products(basis: &OrthonormalBasis) -> Result<StateTripleTensor> {
    let d = basis.dim();
    let m = basis.len();
    let l = basis.degree();
    let moments = &basis.source_moments;
    if moments.max_order() < 3 * l {
        let mut order = vec![0; d];
        order[0] = 3 * l;
        return Err(DgpcError::MissingMoment { order, time: None });
    }
    let wide = MultiIndexSet::new(d, 2 * l)?;
    // E[T_k z^β] for β of degree <= 2L.
    let mut tk_mom = vec![vec![0.0; wide.len()]; m];
    for k in 0..m {
        for (b, beta) in wide.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..=k {
                let c = basis.coeffs[k][a];
                if c != 0.0 {
                    let e = add_exponents(basis.monomials.get(a).exponents(), beta.exponents());
                    acc += c * moments.require(&e)?;
                }
            }
            tk_mom[k][b] = acc;
        }
    }
    let mut entries = Vec::new();
    for i in 0..m {
        for j in i..m {
            // Product polynomial T_i T_j over monomials of degree <= 2L.
            let mut prod = vec![0.0; wide.len()];
            for a in 0..=i {
                let ca = basis.coeffs[i][a];
                if ca == 0.0 {
                    continue;
                }
                for b in 0..=j {
                    let cb = basis.coeffs[j][b];
                    if cb == 0.0 {
                        continue;
                    }
                    let e = MultiIndex::new(add_exponents(
                        basis.monomials.get(a).exponents(),
                        basis.monomials.get(b).exponents(),
                    ));
                    prod[wide.rank(&e).expect("degree <= 2L")] += ca * cb;
                }
            }
            for k in j..m {
                let v = if i == 0 {
                    if j == k {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    prod.iter().zip(&tk_mom[k]).map(|(p, t)| p * t).sum()
                };
                if v.abs() > 1e-14 {
                    entries.push((i as u32, j as u32, k as u32, v));
                }
            }
        }
    }
    Ok(SparseTriple::from_canonical(m, entries))
}

/// Basis and triple products built from the chaos representations of the
/// standardized components rather than from a moment table.
///
/// Each monomial `z^α` is represented by its projected expansion (projected
/// powers folded by Galerkin products, as in [`crate::chaos::mixed_moments`]),
/// and those vectors are orthonormalized by modified Gram-Schmidt in
/// coefficient space. Triple products are `<P(T_k T_l), T_m>` over the same
/// expansions. The Gram matrix is positive semidefinite by construction, and
/// `(0, l, m) = δ_lm` holds to roundoff. `source_moments` is stored for
/// reporting only.
pub fn orthonormalize_projected(
    z: &[ChaosExpansion],
    products: &BasisProducts,
    degree: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    source_moments: MomentTable,
) -> Result<(OrthonormalBasis, StateTripleTensor)> {
    let d = z.len();
    if d == 0 || center.len() != d || scale.len() != d {
        return Err(DgpcError::InvalidArgument("component, center and scale counts differ".into()));
    }
    let monomials = MultiIndexSet::new(d, degree)?;
    let m = monomials.len();
    let pw: Vec<Vec<ChaosExpansion>> = z
        .iter()
        .map(|c| crate::chaos::powers(c, degree.max(1), products))
        .collect::<Result<_>>()?;
    let mut scratch = products.scratch();
    let mut vectors: Vec<ChaosExpansion> = Vec::with_capacity(m);
    for alpha in monomials.iter() {
        let mut acc: Option<ChaosExpansion> = None;
        for (i, &k) in alpha.exponents().iter().enumerate() {
            if k == 0 {
                continue;
            }
            acc = Some(match acc {
                None => pw[i][k].clone(),
                Some(a) => {
                    let mut next = ChaosExpansion::zeros(products);
                    products.multiply_into(a.coeffs(), pw[i][k].coeffs(), next.coeffs_mut(), &mut scratch);
                    next
                }
            });
        }
        vectors.push(acc.unwrap_or_else(|| ChaosExpansion::constant(products, 1.0)));
    }

    let mut gram = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = vectors[i].inner(&vectors[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }

    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = vectors[k].coeffs().to_vec();
        let mut c = vec![0.0; m];
        c[k] = 1.0;
        for _pass in 0..2 {
            for (q, qc) in basis.iter().zip(&coeffs) {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
                for (ci, qci) in c.iter_mut().zip(qc) {
                    *ci -= proj * qci;
                }
            }
        }
        let nrm2: f64 = v.iter().map(|x| x * x).sum();
        if !(nrm2 > PIVOT_TOLERANCE * gram[(k, k)]) {
            return Err(DgpcError::degenerate(format!(
                "pivot {nrm2:e} for monomial {:?} (reference {:e})",
                monomials.get(k),
                gram[(k, k)]
            )));
        }
        let inv = 1.0 / nrm2.sqrt();
        v.iter_mut().for_each(|x| *x *= inv);
        c.iter_mut().for_each(|x| *x *= inv);
        basis.push(v);
        coeffs.push(c);
    }

    let eig = SymmetricEigen::new(gram).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let gram_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };

    let mut entries = Vec::new();
    let mut prod = vec![0.0; products.len()];
    for i in 0..m {
        for j in i..m {
            if i > 0 {
                products.multiply_into(&basis[i], &basis[j], &mut prod, &mut scratch);
            }
            for k in j..m {
                let v = if i == 0 {
                    if j == k {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    prod.iter().zip(&basis[k]).map(|(a, b)| a * b).sum()
                };
                if v.abs() > 1e-14 {
                    entries.push((i as u32, j as u32, k as u32, v));
                }
            }
        }
    }

    Ok((
        OrthonormalBasis {
            monomials,
            center,
            scale,
            coeffs,
            source_moments,
            gram_condition,
        },
        SparseTriple::from_canonical(m, entries),
    ))
}

/// Place independent components on a tensor basis: component `i` gets `mean_i`
/// at the joint zero index and `std_i` at `T_{e_i}` of the state basis.
pub fn initial_condition_coeffs(
    mean: &[f64],
    std: &[f64],
    state_basis: &MultiIndexSet,
    products: &BasisProducts,
) -> Result<Vec<ChaosExpansion>> {
    if mean.len() != std.len() || mean.len() != state_basis.dim() {
        return Err(DgpcError::InvalidArgument(
            "mean/std lengths must match the state dimension".into(),
        ));
    }
    if state_basis.len() != products.state_len() {
        return Err(DgpcError::BasisMismatch(
            "state basis size differs from product tensor".into(),
        ));
    }
    mean.iter()
        .zip(std)
        .enumerate()
        .map(|(i, (&mu, &s))| {
            if !(s > 0.0) {
                return Err(DgpcError::degenerate(format!(
                    "component {i} has standard deviation {s}"
                )));
            }
            let mut e = ChaosExpansion::constant(products, mu);
            let slot = state_basis
                .unit_rank(i)
                .ok_or_else(|| DgpcError::InvalidArgument("state degree must be >= 1".into()))?;
            e.coeffs_mut()[products.layout().rank(0, slot)] = s;
            Ok(e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::XiTripleTensor;
    use crate::moments::{gaussian_moments, point_mass_moments, uniform_moments};
    use std::sync::Arc;

    /// Coefficients of He_n / sqrt(n!) from the monic recurrence.
    fn hermite_coeffs(n_max: usize) -> Vec<Vec<f64>> {
        let mut he: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
        for n in 1..n_max {
            let mut next = vec![0.0; n + 2];
            for (i, c) in he[n].iter().enumerate() {
                next[i + 1] += c;
            }
            for (i, c) in he[n - 1].iter().enumerate() {
                next[i] -= n as f64 * c;
            }
            he.push(next);
        }
        let mut f = 1.0;
        he.into_iter()
            .enumerate()
            .map(|(n, p)| {
                if n > 0 {
                    f *= n as f64;
                }
                p.into_iter().map(|c| c / f.sqrt()).collect()
            })
            .collect()
    }

    #[test]
    fn gaussian_gives_hermite() {
        let t = MomentTable::univariate(&gaussian_moments(0.0, 1.0, 6)).unwrap();
        let b = orthonormalize(&t, 3).unwrap();
        let raw = b.raw_monomial_coefficients();
        let h = hermite_coeffs(3);
        for k in 0..=3 {
            for (j, &c) in h[k].iter().enumerate() {
                assert!((raw[k][j] - c).abs() < 1e-12, "T_{k} coeff {j}");
            }
        }
        assert_eq!(raw[0][0], 1.0);
    }

    #[test]
    fn uniform_gives_legendre() {
        let t = MomentTable::univariate(&uniform_moments(-1.0, 1.0, 4)).unwrap();
        let b = orthonormalize(&t, 2).unwrap();
        let raw = b.raw_monomial_coefficients();
        // sqrt(3) x and sqrt(5) (3x^2 - 1)/2
        assert!((raw[1][1] - 3f64.sqrt()).abs() < 1e-12);
        assert!((raw[2][2] - 1.5 * 5f64.sqrt()).abs() < 1e-12);
        assert!((raw[2][0] + 0.5 * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn first_degree_is_standardized_variable() {
        let t = MomentTable::univariate(&gaussian_moments(2.0, 0.25, 4)).unwrap();
        let b = orthonormalize(&t, 2).unwrap();
        assert!((b.eval(0, &[7.0]) - 1.0).abs() < 1e-15);
        assert!((b.eval(1, &[2.5]) - 1.0).abs() < 1e-12);
        assert!((b.eval(1, &[1.5]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_is_degenerate() {
        let t = MomentTable::univariate(&point_mass_moments(1.5, 4)).unwrap();
        assert!(matches!(
            orthonormalize(&t, 2),
            Err(DgpcError::DegenerateMeasure { .. })
        ));
        // perfectly correlated pair: x2 = 2 x1
        let g = gaussian_moments(0.0, 1.0, 4);
        let t = MomentTable::from_fn(2, 4, |e| 2f64.powi(e[1] as i32) * g[e[0] + e[1]]).unwrap();
        assert!(matches!(
            orthonormalize(&t, 1),
            Err(DgpcError::DegenerateMeasure { .. })
        ));
    }

    #[test]
    fn missing_moments_reported() {
        let t = MomentTable::univariate(&gaussian_moments(0.0, 1.0, 4)).unwrap();
        assert!(matches!(orthonormalize(&t, 3), Err(DgpcError::MissingMoment { .. })));
        let b = orthonormalize(&t, 2).unwrap();
        assert!(matches!(state_triple_products(&b), Err(DgpcError::MissingMoment { .. })));
    }

    #[test]
    fn gaussian_triples_match_hermite() {
        let t = MomentTable::univariate(&gaussian_moments(0.0, 1.0, 12)).unwrap();
        let b = orthonormalize(&t, 4).unwrap();
        let s = state_triple_products(&b).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                for k in 0..=4 {
                    let h = crate::hermite::triple_product_1d(i, j, k);
                    assert!((s.get(i, j, k) - h).abs() < 1e-8, "({i},{j},{k})");
                }
            }
        }
        assert!((s.get(1, 1, 2) - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn uniform_odd_triple_vanishes() {
        let t = MomentTable::univariate(&uniform_moments(-1.0, 1.0, 6)).unwrap();
        let b = orthonormalize(&t, 2).unwrap();
        let s = state_triple_products(&b).unwrap();
        assert!(s.get(1, 1, 1).abs() < 1e-14);
        for l in 0..3 {
            for m in 0..3 {
                assert_eq!(s.get(0, l, m), if l == m { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn bivariate_round_trip_orthonormality() {
        // correlated pair: x = g1, y = 0.6 g1 + 0.8 u with g1 ~ N(0,1), u ~ U(-sqrt3, sqrt3)
        let g = gaussian_moments(0.0, 1.0, 8);
        let u = uniform_moments(-3f64.sqrt(), 3f64.sqrt(), 8);
        let t = MomentTable::from_fn(2, 8, |e| {
            let (p, q) = (e[0], e[1]);
            let mut acc = 0.0;
            for r in 0..=q {
                acc += binomial(q, r) as f64
                    * 0.6f64.powi(r as i32)
                    * 0.8f64.powi((q - r) as i32)
                    * g[p + r]
                    * u[q - r];
            }
            acc
        })
        .unwrap();
        for l in 1..=4 {
            let b = orthonormalize(&t, l).unwrap();
            let g = b.gram_through_moments().unwrap();
            for (k, row) in g.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let e = if j == k { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-8, "L={l} ({k},{j}) {v}");
                }
            }
            let comps = b.component_coefficients().unwrap();
            // x = mean + Σ c_k T_k reproduces the variances
            let vx: f64 = comps[0][1..].iter().map(|c| c * c).sum();
            let vy: f64 = comps[1][1..].iter().map(|c| c * c).sum();
            assert!((vx - 1.0).abs() < 1e-12);
            assert!((vy - 1.0).abs() < 1e-12);
            let cov: f64 = comps[0][1..].iter().zip(&comps[1][1..]).map(|(a, b)| a * b).sum();
            assert!((cov - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_equivariance() {
        let c = 3.0f64;
        let base = gaussian_moments(0.5, 2.0, 8);
        let scaled: Vec<f64> = base.iter().enumerate().map(|(k, m)| c.powi(k as i32) * m).collect();
        let b1 = orthonormalize(&MomentTable::univariate(&base).unwrap(), 4).unwrap();
        let b2 = orthonormalize(&MomentTable::univariate(&scaled).unwrap(), 4).unwrap();
        let r1 = b1.raw_monomial_coefficients();
        let r2 = b2.raw_monomial_coefficients();
        for k in 0..5 {
            for j in 0..5 {
                let lhs = r2[k][j] * c.powi(j as i32);
                assert!((lhs - r1[k][j]).abs() < 1e-9 * (1.0 + r1[k][j].abs()));
            }
        }
    }

    #[test]
    fn initial_condition_placement() {
        let xi = Arc::new(XiTripleTensor::build(&MultiIndexSet::new(2, 1).unwrap()));
        let state = MultiIndexSet::new(1, 2).unwrap();
        let t = MomentTable::univariate(&gaussian_moments(0.0, 1.0, 6)).unwrap();
        let sb = orthonormalize(&t, 2).unwrap();
        let p = BasisProducts::new(xi.clone(), Arc::new(state_triple_products(&sb).unwrap()));

        let e = initial_condition_coeffs(&[0.0], &[1.0], &state, &p).unwrap();
        let mut expect = vec![0.0; p.len()];
        expect[1] = 1.0;
        assert_eq!(e[0].coeffs(), expect.as_slice());

        let e = initial_condition_coeffs(&[1.0], &[0.5], &state, &p).unwrap();
        assert_eq!(e[0].mean(), 1.0);
        assert_eq!(e[0].variance(), 0.25);
        assert!(initial_condition_coeffs(&[1.0], &[0.0], &state, &p).is_err());

        let state2 = MultiIndexSet::new(2, 1).unwrap();
        let t2 = MomentTable::independent(&[gaussian_moments(0.0, 1.0, 3), gaussian_moments(0.0, 1.0, 3)]).unwrap();
        let sb2 = orthonormalize(&t2, 1).unwrap();
        let p2 = BasisProducts::new(xi, Arc::new(state_triple_products(&sb2).unwrap()));
        let e = initial_condition_coeffs(&[0.0, 0.0], &[1.0, 2.0], &state2, &p2).unwrap();
        let slot = state2.unit_rank(1).unwrap();
        let nz: Vec<usize> = (0..p2.len()).filter(|&i| e[1].coeffs()[i] != 0.0).collect();
        assert_eq!(nz, vec![slot]);
        assert_eq!(e[1].coeffs()[slot], 2.0);
    }

    #[test]
    fn projected_basis_of_a_gaussian_is_hermite() {
        let set = MultiIndexSet::new(1, 6).unwrap();
        let products = BasisProducts::xi_only(std::sync::Arc::new(XiTripleTensor::build(&set)));
        let mut z = ChaosExpansion::zeros(&products);
        z.coeffs_mut()[1] = 1.0;
        let table = MomentTable::univariate(&gaussian_moments(0.0, 1.0, 6)).unwrap();
        let (basis, triple) = orthonormalize_projected(&[z], &products, 3, vec![0.0], vec![1.0], table).unwrap();
        let c = basis.standardized_coefficients();
        let r2 = 2f64.sqrt();
        assert!((c[2][0] + 1.0 / r2).abs() < 1e-12 && (c[2][2] - 1.0 / r2).abs() < 1e-12, "{c:?}");
        for (i, j, k) in [(1, 1, 2), (1, 2, 3), (2, 2, 2), (0, 3, 3), (0, 1, 2)] {
            let h = crate::hermite::triple_product_1d(i, j, k);
            assert!((triple.get(i, j, k) - h).abs() < 1e-10, "({i},{j},{k})");
        }
    }

    #[test]
    fn projected_basis_is_orthonormal_for_correlated_pair() {
        let set = MultiIndexSet::new(2, 4).unwrap();
        let products = BasisProducts::xi_only(std::sync::Arc::new(XiTripleTensor::build(&set)));
        let mut z1 = ChaosExpansion::zeros(&products);
        let mut z2 = ChaosExpansion::zeros(&products);
        z1.coeffs_mut()[1] = 0.6;
        z1.coeffs_mut()[2] = 0.8;
        z2.coeffs_mut()[1] = 1.0;
        let table = MomentTable::univariate(&[1.0, 0.0, 1.0]).unwrap();
        let (basis, triple) = orthonormalize_projected(&[z1, z2], &products, 2, vec![0.0; 2], vec![1.0; 2], table).unwrap();
        assert_eq!(basis.len(), 6);
        for l in 0..6 {
            for m in 0..6 {
                let want = if l == m { 1.0 } else { 0.0 };
                assert!((triple.get(0, l, m) - want).abs() < 1e-12);
                assert!((triple.get(l, 0, m) - want).abs() < 1e-12);
            }
        }
        // Symmetric in all three slots.
        assert!((triple.get(1, 2, 4) - triple.get(4, 1, 2)).abs() < 1e-12);
    }
}
