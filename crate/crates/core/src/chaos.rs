//! Galerkin arithmetic on chaos expansions over a tensor basis
//! `{T_α(ξ)} ⊗ {T_k(state)}`.
//!
//! Coefficients are dense, laid out ξ-major: position `a * M_s + k` holds the
//! coefficient of `T_a(ξ) T_k(state)`. Because both factors are orthonormal,
//! `E[u] = u_0` and `E[u v] = Σ_c u_c v_c`.

use std::sync::Arc;

use crate::error::{DgpcError, Result};
use crate::hermite::XiTripleTensor;
use crate::moments::MomentTable;
use crate::multiindex::{MultiIndexSet, TensorIndexSet};
use crate::tensor::SparseTriple;

/// Triple products of the joint basis, kept in factored form.
#[derive(Debug, Clone)]
pub struct BasisProducts {
    xi: Arc<XiTripleTensor>,
    state: Arc<SparseTriple>,
    layout: TensorIndexSet,
}

impl BasisProducts {
    pub fn new(xi: Arc<XiTripleTensor>, state: Arc<SparseTriple>) -> Self {
        let layout = TensorIndexSet::from_sizes(xi.basis().len(), state.size());
        Self { xi, state, layout }
    }

    /// Pure-ξ products (state basis is the constant only).
    pub fn xi_only(xi: Arc<XiTripleTensor>) -> Self {
        Self::new(xi, Arc::new(SparseTriple::constant()))
    }

    pub fn xi(&self) -> &XiTripleTensor {
        &self.xi
    }

    pub fn xi_basis(&self) -> &MultiIndexSet {
        self.xi.basis()
    }

    pub fn state(&self) -> &SparseTriple {
        &self.state
    }

    pub fn layout(&self) -> &TensorIndexSet {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn xi_len(&self) -> usize {
        self.layout.a_len()
    }

    pub fn state_len(&self) -> usize {
        self.layout.b_len()
    }

    /// Joint triple product `E[T_a T_b T_c]` for joint ranks.
    pub fn joint(&self, a: usize, b: usize, c: usize) -> f64 {
        let (ax, as_) = self.layout.unrank(a);
        let (bx, bs) = self.layout.unrank(b);
        let (cx, cs) = self.layout.unrank(c);
        self.xi.get(ax, bx, cx) * self.state.get(as_, bs, cs)
    }

    pub fn scratch(&self) -> ProductScratch {
        let ms = self.state_len();
        ProductScratch {
            tmp: vec![0.0; self.xi_len() * ms * ms],
        }
    }

    /// `out = proj(u * v)`, i.e. `out_c = Σ_{a,b} u_a v_b E[T_a T_b T_c]`.
    ///
    /// The ξ factor is contracted first into `tmp[c, p, q]`, then the state
    /// factor maps `(p, q)` to the output state slot.
    pub fn multiply_into(&self, u: &[f64], v: &[f64], out: &mut [f64], scratch: &mut ProductScratch) {
        let ms = self.state_len();
        let n = self.len();
        debug_assert!(u.len() == n && v.len() == n && out.len() == n);
        if ms == 1 {
            out.iter_mut().for_each(|o| *o = 0.0);
            for &(a, b, c, x) in self.xi.entries().expanded() {
                out[c as usize] += x * u[a as usize] * v[b as usize];
            }
            return;
        }
        let tmp = &mut scratch.tmp;
        tmp.iter_mut().for_each(|t| *t = 0.0);
        let block = ms * ms;
        for &(a, b, c, x) in self.xi.entries().expanded() {
            let ua = &u[a as usize * ms..(a as usize + 1) * ms];
            let vb = &v[b as usize * ms..(b as usize + 1) * ms];
            let t = &mut tmp[c as usize * block..(c as usize + 1) * block];
            for (p, &up) in ua.iter().enumerate() {
                let s = x * up;
                if s == 0.0 {
                    continue;
                }
                let row = &mut t[p * ms..(p + 1) * ms];
                for (r, &vq) in row.iter_mut().zip(vb) {
                    *r += s * vq;
                }
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let state = self.state.expanded();
        for c in 0..self.xi_len() {
            let t = &tmp[c * block..(c + 1) * block];
            let o = &mut out[c * ms..(c + 1) * ms];
            for &(p, q, r, y) in state {
                o[r as usize] += y * t[p as usize * ms + q as usize];
            }
        }
    }
}

/// Reusable workspace for [`BasisProducts::multiply_into`].
#[derive(Debug, Clone)]
pub struct ProductScratch {
    tmp: Vec<f64>,
}

/// A random variable as coefficients over a joint basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    xi_len: usize,
    state_len: usize,
    coeffs: Vec<f64>,
}

impl ChaosExpansion {
    pub fn new(xi_len: usize, state_len: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != xi_len * state_len {
            return Err(DgpcError::BasisMismatch(format!(
                "{} coefficients for a {xi_len} x {state_len} basis",
                coeffs.len()
            )));
        }
        Ok(Self {
            xi_len,
            state_len,
            coeffs,
        })
    }

    pub fn zeros(products: &BasisProducts) -> Self {
        Self {
            xi_len: products.xi_len(),
            state_len: products.state_len(),
            coeffs: vec![0.0; products.len()],
        }
    }

    pub fn constant(products: &BasisProducts, c: f64) -> Self {
        let mut e = Self::zeros(products);
        e.coeffs[0] = c;
        e
    }

    pub fn from_coeffs(products: &BasisProducts, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(products.xi_len(), products.state_len(), coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn xi_len(&self) -> usize {
        self.xi_len
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn second_moment(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn variance(&self) -> f64 {
        self.coeffs[1..].iter().map(|c| c * c).sum()
    }

    /// `E[self * other]`.
    pub fn inner(&self, other: &ChaosExpansion) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn check(&self, products: &BasisProducts) -> Result<()> {
        if self.xi_len != products.xi_len() || self.state_len != products.state_len() {
            return Err(DgpcError::BasisMismatch(format!(
                "expansion over {} x {} basis, products over {} x {}",
                self.xi_len,
                self.state_len,
                products.xi_len(),
                products.state_len()
            )));
        }
        Ok(())
    }
}

/// Galerkin product of two expansions over the same basis.
pub fn multiply(u: &ChaosExpansion, v: &ChaosExpansion, products: &BasisProducts) -> Result<ChaosExpansion> {
    u.check(products)?;
    v.check(products)?;
    let mut out = ChaosExpansion::zeros(products);
    let mut scratch = products.scratch();
    products.multiply_into(&u.coeffs, &v.coeffs, &mut out.coeffs, &mut scratch);
    Ok(out)
}

/// `u^m`, projected back onto the basis after every multiplication.
pub fn power(u: &ChaosExpansion, m: usize, products: &BasisProducts) -> Result<ChaosExpansion> {
    if m == 0 {
        return Err(DgpcError::InvalidArgument("power needs m >= 1".into()));
    }
    Ok(powers(u, m, products)?.pop().expect("m >= 1"))
}

/// `[1, u, proj(u^2), ..., proj(u^m)]` by repeated multiplication by `u`.
pub fn powers(u: &ChaosExpansion, m: usize, products: &BasisProducts) -> Result<Vec<ChaosExpansion>> {
    u.check(products)?;
    let mut out = Vec::with_capacity(m + 1);
    out.push(ChaosExpansion::constant(products, 1.0));
    if m >= 1 {
        out.push(u.clone());
    }
    let mut scratch = products.scratch();
    for _ in 2..=m {
        let prev = out.last().expect("nonempty");
        let mut next = ChaosExpansion::zeros(products);
        products.multiply_into(&prev.coeffs, &u.coeffs, &mut next.coeffs, &mut scratch);
        out.push(next);
    }
    Ok(out)
}

/// `E[u^m]` as the zero-index coefficient of [`power`].
pub fn raw_moment(u: &ChaosExpansion, m: usize, products: &BasisProducts) -> Result<f64> {
    Ok(power(u, m, products)?.mean())
}

/// All mixed raw moments `E[Π v_i^{l_i}]` with `Σ l_i <= max_total_order`.
///
/// Each component's projected powers are built once. A pure moment `E[v^m]`
/// is taken as `E[v^⌈m/2⌉ v^⌊m/2⌋]` between projected powers, so fewer
/// reprojections enter it; a mixed moment folds Galerkin products over the
/// components with nonzero exponent and extracts the zero-index coefficient
/// of the last product as an inner product.
pub fn mixed_moments(
    components: &[ChaosExpansion],
    max_total_order: usize,
    products: &BasisProducts,
) -> Result<MomentTable> {
    if components.is_empty() {
        return Err(DgpcError::InvalidArgument("no components".into()));
    }
    if max_total_order == 0 {
        return Err(DgpcError::InvalidArgument("moment order must be >= 1".into()));
    }
    let pw: Vec<Vec<ChaosExpansion>> = components
        .iter()
        .map(|c| powers(c, max_total_order, products))
        .collect::<Result<_>>()?;
    let mut scratch = products.scratch();
    MomentTable::from_fn(components.len(), max_total_order, |e| {
        let active: Vec<usize> = (0..e.len()).filter(|&i| e[i] > 0).collect();
        match active.as_slice() {
            [] => 1.0,
            [i] => {
                let (hi, lo) = (e[*i] - e[*i] / 2, e[*i] / 2);
                pw[*i][hi].inner(&pw[*i][lo])
            }
            [rest @ .., last] => {
                let mut acc = pw[rest[0]][e[rest[0]]].clone();
                for &i in &rest[1..] {
                    let mut next = ChaosExpansion::zeros(products);
                    products.multiply_into(&acc.coeffs, &pw[i][e[i]].coeffs, &mut next.coeffs, &mut scratch);
                    acc = next;
                }
                acc.inner(&pw[*last][e[*last]])
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::MultiIndexSet;
    use crate::quadrature::GaussRule;
    use crate::hermite::wick_eval;

    fn xi_products(k: usize, n: usize) -> BasisProducts {
        let set = MultiIndexSet::new(k, n).unwrap();
        BasisProducts::xi_only(Arc::new(XiTripleTensor::build(&set)))
    }

    fn linear(p: &BasisProducts, mean: f64, slopes: &[(usize, f64)]) -> ChaosExpansion {
        let mut e = ChaosExpansion::constant(p, mean);
        for &(i, s) in slopes {
            let r = p.xi_basis().unit_rank(i).unwrap();
            e.coeffs_mut()[r] = s;
        }
        e
    }

    #[test]
    fn identity_and_square_of_xi() {
        let p = xi_products(1, 2);
        let one = ChaosExpansion::constant(&p, 1.0);
        let v = ChaosExpansion::from_coeffs(&p, vec![0.3, -1.2, 0.7]).unwrap();
        assert_eq!(multiply(&one, &v, &p).unwrap(), v);

        let xi = linear(&p, 0.0, &[(0, 1.0)]);
        let sq = multiply(&xi, &xi, &p).unwrap();
        // Gauss-Hermite oracle for E[ξ^2 H_k(ξ)]
        let rule = GaussRule::hermite(10);
        for (k, &c) in sq.coeffs().iter().enumerate() {
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| w * x * x * crate::hermite::hermite_eval(k, x))
                .sum();
            assert!((c - q).abs() < 1e-12);
        }
        assert!((sq.coeffs()[2] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_algebra() {
        let p = xi_products(1, 3);
        let (mu, s) = (1.5, 0.4);
        let a = linear(&p, mu, &[(0, s)]);
        let b = linear(&p, mu, &[(0, -s)]);
        let prod = multiply(&a, &b, &p).unwrap();
        assert!((prod.mean() - (mu * mu - s * s)).abs() < 1e-14);

        let cube = power(&a, 3, &p).unwrap();
        assert!((cube.mean() - (mu.powi(3) + 3.0 * mu * s * s)).abs() < 1e-13);
        assert!((raw_moment(&a, 2, &p).unwrap() - (mu * mu + s * s)).abs() < 1e-14);

        let c = ChaosExpansion::constant(&p, 1.3);
        assert!((power(&c, 4, &p).unwrap().mean() - 1.3f64.powi(4)).abs() < 1e-14);
        assert_eq!(power(&a, 1, &p).unwrap(), a);
        assert!(power(&a, 0, &p).is_err());
    }

    #[test]
    fn fourth_and_odd_moments() {
        let p = xi_products(1, 4);
        let xi = linear(&p, 0.0, &[(0, 1.0)]);
        assert!((raw_moment(&xi, 4, &p).unwrap() - 3.0).abs() < 1e-13);
        assert!(raw_moment(&xi, 3, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mixed_moment_examples() {
        let p = xi_products(2, 4);
        let x1 = linear(&p, 0.0, &[(0, 1.0)]);
        let x2 = linear(&p, 0.0, &[(1, 1.0)]);
        let t = mixed_moments(&[x1.clone(), x2], 4, &p).unwrap();
        assert!((t.get(&[2, 2]).unwrap() - 1.0).abs() < 1e-13);
        let t = mixed_moments(&[x1.clone(), x1.clone()], 2, &p).unwrap();
        assert!((t.get(&[1, 1]).unwrap() - 1.0).abs() < 1e-14);

        // v2 = H_2(ξ_1) = (ξ_1^2 - 1)/sqrt(2): E[v1^2 v2] = sqrt(2)
        let mut v2 = ChaosExpansion::zeros(&p);
        let r = p.xi_basis().rank(&crate::multiindex::MultiIndex::new(vec![2, 0])).unwrap();
        v2.coeffs_mut()[r] = 1.0;
        let t = mixed_moments(&[x1, v2], 3, &p).unwrap();
        let rule = GaussRule::hermite(10);
        let q: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * x * x * (x * x - 1.0) / 2f64.sqrt())
            .sum();
        assert!((t.get(&[2, 1]).unwrap() - q).abs() < 1e-12);
        assert!((q - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn basis_mismatch_rejected() {
        let p = xi_products(1, 2);
        let q = xi_products(1, 3);
        let a = ChaosExpansion::constant(&p, 1.0);
        let b = ChaosExpansion::constant(&q, 1.0);
        assert!(matches!(multiply(&a, &b, &p), Err(DgpcError::BasisMismatch(_))));
    }

    #[test]
    fn product_matches_pointwise_quadrature_for_linear_inputs() {
        // Projection of (a + b.ξ)(c + d.ξ) is exact for N >= 2.
        let p = xi_products(2, 2);
        let u = linear(&p, 0.5, &[(0, 1.1), (1, -0.3)]);
        let v = linear(&p, -0.2, &[(0, 0.4), (1, 0.9)]);
        let w = multiply(&u, &v, &p).unwrap();
        let rule = GaussRule::hermite(6);
        let set = p.xi_basis();
        for (r, alpha) in set.iter().enumerate() {
            let mut q = 0.0;
            for (i, &x1) in rule.nodes.iter().enumerate() {
                for (j, &x2) in rule.nodes.iter().enumerate() {
                    let uv = (0.5 + 1.1 * x1 - 0.3 * x2) * (-0.2 + 0.4 * x1 + 0.9 * x2);
                    q += rule.weights[i] * rule.weights[j] * uv * wick_eval(alpha, &[x1, x2]);
                }
            }
            assert!((w.coeffs()[r] - q).abs() < 1e-10);
        }
    }
}
