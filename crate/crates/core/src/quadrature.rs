//! Gauss rules from the Golub-Welsch eigenvalue method, plus composite and
//! adaptive Gauss-Legendre integration on finite intervals.

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Rule for the Jacobi matrix with the given diagonal and off-diagonal
    /// recurrence coefficients; `mass` is the total weight.
    fn golub_welsch(diag: &[f64], offdiag: &[f64], mass: f64) -> Self {
        let n = diag.len();
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = diag[i];
            if i + 1 < n {
                jac[(i, i + 1)] = offdiag[i];
                jac[(i + 1, i)] = offdiag[i];
            }
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mass * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// `n`-point Gauss-Hermite rule for the standard normal density
    /// (weights sum to one). Exact for polynomials of degree `2n - 1`.
    pub fn hermite(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        Self::golub_welsch(&diag, &off, 1.0)
    }

    /// `n`-point Gauss-Legendre rule on `[-1, 1]` (weights sum to two).
    pub fn legendre(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        Self::golub_welsch(&diag, &off, 2.0)
    }

    /// Apply a Legendre rule on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule over `panels` equal subintervals of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

/// Adaptive Gauss-Legendre integration: doubles the panel count until two
/// successive composite estimates agree to `rel_tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, mut f: F) -> f64 {
    let rule = GaussRule::legendre(16);
    let mut panels = 8;
    let mut prev = rule.composite(a, b, panels, &mut f);
    while panels < 1 << 16 {
        panels *= 2;
        let next = rule.composite(a, b, panels, &mut f);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        prev = next;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_reproduces_gaussian_moments() {
        let rule = GaussRule::hermite(12);
        let moment = |p: i32| -> f64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(p))
                .sum()
        };
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!(moment(1).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-13);
        assert!((moment(4) - 3.0).abs() < 1e-12);
        assert!((moment(6) - 15.0).abs() < 1e-11);
        assert!((moment(8) - 105.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = GaussRule::legendre(8);
        let v = rule.integrate(1.0, 3.0, |b| b * b / 2.0);
        assert!((v - 13.0 / 3.0).abs() < 1e-13);
        let e = rule.composite(0.0, 1.0, 10, f64::exp);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = adaptive(-10.0, 10.0, 1e-13, |x| (-x * x / 2.0).exp());
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
