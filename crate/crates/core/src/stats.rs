//! Cumulants from raw moments, relative error metrics and small fitting
//! helpers.

use crate::error::{DgpcError, Result};
use crate::moments::MomentTable;
use crate::multiindex::binomial;

/// `κ_1..κ_order` from raw moments `raw[k] = E[x^k]` (`raw[0] = 1`).
pub fn cumulants_from_moments(raw: &[f64], order: usize) -> Result<Vec<f64>> {
    if raw.len() <= order {
        return Err(DgpcError::MissingMoment {
            order: vec![order],
            time: None,
        });
    }
    let mut kappa = vec![0.0; order + 1];
    for n in 1..=order {
        let mut acc = raw[n];
        for k in 1..n {
            acc -= binomial(n - 1, k - 1) as f64 * kappa[k] * raw[n - k];
        }
        kappa[n] = acc;
    }
    kappa.remove(0);
    Ok(kappa)
}

/// Joint cumulants `κ_{i,j}` of a bivariate table for `2 <= i + j <= max_total`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCumulants {
    max_total: usize,
    entries: Vec<((usize, usize), f64)>,
}

impl CrossCumulants {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _)| *k == (i, j))
            .map(|(_, v)| *v)
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    /// Entries with both indices at least one, ordered by total then by `i`.
    pub fn mixed(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().copied().filter(|((i, j), _)| *i >= 1 && *j >= 1)
    }

    pub fn entries(&self) -> &[((usize, usize), f64)] {
        &self.entries
    }

    fn scaled(&self, s1: f64, s2: f64) -> Self {
        Self {
            max_total: self.max_total,
            entries: self
                .entries
                .iter()
                .map(|&((i, j), v)| ((i, j), v * s1.powi(i as i32) * s2.powi(j as i32)))
                .collect(),
        }
    }
}

/// Set partitions of `0..n` as block-label vectors (restricted growth strings).
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(pos: usize, max_label: usize, labels: &mut [usize], out: &mut Vec<Vec<usize>>) {
        if pos == labels.len() {
            out.push(labels.to_vec());
            return;
        }
        for l in 0..=max_label + 1 {
            labels[pos] = l;
            rec(pos + 1, max_label.max(l), labels, out);
        }
    }
    if n == 0 {
        return out;
    }
    labels[0] = 0;
    rec(1, 0, &mut labels, &mut out);
    out
}

/// Joint cumulant of the list of variables `vars` (component indices, with
/// repetition) by the partition formula
/// `κ = Σ_π (|π|-1)! (-1)^{|π|-1} Π_{B∈π} E[Π_{i∈B} x_i]`.
fn joint_cumulant(table: &MomentTable, vars: &[usize], partitions: &[Vec<usize>]) -> Result<f64> {
    let d = table.dim();
    let mut acc = 0.0;
    for labels in partitions {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut prod = 1.0;
        for b in 0..blocks {
            let mut e = vec![0usize; d];
            for (pos, &l) in labels.iter().enumerate() {
                if l == b {
                    e[vars[pos]] += 1;
                }
            }
            prod *= table.require(&e)?;
        }
        let fact: f64 = (1..blocks).map(|k| k as f64).product();
        let sign = if blocks % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * fact * prod;
    }
    Ok(acc)
}

/// Bivariate cumulants from a table of mixed raw moments; `max_total <= 6`.
pub fn cross_cumulants(table: &MomentTable, max_total: usize) -> Result<CrossCumulants> {
    if table.dim() != 2 {
        return Err(DgpcError::InvalidArgument(format!(
            "cross cumulants need a bivariate table, got dimension {}",
            table.dim()
        )));
    }
    if max_total > 6 || max_total > table.max_order() {
        return Err(DgpcError::MissingMoment {
            order: vec![max_total],
            time: None,
        });
    }
    let mut entries = Vec::new();
    for total in 2..=max_total {
        let partitions = set_partitions(total);
        for i in (0..=total).rev() {
            let j = total - i;
            let mut vars = vec![0usize; i];
            vars.extend(std::iter::repeat_n(1, j));
            entries.push(((i, j), joint_cumulant(table, &vars, &partitions)?));
        }
    }
    Ok(CrossCumulants { max_total, entries })
}

/// Cumulant summary of a (possibly multivariate) state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantReport {
    pub time: f64,
    /// `κ_1..κ_6` per component.
    pub univariate: Vec<Vec<f64>>,
    /// Joint cumulants of the first two components, when there are two.
    pub cross: Option<CrossCumulants>,
}

impl CumulantReport {
    /// Report from the moments of standardized components
    /// `z_i = (x_i - center_i) / scale_i`.
    pub fn from_standardized(time: f64, z: &MomentTable, center: &[f64], scale: &[f64]) -> Result<Self> {
        let order = z.max_order().min(6);
        let mut univariate = Vec::with_capacity(z.dim());
        for i in 0..z.dim() {
            let raw: Vec<f64> = (0..=order).map(|k| z.marginal(i, k).expect("within order")).collect();
            let mut k = cumulants_from_moments(&raw, order)?;
            for (n, kn) in k.iter_mut().enumerate() {
                *kn *= scale[i].powi(n as i32 + 1);
            }
            k[0] += center[i];
            k.resize(6, f64::NAN);
            univariate.push(k);
        }
        let cross = if z.dim() == 2 {
            let mut c = cross_cumulants(z, order)?.scaled(scale[0], scale[1]);
            for ((i, j), v) in c.entries.iter_mut() {
                if *i + *j == 1 {
                    *v += if *i == 1 { center[0] } else { center[1] };
                }
            }
            Some(c)
        } else {
            None
        };
        Ok(Self {
            time,
            univariate,
            cross,
        })
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.univariate[i][0]
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.univariate[i][1]
    }

    /// `κ_n` (1-based order) of component `i`.
    pub fn kappa(&self, i: usize, n: usize) -> f64 {
        self.univariate[i][n - 1]
    }

    /// Kurtosis excess `κ_4 / κ_2^2`.
    pub fn kurtosis_excess(&self, i: usize) -> f64 {
        self.kappa(i, 4) / self.kappa(i, 2).powi(2)
    }
}

/// `|approx - reference| / |reference|` pointwise. Points where the reference
/// is zero, non-finite, or negligible against the largest reference value are
/// returned as NaN.
pub fn relative_errors(approx: &[f64], reference: &[f64]) -> Vec<f64> {
    let peak = reference
        .iter()
        .filter(|r| r.is_finite())
        .fold(0.0f64, |m, r| m.max(r.abs()));
    approx
        .iter()
        .zip(reference)
        .map(|(&a, &r)| {
            if !r.is_finite() || r == 0.0 || r.abs() < 1e-12 * peak {
                f64::NAN
            } else {
                ((a - r) / r).abs()
            }
        })
        .collect()
}

/// Aggregate norms of an error trajectory, ignoring NaN-flagged samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub defined: usize,
}

pub fn summarize_errors(errors: &[f64]) -> ErrorSummary {
    let mut v: Vec<f64> = errors.iter().copied().filter(|e| e.is_finite()).collect();
    if v.is_empty() {
        return ErrorSummary {
            mean: f64::NAN,
            median: f64::NAN,
            max: f64::NAN,
            defined: 0,
        };
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    ErrorSummary {
        mean: v.iter().sum::<f64>() / n as f64,
        median,
        max: v[n - 1],
        defined: n,
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{gaussian_moments, uniform_moments};
    use proptest::prelude::*;

    #[test]
    fn gaussian_cumulants() {
        let k = cumulants_from_moments(&gaussian_moments(1.3, 0.7, 6), 6).unwrap();
        assert!((k[0] - 1.3).abs() < 1e-12);
        assert!((k[1] - 0.7).abs() < 1e-12);
        for kn in &k[2..] {
            assert!(kn.abs() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn uniform_cumulants() {
        let k = cumulants_from_moments(&uniform_moments(-1.0, 1.0, 6), 6).unwrap();
        assert!((k[1] - 1.0 / 3.0).abs() < 1e-14);
        assert!((k[3] + 2.0 / 15.0).abs() < 1e-14);
        assert_eq!(k[0], 0.0);
        assert!(k[2].abs() < 1e-15 && k[4].abs() < 1e-15);
        // κ_6 of U(-1,1) is 16/63.
        assert!((k[5] - 16.0 / 63.0).abs() < 1e-12);
    }

    #[test]
    fn partition_counts() {
        let bell = [1usize, 2, 5, 15, 52, 203];
        for (n, &b) in (1..=6).zip(&bell) {
            assert_eq!(set_partitions(n).len(), b);
        }
    }

    #[test]
    fn independent_pairs_have_no_cross_cumulants() {
        let t = MomentTable::independent(&[gaussian_moments(0.5, 2.0, 6), uniform_moments(1.0, 3.0, 6)]).unwrap();
        let c = cross_cumulants(&t, 6).unwrap();
        for ((i, j), v) in c.mixed() {
            assert!(v.abs() < 1e-10, "κ_{i}{j} = {v}");
        }
        assert!((c.get(2, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((c.get(0, 2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    /// Moments of a correlated Gaussian pair via Isserlis' theorem.
    fn gaussian_pair(mean: [f64; 2], cov: [[f64; 2]; 2], order: usize) -> MomentTable {
        // E[x^a y^b] = Σ binomials of central moments; central moments from Isserlis.
        let central = |a: usize, b: usize| -> f64 {
            // Sum over pairings: count k cross pairs.
            if (a + b) % 2 == 1 {
                return 0.0;
            }
            let mut acc = 0.0;
            for k in 0..=a.min(b) {
                if (a - k) % 2 == 1 || (b - k) % 2 == 1 {
                    continue;
                }
                let pa = (a - k) / 2;
                let pb = (b - k) / 2;
                let ways = binomial(a, k) as f64 * binomial(b, k) as f64 * (1..=k).map(|x| x as f64).product::<f64>()
                    * double_factorial(a - k)
                    * double_factorial(b - k);
                acc += ways * cov[0][1].powi(k as i32) * cov[0][0].powi(pa as i32) * cov[1][1].powi(pb as i32);
            }
            acc
        };
        MomentTable::from_fn(2, order, |e| {
            let mut acc = 0.0;
            for i in 0..=e[0] {
                for j in 0..=e[1] {
                    acc += binomial(e[0], i) as f64
                        * binomial(e[1], j) as f64
                        * mean[0].powi((e[0] - i) as i32)
                        * mean[1].powi((e[1] - j) as i32)
                        * central(i, j);
                }
            }
            acc
        })
        .unwrap()
    }

    fn double_factorial(n: usize) -> f64 {
        // (n-1)!! pairings of n items, n even
        if n == 0 {
            return 1.0;
        }
        (1..n).step_by(2).map(|x| x as f64).product()
    }

    #[test]
    fn gaussian_pair_cross_cumulants() {
        let t = gaussian_pair([0.4, -1.0], [[1.5, 0.6], [0.6, 0.8]], 6);
        let c = cross_cumulants(&t, 6).unwrap();
        assert!((c.get(1, 1).unwrap() - 0.6).abs() < 1e-12);
        assert!((c.get(2, 0).unwrap() - 1.5).abs() < 1e-12);
        for ((i, j), v) in c.entries() {
            if i + j >= 3 {
                assert!(v.abs() < 1e-9, "κ_{i}{j} = {v}");
            }
        }
    }

    #[test]
    fn standardized_report_rescales() {
        let z = MomentTable::univariate(&uniform_moments(-3f64.sqrt(), 3f64.sqrt(), 6)).unwrap();
        let r = CumulantReport::from_standardized(0.0, &z, &[2.0], &[0.5]).unwrap();
        assert!((r.mean(0) - 2.0).abs() < 1e-14);
        assert!((r.variance(0) - 0.25).abs() < 1e-14);
        let direct = cumulants_from_moments(&uniform_moments(2.0 - 0.5 * 3f64.sqrt(), 2.0 + 0.5 * 3f64.sqrt(), 6), 6).unwrap();
        for n in 1..=6 {
            assert!((r.kappa(0, n) - direct[n - 1]).abs() < 1e-12, "κ{n}");
        }
        assert!((r.kurtosis_excess(0) + 1.2).abs() < 1e-12);
    }

    #[test]
    fn relative_error_guards() {
        assert_eq!(relative_errors(&[1.0, 2.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        assert!((relative_errors(&[1.01], &[1.0])[0] - 0.01).abs() < 1e-14);
        let e = relative_errors(&[0.1, 0.5, 1.0], &[0.0, 0.5, 1.1]);
        assert!(e[0].is_nan());
        let s = summarize_errors(&e);
        assert_eq!(s.defined, 2);
        assert!((s.max - (0.1f64 / 1.1)).abs() < 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [2.0f64, 4.0, 8.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [2.0f64, 4.0, 8.0].iter().map(|x| (5.0 * x.powi(-3)).ln()).collect();
        assert!((fit_slope(&xs, &ys) + 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shift_and_scale_laws(mean in -2.0f64..2.0, var in 0.1f64..3.0, shift in -5.0f64..5.0, c in 0.2f64..3.0) {
            // A non-Gaussian law: mixture of two Gaussians sharing the variance.
            let m1 = gaussian_moments(mean, var, 6);
            let m2 = gaussian_moments(mean + 1.0, var, 6);
            let raw: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
            let base = cumulants_from_moments(&raw, 6).unwrap();
            let t = MomentTable::univariate(&raw).unwrap();
            let moved = t.affine(&[shift], &[c]);
            let mv: Vec<f64> = (0..=6).map(|k| moved.marginal(0, k).unwrap()).collect();
            let k = cumulants_from_moments(&mv, 6).unwrap();
            for n in 2..=6 {
                let expect = c.powi(n as i32) * base[n - 1];
                prop_assert!((k[n - 1] - expect).abs() < 1e-7 * (1.0 + expect.abs()) * (1.0 + shift.abs()).powi(6));
            }
        }
    }
}
