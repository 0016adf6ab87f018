//! Reference solutions: closed-form OU statistics, Euler-Maruyama Monte
//! Carlo, stationary Fokker-Planck cumulants and the exact second-order
//! statistics of the coupled system with an autonomous OU damping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{DgpcError, Result};
use crate::model::{InitialLaw, ModelKind, SdeModel};
use crate::moments::MomentTable;
use crate::quadrature::{adaptive, GaussRule};
use crate::stats::{cumulants_from_moments, CumulantReport};

/// Mean and variance of `dv = -b v ds + σ dW` at time `s`.
pub fn ou_exact(b: f64, sigma: f64, v0: &InitialLaw, s: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) {
        return Err(DgpcError::InvalidArgument(format!("damping must be positive: b = {b}")));
    }
    if let InitialLaw::Uniform { .. } = v0 {
        return Err(DgpcError::UnsupportedLaw("ou_exact takes a Gaussian or point initial law".into()));
    }
    let decay = (-b * s).exp();
    let mean = v0.mean() * decay;
    let var = v0.variance() * decay * decay + sigma * sigma * (1.0 - decay * decay) / (2.0 * b);
    Ok((mean, var))
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_samples: usize,
    pub dt: f64,
    pub seed: u64,
    pub batches: usize,
    pub output_times: Vec<f64>,
}

impl McConfig {
    pub fn new(n_samples: usize, dt: f64, seed: u64, output_times: Vec<f64>) -> Self {
        Self {
            n_samples,
            dt,
            seed,
            batches: 32,
            output_times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(DgpcError::Config("n_samples must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(DgpcError::Config(format!("dt must be positive: {}", self.dt)));
        }
        if self.batches < 30 || self.batches > self.n_samples {
            return Err(DgpcError::Config(format!(
                "batches must be between 30 and n_samples, got {}",
                self.batches
            )));
        }
        if self.output_times.windows(2).any(|w| w[1] < w[0]) || self.output_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(DgpcError::Config("output times must be non-negative and sorted".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct McPoint {
    pub time: f64,
    pub cumulants: CumulantReport,
    /// Batch-means standard errors of the mean and variance per component.
    pub mean_se: Vec<f64>,
    pub var_se: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McTrajectory {
    pub names: Vec<String>,
    pub points: Vec<McPoint>,
    pub non_finite: usize,
    pub n_samples: usize,
}

impl McTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn means(&self, component: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.cumulants.mean(component)).collect()
    }

    pub fn variances(&self, component: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.cumulants.variance(component)).collect()
    }
}

const MC_ORDER: usize = 6;

/// Central moments of one batch at one output time.
struct BatchStats {
    count: usize,
    mean: Vec<f64>,
    central: MomentTable,
}

/// Euler-Maruyama sampling of `model`, moments up to order six on the output
/// grid. Batches use independent ChaCha streams, so results depend only on
/// the seed and the batch count.
pub fn mc_simulate(model: &SdeModel, cfg: &McConfig) -> Result<McTrajectory> {
    model.validate()?;
    cfg.validate()?;
    let d = model.state_dim();
    let nt = cfg.output_times.len();
    let per = cfg.n_samples / cfg.batches;
    let extra = cfg.n_samples % cfg.batches;

    let batches: Vec<(Vec<Option<BatchStats>>, usize)> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| {
            let n = per + usize::from(b < extra);
            simulate_batch(model, cfg, b as u64, n)
        })
        .collect::<Result<_>>()?;

    let non_finite: usize = batches.iter().map(|b| b.1).sum();
    if non_finite as f64 > 1e-4 * cfg.n_samples as f64 {
        return Err(DgpcError::NonFinite {
            detail: format!("{non_finite} of {} Monte Carlo samples diverged", cfg.n_samples),
            time: None,
        });
    }

    let mut points = Vec::with_capacity(nt);
    for ti in 0..nt {
        let stats: Vec<&BatchStats> = batches.iter().filter_map(|b| b.0[ti].as_ref()).collect();
        let total: usize = stats.iter().map(|s| s.count).sum();
        let mut mean = vec![0.0; d];
        for s in &stats {
            for i in 0..d {
                mean[i] += s.mean[i] * s.count as f64 / total as f64;
            }
        }
        // Pool central moments about the global mean.
        let index = stats[0].central.index().clone();
        let mut pooled = vec![0.0; index.len()];
        for s in &stats {
            let shift: Vec<f64> = (0..d).map(|i| s.mean[i] - mean[i]).collect();
            let moved = s.central.affine(&shift, &vec![1.0; d]);
            for (p, v) in pooled.iter_mut().zip(moved.values()) {
                *p += v * s.count as f64 / total as f64;
            }
        }
        let central = MomentTable::from_values(d, MC_ORDER, pooled)?;
        let var: Vec<f64> = (0..d).map(|i| central.marginal(i, 2).expect("order 2")).collect();
        let scale: Vec<f64> = var.iter().map(|&v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
        let z = central.affine(&vec![0.0; d], &inv);
        let cumulants = CumulantReport::from_standardized(cfg.output_times[ti], &z, &mean, &scale)?;

        let nb = stats.len() as f64;
        let mut mean_se = vec![0.0; d];
        let mut var_se = vec![0.0; d];
        for i in 0..d {
            let bm: Vec<f64> = stats.iter().map(|s| s.mean[i]).collect();
            let bv: Vec<f64> = stats.iter().map(|s| s.central.marginal(i, 2).expect("order 2")).collect();
            mean_se[i] = spread(&bm) / nb.sqrt();
            var_se[i] = spread(&bv) / nb.sqrt();
        }
        points.push(McPoint {
            time: cfg.output_times[ti],
            cumulants,
            mean_se,
            var_se,
        });
    }
    Ok(McTrajectory {
        names: model.component_names().iter().map(|s| s.to_string()).collect(),
        points,
        non_finite,
        n_samples: cfg.n_samples,
    })
}

fn spread(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn simulate_batch(model: &SdeModel, cfg: &McConfig, stream: u64, n: usize) -> Result<(Vec<Option<BatchStats>>, usize)> {
    let d = model.state_dim();
    let nt = cfg.output_times.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let noise = model.noise_terms();
    let np = model.processes();
    let squared = match model.kind {
        ModelKind::SquaredWienerForcing { sigma_v, .. } => Some(sigma_v),
        _ => None,
    };
    // Per output time, the surviving samples (flattened, d per sample).
    let mut record: Vec<Vec<f64>> = vec![Vec::with_capacity(n * d); nt];
    let mut non_finite = 0;
    let mut x = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let mut dw = vec![0.0; np];
    for _ in 0..n {
        for (xi, law) in x.iter_mut().zip(&model.initial) {
            *xi = law.sample(&mut rng);
        }
        let mut t = 0.0;
        let mut alive = true;
        for (ti, &target) in cfg.output_times.iter().enumerate() {
            let span = target - t;
            let steps = if span > 0.0 { (span / cfg.dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
            let h = if steps > 0 { span / steps as f64 } else { 0.0 };
            let sq = h.sqrt();
            for _ in 0..steps {
                model.drift(t, &x, &mut drift);
                for w in dw.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *w = sq * z;
                }
                if let Some(sigma) = squared {
                    // exact increment of W^2 - s over the step
                    x[0] += sigma * (2.0 * x[1] * dw[0] + dw[0] * dw[0] - h);
                }
                for i in 0..d {
                    x[i] += drift[i] * h;
                }
                for &(comp, p, sigma) in &noise {
                    x[comp] += sigma * dw[p];
                }
                t += h;
            }
            t = target;
            if x.iter().any(|v| !v.is_finite()) {
                alive = false;
                break;
            }
            record[ti].extend_from_slice(&x);
        }
        if !alive {
            non_finite += 1;
        }
    }
    let stats = record
        .into_iter()
        .map(|samples| {
            let count = samples.len() / d;
            if count == 0 {
                return Ok(None);
            }
            let mut mean = vec![0.0; d];
            for s in samples.chunks(d) {
                for i in 0..d {
                    mean[i] += s[i];
                }
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            let central = MomentTable::from_fn(d, MC_ORDER, |e| {
                samples
                    .chunks(d)
                    .map(|s| (0..d).map(|i| (s[i] - mean[i]).powi(e[i] as i32)).product::<f64>())
                    .sum::<f64>()
                    / count as f64
            })?;
            Ok(Some(BatchStats { count, mean, central }))
        })
        .collect::<Result<_>>()?;
    Ok((stats, non_finite))
}

/// Cumulants `κ_1..κ_order` of the stationary density
/// `p(v) ∝ exp(2 ∫_0^v a(x) dx / σ²)` for the polynomial drift
/// `a(v) = Σ drift[k] v^k`.
pub fn invariant_cumulants_1d(drift: &[f64], sigma: f64, order: usize) -> Result<Vec<f64>> {
    let lead = drift.iter().rposition(|&c| c != 0.0);
    let integrable = matches!(lead, Some(k) if k % 2 == 1 && drift[k] < 0.0);
    if !integrable || !(sigma > 0.0) {
        return Err(DgpcError::NonIntegrable(format!(
            "drift {drift:?} with σ = {sigma} has no normalizable stationary density"
        )));
    }
    if !(1..=6).contains(&order) {
        return Err(DgpcError::InvalidArgument(format!("order must be in 1..=6, got {order}")));
    }
    let s2 = sigma * sigma;
    let log_p = |v: f64| -> f64 {
        let mut u = 0.0;
        for (k, &c) in drift.iter().enumerate() {
            u += c * v.powi(k as i32 + 1) / (k as f64 + 1.0);
        }
        2.0 * u / s2
    };
    // Grow R until the density at ±R is negligible against the peak.
    let mut r = 1.0f64;
    let (peak, rr) = loop {
        let grid = 2000;
        let peak = (0..=grid)
            .map(|i| log_p(-r + 2.0 * r * i as f64 / grid as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let edge = log_p(r).max(log_p(-r));
        if edge - peak < (1e-14f64).ln() {
            break (peak, r);
        }
        r *= 1.5;
        if r > 1e6 {
            return Err(DgpcError::NonIntegrable("stationary density does not decay".into()));
        }
    };
    let p = |v: f64| (log_p(v) - peak).exp();
    // Fold onto [0, R] so odd moments of an even density cancel exactly.
    let moment = |k: usize| -> f64 {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        adaptive(0.0, rr, 1e-13, |v| v.powi(k as i32) * (p(v) + sign * p(-v)))
    };
    let norm = moment(0);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(DgpcError::NonIntegrable(format!("normalization is {norm}")));
    }
    let raw: Vec<f64> = (0..=order).map(|k| if k == 0 { 1.0 } else { moment(k) / norm }).collect();
    cumulants_from_moments(&raw, order)
}

/// Cumulants of the Gaussian mixture `N(0, σ²/(2b))` with `b ~ U(lo, hi)`,
/// the stationary law of an OU process with a frozen uniform damping.
pub fn averaged_ou_invariant(lo: f64, hi: f64, sigma: f64, order: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi > lo) {
        return Err(DgpcError::InvalidArgument(format!(
            "damping support must be positive and nonempty: [{lo}, {hi}]"
        )));
    }
    if !(1..=6).contains(&order) {
        return Err(DgpcError::InvalidArgument(format!("order must be in 1..=6, got {order}")));
    }
    let raw: Vec<f64> = (0..=order)
        .map(|k| {
            if k % 2 == 1 {
                return 0.0;
            }
            let half = (k / 2) as i32;
            let double_factorial: f64 = (1..k).step_by(2).map(|j| j as f64).product();
            double_factorial * adaptive(lo, hi, 1e-14, |b| (sigma * sigma / (2.0 * b)).powi(half)) / (hi - lo)
        })
        .collect();
    cumulants_from_moments(&raw, order)
}

/// Exact mean and variance of `u` for the coupled system
/// `du = (-(b_u + a_u v) u + f) dt + σ_u dW_u`, `dv = -b_v v dt + σ_v dW_v`
/// with Gaussian (or point) initial laws, by quadrature over the lognormal
/// representation of `u`.
#[derive(Debug, Clone)]
pub struct CoupledExact {
    model: SdeModel,
    b_u: f64,
    b_v: f64,
    a_u: f64,
    sigma_u: f64,
    sigma_v: f64,
    panels_per_unit: f64,
    rule: GaussRule,
}

impl CoupledExact {
    pub fn new(model: &SdeModel) -> Result<Self> {
        model.validate()?;
        let ModelKind::CoupledSystem {
            b_u,
            b_v,
            a_u,
            a_v,
            sigma_u,
            sigma_v,
        } = model.kind
        else {
            return Err(DgpcError::InvalidArgument("exact statistics need the coupled system".into()));
        };
        if a_v != 0.0 {
            return Err(DgpcError::InvalidArgument(format!(
                "exact statistics need a_v = 0, got {a_v}"
            )));
        }
        if model.initial.iter().any(|l| matches!(l, InitialLaw::Uniform { .. })) {
            return Err(DgpcError::UnsupportedLaw("exact statistics need Gaussian or point initial laws".into()));
        }
        Ok(Self {
            model: model.clone(),
            b_u,
            b_v,
            a_u,
            sigma_u,
            sigma_v,
            panels_per_unit: 8.0,
            rule: GaussRule::legendre(12),
        })
    }

    fn nodes(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let panels = ((b - a) * self.panels_per_unit).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.rule.nodes.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }

    /// `(E[u(t)], Var[u(t)])`.
    pub fn moments(&self, t: f64) -> (f64, f64) {
        let (bu, bv, au) = (self.b_u, self.b_v, self.a_u);
        let u0 = &self.model.initial[0];
        let v0 = &self.model.initial[1];
        let (mv, c0) = (v0.mean(), v0.variance());
        let dd = self.sigma_v * self.sigma_v / (2.0 * bv);
        let e = |s: f64| ((-bv * s).exp() - (-bv * t).exp()) / bv;
        let g = |l: f64| 2.0 * l / bv - 2.0 * (1.0 - (-bv * l).exp()) / (bv * bv);
        // I(s, t) = ∫_s^t v is Gaussian with these moments.
        let mean_i = |s: f64| mv * e(s);
        let var_i = |s: f64| (c0 - dd) * e(s).powi(2) + dd * g(t - s);
        let cov_i = |p: f64, q: f64| {
            let (p, q) = if p <= q { (p, q) } else { (q, p) };
            (c0 - dd) * e(p) * e(q)
                + dd * (g(t - q) + (1.0 - (-bv * (q - p)).exp()) * (1.0 - (-bv * (t - q)).exp()) / (bv * bv))
        };
        // E[exp(-a_u (I_p + I_q))] with the deterministic decay folded in.
        let pair = |p: f64, q: f64| {
            let m = mean_i(p) + mean_i(q);
            let v = var_i(p) + var_i(q) + 2.0 * cov_i(p, q);
            (-bu * (2.0 * t - p - q) - au * m + 0.5 * au * au * v).exp()
        };
        let single = |s: f64| (-bu * (t - s) - au * mean_i(s) + 0.5 * au * au * var_i(s)).exp();
        let f = |s: f64| self.model.forcing.eval(s);

        let outer = self.nodes(0.0, t);
        let mut mean = u0.mean() * single(0.0);
        let mut second = (u0.variance() + u0.mean().powi(2)) * pair(0.0, 0.0);
        if t > 0.0 {
            let forced = !self.model.forcing.is_zero();
            for &(s, w) in &outer {
                let fs = f(s);
                mean += w * fs * single(s);
                second += 2.0 * u0.mean() * w * fs * pair(0.0, s);
                second += self.sigma_u * self.sigma_u * w * pair(s, s);
                if forced {
                    // symmetric double integral over the triangle p < q
                    for &(p, wp) in &self.nodes(0.0, s) {
                        second += 2.0 * w * wp * fs * f(p) * pair(p, s);
                    }
                }
            }
        }
        (mean, second - mean * mean)
    }
}

/// Mean and variance of `v` for `dv = -b v ds + σ d(W^2 - s)`. The forcing
/// integral `2σ ∫ e^{-b(t-s)} W dW` is centered and independent of `v(0)`.
pub fn squared_wiener_exact(b: f64, sigma: f64, v0: &InitialLaw, s: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) {
        return Err(DgpcError::InvalidArgument(format!("damping must be positive: b = {b}")));
    }
    let decay = (-b * s).exp();
    let forced = 4.0 * sigma * sigma * (s / (2.0 * b) - (1.0 - decay * decay) / (4.0 * b * b));
    Ok((v0.mean() * decay, v0.variance() * decay * decay + forced))
}

/// `(mean, variance)` per time, then per component.
pub type MomentRows = Vec<Vec<(f64, f64)>>;

/// Closed-form or quadrature-exact `(mean, variance)` of every component at
/// each time, when the model admits one.
pub fn exact_moments(model: &SdeModel, times: &[f64]) -> Result<Option<MomentRows>> {
    let laws = &model.initial;
    let gaussian = |l: &InitialLaw| !matches!(l, InitialLaw::Uniform { .. });
    if !model.forcing.is_zero() && !matches!(model.kind, ModelKind::CoupledSystem { .. }) {
        return Ok(None);
    }
    let rows = match model.kind {
        ModelKind::Ou { b_v, sigma_v } if gaussian(&laws[0]) => times
            .iter()
            .map(|&t| Ok(vec![ou_exact(b_v, sigma_v, &laws[0], t)?]))
            .collect::<Result<_>>()?,
        ModelKind::SquaredWienerForcing { b_v, sigma_v } => times
            .iter()
            .map(|&t| Ok(vec![squared_wiener_exact(b_v, sigma_v, &laws[0], t)?, (0.0, t)]))
            .collect::<Result<_>>()?,
        ModelKind::CoupledSystem {
            a_v: 0.0, b_v, sigma_v, ..
        } if laws.iter().all(gaussian) => {
            let u = CoupledExact::new(model)?;
            times
                .iter()
                .map(|&t| Ok(vec![u.moments(t), ou_exact(b_v, sigma_v, &laws[1], t)?]))
                .collect::<Result<_>>()?
        }
        _ => return Ok(None),
    };
    Ok(Some(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Forcing;

    #[test]
    fn ou_closed_form() {
        let (m, v) = ou_exact(4.0, 2.0, &InitialLaw::Point { value: 1.0 }, 3.0).unwrap();
        assert!((m - 6.14421235332821e-6).abs() < 1e-15);
        assert!((v - 0.5 * (1.0 - (-24.0f64).exp())).abs() < 1e-15);
        let (m, v) = ou_exact(4.0, 2.0, &InitialLaw::Gaussian { mean: 0.3, var: 0.2 }, 0.0).unwrap();
        assert_eq!((m, v), (0.3, 0.2));
        let (_, v) = ou_exact(4.0, 2.0, &InitialLaw::Point { value: 1.0 }, 60.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(ou_exact(0.0, 1.0, &InitialLaw::Point { value: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn mc_ou_within_clt_band() {
        let model = SdeModel::ou(4.0, 2.0, InitialLaw::Point { value: 1.0 });
        let cfg = McConfig::new(40_000, 2e-3, 7, vec![0.5, 1.0]);
        let mc = mc_simulate(&model, &cfg).unwrap();
        for p in &mc.points {
            let (m, v) = ou_exact(4.0, 2.0, &InitialLaw::Point { value: 1.0 }, p.time).unwrap();
            // Euler bias at this step is far below the band.
            assert!((p.cumulants.mean(0) - m).abs() < 4.0 * p.mean_se[0], "{p:?}");
            assert!((p.cumulants.variance(0) - v).abs() < 4.0 * p.var_se[0] + 4e-3, "{p:?}");
        }
    }

    #[test]
    fn mc_is_reproducible_and_deterministic_without_noise() {
        let model = SdeModel::ou(1.0, 0.5, InitialLaw::Gaussian { mean: 1.0, var: 0.1 });
        let cfg = McConfig::new(3_000, 1e-2, 3, vec![0.2, 0.4]);
        let a = mc_simulate(&model, &cfg).unwrap();
        let b = mc_simulate(&model, &cfg).unwrap();
        assert_eq!(a.means(0), b.means(0));
        assert_eq!(a.variances(0), b.variances(0));

        let det = SdeModel::ou(1.0, 0.0, InitialLaw::Point { value: 2.0 });
        let c = mc_simulate(&det, &McConfig::new(100, 1e-3, 1, vec![1.0])).unwrap();
        assert!(c.variances(0)[0].abs() < 1e-20);
        assert!((c.means(0)[0] - 2.0 * (-1.0f64).exp()).abs() < 2e-3);
    }

    #[test]
    fn mc_rejects_bad_config() {
        let model = SdeModel::ou(1.0, 0.5, InitialLaw::Point { value: 1.0 });
        assert!(mc_simulate(&model, &McConfig::new(0, 1e-2, 1, vec![1.0])).is_err());
        assert!(mc_simulate(&model, &McConfig::new(100, 0.0, 1, vec![1.0])).is_err());
        assert!(mc_simulate(&model, &McConfig::new(100, 1e-2, 1, vec![1.0, 0.5])).is_err());
    }

    #[test]
    fn fokker_planck_linear_drift_is_gaussian() {
        let k = invariant_cumulants_1d(&[0.0, -4.0], 2.0, 6).unwrap();
        let (_, v) = ou_exact(4.0, 2.0, &InitialLaw::Point { value: 0.0 }, 1e3).unwrap();
        assert!((k[1] - v).abs() < 1e-10, "{k:?}");
        for n in [0, 2, 3, 4, 5] {
            assert!(k[n].abs() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn fokker_planck_cubic() {
        let k = invariant_cumulants_1d(&[0.0, -1.0, 0.0, -1.0], 2.0, 6).unwrap();
        assert_eq!(k[0], 0.0);
        assert_eq!(k[2], 0.0);
        assert_eq!(k[4], 0.0);
        // rounded values reported for this density
        assert!((k[1] - 0.733).abs() < 2e-3, "{k:?}");
        assert!((k[3] + 0.339).abs() < 1e-3, "{k:?}");
        assert!((k[5] - 0.964).abs() < 1e-3, "{k:?}");
    }

    #[test]
    fn fokker_planck_rejects_unbounded() {
        assert!(matches!(
            invariant_cumulants_1d(&[0.0, 1.0], 1.0, 4),
            Err(DgpcError::NonIntegrable(_))
        ));
        assert!(matches!(
            invariant_cumulants_1d(&[0.0, -1.0, -1.0], 1.0, 4),
            Err(DgpcError::NonIntegrable(_))
        ));
    }

    #[test]
    fn averaged_ou_closed_forms() {
        let k = averaged_ou_invariant(1.0, 3.0, 2.0, 6).unwrap();
        let l3 = 3.0f64.ln();
        assert!((k[1] - l3).abs() < 1e-12);
        assert!((k[3] - (4.0 - 3.0 * l3 * l3)).abs() < 1e-12);
        // κ6 = 15 E[s³] - 45 E[s²] E[s] + 30 E[s]³ with s = 2/b
        let (e1, e2, e3) = (l3, 4.0 / 3.0, 16.0 / 9.0);
        let k6 = 15.0 * e3 - 45.0 * e2 * e1 + 30.0 * e1.powi(3);
        assert!((k[5] - k6).abs() < 1e-10, "{} vs {k6}", k[5]);
        assert!(k[0] == 0.0 && k[2] == 0.0 && k[4] == 0.0);
        assert!(averaged_ou_invariant(0.0, 3.0, 2.0, 4).is_err());
    }

    #[test]
    fn coupled_exact_without_coupling_is_ou() {
        let u0 = InitialLaw::Gaussian { mean: 1.0, var: 0.3 };
        let model = SdeModel::coupled(1.2, 0.5, 0.0, 0.0, 0.5, 0.5, Forcing::none(), u0, InitialLaw::Point { value: 0.0 });
        let ex = CoupledExact::new(&model).unwrap();
        for t in [0.0, 0.7, 3.0] {
            let (m, v) = ex.moments(t);
            let (mo, vo) = ou_exact(1.2, 0.5, &u0, t).unwrap();
            assert!((m - mo).abs() < 1e-12 && (v - vo).abs() < 1e-12, "{t}: {m} {v} vs {mo} {vo}");
        }
    }

    #[test]
    fn coupled_exact_with_constant_forcing() {
        // a_u = 0: u is OU with constant forcing c, mean c (1 - e^{-bt}) / b.
        let model = SdeModel::coupled(
            2.0,
            1.0,
            0.0,
            0.0,
            0.3,
            1.0,
            Forcing::Parametric { c0: 1.5, c1: 0.0, c2: 0.0 },
            InitialLaw::Point { value: 0.0 },
            InitialLaw::Point { value: 0.0 },
        );
        let ex = CoupledExact::new(&model).unwrap();
        let (m, v) = ex.moments(1.3);
        let decay = (-2.6f64).exp();
        assert!((m - 0.75 * (1.0 - decay)).abs() < 1e-12);
        assert!((v - 0.09 * (1.0 - decay * decay) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_exact_rejects_feedback() {
        let model = SdeModel::coupled(
            1.2,
            0.5,
            1.0,
            0.03,
            0.5,
            0.5,
            Forcing::none(),
            InitialLaw::Point { value: 1.0 },
            InitialLaw::Point { value: 0.0 },
        );
        assert!(CoupledExact::new(&model).is_err());
    }

    #[test]
    fn squared_wiener_matches_monte_carlo() {
        let model = SdeModel::squared_wiener(6.0, 1.0, InitialLaw::Point { value: 1.0 });
        let mc = mc_simulate(&model, &McConfig::new(40_000, 1e-3, 5, vec![0.5, 1.0])).unwrap();
        let exact = exact_moments(&model, &[0.5, 1.0]).unwrap().unwrap();
        for (p, e) in mc.points.iter().zip(&exact) {
            assert!((p.cumulants.variance(0) - e[0].1).abs() < 4.0 * p.var_se[0], "{} vs {:?}", p.cumulants.variance(0), e[0]);
            assert!((p.cumulants.variance(1) - e[1].1).abs() < 4.0 * p.var_se[1]);
        }
    }

    #[test]
    fn exact_moments_only_for_solvable_models() {
        let cubic = SdeModel::cubic_ou(1.0, 1.0, 2.0, InitialLaw::Point { value: 1.0 });
        assert!(exact_moments(&cubic, &[1.0]).unwrap().is_none());
        let ou = SdeModel::ou(4.0, 2.0, InitialLaw::Point { value: 1.0 });
        let rows = exact_moments(&ou, &[0.0, 3.0]).unwrap().unwrap();
        assert_eq!(rows[0][0], (1.0, 0.0));
        assert!((rows[1][0].1 - 0.5 * (1.0 - (-24.0f64).exp())).abs() < 1e-15);
    }
}
