//! The restart loop: harvest moments, rebuild the state basis, re-initialize,
//! integrate the next interval.
//!
//! Components whose variance is negligible (point masses, such as a
//! deterministic initial condition) are carried as constants and left out of
//! the state basis until they pick up randomness.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos::{mixed_moments, BasisProducts, ChaosExpansion};
use crate::error::{DgpcError, Result};
use crate::forcing::ForcingBasis;
use crate::hermite::XiTripleTensor;
use crate::model::{integrate, GalerkinSystem, Integrator, SdeModel};
use crate::moments::MomentTable;
use crate::multiindex::MultiIndexSet;
use crate::orthogonal::{orthonormalize_projected, orthonormalize_standardized, state_triple_products};
use crate::stats::CumulantReport;
use crate::tensor::SparseTriple;

/// Variance below `ACTIVE_TOLERANCE * (1 + mean^2)` marks a point mass.
pub const ACTIVE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DgpcConfig {
    pub t_end: f64,
    pub n_restarts: usize,
    /// ξ variables per interval, over all Wiener processes.
    pub k: usize,
    /// Degree in ξ.
    pub n: usize,
    /// Degree in the state variables.
    pub l: usize,
    pub integrator: Integrator,
    pub h: f64,
    /// Spacing of trajectory outputs; defaults to the restart interval.
    pub output_interval: Option<f64>,
    pub orthogonalization: Orthogonalization,
}

/// How the state basis is built at a restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orthogonalization {
    /// Gram-Schmidt against the harvested moment table.
    #[default]
    Moments,
    /// Gram-Schmidt on the projected chaos vectors of the state monomials
    /// (see [`orthonormalize_projected`]). The initial basis still comes from
    /// the exact moments of the initial law.
    Projected,
}

impl DgpcConfig {
    pub fn new(t_end: f64, n_restarts: usize, k: usize, n: usize, l: usize) -> Self {
        Self {
            t_end,
            n_restarts,
            k,
            n,
            l,
            integrator: Integrator::Rk4,
            h: 1e-3,
            output_interval: None,
            orthogonalization: Orthogonalization::Moments,
        }
    }

    pub fn with_orthogonalization(mut self, mode: Orthogonalization) -> Self {
        self.orthogonalization = mode;
        self
    }

    pub fn with_output_interval(mut self, dt: f64) -> Self {
        self.output_interval = Some(dt);
        self
    }

    pub fn with_step(mut self, h: f64, integrator: Integrator) -> Self {
        self.h = h;
        self.integrator = integrator;
        self
    }

    pub fn restart_interval(&self) -> f64 {
        self.t_end / self.n_restarts as f64
    }

    pub fn restart_time(&self, j: usize) -> f64 {
        if j == self.n_restarts {
            self.t_end
        } else {
            self.t_end * j as f64 / self.n_restarts as f64
        }
    }

    /// Moment order harvested at restarts: `3L` for the triple products,
    /// and at least 6 for cumulant reporting.
    pub fn moment_order(&self) -> usize {
        (3 * self.l).max(6)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DgpcError::Config(msg));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be at least 1".into());
        }
        if self.k == 0 || self.n == 0 || self.l == 0 {
            return bad(format!("K, N, L must be at least 1 (got {}, {}, {})", self.k, self.n, self.l));
        }
        if !(self.h > 0.0) {
            return bad(format!("step h must be positive, got {}", self.h));
        }
        if let Some(o) = self.output_interval {
            if !(o > 0.0) {
                return bad(format!("output interval must be positive, got {o}"));
            }
        }
        Ok(())
    }

    pub fn output_times(&self) -> Vec<f64> {
        let step = self.output_interval.unwrap_or_else(|| self.restart_interval());
        let count = (self.t_end / step + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
        if self.t_end - times.last().copied().unwrap_or(0.0) > 1e-9 * step {
            times.push(self.t_end);
        } else if let Some(last) = times.last_mut() {
            *last = (*last).min(self.t_end);
        }
        times
    }
}

/// Moments of the state at one time, kept for standardized components
/// `z_i = (x_i - center_i) / scale_i`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub center: Vec<f64>,
    /// Standard deviation of active components, 1 for point masses.
    pub scale: Vec<f64>,
    pub active: Vec<bool>,
    pub variance: Vec<f64>,
    pub z_moments: MomentTable,
}

impl Snapshot {
    /// Raw moments of the physical components.
    pub fn moments(&self) -> MomentTable {
        self.z_moments.affine(&self.center, &self.scale)
    }

    pub fn cumulants(&self, time: f64) -> Result<CumulantReport> {
        CumulantReport::from_standardized(time, &self.z_moments, &self.center, &self.scale)
    }

    fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }
}

fn is_active(mean: f64, var: f64) -> bool {
    var > ACTIVE_TOLERANCE * (1.0 + mean * mean)
}

/// Exact moments of the independent initial laws.
pub fn initial_moment_table(model: &SdeModel, order: usize) -> Result<MomentTable> {
    let marginals: Vec<Vec<f64>> = model.initial.iter().map(|law| law.moments(order)).collect();
    MomentTable::independent(&marginals)
}

fn initial_snapshot(model: &SdeModel, order: usize) -> Result<Snapshot> {
    let d = model.state_dim();
    let mut center = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    let mut active = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    let mut marginals = Vec::with_capacity(d);
    for law in &model.initial {
        let (m, v) = (law.mean(), law.variance());
        let act = is_active(m, v);
        let s = if act { v.sqrt() } else { 1.0 };
        let raw = MomentTable::univariate(&law.moments(order))?;
        let z = raw.affine(&[-m / s], &[1.0 / s]);
        marginals.push((0..=order).map(|k| z.marginal(0, k).expect("order")).collect::<Vec<_>>());
        center.push(m);
        scale.push(s);
        active.push(act);
        variance.push(v);
    }
    Ok(Snapshot {
        center,
        scale,
        active,
        variance,
        z_moments: MomentTable::independent(&marginals)?,
    })
}

/// Standardize each expansion and harvest the mixed moments.
pub fn snapshot(components: &[ChaosExpansion], products: &BasisProducts, order: usize) -> Result<Snapshot> {
    let d = components.len();
    let mut center = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    let mut active = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    let mut z = Vec::with_capacity(d);
    for c in components {
        let (m, v) = (c.mean(), c.variance());
        let act = is_active(m, v);
        let s = if act { v.sqrt() } else { 1.0 };
        let mut zc = c.clone();
        zc.coeffs_mut()[0] -= m;
        zc.coeffs_mut().iter_mut().for_each(|x| *x /= s);
        z.push(zc);
        center.push(m);
        scale.push(s);
        active.push(act);
        variance.push(v);
    }
    Ok(Snapshot {
        center,
        scale,
        active,
        variance,
        z_moments: mixed_moments(&z, order, products)?,
    })
}

/// What one interval starts from: the joint product tensor and the
/// re-initialized state expansions.
struct IntervalStart {
    products: BasisProducts,
    state0: Vec<ChaosExpansion>,
    gram_condition: Option<f64>,
}

/// Expansions at the end of the previous interval, for projected
/// orthogonalization.
type Previous<'a> = Option<(&'a [ChaosExpansion], &'a BasisProducts)>;

fn rebuild(snap: &Snapshot, previous: Previous<'_>, xi: &Arc<XiTripleTensor>, l: usize) -> Result<IntervalStart> {
    let active = snap.active_indices();
    let d = snap.center.len();
    if active.is_empty() {
        let products = BasisProducts::new(xi.clone(), Arc::new(SparseTriple::constant()));
        let state0 = (0..d)
            .map(|i| ChaosExpansion::constant(&products, snap.center[i]))
            .collect();
        return Ok(IntervalStart {
            products,
            state0,
            gram_condition: None,
        });
    }
    let table = snap.z_moments.marginalize(&active)?;
    let center: Vec<f64> = active.iter().map(|&i| snap.center[i]).collect();
    let scale: Vec<f64> = active.iter().map(|&i| snap.scale[i]).collect();
    let (basis, triple) = match previous {
        Some((end, old)) => {
            let z: Vec<ChaosExpansion> = active
                .iter()
                .map(|&i| {
                    let mut z = end[i].clone();
                    z.coeffs_mut()[0] -= snap.center[i];
                    z.coeffs_mut().iter_mut().for_each(|x| *x /= snap.scale[i]);
                    z
                })
                .collect();
            orthonormalize_projected(&z, old, l, center, scale, table)?
        }
        None => {
            let basis = orthonormalize_standardized(table, l, center, scale)?;
            let triple = state_triple_products(&basis)?;
            (basis, triple)
        }
    };
    let products = BasisProducts::new(xi.clone(), Arc::new(triple));
    let coeffs = basis.component_coefficients()?;
    let mut state0 = Vec::with_capacity(d);
    let mut next_active = 0;
    for i in 0..d {
        if snap.active[i] {
            let row = &coeffs[next_active];
            next_active += 1;
            let mut e = ChaosExpansion::zeros(&products);
            // ξ index 0: the joint rank of (0, k) is k.
            e.coeffs_mut()[..row.len()].copy_from_slice(row);
            state0.push(e);
        } else {
            state0.push(ChaosExpansion::constant(&products, snap.center[i]));
        }
    }
    Ok(IntervalStart {
        products,
        state0,
        gram_condition: Some(basis.gram_condition()),
    })
}

/// State of the run at a restart time.
#[derive(Debug, Clone)]
pub struct RestartRecord {
    pub time: f64,
    pub snapshot: Snapshot,
    pub cumulants: CumulantReport,
    /// Gram condition number of the state basis built here (none when every
    /// component is a point mass or at the final time).
    pub gram_condition: Option<f64>,
    /// Expansions at this time: the initial expansion at `t = 0`, the end
    /// state of the preceding interval otherwise.
    pub coefficients: Vec<ChaosExpansion>,
    /// Largest relative change of mean or variance caused by the
    /// re-initialization.
    pub projection_error: Option<f64>,
    /// Largest change of a standardized moment of order `<= 2L` caused by the
    /// re-initialization.
    pub moment_loss: Option<f64>,
}

impl RestartRecord {
    pub fn moments(&self) -> MomentTable {
        self.snapshot.moments()
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub cumulants: CumulantReport,
    /// Condition number of the basis in use over the interval containing
    /// this time (NaN without a state basis).
    pub gram_condition: f64,
}

#[derive(Debug, Clone)]
pub struct DgpcRun {
    pub config: DgpcConfig,
    pub names: Vec<String>,
    pub restarts: Vec<RestartRecord>,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl DgpcRun {
    pub fn final_record(&self) -> &RestartRecord {
        self.restarts.last().expect("at least the initial record")
    }

    pub fn times(&self) -> Vec<f64> {
        self.trajectory.iter().map(|p| p.time).collect()
    }

    pub fn means(&self, component: usize) -> Vec<f64> {
        self.trajectory.iter().map(|p| p.cumulants.mean(component)).collect()
    }

    pub fn variances(&self, component: usize) -> Vec<f64> {
        self.trajectory.iter().map(|p| p.cumulants.variance(component)).collect()
    }
}

fn consistency(snap: &Snapshot, state0: &[ChaosExpansion]) -> f64 {
    snap.center
        .iter()
        .zip(&snap.variance)
        .zip(state0)
        .map(|((&m, &v), e)| {
            let sd = v.sqrt();
            let dm = (e.mean() - m).abs() / m.abs().max(sd).max(f64::MIN_POSITIVE);
            let dv = if v > 0.0 { (e.variance() - v).abs() / v } else { e.variance().abs() };
            dm.max(dv)
        })
        .fold(0.0, f64::max)
}

fn moment_loss(snap: &Snapshot, start: &IntervalStart, l: usize) -> Result<f64> {
    let z: Vec<ChaosExpansion> = start
        .state0
        .iter()
        .zip(snap.center.iter().zip(&snap.scale))
        .map(|(e, (&c, &s))| {
            let mut z = e.clone();
            z.coeffs_mut()[0] -= c;
            z.coeffs_mut().iter_mut().for_each(|x| *x /= s);
            z
        })
        .collect();
    let order = 2 * l;
    let after = mixed_moments(&z, order, &start.products)?;
    let mut worst = 0.0f64;
    for (idx, e) in after.index().iter().enumerate() {
        let active_only = e
            .exponents()
            .iter()
            .zip(&snap.active)
            .all(|(&k, &a)| k == 0 || a);
        if !active_only {
            continue;
        }
        let before = snap.z_moments.require(e.exponents())?;
        worst = worst.max((after.values()[idx] - before).abs());
    }
    Ok(worst)
}

/// Dynamical gPC over `[0, t_end]` with `n_restarts` uniform intervals.
pub fn run_dgpc(config: &DgpcConfig, model: &SdeModel) -> Result<DgpcRun> {
    config.validate()?;
    model.validate()?;
    let d = model.state_dim();
    let order = config.moment_order();
    let xi_set = MultiIndexSet::new(config.k, config.n)?;
    let xi = Arc::new(XiTripleTensor::build(&xi_set));
    let outputs = config.output_times();
    let mut next_output = 0;

    let mut restarts = Vec::with_capacity(config.n_restarts + 1);
    let mut trajectory = Vec::with_capacity(outputs.len());
    let mut snap = initial_snapshot(model, order)?;
    let mut coefficients: Option<Vec<ChaosExpansion>> = None;
    let mut old_products: Option<BasisProducts> = None;

    for j in 0..=config.n_restarts {
        let t_j = config.restart_time(j);
        let cumulants = snap.cumulants(t_j)?;
        if j == config.n_restarts {
            if next_output < outputs.len() && (outputs[next_output] - t_j).abs() < 1e-9 {
                trajectory.push(TrajectoryPoint {
                    time: t_j,
                    cumulants: cumulants.clone(),
                    gram_condition: f64::NAN,
                });
            }
            restarts.push(RestartRecord {
                time: t_j,
                snapshot: snap,
                cumulants,
                gram_condition: None,
                coefficients: coefficients.unwrap_or_default(),
                projection_error: None,
                moment_loss: None,
            });
            break;
        }

        let previous = match (config.orthogonalization, &coefficients, &old_products) {
            (Orthogonalization::Projected, Some(end), Some(p)) => Some((end.as_slice(), p)),
            _ => None,
        };
        let start = rebuild(&snap, previous, &xi, config.l).map_err(|e| e.at(t_j))?;
        let projection_error = consistency(&snap, &start.state0);
        let loss = if snap.active.iter().any(|&a| a) {
            Some(moment_loss(&snap, &start, config.l).map_err(|e| e.at(t_j))?)
        } else {
            None
        };
        let gram = start.gram_condition.unwrap_or(f64::NAN);
        if next_output < outputs.len() && (outputs[next_output] - t_j).abs() < 1e-9 {
            trajectory.push(TrajectoryPoint {
                time: t_j,
                cumulants: cumulants.clone(),
                gram_condition: gram,
            });
            next_output += 1;
        }
        restarts.push(RestartRecord {
            time: t_j,
            snapshot: snap.clone(),
            cumulants,
            gram_condition: start.gram_condition,
            coefficients: coefficients.take().unwrap_or_else(|| start.state0.clone()),
            projection_error: Some(projection_error),
            moment_loss: loss,
        });

        let t_next = config.restart_time(j + 1);
        let forcing = ForcingBasis::new(t_j, t_next - t_j, config.k, model.processes())?;
        let mut system = GalerkinSystem::assemble(model, &start.products, &forcing)?;
        let m = start.products.len();
        let mut y: Vec<f64> = start.state0.iter().flat_map(|e| e.coeffs().iter().copied()).collect();
        let mut t = t_j;
        let split = |y: &[f64]| -> Vec<ChaosExpansion> {
            (0..d)
                .map(|i| ChaosExpansion::from_coeffs(&start.products, y[i * m..(i + 1) * m].to_vec()).expect("sizes"))
                .collect()
        };
        // Interior outputs.
        while next_output < outputs.len() && outputs[next_output] < t_next - 1e-9 {
            let target = outputs[next_output];
            integrate(&mut system, &mut y, t, target, config.h, config.integrator)?;
            t = target;
            let s = snapshot(&split(&y), &start.products, 6).map_err(|e| e.at(t))?;
            trajectory.push(TrajectoryPoint {
                time: t,
                cumulants: s.cumulants(t)?,
                gram_condition: gram,
            });
            next_output += 1;
        }
        integrate(&mut system, &mut y, t, t_next, config.h, config.integrator)?;
        let end = split(&y);
        snap = snapshot(&end, &start.products, order).map_err(|e| e.at(t_next))?;
        coefficients = Some(end);
        old_products = Some(start.products);
    }

    Ok(DgpcRun {
        config: config.clone(),
        names: model.component_names().iter().map(|s| s.to_string()).collect(),
        restarts,
        trajectory,
    })
}

/// Plain Hermite/gPC over the whole horizon: one interval, one ξ basis of
/// dimension `K`, state basis from the initial law.
pub fn run_hermite_pc(config: &DgpcConfig, model: &SdeModel) -> Result<DgpcRun> {
    let mut single = config.clone();
    single.n_restarts = 1;
    run_dgpc(&single, model)
}
