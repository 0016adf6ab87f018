//! SDE families and their Galerkin-projected coefficient equations.
//!
//! All models are instances of
//!
//! ```text
//! du = -(b_u + a_u v) u ds + f(s) ds + σ_u dW_u
//! dv = -(b_v + a_v u) v ds + σ_v dW_v
//! ```
//!
//! or of its scalar specializations. Every state component is carried as one
//! chaos expansion over the joint basis; the right-hand side applies linear
//! terms coefficient-wise, nonlinear terms through Galerkin products, the
//! deterministic forcing on the zero index, and the white noise on the unit ξ
//! indices of the owning Wiener process.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chaos::{BasisProducts, ProductScratch};
use crate::error::{DgpcError, Result};
use crate::forcing::ForcingBasis;
use crate::moments::{gaussian_moments, point_mass_moments, uniform_moments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialLaw {
    Gaussian { mean: f64, var: f64 },
    Uniform { lo: f64, hi: f64 },
    Point { value: f64 },
}

impl InitialLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialLaw::Gaussian { mean, .. } => mean,
            InitialLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            InitialLaw::Point { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InitialLaw::Gaussian { var, .. } => var,
            InitialLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            InitialLaw::Point { .. } => 0.0,
        }
    }

    /// Raw moments `E[x^k]`, `k = 0..=order`.
    pub fn moments(&self, order: usize) -> Vec<f64> {
        match *self {
            InitialLaw::Gaussian { mean, var } => gaussian_moments(mean, var, order),
            InitialLaw::Uniform { lo, hi } => uniform_moments(lo, hi, order),
            InitialLaw::Point { value } => point_mass_moments(value, order),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Gaussian { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InitialLaw::Point { value } => value,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            InitialLaw::Gaussian { mean, var } => mean.is_finite() && var.is_finite() && var >= 0.0,
            InitialLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            InitialLaw::Point { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(DgpcError::Config(format!("initial law of {name} is invalid: {self:?}")))
        }
    }
}

/// Deterministic forcing `f(t)` on the first component.
#[derive(Clone)]
pub enum Forcing {
    /// `c0 + c1 cos(2t + 1) + c2 cos(4t)`.
    Parametric { c0: f64, c1: f64, c2: f64 },
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Forcing {
    pub fn none() -> Self {
        Forcing::Parametric {
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Parametric { c0, c1, c2 } => c0 + c1 * (2.0 * t + 1.0).cos() + c2 * (4.0 * t).cos(),
            Forcing::Callable(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Parametric { c0, c1, c2 } if *c0 == 0.0 && *c1 == 0.0 && *c2 == 0.0)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Parametric { c0, c1, c2 } => f
                .debug_struct("Parametric")
                .field("c0", c0)
                .field("c1", c1)
                .field("c2", c2)
                .finish(),
            Forcing::Callable(_) => f.write_str("Callable(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `dv = -b_v v ds + σ_v dW`.
    Ou { b_v: f64, sigma_v: f64 },
    /// `dv = -(b_v v + c_v v^3) ds + σ_v dW`.
    CubicOu { b_v: f64, c_v: f64, sigma_v: f64 },
    /// OU with a random, time-constant damping carried as a second state
    /// component `b` with `db = 0`.
    RandomDampingOu { sigma_v: f64 },
    /// `dv = -b_v v ds + σ_v d(W^2 - s)`. The Wiener path value `w = W(s)` is
    /// carried as a second state component so that restarts stay Markov.
    SquaredWienerForcing { b_v: f64, sigma_v: f64 },
    CoupledSystem {
        b_u: f64,
        b_v: f64,
        a_u: f64,
        a_v: f64,
        sigma_u: f64,
        sigma_v: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SdeModel {
    pub kind: ModelKind,
    /// Added to the drift of the first component.
    pub forcing: Forcing,
    /// One law per state component, independent at `t = 0`.
    pub initial: Vec<InitialLaw>,
}

impl SdeModel {
    pub fn ou(b_v: f64, sigma_v: f64, v0: InitialLaw) -> Self {
        Self {
            kind: ModelKind::Ou { b_v, sigma_v },
            forcing: Forcing::none(),
            initial: vec![v0],
        }
    }

    pub fn cubic_ou(b_v: f64, c_v: f64, sigma_v: f64, v0: InitialLaw) -> Self {
        Self {
            kind: ModelKind::CubicOu { b_v, c_v, sigma_v },
            forcing: Forcing::none(),
            initial: vec![v0],
        }
    }

    pub fn random_damping_ou(damping: InitialLaw, sigma_v: f64, v0: InitialLaw) -> Self {
        Self {
            kind: ModelKind::RandomDampingOu { sigma_v },
            forcing: Forcing::none(),
            initial: vec![v0, damping],
        }
    }

    pub fn squared_wiener(b_v: f64, sigma_v: f64, v0: InitialLaw) -> Self {
        Self {
            kind: ModelKind::SquaredWienerForcing { b_v, sigma_v },
            forcing: Forcing::none(),
            initial: vec![v0, InitialLaw::Point { value: 0.0 }],
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn coupled(
        b_u: f64,
        b_v: f64,
        a_u: f64,
        a_v: f64,
        sigma_u: f64,
        sigma_v: f64,
        forcing: Forcing,
        u0: InitialLaw,
        v0: InitialLaw,
    ) -> Self {
        Self {
            kind: ModelKind::CoupledSystem {
                b_u,
                b_v,
                a_u,
                a_v,
                sigma_u,
                sigma_v,
            },
            forcing,
            initial: vec![u0, v0],
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::Ou { .. } | ModelKind::CubicOu { .. } => 1,
            _ => 2,
        }
    }

    pub fn processes(&self) -> usize {
        match self.kind {
            ModelKind::CoupledSystem { .. } => 2,
            _ => 1,
        }
    }

    pub fn component_names(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::Ou { .. } | ModelKind::CubicOu { .. } => &["v"],
            ModelKind::RandomDampingOu { .. } => &["v", "b"],
            ModelKind::SquaredWienerForcing { .. } => &["v", "w"],
            ModelKind::CoupledSystem { .. } => &["u", "v"],
        }
    }

    /// `(component, process, σ)` for every additive noise term.
    pub fn noise_terms(&self) -> Vec<(usize, usize, f64)> {
        match self.kind {
            ModelKind::Ou { sigma_v, .. }
            | ModelKind::CubicOu { sigma_v, .. }
            | ModelKind::RandomDampingOu { sigma_v } => vec![(0, 0, sigma_v)],
            ModelKind::SquaredWienerForcing { .. } => vec![(1, 0, 1.0)],
            ModelKind::CoupledSystem { sigma_u, sigma_v, .. } => vec![(0, 0, sigma_u), (1, 1, sigma_v)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(DgpcError::Config(format!("damping must be positive: {name} = {x}")))
            }
        };
        let noise = |name: &str, x: f64| -> Result<()> {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(DgpcError::Config(format!("noise amplitude must be non-negative: {name} = {x}")))
            }
        };
        let coupling = |name: &str, x: f64| -> Result<()> {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(DgpcError::Config(format!("coupling must be non-negative: {name} = {x}")))
            }
        };
        match self.kind {
            ModelKind::Ou { b_v, sigma_v } | ModelKind::SquaredWienerForcing { b_v, sigma_v } => {
                positive("b_v", b_v)?;
                noise("sigma_v", sigma_v)?;
            }
            ModelKind::CubicOu { b_v, c_v, sigma_v } => {
                positive("b_v", b_v)?;
                positive("c_v", c_v)?;
                noise("sigma_v", sigma_v)?;
            }
            ModelKind::RandomDampingOu { sigma_v } => {
                noise("sigma_v", sigma_v)?;
                if let Some(law) = self.initial.get(1) {
                    let lowest = match *law {
                        InitialLaw::Uniform { lo, .. } => lo,
                        InitialLaw::Point { value } => value,
                        InitialLaw::Gaussian { .. } => {
                            return Err(DgpcError::Config(
                                "damping must be positive: a Gaussian damping law has unbounded support".into(),
                            ))
                        }
                    };
                    positive("b_v (lower support bound)", lowest)?;
                }
            }
            ModelKind::CoupledSystem {
                b_u,
                b_v,
                a_u,
                a_v,
                sigma_u,
                sigma_v,
            } => {
                positive("b_u", b_u)?;
                positive("b_v", b_v)?;
                coupling("a_u", a_u)?;
                coupling("a_v", a_v)?;
                noise("sigma_u", sigma_u)?;
                noise("sigma_v", sigma_v)?;
            }
        }
        if self.initial.len() != self.state_dim() {
            return Err(DgpcError::Config(format!(
                "model has {} state components but {} initial laws",
                self.state_dim(),
                self.initial.len()
            )));
        }
        for (law, name) in self.initial.iter().zip(self.component_names()) {
            law.validate(name)?;
        }
        if let ModelKind::SquaredWienerForcing { .. } = self.kind {
            if self.initial[1] != (InitialLaw::Point { value: 0.0 }) {
                return Err(DgpcError::Config("the Wiener path component must start at 0".into()));
            }
        }
        Ok(())
    }

    /// Drift of the state at time `t` (used by the Monte Carlo oracle).
    /// `SquaredWienerForcing` has no drift beyond `-b_v v`; its forcing is
    /// added by the sampler.
    #[inline]
    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let f = self.forcing.eval(t);
        match self.kind {
            ModelKind::Ou { b_v, .. } => out[0] = -b_v * x[0] + f,
            ModelKind::CubicOu { b_v, c_v, .. } => out[0] = -(b_v * x[0] + c_v * x[0].powi(3)) + f,
            ModelKind::RandomDampingOu { .. } => {
                out[0] = -x[1] * x[0] + f;
                out[1] = 0.0;
            }
            ModelKind::SquaredWienerForcing { b_v, .. } => {
                out[0] = -b_v * x[0] + f;
                out[1] = 0.0;
            }
            ModelKind::CoupledSystem { b_u, b_v, a_u, a_v, .. } => {
                out[0] = -(b_u + a_u * x[1]) * x[0] + f;
                out[1] = -(b_v + a_v * x[0]) * x[1];
            }
        }
    }
}

/// A right-hand side `y' = F(t, y)`.
pub trait OdeRhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: FnMut(f64, &[f64], &mut [f64])> OdeRhs for F {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Heun's method (explicit trapezoid).
    Rk2,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

impl Integrator {
    pub fn order(&self) -> usize {
        match self {
            Integrator::Rk2 => 2,
            Integrator::Rk4 => 4,
        }
    }
}

/// Advance `y` from `t0` to `t1` with fixed steps of `h`; the last step is
/// shortened to land on `t1`.
pub fn integrate<R: OdeRhs>(rhs: &mut R, y: &mut [f64], t0: f64, t1: f64, h: f64, method: Integrator) -> Result<()> {
    if !(h > 0.0) {
        return Err(DgpcError::InvalidArgument(format!("step {h} must be positive")));
    }
    if !(t1 >= t0) {
        return Err(DgpcError::InvalidArgument(format!("cannot integrate from {t0} back to {t1}")));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(());
    }
    let steps = ((span / h) - 1e-9).ceil().max(1.0) as usize;
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        let dt = if step + 1 == steps { t1 - t } else { h };
        match method {
            Integrator::Rk2 => {
                rhs.eval(t, y, &mut k1);
                for i in 0..n {
                    tmp[i] = y[i] + dt * k1[i];
                }
                rhs.eval(t + dt, &tmp, &mut k2);
                for i in 0..n {
                    y[i] += 0.5 * dt * (k1[i] + k2[i]);
                }
            }
            Integrator::Rk4 => {
                rhs.eval(t, y, &mut k1);
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * dt * k1[i];
                }
                rhs.eval(t + 0.5 * dt, &tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * dt * k2[i];
                }
                rhs.eval(t + 0.5 * dt, &tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + dt * k3[i];
                }
                rhs.eval(t + dt, &tmp, &mut k4);
                for i in 0..n {
                    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DgpcError::NonFinite {
                detail: format!("coefficient {i} after step to t = {}", t + dt),
                time: Some(t + dt),
            });
        }
    }
    Ok(())
}

/// Galerkin coefficient equations of a model on one restart interval.
/// The state vector holds one block of `products.len()` coefficients per
/// component.
pub struct GalerkinSystem<'a> {
    model: &'a SdeModel,
    products: &'a BasisProducts,
    forcing: &'a ForcingBasis,
    /// `(component, joint rank, mode, σ)` of every noise entry.
    noise: Vec<(usize, usize, usize, f64)>,
    scratch: ProductScratch,
    work: Vec<f64>,
    work2: Vec<f64>,
}

impl<'a> GalerkinSystem<'a> {
    pub fn assemble(model: &'a SdeModel, products: &'a BasisProducts, forcing: &'a ForcingBasis) -> Result<Self> {
        let xi = products.xi_basis();
        if xi.dim() != forcing.total_modes() {
            return Err(DgpcError::BasisMismatch(format!(
                "ξ basis has {} variables but the forcing uses {} modes",
                xi.dim(),
                forcing.total_modes()
            )));
        }
        if forcing.processes() != model.processes() {
            return Err(DgpcError::BasisMismatch(format!(
                "model needs {} Wiener processes, forcing basis has {}",
                model.processes(),
                forcing.processes()
            )));
        }
        if xi.max_degree() < 1 {
            return Err(DgpcError::InvalidArgument("ξ degree must be at least 1".into()));
        }
        let ms = products.state_len();
        let mut noise = Vec::new();
        for (comp, process, sigma) in model.noise_terms() {
            if sigma == 0.0 {
                continue;
            }
            for i in 1..=forcing.modes(process) {
                let coord = forcing.coordinate(process, i);
                let r = xi.unit_rank(coord).expect("degree >= 1");
                noise.push((comp, r * ms, i, sigma));
            }
        }
        let m = products.len();
        Ok(Self {
            model,
            products,
            forcing,
            noise,
            scratch: products.scratch(),
            work: vec![0.0; m],
            work2: vec![0.0; m],
        })
    }

    pub fn block_len(&self) -> usize {
        self.products.len()
    }

    pub fn state_len(&self) -> usize {
        self.block_len() * self.model.state_dim()
    }
}

impl OdeRhs for GalerkinSystem<'_> {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let m = self.products.len();
        let s = (t - self.forcing.t0()).clamp(0.0, self.forcing.dt());
        let f = self.model.forcing.eval(t);
        match self.model.kind {
            ModelKind::Ou { b_v, .. } => {
                for (d, v) in dy.iter_mut().zip(y) {
                    *d = -b_v * v;
                }
            }
            ModelKind::CubicOu { b_v, c_v, .. } => {
                let v = &y[..m];
                self.products.multiply_into(v, v, &mut self.work, &mut self.scratch);
                self.products.multiply_into(&self.work, v, &mut self.work2, &mut self.scratch);
                for i in 0..m {
                    dy[i] = -b_v * v[i] - c_v * self.work2[i];
                }
            }
            ModelKind::RandomDampingOu { .. } => {
                let (v, b) = y.split_at(m);
                self.products.multiply_into(b, v, &mut self.work, &mut self.scratch);
                for i in 0..m {
                    dy[i] = -self.work[i];
                    dy[m + i] = 0.0;
                }
            }
            ModelKind::SquaredWienerForcing { b_v, sigma_v } => {
                let (v, w) = y.split_at(m);
                // Ḃ(s) as an expansion: m_i(s) on the unit ξ indices.
                self.work2.iter_mut().for_each(|x| *x = 0.0);
                for &(_, r, i, _) in &self.noise {
                    self.work2[r] = self.forcing.m(i, s);
                }
                // w already carries the in-interval path, so d(W² - s) = 2wḂ - 1.
                self.products.multiply_into(w, &self.work2, &mut self.work, &mut self.scratch);
                for i in 0..m {
                    dy[i] = -b_v * v[i] + 2.0 * sigma_v * self.work[i];
                    dy[m + i] = 0.0;
                }
                dy[0] -= sigma_v;
            }
            ModelKind::CoupledSystem { b_u, b_v, a_u, a_v, .. } => {
                let (u, v) = y.split_at(m);
                if a_u != 0.0 || a_v != 0.0 {
                    self.products.multiply_into(u, v, &mut self.work, &mut self.scratch);
                } else {
                    self.work.iter_mut().for_each(|x| *x = 0.0);
                }
                for i in 0..m {
                    dy[i] = -b_u * u[i] - a_u * self.work[i];
                    dy[m + i] = -b_v * v[i] - a_v * self.work[i];
                }
            }
        }
        dy[0] += f;
        for &(comp, r, i, sigma) in &self.noise {
            dy[comp * m + r] += sigma * self.forcing.m(i, s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::XiTripleTensor;
    use crate::multiindex::MultiIndexSet;
    use crate::tensor::SparseTriple;

    fn xi_products(k: usize, n: usize) -> BasisProducts {
        let set = MultiIndexSet::new(k, n).unwrap();
        BasisProducts::xi_only(Arc::new(XiTripleTensor::build(&set)))
    }

    #[test]
    fn scalar_exponential_decay() {
        let mut y = [1.0];
        integrate(&mut |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &mut y, 0.0, 1.0, 0.01, Integrator::Rk4).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
        let mut z = [2.0, -3.0];
        integrate(&mut |_t: f64, _y: &[f64], dy: &mut [f64]| dy.fill(0.0), &mut z, 0.0, 1.0, 0.1, Integrator::Rk2).unwrap();
        assert_eq!(z, [2.0, -3.0]);
    }

    #[test]
    fn last_step_lands_on_endpoint() {
        let mut y = [0.0];
        integrate(&mut |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0, &mut y, 0.0, 0.35, 0.1, Integrator::Rk4).unwrap();
        assert!((y[0] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_reported() {
        let mut y = [1.0];
        let err = integrate(&mut |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], &mut y, 0.0, 2.0, 0.01, Integrator::Rk4)
            .unwrap_err();
        assert!(matches!(err, DgpcError::NonFinite { .. }), "{err}");
    }

    #[test]
    fn ou_mean_matches_closed_form() {
        let model = SdeModel::ou(4.0, 2.0, InitialLaw::Point { value: 1.0 });
        let products = xi_products(4, 1);
        let forcing = ForcingBasis::new(0.0, 3.0, 4, 1).unwrap();
        let mut sys = GalerkinSystem::assemble(&model, &products, &forcing).unwrap();
        let mut y = vec![0.0; products.len()];
        y[0] = 1.0;
        integrate(&mut sys, &mut y, 0.0, 3.0, 1e-3, Integrator::Rk4).unwrap();
        let exact = (-12.0f64).exp();
        assert!(((y[0] - exact) / exact).abs() < 1e-10, "{} vs {exact}", y[0]);
    }

    #[test]
    fn rk4_order_on_ou_mean() {
        let model = SdeModel::ou(4.0, 2.0, InitialLaw::Point { value: 1.0 });
        let products = xi_products(2, 1);
        let forcing = ForcingBasis::new(0.0, 1.0, 2, 1).unwrap();
        let exact = (-4.0f64).exp();
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&h| {
                let mut sys = GalerkinSystem::assemble(&model, &products, &forcing).unwrap();
                let mut y = vec![0.0; products.len()];
                y[0] = 1.0;
                integrate(&mut sys, &mut y, 0.0, 1.0, h, Integrator::Rk4).unwrap();
                (y[0] - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 3.8, "order {order} from {errs:?}");
    }

    #[test]
    fn ou_system_is_linear() {
        let model = SdeModel::ou(4.0, 0.0, InitialLaw::Point { value: 1.0 });
        let products = xi_products(3, 2);
        let forcing = ForcingBasis::new(0.0, 0.5, 3, 1).unwrap();
        let y0: Vec<f64> = (0..products.len()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let run = |scale: f64| {
            let mut sys = GalerkinSystem::assemble(&model, &products, &forcing).unwrap();
            let mut y: Vec<f64> = y0.iter().map(|v| scale * v).collect();
            integrate(&mut sys, &mut y, 0.0, 0.5, 1e-2, Integrator::Rk4).unwrap();
            y
        };
        let one = run(1.0);
        let two = run(2.0);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn decoupled_system_matches_two_ou_blocks() {
        let law = InitialLaw::Gaussian { mean: 0.5, var: 0.1 };
        let coupled = SdeModel::coupled(1.2, 0.5, 0.0, 0.0, 0.3, 0.4, Forcing::none(), law, law);
        let products = xi_products(4, 2);
        let forcing = ForcingBasis::new(0.0, 0.1, 4, 2).unwrap();
        let m = products.len();
        let y: Vec<f64> = (0..2 * m).map(|i| ((i * 7) % 5) as f64 * 0.1).collect();
        let mut dy = vec![0.0; 2 * m];
        GalerkinSystem::assemble(&coupled, &products, &forcing)
            .unwrap()
            .eval(0.03, &y, &mut dy);

        // Two independent OU blocks, each forced on its own ξ block.
        let mut expect = vec![0.0; 2 * m];
        for i in 0..m {
            expect[i] = -1.2 * y[i];
            expect[m + i] = -0.5 * y[m + i];
        }
        for (comp, sigma) in [(0usize, 0.3), (1, 0.4)] {
            for mode in 1..=2 {
                let r = products.xi_basis().unit_rank(forcing.coordinate(comp, mode)).unwrap();
                expect[comp * m + r] += sigma * forcing.basis_function(mode, 0.03).unwrap();
            }
        }
        for i in 0..2 * m {
            assert!((dy[i] - expect[i]).abs() < 1e-14, "{i}");
        }
    }

    #[test]
    fn cubic_rhs_vanishes_at_symmetric_zero_mean_state() {
        let model = SdeModel::cubic_ou(1.0, 1.0, 2.0, InitialLaw::Point { value: 0.0 });
        let set = MultiIndexSet::new(1, 2).unwrap();
        let products = BasisProducts::new(Arc::new(XiTripleTensor::build(&set)), Arc::new(SparseTriple::constant()));
        let forcing = ForcingBasis::new(0.0, 0.25, 1, 1).unwrap();
        let mut sys = GalerkinSystem::assemble(&model, &products, &forcing).unwrap();
        // v = c ξ: odd in ξ, so v^3 is odd and has no mean.
        let y = vec![0.0, 0.8, 0.0];
        let mut dy = vec![0.0; 3];
        sys.eval(0.1, &y, &mut dy);
        assert_eq!(dy[0], 0.0);
    }

    #[test]
    fn deterministic_coupled_system_stays_at_zero_index() {
        let p = InitialLaw::Point { value: 1.0 };
        let model = SdeModel::coupled(1.2, 0.5, 1.0, 0.03, 0.0, 0.0, Forcing::Parametric { c0: 1.0, c1: 1.1, c2: 0.5 }, p, p);
        let products = xi_products(2, 2);
        let forcing = ForcingBasis::new(0.0, 1.0, 2, 2).unwrap();
        let mut sys = GalerkinSystem::assemble(&model, &products, &forcing).unwrap();
        let m = products.len();
        let mut y = vec![0.0; 2 * m];
        y[0] = 1.0;
        y[m] = 1.0;
        integrate(&mut sys, &mut y, 0.0, 1.0, 1e-3, Integrator::Rk4).unwrap();
        let mut x = [1.0, 1.0];
        let mut ode = |t: f64, x: &[f64], dx: &mut [f64]| model.drift(t, x, dx);
        integrate(&mut ode, &mut x, 0.0, 1.0, 1e-3, Integrator::Rk4).unwrap();
        for i in 0..m {
            if i != 0 {
                assert_eq!(y[i], 0.0);
                assert_eq!(y[m + i], 0.0);
            }
        }
        assert!((y[0] - x[0]).abs() < 1e-14 && (y[m] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn validation_messages() {
        let m = SdeModel::ou(-1.0, 2.0, InitialLaw::Point { value: 1.0 });
        assert!(m.validate().unwrap_err().to_string().contains("damping must be positive"));
        let m = SdeModel::random_damping_ou(InitialLaw::Uniform { lo: -1.0, hi: 3.0 }, 2.0, InitialLaw::Point { value: 1.0 });
        assert!(m.validate().is_err());
        let m = SdeModel::random_damping_ou(InitialLaw::Uniform { lo: 1.0, hi: 3.0 }, 2.0, InitialLaw::Point { value: 1.0 });
        assert!(m.validate().is_ok());
    }
}
