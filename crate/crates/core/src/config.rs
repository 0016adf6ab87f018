//! TOML run configuration.
//!
//! ```toml
//! command = "dgpc"
//! output = "ou.csv"
//!
//! [model]
//! kind = "ou"
//! b_v = 4.0
//! sigma_v = 2.0
//! v0 = { law = "point", value = 1.0 }
//!
//! [method]
//! t_end = 3.0
//! restart_interval = 0.2
//! k = 8
//! n = 1
//! l = 1
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::driver::{DgpcConfig, Orthogonalization};
use crate::error::{DgpcError, Result};
use crate::model::{Forcing, InitialLaw, Integrator, SdeModel};
use crate::oracles::McConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Restarted expansion.
    Dgpc,
    /// Single-interval Hermite expansion.
    Hermite,
    /// Monte Carlo oracle only.
    Mc,
    /// Stationary cumulants by quadrature.
    Invariant,
    /// DgPC and the Hermite baseline against a reference.
    Compare,
    /// Endpoint and time-averaged errors over a grid of K, Δt and horizons.
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn origin() -> InitialLaw {
    InitialLaw::Point { value: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Ou {
        b_v: f64,
        sigma_v: f64,
        #[serde(default = "origin")]
        v0: InitialLaw,
    },
    CubicOu {
        b_v: f64,
        c_v: f64,
        sigma_v: f64,
        #[serde(default = "origin")]
        v0: InitialLaw,
    },
    RandomDampingOu {
        /// Law of the damping coefficient.
        b_v: InitialLaw,
        sigma_v: f64,
        #[serde(default = "origin")]
        v0: InitialLaw,
    },
    SquaredWiener {
        b_v: f64,
        sigma_v: f64,
        #[serde(default = "origin")]
        v0: InitialLaw,
    },
    Coupled {
        b_u: f64,
        b_v: f64,
        a_u: f64,
        a_v: f64,
        sigma_u: f64,
        sigma_v: f64,
        /// `[c0, c1, c2]` of `c0 + c1 cos(2t + 1) + c2 cos(4t)`.
        #[serde(default)]
        forcing: [f64; 3],
        #[serde(default = "origin")]
        u0: InitialLaw,
        #[serde(default = "origin")]
        v0: InitialLaw,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<SdeModel> {
        let model = match *self {
            ModelConfig::Ou { b_v, sigma_v, v0 } => SdeModel::ou(b_v, sigma_v, v0),
            ModelConfig::CubicOu { b_v, c_v, sigma_v, v0 } => SdeModel::cubic_ou(b_v, c_v, sigma_v, v0),
            ModelConfig::RandomDampingOu { b_v, sigma_v, v0 } => SdeModel::random_damping_ou(b_v, sigma_v, v0),
            ModelConfig::SquaredWiener { b_v, sigma_v, v0 } => SdeModel::squared_wiener(b_v, sigma_v, v0),
            ModelConfig::Coupled {
                b_u,
                b_v,
                a_u,
                a_v,
                sigma_u,
                sigma_v,
                forcing: [c0, c1, c2],
                u0,
                v0,
            } => SdeModel::coupled(
                b_u,
                b_v,
                a_u,
                a_v,
                sigma_u,
                sigma_v,
                Forcing::Parametric { c0, c1, c2 },
                u0,
                v0,
            ),
        };
        model.validate()?;
        Ok(model)
    }
}

fn default_step() -> f64 {
    1e-3
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub t_end: f64,
    /// Either the restart count or the restart interval; one restart when
    /// both are absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_interval: Option<f64>,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_interval: Option<f64>,
    #[serde(default)]
    pub orthogonalization: Orthogonalization,
}

/// Restart count for an interval that must tile `[0, t_end]`.
pub fn restarts_for(t_end: f64, interval: f64) -> Result<usize> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(DgpcError::Config(format!("restart interval must be positive, got {interval}")));
    }
    let n = (t_end / interval).round();
    if n < 1.0 || (n * interval - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(DgpcError::Config(format!(
            "restart interval {interval} does not divide t_end = {t_end}"
        )));
    }
    Ok(n as usize)
}

impl MethodConfig {
    pub fn restarts(&self) -> Result<usize> {
        match (self.n_restarts, self.restart_interval) {
            (Some(_), Some(_)) => Err(DgpcError::Config(
                "give either n_restarts or restart_interval, not both".into(),
            )),
            (Some(n), None) => Ok(n),
            (None, Some(dt)) => restarts_for(self.t_end, dt),
            (None, None) => Ok(1),
        }
    }

    pub fn dgpc(&self) -> Result<DgpcConfig> {
        let mut cfg = DgpcConfig::new(self.t_end, self.restarts()?, self.k, self.n, self.l)
            .with_step(self.h, self.integrator)
            .with_orthogonalization(self.orthogonalization);
        cfg.output_interval = self.output_interval;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which trajectory serves as ground truth for ε columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    /// Closed form when the model has one; Monte Carlo otherwise for
    /// `compare` and `sweep`, none for single runs.
    #[default]
    Auto,
    Exact,
    Mc,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub reference: ReferenceKind,
    #[serde(default = "OracleConfig::default_samples")]
    pub samples: usize,
    #[serde(default = "default_step")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "OracleConfig::default_batches")]
    pub batches: usize,
}

impl OracleConfig {
    fn default_samples() -> usize {
        200_000
    }

    fn default_batches() -> usize {
        32
    }

    pub fn mc(&self, output_times: Vec<f64>) -> Result<McConfig> {
        let mut cfg = McConfig::new(self.samples, self.dt, self.seed, output_times);
        cfg.batches = self.batches;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            reference: ReferenceKind::Auto,
            samples: Self::default_samples(),
            dt: default_step(),
            seed: 0,
            batches: Self::default_batches(),
        }
    }
}

/// Hermite baseline settings for `compare`; defaults to the method's K, N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restart_interval: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_end: Vec<f64>,
    /// K values of single-interval Hermite runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hermite_k: Vec<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        self.method.dgpc()?;
        if matches!(self.oracle.reference, ReferenceKind::Mc) || matches!(self.command, Command::Mc) {
            self.oracle.mc(vec![self.method.t_end])?;
        }
        if let Some(b) = &self.baseline {
            if b.k == 0 || b.n == 0 {
                return Err(DgpcError::Config("baseline K and N must be at least 1".into()));
            }
        }
        if let Some(s) = &self.sweep {
            let t_ends = if s.t_end.is_empty() { vec![self.method.t_end] } else { s.t_end.clone() };
            for &t in &t_ends {
                if !(t > 0.0) {
                    return Err(DgpcError::Config(format!("sweep t_end must be positive, got {t}")));
                }
                for &dt in &s.restart_interval {
                    restarts_for(t, dt)?;
                }
            }
            if s.k.iter().chain(&s.hermite_k).any(|&k| k == 0) {
                return Err(DgpcError::Config("sweep K values must be at least 1".into()));
            }
        } else if self.command == Command::Sweep {
            return Err(DgpcError::Config("command \"sweep\" needs a [sweep] block".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Parse and validate a TOML run configuration. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| DgpcError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"
command = "dgpc"

[model]
kind = "ou"
b_v = 4.0
sigma_v = 2.0
v0 = { law = "point", value = 1.0 }

[method]
t_end = 3.0
restart_interval = 0.2
k = 8
n = 1
l = 1
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(OU).unwrap();
        assert_eq!(cfg.method.integrator, Integrator::Rk4);
        assert_eq!(cfg.method.h, 1e-3);
        assert_eq!(cfg.method.restarts().unwrap(), 15);
        assert_eq!(cfg.oracle.reference, ReferenceKind::Auto);
        assert_eq!(cfg.method.orthogonalization, Orthogonalization::Moments);
    }

    #[test]
    fn negative_damping_is_rejected() {
        let err = parse_config(&OU.replace("b_v = 4.0", "b_v = -1.0")).unwrap_err();
        assert!(err.to_string().contains("damping must be positive"), "{err}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config(&OU.replace("sigma_v = 2.0", "sigma_v = 2.0\nsigma_w = 1.0")).unwrap_err();
        assert!(err.to_string().contains("sigma_w"), "{err}");
        let err = parse_config(&OU.replace("l = 1", "l = 1\nlevels = 3")).unwrap_err();
        assert!(err.to_string().contains("levels"), "{err}");
    }

    #[test]
    fn interval_must_tile_horizon() {
        let err = parse_config(&OU.replace("restart_interval = 0.2", "restart_interval = 0.7")).unwrap_err();
        assert!(err.to_string().contains("does not divide"), "{err}");
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = parse_config(OU).unwrap();
        let text = cfg.to_toml();
        let again = parse_config(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml());
    }

    #[test]
    fn coupled_model_builds_with_forcing() {
        let text = r#"
command = "compare"
[model]
kind = "coupled"
b_u = 1.4
b_v = 10.0
a_u = 1.0
a_v = 0.0
sigma_u = 0.1
sigma_v = 10.0
forcing = [1.0, 1.1, 0.5]
u0 = { law = "gaussian", mean = 0.0, var = 0.000892857 }
v0 = { law = "gaussian", mean = 0.0, var = 1.25 }
[method]
t_end = 1.0
n_restarts = 10
k = 4
n = 2
l = 2
orthogonalization = "projected"
"#;
        let cfg = parse_config(text).unwrap();
        let model = cfg.model.build().unwrap();
        assert_eq!(model.state_dim(), 2);
        assert!((model.forcing.eval(0.0) - (1.0 + 1.1 * 1f64.cos() + 0.5)).abs() < 1e-15);
        assert_eq!(cfg.method.dgpc().unwrap().orthogonalization, Orthogonalization::Projected);
    }

    #[test]
    fn sweep_needs_its_block() {
        let err = parse_config(&OU.replace("\"dgpc\"", "\"sweep\"")).unwrap_err();
        assert!(err.to_string().contains("[sweep]"), "{err}");
    }
}
