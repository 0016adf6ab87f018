//! Cosine expansion of Brownian motion on one restart interval.
//!
//! On `[t0, t0 + Δt]` with local time `s`, the white noise is truncated to
//! `Ẇ(s) = Σ_i ξ_i m_i(s)` with `m_1 = 1/√Δt` and
//! `m_i = √(2/Δt) cos((i-1) π s / Δt)`. Each Wiener process owns a contiguous
//! block of ξ coordinates.

use std::f64::consts::PI;

use crate::error::{DgpcError, Result};
use crate::multiindex::MultiIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingBasis {
    t0: f64,
    dt: f64,
    /// Modes per process; process `p` uses ξ coordinates
    /// `offsets[p] .. offsets[p] + modes[p]`.
    modes: Vec<usize>,
    offsets: Vec<usize>,
}

impl ForcingBasis {
    /// Split `total_modes` ξ coordinates over `processes` Wiener processes.
    /// When the split is uneven the earlier processes get one extra mode.
    pub fn new(t0: f64, dt: f64, total_modes: usize, processes: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DgpcError::InvalidArgument(format!("interval length {dt} must be positive")));
        }
        if processes == 0 || total_modes < processes {
            return Err(DgpcError::InvalidArgument(format!(
                "{total_modes} modes cannot cover {processes} Wiener processes"
            )));
        }
        let base = total_modes / processes;
        let extra = total_modes % processes;
        let modes: Vec<usize> = (0..processes).map(|p| base + usize::from(p < extra)).collect();
        let mut offsets = Vec::with_capacity(processes);
        let mut acc = 0;
        for &m in &modes {
            offsets.push(acc);
            acc += m;
        }
        Ok(Self { t0, dt, modes, offsets })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn processes(&self) -> usize {
        self.modes.len()
    }

    pub fn total_modes(&self) -> usize {
        self.modes.iter().sum()
    }

    pub fn modes(&self, process: usize) -> usize {
        self.modes[process]
    }

    /// ξ coordinate carrying mode `i` (1-based) of `process`.
    pub fn coordinate(&self, process: usize, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.modes[process]);
        self.offsets[process] + i - 1
    }

    /// `(process, mode)` fed by ξ coordinate `coord`.
    pub fn mode_of(&self, coord: usize) -> Option<(usize, usize)> {
        self.offsets
            .iter()
            .zip(&self.modes)
            .enumerate()
            .find(|(_, (&o, &m))| coord >= o && coord < o + m)
            .map(|(p, (&o, _))| (p, coord - o + 1))
    }

    fn check_local(&self, s: f64) -> Result<()> {
        let slack = 1e-12 * self.dt.max(1.0);
        if s < -slack || s > self.dt + slack || !s.is_finite() {
            return Err(DgpcError::InvalidArgument(format!(
                "local time {s} outside [0, {}]",
                self.dt
            )));
        }
        Ok(())
    }

    /// `m_i(s)` at local time `s`, `i >= 1`.
    pub fn basis_function(&self, i: usize, s: f64) -> Result<f64> {
        if i == 0 {
            return Err(DgpcError::InvalidArgument("cosine modes start at 1".into()));
        }
        self.check_local(s)?;
        Ok(self.m(i, s))
    }

    #[inline]
    pub(crate) fn m(&self, i: usize, s: f64) -> f64 {
        if i == 1 {
            1.0 / self.dt.sqrt()
        } else {
            (2.0 / self.dt).sqrt() * ((i - 1) as f64 * PI * s / self.dt).cos()
        }
    }

    /// `M_i(s) = ∫_0^s m_i`.
    #[inline]
    pub fn integrated(&self, i: usize, s: f64) -> f64 {
        if i == 1 {
            s / self.dt.sqrt()
        } else {
            let w = (i - 1) as f64 * PI / self.dt;
            (2.0 / self.dt).sqrt() * (w * s).sin() / w
        }
    }

    /// `E[Ẇ_p(s) T_α(ξ)]`: `m_i(s)` when `α` is the unit index of a ξ
    /// coordinate of process `p`, zero otherwise.
    pub fn white_noise_projection(&self, alpha: &MultiIndex, s: f64, process: usize) -> f64 {
        match alpha.unit_position() {
            Some(c) => match self.mode_of(c) {
                Some((p, i)) if p == process => self.m(i, s),
                _ => 0.0,
            },
            None => 0.0,
        }
    }

    /// Truncated `W_p(s) = Σ_i ξ_i M_i(s)` for one sample of the ξ vector.
    pub fn reconstruct_brownian(&self, xi: &[f64], s: f64, process: usize) -> f64 {
        (1..=self.modes[process])
            .map(|i| xi[self.coordinate(process, i)] * self.integrated(i, s))
            .sum()
    }
}
