//! Time-domain simulation of the system models under a load step.
//!
//! Every model implements [`Dynamics`]; [`integrate`] advances it on a
//! uniform output grid with RK4 or an adaptive Dormand–Prince scheme. The
//! disturbance is applied between steps at the first grid point at or after
//! its time; the outputs just before switching are kept as a snapshot so
//! jumps can be measured.

mod integrate;
mod models;
mod system;

pub use integrate::{integrate, Dynamics, Trajectory, DIVERGENCE_LIMIT, EQUILIBRIUM_TOL};
pub use models::{
    simulate_coi, simulate_multi_generator, simulate_nonlinear_reference, simulate_rotor_motion_baseline,
    simulate_sfr_baseline, simulate_variant, simulate_variants, CoiModel, GflRepresentation, MultiGeneratorModel,
    RotorConfig, RotorModel,
};
pub use system::{
    initialize_system, internal_voltage, GflSpec, GflUnit, LoadSpec, PowerSystem, SgControl, SgSpec, SystemSpec,
};
#[cfg(test)]
pub(crate) use system::fixtures as system_fixtures;

use crate::gfl::GflError;
use crate::linalg::ComplexValue;
use crate::network::NetworkError;
use crate::sg::SgError;
use serde::{Deserialize, Serialize};

/// Admittance increment at a bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub bus: usize,
    pub delta_admittance: ComplexValue,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub integrator: Integrator,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt_s: 1e-3, duration_s: 10.0, integrator: Integrator::Rk4, abs_tol: 1e-10, rel_tol: 1e-8 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(SimError::InvalidConfig(format!("dt_s must be positive, got {}", self.dt_s)));
        }
        if !(self.duration_s > self.dt_s) || !self.duration_s.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "duration_s ({}) must exceed dt_s ({})",
                self.duration_s, self.dt_s
            )));
        }
        if self.integrator == Integrator::Rk45 && !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(SimError::InvalidConfig("rk45 needs positive abs_tol and rel_tol".into()));
        }
        Ok(())
    }

    /// Number of steps on the output grid.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.dt_s).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Every SG with its own swing equation, linearized GFLs.
    Multigen,
    /// SGs merged into the COI frame, linearized GFLs.
    Proposed,
    /// Every SG, nonlinear GFLs.
    Reference,
    /// COI frame, GFL power held constant.
    Sfr,
    /// GFL as a voltage behind its filter reactance driven by the reference.
    Rotor,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] =
        [ModelVariant::Multigen, ModelVariant::Proposed, ModelVariant::Reference, ModelVariant::Sfr, ModelVariant::Rotor];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Multigen => "multigen",
            ModelVariant::Proposed => "proposed",
            ModelVariant::Reference => "reference",
            ModelVariant::Sfr => "sfr",
            ModelVariant::Rotor => "rotor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ModelVariant::ALL.into_iter().find(|v| v.name() == s.trim())
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Name and unit of one output column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalInfo {
    pub name: String,
    pub unit: &'static str,
}

impl SignalInfo {
    pub fn new(name: impl Into<String>, unit: &'static str) -> Self {
        SignalInfo { name: name.into(), unit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub variant: ModelVariant,
    pub time: Vec<f64>,
    pub signals: Vec<SignalInfo>,
    /// Column-major: `values[signal][sample]`.
    pub values: Vec<Vec<f64>>,
    /// Sample index at which the disturbance was applied.
    pub disturbance_index: Option<usize>,
    /// Outputs just before the disturbance was applied, one per signal.
    pub pre_disturbance: Option<Vec<f64>>,
    pub disturbance: Option<Disturbance>,
    pub config: SimConfig,
}

impl ScenarioResult {
    pub fn from_trajectory(
        variant: ModelVariant,
        signals: Vec<SignalInfo>,
        traj: Trajectory,
        disturbance: Option<Disturbance>,
        config: SimConfig,
    ) -> Self {
        let n = signals.len();
        let mut values = vec![Vec::with_capacity(traj.time.len()); n];
        for row in &traj.outputs {
            for (col, v) in values.iter_mut().zip(row) {
                col.push(*v);
            }
        }
        ScenarioResult {
            variant,
            time: traj.time,
            signals,
            values,
            disturbance_index: traj.disturbance_index,
            pre_disturbance: traj.pre_disturbance,
            disturbance,
            config,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|k| self.values[k].as_slice())
    }

    /// `(before, after)` values of a signal across the disturbance.
    pub fn jump(&self, name: &str) -> Option<(f64, f64)> {
        let k = self.index_of(name)?;
        let d = self.disturbance_index?;
        Some((self.pre_disturbance.as_ref()?[k], self.values[k][d]))
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("initial state is not an equilibrium: max derivative {residual:.3e} in state {state}")]
    NotEquilibrium { residual: f64, state: String },
    #[error("integration diverged at t = {time:.4} s: speed deviation {deviation:.3} pu")]
    Diverged { time: f64, deviation: f64 },
    #[error("non-finite state at t = {time:.4} s")]
    NonFinite { time: f64 },
    #[error("adaptive step size underflow at t = {time:.6} s")]
    StepUnderflow { time: f64 },
    #[error("algebraic loop did not converge in {iterations} iterations at t = {time:.4} s (residual {residual:.3e})")]
    AlgebraicLoop { time: f64, iterations: usize, residual: f64 },
    #[error("invalid disturbance: {0}")]
    InvalidDisturbance(String),
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Gfl(#[from] GflError),
    #[error(transparent)]
    Sg(#[from] SgError),
}
