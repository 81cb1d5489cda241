//! Network description, Kron reduction, the hybrid SG/GFL interface matrix
//! and the tie/local power expressions.
//!
//! Node ordering everywhere is `[G | F | N]`: SG internal (EMF) nodes, GFL
//! terminal buses, then every remaining bus. SG terminal buses are ordinary
//! `N` nodes; each SG contributes an extra EMF node tied to its terminal bus
//! through the transient reactance.

mod admittance;
mod power;
mod powerflow;
mod reduction;

pub use admittance::{build_partitioned_admittance, Part, PartitionedAdmittance};
pub use power::{
    gfl_power_terms, local_power_gfl, local_power_sg, sg_power_terms, tie_power_sg_gfl,
    tie_power_sg_sg, GflPowerTerms, SgPowerTerms,
};
pub use powerflow::{solve_power_flow, BusKind, PowerFlowBus, PowerFlowSolution};
pub use reduction::{
    coi_frame_reduction, eliminate_network_nodes, form_hybrid_matrix, relative_asymmetry, CoiInterfaceMatrix,
    HybridInterfaceMatrix, ReducedAdmittance,
};

use crate::linalg::{ComplexValue, SingularMatrix};
use serde::{Deserialize, Serialize};

/// Series branch between two buses, with optional total line charging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub series_admittance: ComplexValue,
    /// Total charging susceptance, split evenly between both ends.
    pub charging_susceptance: f64,
}

impl Branch {
    pub fn new(from: usize, to: usize, series_admittance: ComplexValue) -> Self {
        Branch { from, to, series_admittance, charging_susceptance: 0.0 }
    }

    /// Branch from series impedance `r + jx` and total charging `b`.
    pub fn from_impedance(from: usize, to: usize, r: f64, x: f64, b: f64) -> Self {
        let y = ComplexValue::new(1.0, 0.0) / ComplexValue::new(r, x);
        Branch { from, to, series_admittance: y, charging_susceptance: b }
    }
}

/// SG placement: terminal bus and internal (transient) reactance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgConnection {
    pub bus: usize,
    pub reactance: f64,
}

/// Static study network. Bus indices are zero based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub bus_count: usize,
    pub branches: Vec<Branch>,
    /// Constant load admittance per bus (zero where absent).
    pub shunt_loads: Vec<ComplexValue>,
    pub sg_buses: Vec<SgConnection>,
    pub gfl_buses: Vec<usize>,
    pub base_mva: f64,
    pub nominal_frequency_hz: f64,
}

impl NetworkCase {
    pub fn new(bus_count: usize) -> Self {
        NetworkCase {
            bus_count,
            branches: Vec::new(),
            shunt_loads: vec![ComplexValue::new(0.0, 0.0); bus_count],
            sg_buses: Vec::new(),
            gfl_buses: Vec::new(),
            base_mva: 100.0,
            nominal_frequency_hz: 60.0,
        }
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.nominal_frequency_hz
    }

    /// Checks the structural invariants listed on [`NetworkError`].
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.bus_count == 0 {
            return Err(NetworkError::Empty);
        }
        if self.shunt_loads.len() != self.bus_count {
            return Err(NetworkError::LoadVectorLength { expected: self.bus_count, got: self.shunt_loads.len() });
        }
        for (k, b) in self.branches.iter().enumerate() {
            for bus in [b.from, b.to] {
                if bus >= self.bus_count {
                    return Err(NetworkError::BusOutOfRange { what: format!("branch {k}"), bus });
                }
            }
            if b.from == b.to {
                return Err(NetworkError::SelfLoop { branch: k, bus: b.from });
            }
            let y = b.series_admittance;
            if !y.re.is_finite() || !y.im.is_finite() {
                return Err(NetworkError::ZeroImpedance { branch: k });
            }
            if y.norm() == 0.0 {
                return Err(NetworkError::OpenBranch { branch: k });
            }
        }
        for (k, sg) in self.sg_buses.iter().enumerate() {
            if sg.bus >= self.bus_count {
                return Err(NetworkError::BusOutOfRange { what: format!("sg {k}"), bus: sg.bus });
            }
            if !(sg.reactance > 0.0) {
                return Err(NetworkError::NonPositiveReactance { sg: k, reactance: sg.reactance });
            }
        }
        for (k, &bus) in self.gfl_buses.iter().enumerate() {
            if bus >= self.bus_count {
                return Err(NetworkError::BusOutOfRange { what: format!("gfl {k}"), bus });
            }
            if self.sg_buses.iter().any(|s| s.bus == bus) {
                return Err(NetworkError::SharedBus { bus });
            }
            if self.gfl_buses[..k].contains(&bus) {
                return Err(NetworkError::SharedBus { bus });
            }
        }
        let isolated = self.disconnected_buses();
        if !isolated.is_empty() {
            return Err(NetworkError::Disconnected { buses: isolated });
        }
        Ok(())
    }

    /// Buses not reachable from bus 0 through branches.
    fn disconnected_buses(&self) -> Vec<usize> {
        let n = self.bus_count;
        let mut adj = vec![Vec::new(); n];
        for b in &self.branches {
            adj[b.from].push(b.to);
            adj[b.to].push(b.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        (0..n).filter(|&i| !seen[i]).collect()
    }

    /// Copy with an admittance increment added at one bus.
    pub fn with_load_step(&self, bus: usize, delta: ComplexValue) -> Self {
        let mut out = self.clone();
        out.shunt_loads[bus] += delta;
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("network has no buses")]
    Empty,
    #[error("load vector has {got} entries, expected {expected}")]
    LoadVectorLength { expected: usize, got: usize },
    #[error("{what} references bus {bus}, which is out of range")]
    BusOutOfRange { what: String, bus: usize },
    #[error("branch {branch} connects bus {bus} to itself")]
    SelfLoop { branch: usize, bus: usize },
    #[error("branch {branch} has zero impedance")]
    ZeroImpedance { branch: usize },
    #[error("branch {branch} has zero admittance")]
    OpenBranch { branch: usize },
    #[error("sg {sg} has non-positive internal reactance {reactance}")]
    NonPositiveReactance { sg: usize, reactance: f64 },
    #[error("bus {bus} hosts more than one generator")]
    SharedBus { bus: usize },
    #[error("network is disconnected; buses unreachable from bus 0: {buses:?}")]
    Disconnected { buses: Vec<usize> },
    #[error("no synchronous generator in the case")]
    NoSynchronousGenerator,
    #[error("{stage}: {source}")]
    Singular {
        stage: &'static str,
        #[source]
        source: SingularMatrix,
    },
    #[error("power flow: {0}")]
    PowerFlow(String),
}
