//! System description and equilibrium initialization.
//!
//! The power flow treats loads as constant power; at the solved voltages each
//! load becomes the admittance `(P − jQ) / |V|²`, which is what every model
//! uses afterwards. SG EMFs follow from `E = V + j x'd I`.

use super::SimError;
use crate::gfl::{
    assemble_transfer_functions, extract_equivalents, linearization_coefficients, realize_from_equivalent,
    solve_operating_point, GflEquivalent, GflLinearModel, GflOperatingPoint, GflParams, LinearizationCoeffs,
    TransferFunctions,
};
use crate::linalg::{ComplexValue, Phasor};
use crate::network::{solve_power_flow, Branch, BusKind, NetworkCase, PowerFlowBus, SgConnection};
use crate::sg::{GovernorParams, SgParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SgControl {
    Slack { voltage: f64 },
    Pv { p: f64, voltage: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgSpec {
    pub bus: usize,
    pub transient_reactance: f64,
    pub inertia_h: f64,
    pub rated_power: f64,
    pub governor: GovernorParams,
    pub control: SgControl,
}

/// GFL with its dispatch on the system base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflSpec {
    pub bus: usize,
    pub params: GflParams,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub bus_count: usize,
    pub branches: Vec<Branch>,
    pub loads: Vec<LoadSpec>,
    pub sgs: Vec<SgSpec>,
    pub gfls: Vec<GflSpec>,
    pub base_mva: f64,
    pub nominal_frequency_hz: f64,
}

impl SystemSpec {
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.nominal_frequency_hz
    }
}

/// One converter with everything the models need at its operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct GflUnit {
    pub bus: usize,
    pub params: GflParams,
    /// Converter base.
    pub op: GflOperatingPoint,
    pub coeffs: LinearizationCoeffs,
    pub tfs: TransferFunctions,
    pub equivalent: GflEquivalent,
    pub linear: GflLinearModel,
}

impl GflUnit {
    /// `p`, `q` on the system base.
    pub fn new(bus: usize, params: GflParams, terminal: Phasor, p: f64, q: f64, omega0: f64) -> Result<Self, SimError> {
        let op = solve_operating_point(&params, terminal, p / params.rated_power, q / params.rated_power)?;
        let coeffs = linearization_coefficients(&op)?;
        let tfs = assemble_transfer_functions(&params, &coeffs)?;
        let equivalent = extract_equivalents(&tfs, &coeffs, omega0)?;
        let linear = realize_from_equivalent(&tfs, &coeffs, &equivalent, omega0)?;
        Ok(GflUnit { bus, params, op, coeffs, tfs, equivalent, linear })
    }

    /// Injected current at the operating point, system base.
    pub fn initial_current(&self) -> ComplexValue {
        self.op.current().to_complex() * self.params.rated_power
    }
}

/// Initialized system: constant-admittance loads, SG EMFs and angles, GFL
/// operating points.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    pub network: NetworkCase,
    pub sgs: Vec<SgParams>,
    pub gfls: Vec<GflUnit>,
    pub bus_voltages: Vec<ComplexValue>,
    /// Complex generation of each SG at its terminal, system base.
    pub sg_generation: Vec<ComplexValue>,
    pub power_flow_iterations: usize,
}

impl PowerSystem {
    pub fn omega0(&self) -> f64 {
        self.network.omega0()
    }

    pub fn sg_emfs(&self) -> Vec<ComplexValue> {
        self.sgs.iter().map(|s| ComplexValue::from_polar(s.emf_magnitude, s.initial_angle)).collect()
    }

    pub fn gfl_currents(&self) -> Vec<ComplexValue> {
        self.gfls.iter().map(GflUnit::initial_current).collect()
    }
}

/// `E = U + j X I`: voltage behind a reactance for a terminal phasor and
/// the current leaving the internal node.
pub fn internal_voltage(terminal: ComplexValue, current: ComplexValue, reactance: f64) -> ComplexValue {
    terminal + ComplexValue::new(0.0, reactance) * current
}

pub const POWER_FLOW_TOL: f64 = 1e-11;
pub const POWER_FLOW_MAX_ITER: usize = 50;

/// Solves the power flow and derives every model's initial data.
pub fn initialize_system(spec: &SystemSpec) -> Result<PowerSystem, SimError> {
    let n = spec.bus_count;
    let mut buses: Vec<PowerFlowBus> = (0..n).map(|_| PowerFlowBus::load(0.0, 0.0)).collect();
    for l in &spec.loads {
        let b = buses.get_mut(l.bus).ok_or_else(|| SimError::Setup(format!("load at missing bus {}", l.bus)))?;
        b.p_load += l.p;
        b.q_load += l.q;
    }
    for (k, g) in spec.sgs.iter().enumerate() {
        let b = buses.get_mut(g.bus).ok_or_else(|| SimError::Setup(format!("sg {k} at missing bus {}", g.bus)))?;
        if b.kind != BusKind::Pq || b.p_gen != 0.0 {
            return Err(SimError::Setup(format!("bus {} hosts more than one generator", g.bus)));
        }
        match g.control {
            SgControl::Slack { voltage } => {
                b.kind = BusKind::Slack;
                b.v_set = voltage;
            }
            SgControl::Pv { p, voltage } => {
                b.kind = BusKind::Pv;
                b.p_gen = p;
                b.v_set = voltage;
            }
        }
    }
    for (k, f) in spec.gfls.iter().enumerate() {
        let b = buses.get_mut(f.bus).ok_or_else(|| SimError::Setup(format!("gfl {k} at missing bus {}", f.bus)))?;
        if b.kind != BusKind::Pq {
            return Err(SimError::Setup(format!("bus {} hosts more than one generator", f.bus)));
        }
        b.p_gen += f.p;
        b.q_gen += f.q;
    }

    let mut network = NetworkCase::new(n);
    network.branches = spec.branches.clone();
    network.base_mva = spec.base_mva;
    network.nominal_frequency_hz = spec.nominal_frequency_hz;
    network.sg_buses = spec.sgs.iter().map(|g| SgConnection { bus: g.bus, reactance: g.transient_reactance }).collect();
    network.gfl_buses = spec.gfls.iter().map(|f| f.bus).collect();
    network.validate()?;

    let pf = solve_power_flow(&spec.branches, &buses, POWER_FLOW_TOL, POWER_FLOW_MAX_ITER)?;
    for l in &spec.loads {
        let v2 = pf.voltage[l.bus].norm_sqr();
        network.shunt_loads[l.bus] += ComplexValue::new(l.p, -l.q) / v2;
    }

    let mut sgs = Vec::with_capacity(spec.sgs.len());
    let mut sg_generation = Vec::with_capacity(spec.sgs.len());
    for g in &spec.sgs {
        let v = pf.voltage[g.bus];
        let s = pf.generation(g.bus, &buses);
        let i = (s / v).conj();
        let e = internal_voltage(v, i, g.transient_reactance);
        let params = SgParams {
            inertia_h: g.inertia_h,
            rated_power_s: g.rated_power,
            emf_magnitude: e.norm(),
            governor: g.governor,
            initial_angle: e.arg(),
            initial_mech_power: s.re,
        };
        params.validate()?;
        sgs.push(params);
        sg_generation.push(s);
    }

    let omega0 = spec.omega0();
    let gfls = spec
        .gfls
        .iter()
        .map(|f| GflUnit::new(f.bus, f.params, Phasor::from_complex(pf.voltage[f.bus]), f.p, f.q, omega0))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PowerSystem { network, sgs, gfls, bus_voltages: pf.voltage, sg_generation, power_flow_iterations: pf.iterations })
}
