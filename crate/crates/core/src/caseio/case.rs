//! Case files: TOML, units in the field names, 1-based bus ids.
//!
//! Parsing goes through raw tables with optional fields so that every
//! default that gets filled in can be reported back. The resolved
//! [`CaseFile`] serializes with all fields explicit.

use super::CaseError;
use crate::gfl::GflParams;
use crate::network::Branch;
use crate::sg::GovernorParams;
use crate::sim::{initialize_system, GflSpec, LoadSpec, PowerSystem, SgControl, SgSpec, SystemSpec};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use toml::Spanned;

pub const DEFAULT_BASE_MVA: f64 = 100.0;
pub const DEFAULT_FREQUENCY_HZ: f64 = 60.0;
pub const DEFAULT_SLACK_TOLERANCE_PU: f64 = 1e-3;
pub const DEFAULT_GOVERNOR_DROOP_PU: f64 = 20.0;
pub const DEFAULT_GOVERNOR_TIME_CONSTANT_S: f64 = 2.0;
pub const DEFAULT_DC_VOLTAGE_PU: f64 = 1.0;
pub const DEFAULT_CURRENT_LIMIT_PU: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSection {
    pub name: String,
    pub base_mva: f64,
    pub nominal_frequency_hz: f64,
    /// Largest accepted gap between the slack unit's scheduled power and the
    /// power flow result.
    pub slack_tolerance_pu: f64,
    /// Field paths whose values are placeholders rather than sourced data.
    pub provisional: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusEntry {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchEntry {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Total line charging.
    pub b_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadEntry {
    pub bus: u32,
    pub p_pu: f64,
    pub q_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgControlKind {
    Slack,
    Pv,
}

/// All quantities on the system base except the governor droop, which is
/// on the machine base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgEntry {
    pub name: String,
    pub bus: u32,
    pub transient_reactance_pu: f64,
    pub inertia_h_s: f64,
    pub rated_power_pu: f64,
    pub governor_droop_pu: f64,
    pub governor_time_constant_s: f64,
    pub governor_enabled: bool,
    pub control: SgControlKind,
    pub voltage_setpoint_pu: f64,
    /// Required for `pv`; for `slack` the expected power, checked against
    /// the power flow.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_setpoint_pu: Option<f64>,
}

/// Rating and dispatch on the system base, control data on the converter
/// base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GflEntry {
    pub name: String,
    pub bus: u32,
    pub rated_power_pu: f64,
    pub dc_capacitance_pu: f64,
    pub dc_voltage_setpoint_pu: f64,
    pub kp_dc_pu: f64,
    pub ki_dc_pu_per_s: f64,
    pub kp_pll_pu: f64,
    pub ki_pll_pu_per_s: f64,
    pub current_limit_pu: f64,
    pub p_setpoint_pu: f64,
    pub q_setpoint_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseFile {
    pub system: SystemSection,
    #[serde(rename = "bus")]
    pub buses: Vec<BusEntry>,
    #[serde(rename = "branch")]
    pub branches: Vec<BranchEntry>,
    #[serde(rename = "load", skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadEntry>,
    #[serde(rename = "sg")]
    pub sgs: Vec<SgEntry>,
    #[serde(rename = "gfl", skip_serializing_if = "Vec::is_empty")]
    pub gfls: Vec<GflEntry>,
}

/// A field that was absent and got its default.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultedField {
    pub field: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCase {
    pub case: CaseFile,
    pub defaulted: Vec<DefaultedField>,
}

// ---------------------------------------------------------------------------
// raw schema

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    system: Option<Spanned<RawSystem>>,
    #[serde(default)]
    bus: Vec<Spanned<RawBus>>,
    #[serde(default)]
    branch: Vec<Spanned<RawBranch>>,
    #[serde(default)]
    load: Vec<Spanned<RawLoad>>,
    #[serde(default)]
    sg: Vec<Spanned<RawSg>>,
    #[serde(default)]
    gfl: Vec<Spanned<RawGfl>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    name: Option<String>,
    base_mva: Option<f64>,
    nominal_frequency_hz: Option<f64>,
    slack_tolerance_pu: Option<f64>,
    #[serde(default)]
    provisional: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: Option<u32>,
    name: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    from_bus: Option<u32>,
    to_bus: Option<u32>,
    r_pu: Option<f64>,
    x_pu: Option<f64>,
    b_pu: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    bus: Option<u32>,
    p_pu: Option<f64>,
    q_pu: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSg {
    name: Option<String>,
    bus: Option<u32>,
    transient_reactance_pu: Option<f64>,
    inertia_h_s: Option<f64>,
    rated_power_pu: Option<f64>,
    governor_droop_pu: Option<f64>,
    governor_time_constant_s: Option<f64>,
    governor_enabled: Option<bool>,
    control: Option<SgControlKind>,
    voltage_setpoint_pu: Option<f64>,
    p_setpoint_pu: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGfl {
    name: Option<String>,
    bus: Option<u32>,
    rated_power_pu: Option<f64>,
    dc_capacitance_pu: Option<f64>,
    dc_voltage_setpoint_pu: Option<f64>,
    kp_dc_pu: Option<f64>,
    ki_dc_pu_per_s: Option<f64>,
    kp_pll_pu: Option<f64>,
    ki_pll_pu_per_s: Option<f64>,
    current_limit_pu: Option<f64>,
    p_setpoint_pu: Option<f64>,
    q_setpoint_pu: Option<f64>,
}

/// Resolves one table's fields, remembering the table name and line for
/// error messages and recording defaults.
struct Fields<'a> {
    table: String,
    line: usize,
    defaulted: &'a mut Vec<DefaultedField>,
}

impl Fields<'_> {
    fn path(&self, field: &str) -> String {
        format!("{}.{field}", self.table)
    }

    fn required<T>(&self, field: &str, v: Option<T>) -> Result<T, CaseError> {
        v.ok_or_else(|| CaseError::Missing { field: self.path(field), line: self.line })
    }

    fn or_default<T: std::fmt::Debug>(&mut self, field: &str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.defaulted.push(DefaultedField { field: self.path(field), value: format!("{default:?}") });
            default
        })
    }

    fn invalid(&self, field: &str, message: impl Into<String>) -> CaseError {
        CaseError::Invalid { field: self.path(field), line: self.line, message: message.into() }
    }

    fn positive(&self, field: &str, v: f64) -> Result<f64, CaseError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(field, format!("must be positive, got {v}")))
        }
    }

    fn non_negative(&self, field: &str, v: f64) -> Result<f64, CaseError> {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(field, format!("must be non-negative, got {v}")))
        }
    }

    fn finite(&self, field: &str, v: f64) -> Result<f64, CaseError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(field, format!("must be finite, got {v}")))
        }
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_case(path: &Path) -> Result<ParsedCase, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_case_str(&text)
}

/// Parses, fills defaults, checks references and runs the power flow to
/// check the slack dispatch.
pub fn parse_case_str(text: &str) -> Result<ParsedCase, CaseError> {
    let raw: RawCase = toml::from_str(text).map_err(|e| CaseError::Syntax(e.to_string()))?;
    let mut defaulted = Vec::new();

    let (sys_raw, sys_line) = match raw.system {
        Some(s) => {
            let line = line_of(text, s.span().start);
            (Some(s.into_inner()), line)
        }
        None => (None, 1),
    };
    let system = {
        let mut f = Fields { table: "system".into(), line: sys_line, defaulted: &mut defaulted };
        let s = sys_raw.unwrap_or(RawSystem {
            name: None,
            base_mva: None,
            nominal_frequency_hz: None,
            slack_tolerance_pu: None,
            provisional: vec![],
        });
        let name = f.or_default("name", s.name, "case".to_string());
        let base_mva = f.or_default("base_mva", s.base_mva, DEFAULT_BASE_MVA);
        let nominal_frequency_hz = f.or_default("nominal_frequency_hz", s.nominal_frequency_hz, DEFAULT_FREQUENCY_HZ);
        let slack_tolerance_pu = f.or_default("slack_tolerance_pu", s.slack_tolerance_pu, DEFAULT_SLACK_TOLERANCE_PU);
        SystemSection {
            name,
            base_mva: f.positive("base_mva", base_mva)?,
            nominal_frequency_hz: f.positive("nominal_frequency_hz", nominal_frequency_hz)?,
            slack_tolerance_pu: f.positive("slack_tolerance_pu", slack_tolerance_pu)?,
            provisional: s.provisional,
        }
    };

    let mut buses = Vec::with_capacity(raw.bus.len());
    for (k, b) in raw.bus.into_iter().enumerate() {
        let line = line_of(text, b.span().start);
        let b = b.into_inner();
        let mut f = Fields { table: format!("bus[{k}]"), line, defaulted: &mut defaulted };
        let id = f.required("id", b.id)?;
        let name = f.or_default("name", b.name, format!("bus{id}"));
        buses.push(BusEntry { id, name });
    }

    let mut branches = Vec::with_capacity(raw.branch.len());
    for (k, b) in raw.branch.into_iter().enumerate() {
        let line = line_of(text, b.span().start);
        let b = b.into_inner();
        let mut f = Fields { table: format!("branch[{k}]"), line, defaulted: &mut defaulted };
        let from_bus = f.required("from_bus", b.from_bus)?;
        let to_bus = f.required("to_bus", b.to_bus)?;
        let x_pu = f.required("x_pu", b.x_pu)?;
        let r_pu = f.or_default("r_pu", b.r_pu, 0.0);
        let b_pu = f.or_default("b_pu", b.b_pu, 0.0);
        if r_pu == 0.0 && x_pu == 0.0 {
            return Err(f.invalid("x_pu", "branch has zero impedance"));
        }
        branches.push(BranchEntry {
            from_bus,
            to_bus,
            r_pu: f.non_negative("r_pu", r_pu)?,
            x_pu: f.finite("x_pu", x_pu)?,
            b_pu: f.finite("b_pu", b_pu)?,
        });
    }

    let mut loads = Vec::with_capacity(raw.load.len());
    for (k, l) in raw.load.into_iter().enumerate() {
        let line = line_of(text, l.span().start);
        let l = l.into_inner();
        let mut f = Fields { table: format!("load[{k}]"), line, defaulted: &mut defaulted };
        let bus = f.required("bus", l.bus)?;
        let p_pu = f.required("p_pu", l.p_pu)?;
        let q_pu = f.or_default("q_pu", l.q_pu, 0.0);
        loads.push(LoadEntry { bus, p_pu: f.finite("p_pu", p_pu)?, q_pu: f.finite("q_pu", q_pu)? });
    }

    let mut sgs = Vec::with_capacity(raw.sg.len());
    for (k, g) in raw.sg.into_iter().enumerate() {
        let line = line_of(text, g.span().start);
        let g = g.into_inner();
        let mut f = Fields { table: format!("sg[{k}]"), line, defaulted: &mut defaulted };
        let name = f.or_default("name", g.name, format!("sg{}", k + 1));
        f.table = format!("sg.{name}");
        let bus = f.required("bus", g.bus)?;
        let transient_reactance_pu = f.required("transient_reactance_pu", g.transient_reactance_pu)?;
        let inertia_h_s = f.required("inertia_h_s", g.inertia_h_s)?;
        let rated_power_pu = f.required("rated_power_pu", g.rated_power_pu)?;
        let control = f.required("control", g.control)?;
        let voltage_setpoint_pu = f.required("voltage_setpoint_pu", g.voltage_setpoint_pu)?;
        if control == SgControlKind::Pv && g.p_setpoint_pu.is_none() {
            return Err(CaseError::Missing { field: f.path("p_setpoint_pu"), line });
        }
        let governor_droop_pu = f.or_default("governor_droop_pu", g.governor_droop_pu, DEFAULT_GOVERNOR_DROOP_PU);
        let governor_time_constant_s =
            f.or_default("governor_time_constant_s", g.governor_time_constant_s, DEFAULT_GOVERNOR_TIME_CONSTANT_S);
        let governor_enabled = f.or_default("governor_enabled", g.governor_enabled, true);
        sgs.push(SgEntry {
            bus,
            transient_reactance_pu: f.non_negative("transient_reactance_pu", transient_reactance_pu)?,
            inertia_h_s: f.positive("inertia_h_s", inertia_h_s)?,
            rated_power_pu: f.positive("rated_power_pu", rated_power_pu)?,
            governor_droop_pu: f.non_negative("governor_droop_pu", governor_droop_pu)?,
            governor_time_constant_s: f.positive("governor_time_constant_s", governor_time_constant_s)?,
            governor_enabled,
            control,
            voltage_setpoint_pu: f.positive("voltage_setpoint_pu", voltage_setpoint_pu)?,
            p_setpoint_pu: g.p_setpoint_pu.map(|p| f.finite("p_setpoint_pu", p)).transpose()?,
            name,
        });
    }

    let mut gfls = Vec::with_capacity(raw.gfl.len());
    for (k, c) in raw.gfl.into_iter().enumerate() {
        let line = line_of(text, c.span().start);
        let c = c.into_inner();
        let mut f = Fields { table: format!("gfl[{k}]"), line, defaulted: &mut defaulted };
        let name = f.or_default("name", c.name, format!("gfl{}", k + 1));
        f.table = format!("gfl.{name}");
        let bus = f.required("bus", c.bus)?;
        let rated_power_pu = f.required("rated_power_pu", c.rated_power_pu)?;
        let dc_capacitance_pu = f.required("dc_capacitance_pu", c.dc_capacitance_pu)?;
        let kp_dc_pu = f.required("kp_dc_pu", c.kp_dc_pu)?;
        let ki_dc_pu_per_s = f.required("ki_dc_pu_per_s", c.ki_dc_pu_per_s)?;
        let kp_pll_pu = f.required("kp_pll_pu", c.kp_pll_pu)?;
        let ki_pll_pu_per_s = f.required("ki_pll_pu_per_s", c.ki_pll_pu_per_s)?;
        let p_setpoint_pu = f.required("p_setpoint_pu", c.p_setpoint_pu)?;
        let q_setpoint_pu = f.or_default("q_setpoint_pu", c.q_setpoint_pu, 0.0);
        let dc_voltage_setpoint_pu = f.or_default("dc_voltage_setpoint_pu", c.dc_voltage_setpoint_pu, DEFAULT_DC_VOLTAGE_PU);
        let current_limit_pu = f.or_default("current_limit_pu", c.current_limit_pu, DEFAULT_CURRENT_LIMIT_PU);
        gfls.push(GflEntry {
            bus,
            rated_power_pu: f.positive("rated_power_pu", rated_power_pu)?,
            dc_capacitance_pu: f.positive("dc_capacitance_pu", dc_capacitance_pu)?,
            dc_voltage_setpoint_pu: f.positive("dc_voltage_setpoint_pu", dc_voltage_setpoint_pu)?,
            kp_dc_pu: f.positive("kp_dc_pu", kp_dc_pu)?,
            ki_dc_pu_per_s: f.positive("ki_dc_pu_per_s", ki_dc_pu_per_s)?,
            kp_pll_pu: f.positive("kp_pll_pu", kp_pll_pu)?,
            ki_pll_pu_per_s: f.positive("ki_pll_pu_per_s", ki_pll_pu_per_s)?,
            current_limit_pu: f.positive("current_limit_pu", current_limit_pu)?,
            p_setpoint_pu: f.finite("p_setpoint_pu", p_setpoint_pu)?,
            q_setpoint_pu: f.finite("q_setpoint_pu", q_setpoint_pu)?,
            name,
        });
    }

    let case = CaseFile { system, buses, branches, loads, sgs, gfls };
    case.check_references()?;
    case.check_dispatch()?;
    Ok(ParsedCase { case, defaulted })
}

impl CaseFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("case file serializes")
    }

    /// Bus id to 0-based index.
    pub fn bus_index(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn bus_id(&self, index: usize) -> Option<u32> {
        self.buses.get(index).map(|b| b.id)
    }

    fn check_references(&self) -> Result<(), CaseError> {
        if self.buses.is_empty() {
            return Err(CaseError::Missing { field: "bus".into(), line: 1 });
        }
        let mut seen = HashMap::new();
        for (k, b) in self.buses.iter().enumerate() {
            if seen.insert(b.id, k).is_some() {
                return Err(CaseError::Invalid {
                    field: format!("bus[{k}].id"),
                    line: 0,
                    message: format!("bus id {} appears twice", b.id),
                });
            }
        }
        let known = |field: String, bus: u32| if seen.contains_key(&bus) { Ok(()) } else { Err(CaseError::UnknownBus { field, bus }) };
        for (k, b) in self.branches.iter().enumerate() {
            known(format!("branch[{k}].from_bus"), b.from_bus)?;
            known(format!("branch[{k}].to_bus"), b.to_bus)?;
            if b.from_bus == b.to_bus {
                return Err(CaseError::Invalid {
                    field: format!("branch[{k}].to_bus"),
                    line: 0,
                    message: "branch connects a bus to itself".into(),
                });
            }
        }
        for (k, l) in self.loads.iter().enumerate() {
            known(format!("load[{k}].bus"), l.bus)?;
        }
        for g in &self.sgs {
            known(format!("sg.{}.bus", g.name), g.bus)?;
        }
        for c in &self.gfls {
            known(format!("gfl.{}.bus", c.name), c.bus)?;
        }
        let slacks = self.sgs.iter().filter(|g| g.control == SgControlKind::Slack).count();
        if slacks != 1 {
            return Err(CaseError::Invalid {
                field: "sg.control".into(),
                line: 0,
                message: format!("need exactly one slack machine, found {slacks}"),
            });
        }
        let mut names = HashMap::new();
        for n in self.sgs.iter().map(|g| &g.name).chain(self.gfls.iter().map(|c| &c.name)) {
            if names.insert(n.as_str(), ()).is_some() {
                return Err(CaseError::Invalid {
                    field: "name".into(),
                    line: 0,
                    message: format!("generator name {n:?} is used twice"),
                });
            }
        }
        Ok(())
    }

    /// Power flow; the slack machine's generation must match its schedule
    /// when one is given.
    fn check_dispatch(&self) -> Result<(), CaseError> {
        let sys = self.initialize()?;
        for (k, g) in self.sgs.iter().enumerate() {
            if let (SgControlKind::Slack, Some(p)) = (g.control, g.p_setpoint_pu) {
                let solved = sys.sg_generation[k].re;
                if (solved - p).abs() > self.system.slack_tolerance_pu {
                    return Err(CaseError::Dispatch {
                        name: g.name.clone(),
                        scheduled: p,
                        solved,
                        tolerance: self.system.slack_tolerance_pu,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_system_spec(&self) -> Result<SystemSpec, CaseError> {
        let index = self.bus_index();
        let at = |field: String, bus: u32| index.get(&bus).copied().ok_or(CaseError::UnknownBus { field, bus });
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(k, b)| {
                Ok(Branch::from_impedance(
                    at(format!("branch[{k}].from_bus"), b.from_bus)?,
                    at(format!("branch[{k}].to_bus"), b.to_bus)?,
                    b.r_pu,
                    b.x_pu,
                    b.b_pu,
                ))
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let loads = self
            .loads
            .iter()
            .enumerate()
            .map(|(k, l)| Ok(LoadSpec { bus: at(format!("load[{k}].bus"), l.bus)?, p: l.p_pu, q: l.q_pu }))
            .collect::<Result<Vec<_>, CaseError>>()?;
        let sgs = self
            .sgs
            .iter()
            .map(|g| {
                Ok(SgSpec {
                    bus: at(format!("sg.{}.bus", g.name), g.bus)?,
                    transient_reactance: g.transient_reactance_pu,
                    inertia_h: g.inertia_h_s,
                    rated_power: g.rated_power_pu,
                    governor: GovernorParams {
                        droop_gain: g.governor_droop_pu,
                        time_constant_s: g.governor_time_constant_s,
                        enabled: g.governor_enabled,
                    },
                    control: match g.control {
                        SgControlKind::Slack => SgControl::Slack { voltage: g.voltage_setpoint_pu },
                        SgControlKind::Pv => SgControl::Pv {
                            p: g.p_setpoint_pu.ok_or_else(|| CaseError::Missing {
                                field: format!("sg.{}.p_setpoint_pu", g.name),
                                line: 0,
                            })?,
                            voltage: g.voltage_setpoint_pu,
                        },
                    },
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let gfls = self
            .gfls
            .iter()
            .map(|c| {
                Ok(GflSpec {
                    bus: at(format!("gfl.{}.bus", c.name), c.bus)?,
                    params: GflParams {
                        dc_capacitance: c.dc_capacitance_pu,
                        dc_voltage_setpoint: c.dc_voltage_setpoint_pu,
                        kp_dc: c.kp_dc_pu,
                        ki_dc: c.ki_dc_pu_per_s,
                        kp_pll: c.kp_pll_pu,
                        ki_pll: c.ki_pll_pu_per_s,
                        rated_power: c.rated_power_pu,
                        current_limit: c.current_limit_pu,
                    },
                    p: c.p_setpoint_pu,
                    q: c.q_setpoint_pu,
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        Ok(SystemSpec {
            bus_count: self.buses.len(),
            branches,
            loads,
            sgs,
            gfls,
            base_mva: self.system.base_mva,
            nominal_frequency_hz: self.system.nominal_frequency_hz,
        })
    }

    pub fn initialize(&self) -> Result<PowerSystem, CaseError> {
        Ok(initialize_system(&self.to_system_spec()?)?)
    }

    pub fn gfl_index(&self, name: &str) -> Option<usize> {
        self.gfls.iter().position(|c| c.name == name)
    }
}
