//! Parameter sweeps over GFL equivalents and COI metrics, and the Table I
//! sensitivity matrix.

use super::metrics::frequency_metrics;
use super::AnalysisError;
use crate::exec;
use crate::gfl::{
    assemble_transfer_functions, extract_equivalents, linearization_coefficients, solve_operating_point, GflEquivalent,
    GflError, GflParams,
};
use crate::linalg::Phasor;
use crate::sim::{initialize_system, simulate_coi, Disturbance, SimConfig, SystemSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParameter {
    /// Active power dispatch.
    OpP,
    /// Reactive power dispatch.
    OpQ,
    /// Terminal voltage magnitude.
    OpU,
    PllKp,
    PllKi,
    DcKp,
    DcKi,
    /// Common factor on both DC gains.
    DcScale,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 8] = [
        SweepParameter::OpP,
        SweepParameter::OpQ,
        SweepParameter::OpU,
        SweepParameter::PllKp,
        SweepParameter::PllKi,
        SweepParameter::DcKp,
        SweepParameter::DcKi,
        SweepParameter::DcScale,
    ];

    pub fn path(self) -> &'static str {
        match self {
            SweepParameter::OpP => "op.p",
            SweepParameter::OpQ => "op.q",
            SweepParameter::OpU => "op.u",
            SweepParameter::PllKp => "pll.kp",
            SweepParameter::PllKi => "pll.ki",
            SweepParameter::DcKp => "dc.kp",
            SweepParameter::DcKi => "dc.ki",
            SweepParameter::DcScale => "dc.scale",
        }
    }

    pub fn parse(path: &str) -> Result<Self, AnalysisError> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.path() == path.trim())
            .ok_or_else(|| AnalysisError::UnknownParameter(path.trim().to_string()))
    }

    fn apply_to_params(self, p: &mut GflParams, v: f64) -> bool {
        match self {
            SweepParameter::PllKp => p.kp_pll = v,
            SweepParameter::PllKi => p.ki_pll = v,
            SweepParameter::DcKp => p.kp_dc = v,
            SweepParameter::DcKi => p.ki_dc = v,
            SweepParameter::DcScale => {
                p.kp_dc *= v;
                p.ki_dc *= v;
            }
            _ => return false,
        }
        true
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.path())
    }
}

/// Quantities recorded per sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    H,
    HId,
    HPll,
    L,
    LId,
    LPll,
    CPi,
    OscHz,
    /// COI RoCoF of the proposed model, system sweeps only.
    Rocof,
    /// COI nadir of the proposed model, system sweeps only.
    Nadir,
}

impl Quantity {
    pub const EQUIVALENT: [Quantity; 8] =
        [Quantity::H, Quantity::HId, Quantity::HPll, Quantity::L, Quantity::LId, Quantity::LPll, Quantity::CPi, Quantity::OscHz];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::H => "h_f_s",
            Quantity::HId => "h_f_id_s",
            Quantity::HPll => "h_f_pll_s",
            Quantity::L => "l_f_pu",
            Quantity::LId => "l_f_id_pu",
            Quantity::LPll => "l_f_pll_pu",
            Quantity::CPi => "c_pi",
            Quantity::OscHz => "osc_hz",
            Quantity::Rocof => "rocof_pu_per_s",
            Quantity::Nadir => "nadir_pu",
        }
    }

    fn of(self, eq: &GflEquivalent) -> Option<f64> {
        match self {
            Quantity::H => Some(eq.h),
            Quantity::HId => Some(eq.h_id),
            Quantity::HPll => Some(eq.h_pll),
            Quantity::L => Some(eq.l),
            Quantity::LId => Some(eq.l_id),
            Quantity::LPll => Some(eq.l_pll),
            Quantity::CPi => Some(eq.c_pi),
            Quantity::OscHz => eq.osc_hz,
            Quantity::Rocof | Quantity::Nadir => None,
        }
    }
}

/// One converter at a fixed terminal voltage; powers on the converter base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentBase {
    pub params: GflParams,
    pub p: f64,
    pub q: f64,
    pub u: f64,
    pub omega0: f64,
}

impl EquivalentBase {
    pub fn with(&self, param: SweepParameter, v: f64) -> EquivalentBase {
        let mut b = *self;
        if !param.apply_to_params(&mut b.params, v) {
            match param {
                SweepParameter::OpP => b.p = v,
                SweepParameter::OpQ => b.q = v,
                SweepParameter::OpU => b.u = v,
                _ => unreachable!(),
            }
        }
        b
    }

    pub fn value(&self, param: SweepParameter) -> f64 {
        match param {
            SweepParameter::OpP => self.p,
            SweepParameter::OpQ => self.q,
            SweepParameter::OpU => self.u,
            SweepParameter::PllKp => self.params.kp_pll,
            SweepParameter::PllKi => self.params.ki_pll,
            SweepParameter::DcKp => self.params.kp_dc,
            SweepParameter::DcKi => self.params.ki_dc,
            SweepParameter::DcScale => 1.0,
        }
    }

    pub fn equivalent(&self) -> Result<GflEquivalent, GflError> {
        let op = solve_operating_point(&self.params, Phasor::new(self.u, 0.0), self.p, self.q)?;
        let c = linearization_coefficients(&op)?;
        let tfs = assemble_transfer_functions(&self.params, &c)?;
        extract_equivalents(&tfs, &c, self.omega0)
    }
}

/// A whole system under a load step; the swept converter is `gfl`. Powers on
/// the system base.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBase {
    pub spec: SystemSpec,
    pub gfl: usize,
    pub disturbance: Disturbance,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepBase {
    Equivalent(EquivalentBase),
    System(Box<SystemBase>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    /// Parses `path=v1,v2,...`.
    pub fn parse(s: &str) -> Result<Self, AnalysisError> {
        let (path, grid) = s.split_once('=').ok_or_else(|| AnalysisError::Spec(format!("expected path=v1,v2,..., got {s:?}")))?;
        let parameter = SweepParameter::parse(path)?;
        let values = grid
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| AnalysisError::Spec(format!("bad sweep value {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = SweepSpec { parameter, values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.values.is_empty() {
            return Err(AnalysisError::Spec("sweep grid is empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::Spec("sweep grid has non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
    /// Fewer than two valid values.
    Undetermined,
}

/// Strict monotonicity of `values` in grid order; changes within `tol`
/// (relative) count as equal.
pub fn trend(values: &[f64], tol: f64) -> Trend {
    if values.len() < 2 {
        return Trend::Undetermined;
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let steps: Vec<i8> = values
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d.abs() <= tol * scale {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    if steps.iter().all(|&s| s == 0) {
        Trend::Constant
    } else if steps.iter().all(|&s| s == 1) {
        Trend::Increasing
    } else if steps.iter().all(|&s| s == -1) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// One entry per quantity; `None` when undefined at this point.
    pub values: Vec<Option<f64>>,
    /// Set when the operating point or the simulation failed.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub quantities: Vec<Quantity>,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<Trend>,
}

impl SweepTable {
    pub fn column(&self, q: Quantity) -> Option<Vec<Option<f64>>> {
        let k = self.quantities.iter().position(|&x| x == q)?;
        Some(self.rows.iter().map(|r| if r.is_valid() { r.values[k] } else { None }).collect())
    }

    pub fn trend_of(&self, q: Quantity) -> Option<Trend> {
        self.quantities.iter().position(|&x| x == q).map(|k| self.trends[k])
    }
}

/// Relative tolerance below which neighbouring sweep values count as equal.
pub const TREND_TOL: f64 = 1e-10;

fn equivalent_row(base: &EquivalentBase, param: SweepParameter, v: f64) -> SweepRow {
    match base.with(param, v).equivalent() {
        Ok(eq) => SweepRow { value: v, values: Quantity::EQUIVALENT.iter().map(|q| q.of(&eq)).collect(), error: None },
        Err(e) => SweepRow { value: v, values: vec![None; Quantity::EQUIVALENT.len()], error: Some(e.to_string()) },
    }
}

fn system_row(base: &SystemBase, param: SweepParameter, v: f64) -> SweepRow {
    let n = Quantity::EQUIVALENT.len() + 2;
    let fail = |e: String| SweepRow { value: v, values: vec![None; n], error: Some(e) };
    let mut spec = base.spec.clone();
    let gfl = &mut spec.gfls[base.gfl];
    if !param.apply_to_params(&mut gfl.params, v) {
        match param {
            SweepParameter::OpP => gfl.p = v,
            SweepParameter::OpQ => gfl.q = v,
            _ => unreachable!("rejected before the sweep"),
        }
    }
    let sys = match initialize_system(&spec) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let run = match simulate_coi(&sys, Some(&base.disturbance), &base.config) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let w = run.signal("omega_coi").expect("coi models report omega_coi");
    let m = match frequency_metrics(&run.time, w, run.disturbance_index) {
        Ok(m) => m,
        Err(e) => return fail(e.to_string()),
    };
    let eq = &sys.gfls[base.gfl].equivalent;
    let mut values: Vec<Option<f64>> = Quantity::EQUIVALENT.iter().map(|q| q.of(eq)).collect();
    values.push(Some(m.max_rocof));
    values.push(Some(m.nadir));
    SweepRow { value: v, values, error: None }
}

/// One row per grid value, rows evaluated in parallel. Failing rows are
/// kept and marked; trends use the valid rows only.
pub fn run_sweep(spec: &SweepSpec, base: &SweepBase) -> Result<SweepTable, AnalysisError> {
    spec.validate()?;
    let p = spec.parameter;
    let (quantities, rows) = match base {
        SweepBase::Equivalent(b) => (Quantity::EQUIVALENT.to_vec(), exec::map(&spec.values, |&v| equivalent_row(b, p, v))),
        SweepBase::System(b) => {
            if p == SweepParameter::OpU {
                return Err(AnalysisError::UnknownParameter(
                    "op.u is an outcome of the power flow in a system sweep; sweep the SG voltage setpoints instead".into(),
                ));
            }
            if b.gfl >= b.spec.gfls.len() {
                return Err(AnalysisError::Spec(format!("system has no gfl {}", b.gfl)));
            }
            let mut q = Quantity::EQUIVALENT.to_vec();
            q.extend([Quantity::Rocof, Quantity::Nadir]);
            (q, exec::map(&spec.values, |&v| system_row(b, p, v)))
        }
    };
    let trends = (0..quantities.len())
        .map(|k| {
            let col: Option<Vec<f64>> = rows.iter().filter(|r| r.is_valid()).map(|r| r.values[k]).collect();
            col.map_or(Trend::Undetermined, |c| trend(&c, TREND_TOL))
        })
        .collect();
    Ok(SweepTable { parameter: p, quantities, rows, trends })
}

// ---------------------------------------------------------------------------
// Table I

/// Rows of the impact-factor table, plus the oscillation frequency that its
/// footnote singles out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableItem {
    HId,
    LId,
    CPi,
    HPll,
    /// All coefficients of the PLL equivalent governor.
    JPll,
    LPll,
    OscHz,
}

impl TableItem {
    pub fn name(self) -> &'static str {
        match self {
            TableItem::HId => "H_F_Id",
            TableItem::LId => "L_F_Id",
            TableItem::CPi => "c_Pi",
            TableItem::HPll => "H_F_Pll",
            TableItem::JPll => "J_F_Pll",
            TableItem::LPll => "L_F_Pll",
            TableItem::OscHz => "omega_Osc",
        }
    }

    fn values(self, eq: &GflEquivalent) -> Vec<f64> {
        match self {
            TableItem::HId => vec![eq.h_id],
            TableItem::LId => vec![eq.l_id],
            TableItem::CPi => vec![eq.c_pi],
            TableItem::HPll => vec![eq.h_pll],
            TableItem::JPll => eq.governor_coefficients.map(|g| vec![g.a2, g.a1, g.a0, g.b1, g.b0]).unwrap_or_default(),
            TableItem::LPll => vec![eq.l_pll],
            TableItem::OscHz => eq.osc_hz.into_iter().collect(),
        }
    }
}

/// Columns of the table in print order.
pub const TABLE_I_PARAMETERS: [SweepParameter; 7] = [
    SweepParameter::OpP,
    SweepParameter::OpQ,
    SweepParameter::OpU,
    SweepParameter::PllKp,
    SweepParameter::PllKi,
    SweepParameter::DcKp,
    SweepParameter::DcKi,
];

/// Marked cells as printed. The starred cells of the governor row are
/// marked; the oscillation row is the footnote: every unstarred governor
/// column.
pub const TABLE_I: [(TableItem, [bool; 7]); 7] = [
    (TableItem::HId, [false, false, false, false, false, false, true]),
    (TableItem::LId, [false, false, false, false, false, true, false]),
    (TableItem::CPi, [true, true, false, false, false, false, false]),
    (TableItem::HPll, [true, true, true, true, true, true, false]),
    (TableItem::JPll, [true, true, true, true, true, true, true]),
    (TableItem::LPll, [true, true, false, true, false, false, false]),
    (TableItem::OscHz, [false, false, true, true, true, true, true]),
];

/// Below this relative change a cell counts as blank.
pub const ZERO_SENSITIVITY: f64 = 1e-10;
/// Above this relative change a cell counts as marked.
pub const NONZERO_SENSITIVITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensitivity {
    Zero,
    Nonzero,
    /// Between the two thresholds.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub item: TableItem,
    pub parameter: SweepParameter,
    /// Largest relative change over the two-sided perturbation.
    pub relative_change: f64,
    pub observed: Sensitivity,
    pub marked: bool,
}

impl SensitivityCell {
    pub fn agrees(&self) -> bool {
        match self.observed {
            Sensitivity::Zero => !self.marked,
            Sensitivity::Nonzero => self.marked,
            Sensitivity::Ambiguous => false,
        }
    }
}

fn relative_change(base: &[f64], other: &[f64]) -> f64 {
    let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    base.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Perturbs every Table I parameter by `±rel_step` around `base` and
/// classifies the change of every item. Cells are evaluated in parallel.
pub fn table_i_sensitivity(base: &EquivalentBase, rel_step: f64) -> Result<Vec<SensitivityCell>, AnalysisError> {
    if !(rel_step > 0.0 && rel_step < 1.0) {
        return Err(AnalysisError::Spec(format!("relative step must be in (0, 1), got {rel_step}")));
    }
    let eq0 = base.equivalent()?;
    let perturbed: Vec<(SweepParameter, f64)> =
        TABLE_I_PARAMETERS.iter().flat_map(|&p| [(p, 1.0 - rel_step), (p, 1.0 + rel_step)]).collect();
    let evals = exec::map(&perturbed, |&(p, f)| base.with(p, base.value(p) * f).equivalent());
    let mut cells = Vec::new();
    for (item, marks) in TABLE_I {
        let v0 = item.values(&eq0);
        for (c, &param) in TABLE_I_PARAMETERS.iter().enumerate() {
            let mut change: f64 = 0.0;
            for side in 0..2 {
                let eq = evals[2 * c + side].as_ref().map_err(|e| AnalysisError::Gfl(e.clone()))?;
                let v = item.values(eq);
                if v.len() != v0.len() || v0.is_empty() {
                    return Err(AnalysisError::Spec(format!("{} is undefined near the base point", item.name())));
                }
                change = change.max(relative_change(&v0, &v));
            }
            let observed = if change <= ZERO_SENSITIVITY {
                Sensitivity::Zero
            } else if change > NONZERO_SENSITIVITY {
                Sensitivity::Nonzero
            } else {
                Sensitivity::Ambiguous
            };
            cells.push(SensitivityCell { item, parameter: param, relative_change: change, observed, marked: marks[c] });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn wecc_base() -> EquivalentBase {
        EquivalentBase {
            params: GflParams {
                dc_capacitance: 0.049,
                dc_voltage_setpoint: 1.0,
                kp_dc: 0.11,
                ki_dc: 2.75,
                kp_pll: 6.0,
                ki_pll: 140.0,
                rated_power: 1.95,
                current_limit: 1.5,
            },
            p: 0.4358,
            q: 0.2,
            u: 1.0,
            omega0: 2.0 * PI * 60.0,
        }
    }

    #[test]
    fn parses_paths_and_grids() {
        let s = SweepSpec::parse("pll.ki=14, 70,140").unwrap();
        assert_eq!(s.parameter, SweepParameter::PllKi);
        assert_eq!(s.values, vec![14.0, 70.0, 140.0]);
        assert!(matches!(SweepSpec::parse("pll.kd=1"), Err(AnalysisError::UnknownParameter(_))));
        assert!(SweepSpec::parse("pll.ki=").is_err());
        assert!(SweepSpec::parse("pll.ki").is_err());
    }

    #[test]
    fn trend_classes() {
        assert_eq!(trend(&[1.0, 2.0, 3.0], 1e-12), Trend::Increasing);
        assert_eq!(trend(&[3.0, 2.0, 1.0], 1e-12), Trend::Decreasing);
        assert_eq!(trend(&[1.0, 1.0 + 1e-15, 1.0], 1e-12), Trend::Constant);
        assert_eq!(trend(&[1.0, 2.0, 1.5], 1e-12), Trend::Mixed);
        assert_eq!(trend(&[1.0], 1e-12), Trend::Undetermined);
    }

    #[test]
    fn ki_reduction_raises_inertia() {
        let spec = SweepSpec { parameter: SweepParameter::PllKi, values: vec![140.0, 70.0, 14.0] };
        let t = run_sweep(&spec, &SweepBase::Equivalent(wecc_base())).unwrap();
        assert_eq!(t.trend_of(Quantity::H), Some(Trend::Increasing));
        // the id channel does not see the PLL
        assert_eq!(t.trend_of(Quantity::HId), Some(Trend::Constant));
    }

    #[test]
    fn dc_gain_reduction_slows_oscillation() {
        let spec = SweepSpec { parameter: SweepParameter::DcScale, values: vec![1.0, 0.1, 0.01] };
        let t = run_sweep(&spec, &SweepBase::Equivalent(wecc_base())).unwrap();
        assert_eq!(t.trend_of(Quantity::OscHz), Some(Trend::Decreasing), "{:?}", t.column(Quantity::OscHz));
    }

    #[test]
    fn invalid_rows_are_marked() {
        let spec = SweepSpec { parameter: SweepParameter::OpP, values: vec![0.3, 5.0, 0.5] };
        let t = run_sweep(&spec, &SweepBase::Equivalent(wecc_base())).unwrap();
        assert!(t.rows[0].is_valid() && t.rows[2].is_valid());
        assert!(!t.rows[1].is_valid());
        assert!(t.rows[1].error.as_deref().unwrap().contains("current"));
        assert_eq!(t.column(Quantity::H).unwrap()[1], None);
    }

    #[test]
    fn dispatch_does_not_move_the_id_channel() {
        let spec = SweepSpec { parameter: SweepParameter::OpP, values: vec![0.238, 0.4, 0.6, 0.857] };
        let t = run_sweep(&spec, &SweepBase::Equivalent(wecc_base())).unwrap();
        assert_eq!(t.trend_of(Quantity::HId), Some(Trend::Constant));
        assert_eq!(t.trend_of(Quantity::LId), Some(Trend::Constant));
    }

    #[test]
    fn sensitivity_matrix_is_complete() {
        let cells = table_i_sensitivity(&wecc_base(), 0.05).unwrap();
        assert_eq!(cells.len(), TABLE_I.len() * TABLE_I_PARAMETERS.len());
        let cell = |i, p| *cells.iter().find(|c| c.item == i && c.parameter == p).unwrap();
        assert_eq!(cell(TableItem::HId, SweepParameter::DcKi).observed, Sensitivity::Nonzero);
        assert_eq!(cell(TableItem::HId, SweepParameter::OpP).observed, Sensitivity::Zero);
        assert_eq!(cell(TableItem::HPll, SweepParameter::PllKi).observed, Sensitivity::Nonzero);
    }

    #[test]
    fn bad_step_rejected() {
        assert!(table_i_sensitivity(&wecc_base(), 0.0).is_err());
        assert!(table_i_sensitivity(&wecc_base(), 1.5).is_err());
    }
}
