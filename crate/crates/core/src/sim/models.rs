//! The system models.
//!
//! * [`MultiGeneratorModel`]: one swing equation per SG on the hybrid
//!   network, GFLs either linearized (`multigen`) or nonlinear
//!   (`reference`).
//! * [`CoiModel`]: SGs merged into one COI machine on the COI network, GFLs
//!   linearized (`proposed`) or held at constant power (`sfr`).
//! * [`RotorModel`]: every GFL replaced by a voltage behind its filter
//!   reactance, the voltage replayed from a reference run (`rotor`).
//!
//! The network is algebraic: interface phasors come from the hybrid matrix
//! at every derivative evaluation. Mechanical power and GFL power offsets are
//! the electrical powers at `t = 0` on each model's own network.

use super::integrate::{integrate, Dynamics};
use super::system::{internal_voltage, GflUnit, PowerSystem};
use super::{Disturbance, ModelVariant, ScenarioResult, SignalInfo, SimConfig, SimError};
use crate::exec;
use crate::gfl::{current_phase, nonlinear_gfl_derivatives, GflNonlinearState, LinearOutput};
use crate::linalg::{wrap_angle, ComplexValue, Phasor};
use crate::network::{
    build_partitioned_admittance, coi_frame_reduction, eliminate_network_nodes, form_hybrid_matrix,
    gfl_power_terms, sg_power_terms, GflPowerTerms, HybridInterfaceMatrix, NetworkCase, SgConnection,
};
use crate::sg::{coi_emf, governor_derivative, governor_power, CoiEmfAverage, SgParams};

/// Largest accepted mismatch between initial powers and the power flow.
const INIT_TOL: f64 = 1e-8;
const LOOP_MAX_ITER: usize = 200;
const LOOP_TOL: f64 = 1e-12;

fn hybrid(case: &NetworkCase) -> Result<HybridInterfaceMatrix, SimError> {
    let part = build_partitioned_admittance(case)?;
    let red = eliminate_network_nodes(&part, &case.shunt_loads)?;
    Ok(form_hybrid_matrix(&red)?)
}

fn coi_hybrid(case: &NetworkCase) -> Result<HybridInterfaceMatrix, SimError> {
    let part = build_partitioned_admittance(case)?;
    Ok(coi_frame_reduction(&part, &case.shunt_loads)?.to_hybrid())
}

fn post_case(case: &NetworkCase, dist: Option<&Disturbance>) -> Result<NetworkCase, SimError> {
    match dist {
        None => Ok(case.clone()),
        Some(d) => {
            if d.bus >= case.bus_count {
                return Err(SimError::InvalidDisturbance(format!("bus {} out of range", d.bus)));
            }
            if !(d.time_s >= 0.0) || !d.time_s.is_finite() {
                return Err(SimError::InvalidDisturbance(format!("time {} must be finite and >= 0", d.time_s)));
            }
            if !d.delta_admittance.re.is_finite() || !d.delta_admittance.im.is_finite() {
                return Err(SimError::InvalidDisturbance("admittance must be finite".into()));
            }
            Ok(case.with_load_step(d.bus, d.delta_admittance))
        }
    }
}

/// Pre- and post-disturbance matrices.
#[derive(Debug, Clone)]
struct Networks {
    pre: HybridInterfaceMatrix,
    post: HybridInterfaceMatrix,
    switched: bool,
}

impl Networks {
    fn build(case: &NetworkCase, dist: Option<&Disturbance>, f: fn(&NetworkCase) -> Result<HybridInterfaceMatrix, SimError>) -> Result<Self, SimError> {
        let pre = f(case)?;
        let post = if dist.is_some() { f(&post_case(case, dist)?)? } else { pre.clone() };
        Ok(Networks { pre, post, switched: false })
    }

    fn active(&self) -> &HybridInterfaceMatrix {
        if self.switched {
            &self.post
        } else {
            &self.pre
        }
    }
}

fn polar(mag: f64, angle: f64) -> ComplexValue {
    ComplexValue::from_polar(mag, angle)
}

/// Angle of `z` unwrapped next to `reference`.
fn angle_near(z: ComplexValue, reference: f64) -> f64 {
    reference + wrap_angle(z.arg() - reference)
}

fn weighted_mean(values: impl Iterator<Item = f64>, weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

/// How converters are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GflRepresentation {
    /// Linearized transfer-function model with `θI = θI0 + c_pi Δi_d + Δθpll`.
    Linear,
    /// DC link, DC PI and PLL states.
    Nonlinear,
    /// Current set so that `U conj(I)` stays at the dispatch.
    ConstantPower,
}

impl GflRepresentation {
    fn states(self, unit: &GflUnit) -> usize {
        match self {
            GflRepresentation::Linear => unit.linear.dim(),
            GflRepresentation::Nonlinear => GflNonlinearState::DIM,
            GflRepresentation::ConstantPower => 0,
        }
    }
}

/// Per-GFL quantities common to every variant.
fn gfl_signals(f: usize) -> Vec<SignalInfo> {
    vec![
        SignalInfo::new(format!("p_f{f}_ele"), "pu"),
        SignalInfo::new(format!("p_f{f}_loc"), "pu"),
        SignalInfo::new(format!("p_f{f}_tie_sg"), "pu"),
        SignalInfo::new(format!("p_f{f}_tie_gfl"), "pu"),
        SignalInfo::new(format!("i_f{f}"), "pu"),
        SignalInfo::new(format!("theta_i_f{f}"), "rad"),
        SignalInfo::new(format!("theta_i_rel_f{f}"), "rad"),
        SignalInfo::new(format!("u_f{f}"), "pu"),
        SignalInfo::new(format!("theta_u_f{f}"), "rad"),
    ]
}

fn push_gfl(out: &mut Vec<f64>, terms: &GflPowerTerms, p: f64, i: ComplexValue, theta_i: f64, u: ComplexValue, delta_coi: f64) {
    out.extend_from_slice(&[
        p,
        terms.local,
        terms.tie_sg,
        terms.tie_gfl,
        i.norm(),
        theta_i,
        theta_i - delta_coi,
        u.norm(),
        angle_near(u, delta_coi),
    ]);
}

fn gfl_frequency_signals(f: usize, rep: GflRepresentation) -> Vec<SignalInfo> {
    match rep {
        GflRepresentation::Linear => vec![
            SignalInfo::new(format!("omega_f{f}"), "pu"),
            SignalInfo::new(format!("omega_f{f}_cont"), "pu"),
            SignalInfo::new(format!("omega_f{f}_disc"), "pu"),
        ],
        GflRepresentation::Nonlinear => {
            vec![SignalInfo::new(format!("omega_f{f}"), "pu"), SignalInfo::new(format!("u_dc_f{f}"), "pu")]
        }
        GflRepresentation::ConstantPower => vec![],
    }
}

/// GFL currents (system base) and raw current angles from the GFL states.
struct GflSide {
    currents: Vec<ComplexValue>,
    angles: Vec<f64>,
    iq: Vec<f64>,
}

fn linear_side(units: &[GflUnit], x: &[f64], offsets: &[usize]) -> GflSide {
    let mut currents = Vec::with_capacity(units.len());
    let mut angles = Vec::with_capacity(units.len());
    for (u, &o) in units.iter().zip(offsets) {
        let xs = &x[o..o + u.linear.dim()];
        let id = u.op.id0 + u.linear.output(LinearOutput::Id, xs, 0.0);
        let theta = u.op.theta_i0 + u.linear.output(LinearOutput::ThetaI, xs, 0.0);
        currents.push(polar(id.hypot(u.op.iq0) * u.params.rated_power, theta));
        angles.push(theta);
    }
    GflSide { currents, angles, iq: units.iter().map(|u| u.op.iq0).collect() }
}

fn nonlinear_side(units: &[GflUnit], x: &[f64], offsets: &[usize]) -> GflSide {
    let mut currents = Vec::with_capacity(units.len());
    let mut angles = Vec::with_capacity(units.len());
    for (u, &o) in units.iter().zip(offsets) {
        let st = GflNonlinearState::from_slice(&x[o..o + 4]);
        let id = st.id(&u.params);
        let theta = st.theta_pll + current_phase(id, u.op.iq0);
        currents.push(polar(id.hypot(u.op.iq0) * u.params.rated_power, theta));
        angles.push(theta);
    }
    GflSide { currents, angles, iq: units.iter().map(|u| u.op.iq0).collect() }
}

/// Fixed point `I = conj(S / U)`, `U = T_u E + Z I`.
fn constant_power_side(
    h: &HybridInterfaceMatrix,
    e: &[ComplexValue],
    units: &[GflUnit],
    rotation: f64,
    t: f64,
) -> Result<(GflSide, Vec<ComplexValue>), SimError> {
    let s0: Vec<ComplexValue> =
        units.iter().map(|u| ComplexValue::new(u.op.p_ele0, u.op.q0) * u.params.rated_power).collect();
    let mut i: Vec<ComplexValue> = units.iter().map(|u| u.initial_current() * polar(1.0, rotation)).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..LOOP_MAX_ITER {
        let (_, u) = h.solve(e, &i);
        let next: Vec<ComplexValue> = s0.iter().zip(&u).map(|(s, v)| (s / v).conj()).collect();
        let scale = 1.0 + next.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        residual = next.iter().zip(&i).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale;
        i = next;
        if residual <= LOOP_TOL {
            let (_, u) = h.solve(e, &i);
            let angles = units.iter().zip(&i).map(|(un, z)| angle_near(*z, un.op.theta_i0 + rotation)).collect();
            let iq = units
                .iter()
                .zip(&i)
                .map(|(un, z)| {
                    let frame = z * polar(1.0, -(un.op.theta_pll0 + rotation)) / un.params.rated_power;
                    -frame.im
                })
                .collect();
            return Ok((GflSide { currents: i, angles, iq }, u));
        }
    }
    Err(SimError::AlgebraicLoop { time: t, iterations: LOOP_MAX_ITER, residual })
}

fn gfl_offsets(units: &[GflUnit], rep: GflRepresentation, start: usize) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(units.len());
    let mut k = start;
    for u in units {
        offsets.push(k);
        k += rep.states(u);
    }
    (offsets, k)
}

fn gfl_initial_states(units: &[GflUnit], rep: GflRepresentation, x: &mut Vec<f64>) {
    for u in units {
        match rep {
            GflRepresentation::Linear => x.extend(std::iter::repeat_n(0.0, u.linear.dim())),
            GflRepresentation::Nonlinear => x.extend(GflNonlinearState::at_equilibrium(&u.op, &u.params).to_array()),
            GflRepresentation::ConstantPower => {}
        }
    }
}

/// Writes GFL state derivatives; `p` is the electrical power (system base).
#[allow(clippy::too_many_arguments)]
fn gfl_derivatives(
    units: &[GflUnit],
    rep: GflRepresentation,
    offsets: &[usize],
    p0: &[f64],
    p: &[f64],
    u: &[ComplexValue],
    iq: &[f64],
    x: &[f64],
    dx: &mut [f64],
) -> Result<(), SimError> {
    for (k, unit) in units.iter().enumerate() {
        let o = offsets[k];
        match rep {
            GflRepresentation::Linear => {
                let n = unit.linear.dim();
                let dp = (p[k] - p0[k]) / unit.params.rated_power;
                unit.linear.derivatives(&x[o..o + n], dp, &mut dx[o..o + n]);
            }
            GflRepresentation::Nonlinear => {
                let st = GflNonlinearState::from_slice(&x[o..o + 4]);
                let (d, _) =
                    nonlinear_gfl_derivatives(&st, Phasor::from_complex(u[k]), &unit.params, unit.op.p_ele0, iq[k])?;
                dx[o..o + 4].copy_from_slice(&d);
            }
            GflRepresentation::ConstantPower => {}
        }
    }
    Ok(())
}

/// Frequency outputs of the GFLs.
#[allow(clippy::too_many_arguments)]
fn push_gfl_frequency(
    out: &mut Vec<f64>,
    unit: &GflUnit,
    rep: GflRepresentation,
    offset: usize,
    p0: f64,
    p: f64,
    u: ComplexValue,
    iq: f64,
    x: &[f64],
    omega0: f64,
) -> Result<(), SimError> {
    match rep {
        GflRepresentation::Linear => {
            let xs = &x[offset..offset + unit.linear.dim()];
            let dp = (p - p0) / unit.params.rated_power;
            let m = &unit.linear;
            out.push(1.0 + m.output(LinearOutput::OmegaF, xs, dp));
            out.push(m.output(LinearOutput::OmegaContinuous, xs, dp));
            out.push(m.output(LinearOutput::OmegaDiscontinuous, xs, dp));
        }
        GflRepresentation::Nonlinear => {
            let st = GflNonlinearState::from_slice(&x[offset..offset + 4]);
            let (_, o) = nonlinear_gfl_derivatives(&st, Phasor::from_complex(u), &unit.params, unit.op.p_ele0, iq)?;
            out.push(1.0 + o.d_theta_i / omega0);
            out.push(st.u_dc);
        }
        GflRepresentation::ConstantPower => {}
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Full network: one swing equation per SG

/// Every SG on the hybrid network. State: `[δ, ω, x_gov]` per SG, then the
/// GFL states.
#[derive(Debug, Clone)]
pub struct MultiGeneratorModel {
    sgs: Vec<SgParams>,
    units: Vec<GflUnit>,
    rep: GflRepresentation,
    nets: Networks,
    pm0: Vec<f64>,
    p0: Vec<f64>,
    offsets: Vec<usize>,
    dim: usize,
    omega0: f64,
    weights: Vec<f64>,
}

struct FullEval {
    e: Vec<ComplexValue>,
    side: GflSide,
    i_g: Vec<ComplexValue>,
    u_f: Vec<ComplexValue>,
    pe: Vec<f64>,
    pf: Vec<f64>,
}

impl MultiGeneratorModel {
    pub fn new(sys: &PowerSystem, rep: GflRepresentation, dist: Option<&Disturbance>) -> Result<Self, SimError> {
        if rep == GflRepresentation::ConstantPower {
            return Err(SimError::Setup("constant-power converters are only available in the COI frame".into()));
        }
        let nets = Networks::build(&sys.network, dist, hybrid)?;
        let (offsets, dim) = gfl_offsets(&sys.gfls, rep, 3 * sys.sgs.len());
        let mut m = MultiGeneratorModel {
            sgs: sys.sgs.clone(),
            units: sys.gfls.clone(),
            rep,
            nets,
            pm0: vec![0.0; sys.sgs.len()],
            p0: vec![0.0; sys.gfls.len()],
            offsets,
            dim,
            omega0: sys.omega0(),
            weights: sys.sgs.iter().map(SgParams::weight).collect(),
        };
        let x0 = m.initial_state();
        let ev = m.eval(&x0);
        for (g, s) in m.sgs.iter().enumerate() {
            let r = (ev.pe[g] - s.initial_mech_power).abs();
            if r > INIT_TOL {
                return Err(SimError::NotEquilibrium { residual: r, state: format!("sg{g} electrical power") });
            }
        }
        for (f, u) in m.units.iter().enumerate() {
            let r = (ev.pf[f] - u.op.p_ele0 * u.params.rated_power).abs();
            if r > INIT_TOL {
                return Err(SimError::NotEquilibrium { residual: r, state: format!("gfl{f} electrical power") });
            }
        }
        m.pm0 = ev.pe;
        m.p0 = ev.pf;
        Ok(m)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim);
        for s in &self.sgs {
            x.extend_from_slice(&[s.initial_angle, 1.0, 0.0]);
        }
        gfl_initial_states(&self.units, self.rep, &mut x);
        x
    }

    fn eval(&self, x: &[f64]) -> FullEval {
        let e: Vec<ComplexValue> = self.sgs.iter().enumerate().map(|(g, s)| polar(s.emf_magnitude, x[3 * g])).collect();
        let side = match self.rep {
            GflRepresentation::Linear => linear_side(&self.units, x, &self.offsets),
            _ => nonlinear_side(&self.units, x, &self.offsets),
        };
        let (i_g, u_f) = self.nets.active().solve(&e, &side.currents);
        let pe = e.iter().zip(&i_g).map(|(a, b)| (a * b.conj()).re).collect();
        let pf = u_f.iter().zip(&side.currents).map(|(a, b)| (a * b.conj()).re).collect();
        FullEval { e, side, i_g, u_f, pe, pf }
    }

    pub fn signals(&self) -> Vec<SignalInfo> {
        let mut s = vec![
            SignalInfo::new("omega_coi", "pu"),
            SignalInfo::new("delta_coi", "rad"),
            SignalInfo::new("p_coi_ele", "pu"),
            SignalInfo::new("p_coi_loc", "pu"),
            SignalInfo::new("p_coi_tie_sg", "pu"),
            SignalInfo::new("p_coi_tie_f", "pu"),
        ];
        for g in 0..self.sgs.len() {
            s.push(SignalInfo::new(format!("omega_g{g}"), "pu"));
            s.push(SignalInfo::new(format!("delta_g{g}"), "rad"));
            s.push(SignalInfo::new(format!("p_g{g}_ele"), "pu"));
        }
        for f in 0..self.units.len() {
            s.extend(gfl_signals(f));
            s.extend(gfl_frequency_signals(f, self.rep));
        }
        s
    }
}

impl Dynamics for MultiGeneratorModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivatives(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), SimError> {
        let ev = self.eval(x);
        for (g, s) in self.sgs.iter().enumerate() {
            let (w, xg) = (x[3 * g + 1], x[3 * g + 2]);
            let pm = self.pm0[g] + governor_power(xg, s);
            dx[3 * g] = self.omega0 * (w - 1.0);
            dx[3 * g + 1] = (pm - ev.pe[g]) / (2.0 * s.inertia_h * s.rated_power_s);
            dx[3 * g + 2] = governor_derivative(xg, w - 1.0, &s.governor);
        }
        gfl_derivatives(&self.units, self.rep, &self.offsets, &self.p0, &ev.pf, &ev.u_f, &ev.side.iq, x, dx)
    }

    fn apply_disturbance(&mut self) {
        self.nets.switched = true;
    }

    fn output_count(&self) -> usize {
        self.signals().len()
    }

    fn outputs(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), SimError> {
        let ev = self.eval(x);
        let h = self.nets.active();
        let ng = self.sgs.len();
        let e_ph: Vec<Phasor> = (0..ng).map(|g| Phasor::new(self.sgs[g].emf_magnitude, x[3 * g])).collect();
        let i_ph: Vec<Phasor> =
            ev.side.currents.iter().zip(&ev.side.angles).map(|(i, a)| Phasor::new(i.norm(), *a)).collect();
        let sg_terms = sg_power_terms(h, &e_ph, &i_ph);
        let gfl_terms = gfl_power_terms(h, &e_ph, &i_ph);
        let omega_coi = weighted_mean((0..ng).map(|g| x[3 * g + 1]), &self.weights);
        let delta_coi = weighted_mean((0..ng).map(|g| x[3 * g]), &self.weights);
        let mut v = Vec::with_capacity(out.len());
        v.extend_from_slice(&[
            omega_coi,
            delta_coi,
            ev.pe.iter().sum(),
            sg_terms.iter().map(|t| t.local).sum(),
            sg_terms.iter().map(|t| t.tie_sg).sum(),
            sg_terms.iter().map(|t| t.tie_gfl).sum(),
        ]);
        for g in 0..ng {
            v.extend_from_slice(&[x[3 * g + 1], x[3 * g], ev.pe[g]]);
        }
        for f in 0..self.units.len() {
            push_gfl(&mut v, &gfl_terms[f], ev.pf[f], ev.side.currents[f], ev.side.angles[f], ev.u_f[f], delta_coi);
            push_gfl_frequency(&mut v, &self.units[f], self.rep, self.offsets[f], self.p0[f], ev.pf[f], ev.u_f[f], ev.side.iq[f], x, self.omega0)?;
        }
        let _ = (&ev.e, &ev.i_g);
        out.copy_from_slice(&v);
        Ok(())
    }

    fn speed_deviation(&self, x: &[f64]) -> f64 {
        (0..self.sgs.len()).map(|g| (x[3 * g + 1] - 1.0).abs()).fold(0.0, f64::max)
    }

    fn state_label(&self, k: usize) -> String {
        let ng = self.sgs.len();
        if k < 3 * ng {
            format!("sg{}.{}", k / 3, ["delta", "omega", "governor"][k % 3])
        } else {
            let f = self.offsets.iter().rposition(|&o| o <= k).unwrap_or(0);
            format!("gfl{f}.x{}", k - self.offsets[f])
        }
    }
}

// ---------------------------------------------------------------------------
// COI frame

/// SGs merged into one COI machine. State: `[δ, ω, x_gov per member]`, then
/// the GFL states.
#[derive(Debug, Clone)]
pub struct CoiModel {
    members: Vec<SgParams>,
    units: Vec<GflUnit>,
    rep: GflRepresentation,
    nets: Networks,
    emf: Phasor,
    inertia_h: f64,
    rating: f64,
    pm0: f64,
    p0: Vec<f64>,
    offsets: Vec<usize>,
    dim: usize,
    omega0: f64,
}

struct CoiEval {
    e: ComplexValue,
    side: GflSide,
    u_f: Vec<ComplexValue>,
    pe: f64,
    pf: Vec<f64>,
}

impl CoiModel {
    pub fn new(
        sys: &PowerSystem,
        rep: GflRepresentation,
        dist: Option<&Disturbance>,
        average: CoiEmfAverage,
    ) -> Result<Self, SimError> {
        if rep == GflRepresentation::Nonlinear {
            return Err(SimError::Setup("the COI frame uses linear or constant-power converters".into()));
        }
        if sys.sgs.is_empty() {
            return Err(SimError::Setup("the COI frame needs at least one SG".into()));
        }
        let nets = Networks::build(&sys.network, dist, coi_hybrid)?;
        let weights: Vec<f64> = sys.sgs.iter().map(SgParams::weight).collect();
        let emfs: Vec<Phasor> = sys.sgs.iter().map(|s| Phasor::new(s.emf_magnitude, s.initial_angle)).collect();
        let emf = coi_emf(&emfs, &weights, average);
        let rating: f64 = sys.sgs.iter().map(|s| s.rated_power_s).sum();
        let n_sg = sys.sgs.len();
        let (offsets, dim) = gfl_offsets(&sys.gfls, rep, 2 + n_sg);
        let mut m = CoiModel {
            members: sys.sgs.clone(),
            units: sys.gfls.clone(),
            rep,
            nets,
            emf,
            inertia_h: weights.iter().sum::<f64>() / rating,
            rating,
            pm0: 0.0,
            p0: vec![0.0; sys.gfls.len()],
            offsets,
            dim,
            omega0: sys.omega0(),
        };
        let ev = m.eval(0.0, &m.initial_state())?;
        m.pm0 = ev.pe;
        m.p0 = ev.pf;
        Ok(m)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![self.emf.angle, 1.0];
        x.extend(std::iter::repeat_n(0.0, self.members.len()));
        gfl_initial_states(&self.units, self.rep, &mut x);
        x
    }

    pub fn coi_inertia(&self) -> f64 {
        self.inertia_h
    }

    fn eval(&self, t: f64, x: &[f64]) -> Result<CoiEval, SimError> {
        let e = polar(self.emf.magnitude, x[0]);
        let h = self.nets.active();
        let (side, u_f) = match self.rep {
            GflRepresentation::ConstantPower => constant_power_side(h, &[e], &self.units, x[0] - self.emf.angle, t)?,
            _ => {
                let side = linear_side(&self.units, x, &self.offsets);
                let (_, u) = h.solve(&[e], &side.currents);
                (side, u)
            }
        };
        let (i_g, _) = h.solve(&[e], &side.currents);
        let pe = (e * i_g[0].conj()).re;
        let pf = u_f.iter().zip(&side.currents).map(|(a, b)| (a * b.conj()).re).collect();
        Ok(CoiEval { e, side, u_f, pe, pf })
    }

    pub fn signals(&self) -> Vec<SignalInfo> {
        let mut s = vec![
            SignalInfo::new("omega_coi", "pu"),
            SignalInfo::new("delta_coi", "rad"),
            SignalInfo::new("p_coi_ele", "pu"),
            SignalInfo::new("p_coi_loc", "pu"),
            SignalInfo::new("p_coi_tie_f", "pu"),
            SignalInfo::new("p_coi_mech", "pu"),
        ];
        for f in 0..self.units.len() {
            s.extend(gfl_signals(f));
            s.extend(gfl_frequency_signals(f, self.rep));
        }
        s
    }

    fn mech_power(&self, x: &[f64]) -> f64 {
        self.pm0 + self.members.iter().enumerate().map(|(k, s)| governor_power(x[2 + k], s)).sum::<f64>()
    }
}

impl Dynamics for CoiModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), SimError> {
        let ev = self.eval(t, x)?;
        let w = x[1];
        dx[0] = self.omega0 * (w - 1.0);
        dx[1] = (self.mech_power(x) - ev.pe) / (2.0 * self.inertia_h * self.rating);
        for (k, s) in self.members.iter().enumerate() {
            dx[2 + k] = governor_derivative(x[2 + k], w - 1.0, &s.governor);
        }
        gfl_derivatives(&self.units, self.rep, &self.offsets, &self.p0, &ev.pf, &ev.u_f, &ev.side.iq, x, dx)
    }

    fn apply_disturbance(&mut self) {
        self.nets.switched = true;
    }

    fn output_count(&self) -> usize {
        self.signals().len()
    }

    fn outputs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), SimError> {
        let ev = self.eval(t, x)?;
        let h = self.nets.active();
        let e_ph = [Phasor::new(ev.e.norm(), x[0])];
        let i_ph: Vec<Phasor> =
            ev.side.currents.iter().zip(&ev.side.angles).map(|(i, a)| Phasor::new(i.norm(), *a)).collect();
        let sg_terms = sg_power_terms(h, &e_ph, &i_ph);
        let gfl_terms = gfl_power_terms(h, &e_ph, &i_ph);
        let mut v = Vec::with_capacity(out.len());
        v.extend_from_slice(&[x[1], x[0], ev.pe, sg_terms[0].local, sg_terms[0].tie_gfl, self.mech_power(x)]);
        for f in 0..self.units.len() {
            push_gfl(&mut v, &gfl_terms[f], ev.pf[f], ev.side.currents[f], ev.side.angles[f], ev.u_f[f], x[0]);
            push_gfl_frequency(&mut v, &self.units[f], self.rep, self.offsets[f], self.p0[f], ev.pf[f], ev.u_f[f], ev.side.iq[f], x, self.omega0)?;
        }
        out.copy_from_slice(&v);
        Ok(())
    }

    fn speed_deviation(&self, x: &[f64]) -> f64 {
        (x[1] - 1.0).abs()
    }

    fn state_label(&self, k: usize) -> String {
        match k {
            0 => "coi.delta".into(),
            1 => "coi.omega".into(),
            k if k < 2 + self.members.len() => format!("sg{}.governor", k - 2),
            k => {
                let f = self.offsets.iter().rposition(|&o| o <= k).unwrap_or(0);
                format!("gfl{f}.x{}", k - self.offsets[f])
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Rotor-motion baseline

/// Filter reactance of the replacement source and the error applied to it
/// when the internal voltage is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorConfig {
    /// System base.
    pub filter_reactance: f64,
    /// Percent error on the reactance used to rebuild the internal voltage.
    pub filter_error_pct: f64,
}

impl Default for RotorConfig {
    fn default() -> Self {
        RotorConfig { filter_reactance: 0.1, filter_error_pct: 0.0 }
    }
}

/// Piecewise-linear internal voltage, split at the disturbance.
#[derive(Debug, Clone)]
struct Replay {
    pre: Vec<(f64, ComplexValue)>,
    post: Vec<(f64, ComplexValue)>,
}

fn interpolate(knots: &[(f64, ComplexValue)], t: f64) -> ComplexValue {
    match knots.iter().position(|&(tk, _)| tk >= t) {
        Some(0) => knots[0].1,
        Some(k) => {
            let (t0, v0) = knots[k - 1];
            let (t1, v1) = knots[k];
            if t1 == t0 {
                v1
            } else {
                v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
            }
        }
        None => knots.last().map(|k| k.1).unwrap_or_default(),
    }
}

/// SGs plus one voltage source per GFL behind the filter reactance.
#[derive(Debug, Clone)]
pub struct RotorModel {
    sgs: Vec<SgParams>,
    nets: Networks,
    replays: Vec<Replay>,
    pm0: Vec<f64>,
    weights: Vec<f64>,
    omega0: f64,
    reactance: f64,
    post: bool,
}

impl RotorModel {
    pub fn new(
        sys: &PowerSystem,
        reference: &ScenarioResult,
        dist: Option<&Disturbance>,
        cfg: RotorConfig,
    ) -> Result<Self, SimError> {
        if !(cfg.filter_reactance > 0.0) {
            return Err(SimError::Setup("rotor baseline needs a positive filter reactance".into()));
        }
        if reference.disturbance.map(|d| d.time_s) != dist.map(|d| d.time_s) {
            return Err(SimError::Setup("reference run has a different disturbance".into()));
        }
        let mut case = sys.network.clone();
        case.gfl_buses.clear();
        for u in &sys.gfls {
            case.sg_buses.push(SgConnection { bus: u.bus, reactance: cfg.filter_reactance });
        }
        let nets = Networks::build(&case, dist, hybrid)?;
        let x_rebuild = cfg.filter_reactance * (1.0 + 0.01 * cfg.filter_error_pct);
        let mut replays = Vec::with_capacity(sys.gfls.len());
        for (f, u) in sys.gfls.iter().enumerate() {
            let col = |name: String| {
                reference.index_of(&name).ok_or_else(|| SimError::Setup(format!("reference run lacks column {name}")))
            };
            let cols = [col(format!("u_f{f}"))?, col(format!("theta_u_f{f}"))?, col(format!("i_f{f}"))?, col(format!("theta_i_f{f}"))?];
            let at = |row: &dyn Fn(usize) -> f64| {
                let uu = polar(row(cols[0]), row(cols[1]));
                let ii = polar(row(cols[2]), row(cols[3]));
                internal_voltage(uu, ii, x_rebuild)
            };
            let sample = |k: usize| at(&|c: usize| reference.values[c][k]);
            let e_m0 = internal_voltage(sys.bus_voltages[u.bus], u.initial_current(), cfg.filter_reactance);
            let base = sample(0);
            let knot = |t: f64, e: ComplexValue| (t, e_m0 + (e - base));
            let d = reference.disturbance_index.unwrap_or(reference.len());
            let mut pre: Vec<_> = (0..d.min(reference.len())).map(|k| knot(reference.time[k], sample(k))).collect();
            let mut post = Vec::new();
            if let (Some(di), Some(snap)) = (reference.disturbance_index, reference.pre_disturbance.as_ref()) {
                pre.push(knot(reference.time[di], at(&|c: usize| snap[c])));
                post = (di..reference.len()).map(|k| knot(reference.time[k], sample(k))).collect();
            }
            replays.push(Replay { pre, post });
        }
        let mut m = RotorModel {
            sgs: sys.sgs.clone(),
            nets,
            replays,
            pm0: vec![0.0; sys.sgs.len()],
            weights: sys.sgs.iter().map(SgParams::weight).collect(),
            omega0: sys.omega0(),
            reactance: cfg.filter_reactance,
            post: false,
        };
        let (_, _, pe) = m.eval(0.0, &m.initial_state());
        for (g, s) in m.sgs.iter().enumerate() {
            let r = (pe[g] - s.initial_mech_power).abs();
            if r > INIT_TOL {
                return Err(SimError::NotEquilibrium { residual: r, state: format!("sg{g} electrical power") });
            }
        }
        m.pm0 = pe[..m.sgs.len()].to_vec();
        Ok(m)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.sgs.iter().flat_map(|s| [s.initial_angle, 1.0, 0.0]).collect()
    }

    fn internal(&self, t: f64) -> Vec<ComplexValue> {
        self.replays.iter().map(|r| interpolate(if self.post { &r.post } else { &r.pre }, t)).collect()
    }

    /// EMFs of all sources, their currents, and their powers.
    fn eval(&self, t: f64, x: &[f64]) -> (Vec<ComplexValue>, Vec<ComplexValue>, Vec<f64>) {
        let mut e: Vec<ComplexValue> = self.sgs.iter().enumerate().map(|(g, s)| polar(s.emf_magnitude, x[3 * g])).collect();
        e.extend(self.internal(t));
        let (i, _) = self.nets.active().solve(&e, &[]);
        let p = e.iter().zip(&i).map(|(a, b)| (a * b.conj()).re).collect();
        (e, i, p)
    }

    pub fn signals(&self) -> Vec<SignalInfo> {
        let mut s = vec![
            SignalInfo::new("omega_coi", "pu"),
            SignalInfo::new("delta_coi", "rad"),
            SignalInfo::new("p_coi_ele", "pu"),
            SignalInfo::new("p_coi_loc", "pu"),
            SignalInfo::new("p_coi_tie_sg", "pu"),
            SignalInfo::new("p_coi_tie_f", "pu"),
        ];
        for g in 0..self.sgs.len() {
            s.push(SignalInfo::new(format!("omega_g{g}"), "pu"));
            s.push(SignalInfo::new(format!("delta_g{g}"), "rad"));
            s.push(SignalInfo::new(format!("p_g{g}_ele"), "pu"));
        }
        for f in 0..self.replays.len() {
            s.extend(gfl_signals(f));
            s.push(SignalInfo::new(format!("e_int_f{f}"), "pu"));
            s.push(SignalInfo::new(format!("delta_int_rel_f{f}"), "rad"));
        }
        s
    }
}

impl Dynamics for RotorModel {
    fn dim(&self) -> usize {
        3 * self.sgs.len()
    }

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), SimError> {
        let (_, _, pe) = self.eval(t, x);
        for (g, s) in self.sgs.iter().enumerate() {
            let (w, xg) = (x[3 * g + 1], x[3 * g + 2]);
            let pm = self.pm0[g] + governor_power(xg, s);
            dx[3 * g] = self.omega0 * (w - 1.0);
            dx[3 * g + 1] = (pm - pe[g]) / (2.0 * s.inertia_h * s.rated_power_s);
            dx[3 * g + 2] = governor_derivative(xg, w - 1.0, &s.governor);
        }
        Ok(())
    }

    fn apply_disturbance(&mut self) {
        self.nets.switched = true;
        self.post = true;
    }

    fn output_count(&self) -> usize {
        self.signals().len()
    }

    fn outputs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), SimError> {
        let (e, i, p) = self.eval(t, x);
        let ng = self.sgs.len();
        let h = self.nets.active();
        let omega_coi = weighted_mean((0..ng).map(|g| x[3 * g + 1]), &self.weights);
        let delta_coi = weighted_mean((0..ng).map(|g| x[3 * g]), &self.weights);
        let e_ph: Vec<Phasor> = e.iter().map(|z| Phasor::new(z.norm(), angle_near(*z, delta_coi))).collect();
        let terms = sg_power_terms(h, &e_ph, &[]);
        let split = |k: usize| {
            let (mut to_sg, mut to_src) = (0.0, 0.0);
            for j in 0..e.len() {
                if j == k {
                    continue;
                }
                let v = crate::network::tie_power_sg_sg(e_ph[k], e_ph[j], h.y_eq[(k, j)]);
                if j < ng {
                    to_sg += v;
                } else {
                    to_src += v;
                }
            }
            (to_sg, to_src)
        };
        let mut v = Vec::with_capacity(out.len());
        let (mut tie_sg, mut tie_f) = (0.0, 0.0);
        for g in 0..ng {
            let (a, b) = split(g);
            tie_sg += a;
            tie_f += b;
        }
        v.extend_from_slice(&[
            omega_coi,
            delta_coi,
            p[..ng].iter().sum(),
            terms[..ng].iter().map(|t| t.local).sum(),
            tie_sg,
            tie_f,
        ]);
        for g in 0..ng {
            v.extend_from_slice(&[x[3 * g + 1], x[3 * g], p[g]]);
        }
        for f in 0..self.replays.len() {
            let k = ng + f;
            let (to_sg, to_src) = split(k);
            let ft = GflPowerTerms { local: terms[k].local, tie_gfl: to_src, tie_sg: to_sg };
            let u = internal_voltage(e[k], i[k], -self.reactance);
            push_gfl(&mut v, &ft, p[k], i[k], angle_near(i[k], delta_coi), u, delta_coi);
            v.push(e[k].norm());
            v.push(e_ph[k].angle - delta_coi);
        }
        out.copy_from_slice(&v);
        Ok(())
    }

    fn speed_deviation(&self, x: &[f64]) -> f64 {
        (0..self.sgs.len()).map(|g| (x[3 * g + 1] - 1.0).abs()).fold(0.0, f64::max)
    }

    fn state_label(&self, k: usize) -> String {
        format!("sg{}.{}", k / 3, ["delta", "omega", "governor"][k % 3])
    }
}

// ---------------------------------------------------------------------------
// Entry points

fn finish<M: Dynamics>(
    variant: ModelVariant,
    mut model: M,
    x0: Vec<f64>,
    signals: Vec<SignalInfo>,
    dist: Option<&Disturbance>,
    cfg: &SimConfig,
) -> Result<ScenarioResult, SimError> {
    let traj = integrate(&mut model, x0, dist.map(|d| d.time_s), cfg)?;
    Ok(ScenarioResult::from_trajectory(variant, signals, traj, dist.copied(), *cfg))
}

/// Every SG with its own swing equation, linearized GFLs.
pub fn simulate_multi_generator(sys: &PowerSystem, dist: Option<&Disturbance>, cfg: &SimConfig) -> Result<ScenarioResult, SimError> {
    let m = MultiGeneratorModel::new(sys, GflRepresentation::Linear, dist)?;
    let (x0, sig) = (m.initial_state(), m.signals());
    finish(ModelVariant::Multigen, m, x0, sig, dist, cfg)
}

/// COI frame with linearized GFL ties.
pub fn simulate_coi(sys: &PowerSystem, dist: Option<&Disturbance>, cfg: &SimConfig) -> Result<ScenarioResult, SimError> {
    let m = CoiModel::new(sys, GflRepresentation::Linear, dist, CoiEmfAverage::default())?;
    let (x0, sig) = (m.initial_state(), m.signals());
    finish(ModelVariant::Proposed, m, x0, sig, dist, cfg)
}

/// Every SG with nonlinear GFLs; the in-repo reference.
pub fn simulate_nonlinear_reference(
    sys: &PowerSystem,
    dist: Option<&Disturbance>,
    cfg: &SimConfig,
) -> Result<ScenarioResult, SimError> {
    let m = MultiGeneratorModel::new(sys, GflRepresentation::Nonlinear, dist)?;
    let (x0, sig) = (m.initial_state(), m.signals());
    finish(ModelVariant::Reference, m, x0, sig, dist, cfg)
}

/// COI frame with GFL power held at its dispatch.
pub fn simulate_sfr_baseline(sys: &PowerSystem, dist: Option<&Disturbance>, cfg: &SimConfig) -> Result<ScenarioResult, SimError> {
    let m = CoiModel::new(sys, GflRepresentation::ConstantPower, dist, CoiEmfAverage::default())?;
    let (x0, sig) = (m.initial_state(), m.signals());
    finish(ModelVariant::Sfr, m, x0, sig, dist, cfg)
}

/// GFLs as voltages behind the filter reactance, replayed from `reference`.
pub fn simulate_rotor_motion_baseline(
    sys: &PowerSystem,
    reference: &ScenarioResult,
    dist: Option<&Disturbance>,
    cfg: &SimConfig,
    rotor: RotorConfig,
) -> Result<ScenarioResult, SimError> {
    if reference.config.dt_s != cfg.dt_s || reference.time.len() != cfg.steps() + 1 {
        return Err(SimError::Setup("rotor baseline must use the reference run's time grid".into()));
    }
    let m = RotorModel::new(sys, reference, dist, rotor)?;
    let (x0, sig) = (m.initial_state(), m.signals());
    finish(ModelVariant::Rotor, m, x0, sig, dist, cfg)
}

/// Runs one variant; `rotor` needs the reference run.
pub fn simulate_variant(
    sys: &PowerSystem,
    variant: ModelVariant,
    dist: Option<&Disturbance>,
    cfg: &SimConfig,
    rotor: RotorConfig,
    reference: Option<&ScenarioResult>,
) -> Result<ScenarioResult, SimError> {
    match variant {
        ModelVariant::Multigen => simulate_multi_generator(sys, dist, cfg),
        ModelVariant::Proposed => simulate_coi(sys, dist, cfg),
        ModelVariant::Reference => simulate_nonlinear_reference(sys, dist, cfg),
        ModelVariant::Sfr => simulate_sfr_baseline(sys, dist, cfg),
        ModelVariant::Rotor => match reference {
            Some(r) => simulate_rotor_motion_baseline(sys, r, dist, cfg, rotor),
            None => {
                let r = simulate_nonlinear_reference(sys, dist, cfg)?;
                simulate_rotor_motion_baseline(sys, &r, dist, cfg, rotor)
            }
        },
    }
}

/// Runs several variants as independent jobs. The rotor baseline reuses the
/// reference run when both are requested.
pub fn simulate_variants(
    sys: &PowerSystem,
    variants: &[ModelVariant],
    dist: Option<&Disturbance>,
    cfg: &SimConfig,
    rotor: RotorConfig,
) -> Vec<(ModelVariant, Result<ScenarioResult, SimError>)> {
    let first: Vec<ModelVariant> = variants.iter().copied().filter(|v| *v != ModelVariant::Rotor).collect();
    let mut done: Vec<(ModelVariant, Result<ScenarioResult, SimError>)> =
        first.iter().copied().zip(exec::map(&first, |v| simulate_variant(sys, *v, dist, cfg, rotor, None))).collect();
    if variants.contains(&ModelVariant::Rotor) {
        let reference = done.iter().find(|(v, _)| *v == ModelVariant::Reference).and_then(|(_, r)| r.as_ref().ok());
        let r = simulate_variant(sys, ModelVariant::Rotor, dist, cfg, rotor, reference);
        done.push((ModelVariant::Rotor, r));
    }
    variants
        .iter()
        .filter_map(|v| done.iter().position(|(w, _)| w == v).map(|k| done.swap_remove(k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::system::fixtures::{coherent_pair, single_machine, wecc9};
    use super::super::{initialize_system, Disturbance, SimConfig};
    use super::*;

    fn step(bus: usize, g: f64, t: f64) -> Disturbance {
        Disturbance { bus, delta_admittance: ComplexValue::new(g, 0.0), time_s: t }
    }

    fn cfg(dt: f64, duration: f64) -> SimConfig {
        SimConfig { dt_s: dt, duration_s: duration, ..SimConfig::default() }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn run_all(sys: &PowerSystem, d: Option<&Disturbance>, c: &SimConfig) -> Vec<ScenarioResult> {
        let rotor = RotorConfig { filter_reactance: 0.1, filter_error_pct: 20.0 };
        simulate_variants(sys, &ModelVariant::ALL, d, c, rotor).into_iter().map(|(v, r)| r.unwrap_or_else(|e| panic!("{v}: {e}"))).collect()
    }

    #[test]
    fn equilibrium_holds_for_every_variant() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        for r in run_all(&sys, None, &cfg(5e-3, 5.0)) {
            for (s, col) in r.signals.iter().zip(&r.values) {
                let drift = col.iter().map(|v| (v - col[0]).abs()).fold(0.0, f64::max);
                assert!(drift <= 1e-9, "{}: {} drifts by {drift:e}", r.variant, s.name);
            }
        }
    }

    #[test]
    fn power_terms_add_up() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.5);
        for r in run_all(&sys, Some(&d), &cfg(5e-3, 3.0)) {
            let sig = |n: &str| r.signal(n).unwrap_or_else(|| panic!("{}: no {n}", r.variant));
            let zeros = vec![0.0; r.len()];
            let tie_sg = if r.variant == ModelVariant::Proposed || r.variant == ModelVariant::Sfr {
                &zeros[..]
            } else {
                sig("p_coi_tie_sg")
            };
            for k in 0..r.len() {
                let sum = sig("p_coi_loc")[k] + tie_sg[k] + sig("p_coi_tie_f")[k];
                assert!((sig("p_coi_ele")[k] - sum).abs() <= 1e-10, "{} coi at {k}", r.variant);
                let sum = sig("p_f0_loc")[k] + sig("p_f0_tie_sg")[k] + sig("p_f0_tie_gfl")[k];
                assert!((sig("p_f0_ele")[k] - sum).abs() <= 1e-10, "{} gfl at {k}", r.variant);
            }
        }
    }

    #[test]
    fn single_sg_coi_matches_multigen() {
        let sys = initialize_system(&single_machine()).unwrap();
        let d = step(1, 0.2, 0.3);
        let c = cfg(2e-3, 4.0);
        let full = simulate_multi_generator(&sys, Some(&d), &c).unwrap();
        let coi = simulate_coi(&sys, Some(&d), &c).unwrap();
        for name in ["omega_coi", "delta_coi", "p_coi_ele"] {
            assert!(max_diff(full.signal(name).unwrap(), coi.signal(name).unwrap()) <= 1e-9, "{name}");
        }
        // the step is visible at all
        let w = full.signal("omega_coi").unwrap();
        assert!(w.iter().cloned().fold(1.0, f64::min) < 0.999);
    }

    #[test]
    fn coherent_pair_coi_matches_weighted_average() {
        let sys = initialize_system(&coherent_pair()).unwrap();
        let d = step(2, 0.3, 0.2);
        let c = cfg(2e-3, 10.0);
        let full = simulate_multi_generator(&sys, Some(&d), &c).unwrap();
        let coi = simulate_coi(&sys, Some(&d), &c).unwrap();
        let (w0, w1) = (full.signal("omega_g0").unwrap(), full.signal("omega_g1").unwrap());
        let (a, b) = (sys.sgs[0].weight(), sys.sgs[1].weight());
        let avg: Vec<f64> = w0.iter().zip(w1).map(|(x, y)| (a * x + b * y) / (a + b)).collect();
        assert!(max_diff(&avg, coi.signal("omega_coi").unwrap()) <= 1e-6);
        assert!(max_diff(w0, w1) <= 1e-9);
    }

    #[test]
    fn sfr_without_gfl_matches_proposed() {
        let sys = initialize_system(&wecc9(false)).unwrap();
        let d = step(8, 0.1, 0.2);
        let c = cfg(5e-3, 3.0);
        let a = simulate_coi(&sys, Some(&d), &c).unwrap();
        let b = simulate_sfr_baseline(&sys, Some(&d), &c).unwrap();
        assert_eq!(a.signals, b.signals);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(max_diff(x, y) <= 1e-12);
        }
    }

    #[test]
    fn rotor_without_reactance_error_follows_reference() {
        // the replayed voltage is piecewise linear, so agreement is O(dt^2)
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.5);
        let rotor = RotorConfig { filter_reactance: 0.1, filter_error_pct: 0.0 };
        let gap = |dt: f64| {
            let c = cfg(dt, 3.0);
            let reference = simulate_nonlinear_reference(&sys, Some(&d), &c).unwrap();
            let r = simulate_rotor_motion_baseline(&sys, &reference, Some(&d), &c, rotor).unwrap();
            ["omega_coi", "p_f0_ele", "u_f0", "i_f0"]
                .map(|name| max_diff(r.signal(name).unwrap(), reference.signal(name).unwrap()))
                .into_iter()
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (gap(2e-3), gap(1e-3));
        assert!(coarse <= 1e-5, "{coarse:e}");
        assert!(coarse / fine > 3.5, "{coarse:e} {fine:e}");
    }

    #[test]
    fn rotor_needs_matching_grid() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.5);
        let reference = simulate_nonlinear_reference(&sys, Some(&d), &cfg(2e-3, 1.0)).unwrap();
        let err = simulate_rotor_motion_baseline(&sys, &reference, Some(&d), &cfg(1e-3, 1.0), RotorConfig::default());
        assert!(matches!(err, Err(SimError::Setup(_))));
    }

    #[test]
    fn jumps_at_the_disturbance() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.5);
        let c = cfg(2e-3, 1.0);
        let res = run_all(&sys, Some(&d), &c);
        let get = |v: ModelVariant| res.iter().find(|r| r.variant == v).unwrap();
        let l = sys.gfls[0].equivalent.l;
        let rated = sys.gfls[0].params.rated_power;
        for v in [ModelVariant::Multigen, ModelVariant::Proposed] {
            let r = get(v);
            let (p0, p1) = r.jump("p_f0_ele").unwrap();
            let (w0, w1) = r.jump("omega_f0").unwrap();
            assert!(((w1 - w0) - l * (p1 - p0) / rated).abs() <= 1e-8, "{v}");
            assert!((p1 - p0).abs() > 1e-4);
            let (a, b) = r.jump("omega_coi").unwrap();
            assert!((a - b).abs() <= 1e-12, "{v}");
            let (a, b) = r.jump("theta_i_f0").unwrap();
            assert!((a - b).abs() <= 1e-12, "{v}");
        }
        let (a, b) = get(ModelVariant::Rotor).jump("delta_int_rel_f0").unwrap();
        assert!((a - b).abs() > 1e-4);
        // at the switching instant every GFL still injects its old current
        let jr = get(ModelVariant::Reference).jump("p_f0_ele").unwrap();
        let jm = get(ModelVariant::Multigen).jump("p_f0_ele").unwrap();
        assert!(((jr.1 - jr.0) - (jm.1 - jm.0)).abs() <= 1e-9);
    }

    #[test]
    fn reruns_are_identical() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.2);
        let c = cfg(5e-3, 2.0);
        let a = run_all(&sys, Some(&d), &c);
        let b = run_all(&sys, Some(&d), &c);
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.values.iter().zip(&y.values) {
                assert!(p.iter().zip(q).all(|(u, v)| u.to_bits() == v.to_bits()), "{}", x.variant);
            }
        }
    }

    #[test]
    fn variants_come_back_in_request_order() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let order = [ModelVariant::Rotor, ModelVariant::Sfr, ModelVariant::Multigen];
        let out = simulate_variants(&sys, &order, None, &cfg(1e-2, 0.1), RotorConfig::default());
        assert_eq!(out.iter().map(|(v, _)| *v).collect::<Vec<_>>(), order);
        assert!(out.iter().all(|(_, r)| r.is_ok()));
    }

    #[test]
    fn sfr_gfl_power_is_constant() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(8, 0.1, 0.2);
        let r = simulate_sfr_baseline(&sys, Some(&d), &cfg(5e-3, 2.0)).unwrap();
        let p = r.signal("p_f0_ele").unwrap();
        assert!(p.iter().all(|v| (v - 0.85).abs() <= 1e-10));
    }

    #[test]
    fn disturbance_outside_network_rejected() {
        let sys = initialize_system(&wecc9(true)).unwrap();
        let d = step(42, 0.1, 0.2);
        assert!(matches!(simulate_multi_generator(&sys, Some(&d), &cfg(1e-2, 1.0)), Err(SimError::InvalidDisturbance(_))));
    }
}
