//! Simplified nonlinear converter on the frequency-dynamics time scale:
//! DC-link energy balance, DC-voltage PI producing `i_d`, and a PI-type PLL
//! with a `U sin(θU − θpll)` detector. `i_q` is frozen.

use super::{current_phase, GflError, GflOperatingPoint, GflParams};
use crate::linalg::{ComplexValue, Phasor};

/// `[U_dc, x_dc, x_pll, θpll]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GflNonlinearState {
    pub u_dc: f64,
    /// DC PI integrator (equals `i_d` in steady state).
    pub x_dc: f64,
    /// PLL PI integrator, rad/s.
    pub x_pll: f64,
    pub theta_pll: f64,
}

impl GflNonlinearState {
    pub const DIM: usize = 4;

    pub fn at_equilibrium(op: &GflOperatingPoint, params: &GflParams) -> Self {
        GflNonlinearState { u_dc: params.dc_voltage_setpoint, x_dc: op.id0, x_pll: 0.0, theta_pll: op.theta_pll0 }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        GflNonlinearState { u_dc: x[0], x_dc: x[1], x_pll: x[2], theta_pll: x[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.u_dc, self.x_dc, self.x_pll, self.theta_pll]
    }

    /// d-axis current command.
    pub fn id(&self, params: &GflParams) -> f64 {
        params.kp_dc * (params.dc_voltage_setpoint - self.u_dc) + self.x_dc
    }

    /// Injected current phasor for frozen `i_q` (converter base).
    pub fn current(&self, params: &GflParams, iq: f64) -> ComplexValue {
        let id = self.id(params);
        -ComplexValue::new(id, iq) * ComplexValue::from_polar(1.0, self.theta_pll)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GflNonlinearOutputs {
    pub id: f64,
    pub current: Phasor,
    pub p_ele: f64,
    pub u_q: f64,
    /// `dθI/dt`, rad/s.
    pub d_theta_i: f64,
}

/// State derivatives for a given terminal voltage, input power `p_in` and
/// frozen `iq` (converter base).
pub fn nonlinear_gfl_derivatives(
    state: &GflNonlinearState,
    terminal: Phasor,
    params: &GflParams,
    p_in: f64,
    iq: f64,
) -> Result<([f64; 4], GflNonlinearOutputs), GflError> {
    if !(state.u_dc > 0.0) {
        return Err(GflError::DcCollapse { u_dc: state.u_dc });
    }
    let id = state.id(params);
    let i = state.current(params, iq);
    let u = terminal.to_complex();
    let p_ele = (u * i.conj()).re;
    let err = params.dc_voltage_setpoint - state.u_dc;
    let d_udc = (p_in - p_ele) / (params.dc_capacitance * state.u_dc);
    let d_xdc = params.ki_dc * err;
    let u_q = terminal.magnitude * (terminal.angle - state.theta_pll).sin();
    let d_xpll = params.ki_pll * u_q;
    let d_theta_pll = params.kp_pll * u_q + state.x_pll;
    let i2 = id * id + iq * iq;
    let d_id = -params.kp_dc * d_udc + d_xdc;
    let d_phase = if i2 > 0.0 { -iq / i2 * d_id } else { 0.0 };
    let current = Phasor::new(i2.sqrt(), state.theta_pll + current_phase(id, iq));
    Ok((
        [d_udc, d_xdc, d_xpll, d_theta_pll],
        GflNonlinearOutputs { id, current, p_ele, u_q, d_theta_i: d_theta_pll + d_phase },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::tests::wecc_params;
    use super::super::solve_operating_point;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_holds() {
        let p = wecc_params();
        let term = Phasor::new(0.98, 0.12);
        let op = solve_operating_point(&p, term, 0.45, 0.2).unwrap();
        let st = GflNonlinearState::at_equilibrium(&op, &p);
        let (d, out) = nonlinear_gfl_derivatives(&st, term, &p, op.p_ele0, op.iq0).unwrap();
        for v in d {
            assert!(v.abs() < 1e-14, "{d:?}");
        }
        assert_relative_eq!(out.p_ele, 0.45, epsilon = 1e-14);
        assert_relative_eq!(out.current.angle, op.theta_i0, epsilon = 1e-14);
    }

    #[test]
    fn dc_ramp_rate() {
        let p = wecc_params();
        let term = Phasor::new(1.0, 0.0);
        let op = solve_operating_point(&p, term, 0.4, 0.1).unwrap();
        let st = GflNonlinearState::at_equilibrium(&op, &p);
        let (d, _) = nonlinear_gfl_derivatives(&st, term, &p, op.p_ele0 + 0.05, op.iq0).unwrap();
        assert_relative_eq!(d[0], 0.05 / p.dc_energy_gain(), max_relative = 1e-12);
    }

    #[test]
    fn collapse_flagged() {
        let p = wecc_params();
        let st = GflNonlinearState { u_dc: 0.0, ..Default::default() };
        assert!(nonlinear_gfl_derivatives(&st, Phasor::new(1.0, 0.0), &p, 0.1, 0.0).is_err());
    }
}
