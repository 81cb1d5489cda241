//! Grid-following converter: simplified nonlinear model, operating point,
//! linearization, transfer functions and equivalent parameters.
//!
//! All quantities here are per unit on the converter rating. The network
//! boundary converts currents and powers with [`GflParams::rated_power`].
//!
//! Sign convention: the controller currents `(i_d, i_q)` are referred to
//! the PLL frame with the injected current `I = −(i_d + j i_q) e^{jθpll}`,
//! so injecting active power means `i_d < 0`.

mod equivalent;
mod linear;
mod nonlinear;
mod rational;

pub use equivalent::{
    assemble_transfer_functions, decompose_channel, extract_equivalents, ChannelEquivalent, GflEquivalent,
    GovernorCoefficients, TransferFunctions,
};
pub use linear::{realize_from_equivalent, realize_linear_model, GflLinearModel, LinearOutput};
pub use nonlinear::{nonlinear_gfl_derivatives, GflNonlinearOutputs, GflNonlinearState};
pub use rational::{Poly, Rational};

use crate::linalg::{wrap_angle, Phasor};
use serde::{Deserialize, Serialize};

/// Control and hardware parameters (converter base).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflParams {
    pub dc_capacitance: f64,
    /// DC voltage reference; the PI integrator makes it the steady value too.
    pub dc_voltage_setpoint: f64,
    pub kp_dc: f64,
    pub ki_dc: f64,
    pub kp_pll: f64,
    pub ki_pll: f64,
    /// Converter rating on the system base.
    pub rated_power: f64,
    /// Largest admissible current magnitude.
    pub current_limit: f64,
}

impl GflParams {
    pub fn validate(&self) -> Result<(), GflError> {
        let positive = [
            ("dc_capacitance", self.dc_capacitance),
            ("dc_voltage_setpoint", self.dc_voltage_setpoint),
            ("rated_power", self.rated_power),
            ("current_limit", self.current_limit),
        ];
        for (field, value) in positive {
            if !(value > 0.0) {
                return Err(GflError::InvalidParameter { field, value });
            }
        }
        let gains = [("kp_dc", self.kp_dc), ("ki_dc", self.ki_dc), ("kp_pll", self.kp_pll), ("ki_pll", self.ki_pll)];
        for (field, value) in gains {
            if !(value >= 0.0) {
                return Err(GflError::InvalidParameter { field, value });
            }
        }
        Ok(())
    }

    /// `U_dc0 · C_dc`.
    pub fn dc_energy_gain(&self) -> f64 {
        self.dc_voltage_setpoint * self.dc_capacitance
    }
}

/// Steady state of one converter (converter base).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflOperatingPoint {
    pub p_ele0: f64,
    pub q0: f64,
    pub u0: f64,
    pub theta_u0: f64,
    pub theta_pll0: f64,
    pub theta_i0: f64,
    pub id0: f64,
    pub iq0: f64,
}

impl GflOperatingPoint {
    pub fn current_magnitude(&self) -> f64 {
        self.id0.hypot(self.iq0)
    }

    pub fn current(&self) -> Phasor {
        Phasor::new(self.current_magnitude(), self.theta_i0)
    }

    /// Active power from the current/voltage relation
    /// `P = U I cos(θU − θI)`.
    pub fn power_from_currents(&self) -> f64 {
        self.u0 * self.current_magnitude() * (self.theta_u0 - self.theta_i0).cos()
    }
}

/// Angle of the injected current relative to the PLL frame. Equals
/// `atan(i_q / i_d)` whenever `i_d < 0`; zero for an idle converter.
pub fn current_phase(id: f64, iq: f64) -> f64 {
    if id == 0.0 && iq == 0.0 {
        0.0
    } else {
        (-iq).atan2(-id)
    }
}

/// Back-solves steady currents and angles for a dispatch `(p, q)` at the
/// given terminal voltage: `i_d = −p/U`, `i_q = q/U`, PLL locked to `θU`.
pub fn solve_operating_point(
    params: &GflParams,
    terminal: Phasor,
    p_inject: f64,
    q_inject: f64,
) -> Result<GflOperatingPoint, GflError> {
    params.validate()?;
    let u = terminal.magnitude;
    if !(u > 0.0) {
        return Err(GflError::ZeroVoltage);
    }
    let id0 = -p_inject / u;
    let iq0 = q_inject / u;
    let current = id0.hypot(iq0);
    if current > params.current_limit {
        return Err(GflError::CurrentLimit { required: current, limit: params.current_limit });
    }
    let theta_pll0 = terminal.angle;
    Ok(GflOperatingPoint {
        p_ele0: p_inject,
        q0: q_inject,
        u0: u,
        theta_u0: terminal.angle,
        theta_pll0,
        theta_i0: wrap_angle(theta_pll0 + current_phase(id0, iq0)),
        id0,
        iq0,
    })
}

/// Partial derivatives of the PLL detector, the phase transform and the
/// power relation at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizationCoeffs {
    /// `∂U_q/∂θU = U cos(θU − θpll)`.
    pub c_pll: f64,
    /// `∂θI/∂i_d = −i_q / (i_d² + i_q²)`.
    pub c_pi: f64,
    /// `∂P/∂i_d = U (i_d/I) cos(θU − θI)`.
    pub c_ei: f64,
    /// `∂P/∂θU = −U I sin(θU − θI)`.
    pub c_ep: f64,
}

impl LinearizationCoeffs {
    /// Gain of `Δi_d` in the PLL channel, `c_pi c_ep − c_ei`.
    pub fn coupling(&self) -> f64 {
        self.c_pi * self.c_ep - self.c_ei
    }
}

pub fn linearization_coefficients(op: &GflOperatingPoint) -> Result<LinearizationCoeffs, GflError> {
    let i2 = op.id0 * op.id0 + op.iq0 * op.iq0;
    if i2 == 0.0 {
        return Err(GflError::ZeroCurrent);
    }
    let i = i2.sqrt();
    let du = op.theta_u0 - op.theta_i0;
    Ok(LinearizationCoeffs {
        c_pll: op.u0 * (op.theta_u0 - op.theta_pll0).cos(),
        c_pi: -op.iq0 / i2,
        c_ei: op.u0 * (op.id0 / i) * du.cos(),
        c_ep: -op.u0 * i * du.sin(),
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GflError {
    #[error("gfl parameter {field} is invalid: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("terminal voltage magnitude must be positive")]
    ZeroVoltage,
    #[error("required current {required:.4} pu exceeds the limit {limit:.4} pu")]
    CurrentLimit { required: f64, limit: f64 },
    #[error("zero current magnitude: phase transform is not differentiable")]
    ZeroCurrent,
    #[error("{which}: leading denominator coefficient {coefficient:.3e} vanishes")]
    VanishingLeading { which: &'static str, coefficient: f64 },
    #[error("{which}: degree structure violated (numerator degree {num:?}, denominator degree {den:?})")]
    DegreeStructure { which: &'static str, num: Option<usize>, den: Option<usize> },
    #[error("DC link voltage collapsed to {u_dc:.4} pu")]
    DcCollapse { u_dc: f64 },
}
