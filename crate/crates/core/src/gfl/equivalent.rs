//! Transfer functions of the two GFL channels and their decomposition into
//! equivalent inertia, governor and proportional coefficient.

use super::rational::{Poly, Rational};
use super::{GflError, GflParams, LinearizationCoeffs};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `Δi_d = J_id(s) ΔP` and `Δθpll = J_pll(s) ΔP` (converter base).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunctions {
    pub j_id: Rational,
    pub j_pll: Rational,
}

impl TransferFunctions {
    /// `ΔθI / ΔP = c_pi J_id + J_pll`.
    pub fn theta_i(&self, c_pi: f64, s: crate::ComplexValue) -> crate::ComplexValue {
        c_pi * self.j_id.eval(s) + self.j_pll.eval(s)
    }
}

/// Builds `J_id = (Kp_dc s + Ki_dc) / (U_dc0 C s²)` and the PLL channel.
///
/// The PLL channel closes the detector loop `Δθpll = c_pll (Kp s + Ki)/s² ·
/// (ΔθU − Δθpll)` with `ΔθU` taken from the linearized power relation
/// `ΔP = c_ei Δi_d + c_ep (ΔθU − ΔθI)` and `ΔθI = c_pi Δi_d + Δθpll`, which
/// leaves `J_pll = c_pll (Kp s + Ki)/s² · (1 + (c_pi c_ep − c_ei) J_id) / c_ep`.
pub fn assemble_transfer_functions(params: &GflParams, coeffs: &LinearizationCoeffs) -> Result<TransferFunctions, GflError> {
    params.validate()?;
    let uc = params.dc_energy_gain();
    let dc_pi = Poly::new(vec![params.ki_dc, params.kp_dc]);
    let j_id = Rational::new(dc_pi.clone(), Poly::monomial(2).scale(uc))
        .ok_or(GflError::VanishingLeading { which: "J_id", coefficient: uc })?;

    let pll_pi = Poly::new(vec![params.ki_pll, params.kp_pll]).scale(coeffs.c_pll);
    // 1 + k J_id = (UC s² + k (Kp_dc s + Ki_dc)) / (UC s²)
    let inner = Poly::monomial(2).scale(uc).add(&dc_pi.scale(coeffs.coupling()));
    let num = pll_pi.mul(&inner);
    let den_lead = coeffs.c_ep * uc;
    let scale = num.0.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    if den_lead.abs() <= 1e-12 * scale {
        return Err(GflError::VanishingLeading { which: "J_pll", coefficient: den_lead });
    }
    let j_pll = Rational::new(num, Poly::monomial(4).scale(den_lead))
        .ok_or(GflError::VanishingLeading { which: "J_pll", coefficient: den_lead })?;
    Ok(TransferFunctions { j_id, j_pll })
}

/// Governor `(a2 s² + a1 s) / (s² + b1 s + b0)` in named form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorCoefficients {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub b1: f64,
    pub b0: f64,
}

/// Decomposition of `s J(s) / ω0 = L + R(s)` with
/// `R(s) = −1 / (2 H s − J_F(s))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEquivalent {
    /// Infinite when the channel has no integrator term.
    pub h: f64,
    pub l: f64,
    pub governor: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GflEquivalent {
    pub h_id: f64,
    pub h_pll: f64,
    pub h: f64,
    pub l_id: f64,
    pub l_pll: f64,
    pub l: f64,
    pub c_pi: f64,
    pub governor_id: Rational,
    pub governor_pll: Rational,
    /// Present when the PLL governor has a second-order denominator.
    pub governor_coefficients: Option<GovernorCoefficients>,
    /// `sqrt(4 b0 − b1) / (4π)`, Hz.
    pub osc_hz: Option<f64>,
    /// Damped natural frequency of `s² + b1 s + b0`, `sqrt(4 b0 − b1²) / (4π)`, Hz.
    pub osc_damped_hz: Option<f64>,
}

impl GflEquivalent {
    /// `1 / H = c_pi / H_id + 1 / H_pll`.
    pub fn combine_inertia(c_pi: f64, h_id: f64, h_pll: f64) -> f64 {
        1.0 / (c_pi / h_id + 1.0 / h_pll)
    }

    /// `L = c_pi L_id + L_pll`.
    pub fn combine_proportional(c_pi: f64, l_id: f64, l_pll: f64) -> f64 {
        c_pi * l_id + l_pll
    }

    /// `sqrt(4 b0 − b1) / (4π)`.
    pub fn oscillation_hz(b0: f64, b1: f64) -> Option<f64> {
        let r = 4.0 * b0 - b1;
        (r >= 0.0).then(|| r.sqrt() / (4.0 * PI))
    }

    pub fn damped_oscillation_hz(b0: f64, b1: f64) -> Option<f64> {
        let r = 4.0 * b0 - b1 * b1;
        (r >= 0.0).then(|| r.sqrt() / (4.0 * PI))
    }
}

const ZERO_TOL: f64 = 1e-12;

fn decompose(which: &'static str, j: &Rational, omega0: f64) -> Result<ChannelEquivalent, GflError> {
    let num = j.num.shift(1).scale(1.0 / omega0);
    let den = &j.den;
    let (nd, dd) = (num.degree(), den.degree());
    match (nd, dd) {
        (Some(n), Some(d)) if n == d => {}
        (None, _) => return Ok(ChannelEquivalent { h: f64::INFINITY, l: 0.0, governor: Rational::zero() }),
        _ => return Err(GflError::DegreeStructure { which, num: nd, den: dd }),
    }
    let (q, rem) = num.div_rem(den);
    let l = q.coeff(0);
    let rem = rem.clean(ZERO_TOL);
    if rem.is_zero() {
        return Ok(ChannelEquivalent { h: f64::INFINITY, l, governor: Rational::zero() });
    }
    if rem.degree().map(|r| r + 1) != dd {
        return Err(GflError::DegreeStructure { which, num: rem.degree(), den: dd });
    }
    // −1/R = −den/rem = q1 s + q0 + r2/rem = 2 H s − J_F
    let (q2, r2) = den.scale(-1.0).div_rem(&rem);
    let h = 0.5 * q2.coeff(1);
    let gov_num = rem.scale(-q2.coeff(0)).sub(&r2).clean(ZERO_TOL);
    let governor = if gov_num.is_zero() {
        Rational::zero()
    } else {
        Rational::new(gov_num, rem).expect("nonzero remainder").cancel_origin(1e-10)
    };
    Ok(ChannelEquivalent { h, l, governor })
}

/// Splits both channels and combines them into the converter equivalent.
pub fn extract_equivalents(
    tfs: &TransferFunctions,
    coeffs: &LinearizationCoeffs,
    omega0: f64,
) -> Result<GflEquivalent, GflError> {
    let id = decompose("J_id", &tfs.j_id, omega0)?;
    let pll = decompose("J_pll", &tfs.j_pll, omega0)?;
    if !pll.h.is_finite() {
        return Err(GflError::DegreeStructure { which: "J_pll", num: tfs.j_pll.num.degree(), den: tfs.j_pll.den.degree() });
    }
    let gov = &pll.governor;
    let governor_coefficients = (gov.den.degree() == Some(2) && gov.num.degree().is_some_and(|d| d <= 2)).then(|| GovernorCoefficients {
        a2: gov.num.coeff(2),
        a1: gov.num.coeff(1),
        a0: gov.num.coeff(0),
        b1: gov.den.coeff(1),
        b0: gov.den.coeff(0),
    });
    let osc_hz = governor_coefficients.and_then(|g| GflEquivalent::oscillation_hz(g.b0, g.b1));
    let osc_damped_hz = governor_coefficients.and_then(|g| GflEquivalent::damped_oscillation_hz(g.b0, g.b1));
    Ok(GflEquivalent {
        h_id: id.h,
        h_pll: pll.h,
        h: GflEquivalent::combine_inertia(coeffs.c_pi, id.h, pll.h),
        l_id: id.l,
        l_pll: pll.l,
        l: GflEquivalent::combine_proportional(coeffs.c_pi, id.l, pll.l),
        c_pi: coeffs.c_pi,
        governor_id: id.governor,
        governor_pll: pll.governor,
        governor_coefficients,
        osc_hz,
        osc_damped_hz,
    })
}

/// Channel decomposition exposed for diagnostics.
pub fn decompose_channel(which: &'static str, j: &Rational, omega0: f64) -> Result<ChannelEquivalent, GflError> {
    decompose(which, j, omega0)
}
