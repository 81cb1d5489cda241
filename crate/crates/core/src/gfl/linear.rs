//! State-space form of the linearized converter, driven by `ΔP`.
//!
//! Both channel transfer functions have every pole at the origin, so each
//! channel is an integrator chain `q_k = ΔP / s^k` (controllable canonical
//! form of `n(s) / s^m`). The channel frequency splits into the continuous
//! part `ω_c = R(s) ΔP = Σ r_k q_k` and the proportional part `L ΔP`; the
//! integrated variable (`Δi_d` or `Δθpll`) follows `ω0 (ω_c + L ΔP)`.
//! Keeping the origin poles as exact zeros of `A` avoids the loss of digits
//! a governor-loop realization suffers at low frequency.

use super::equivalent::{extract_equivalents, GflEquivalent, TransferFunctions};
use super::rational::Rational;
use super::{GflError, LinearizationCoeffs};
use crate::linalg::{CMatrix, ComplexLu, ComplexValue};
use nalgebra::{DMatrix, DVector};

/// Output rows of [`GflLinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearOutput {
    ThetaI = 0,
    OmegaF = 1,
    OmegaId = 2,
    OmegaPll = 3,
    OmegaContinuous = 4,
    OmegaDiscontinuous = 5,
    Id = 6,
    /// Governor output `J_F ω_c` of the PLL channel.
    MechPll = 7,
    OmegaContinuousId = 8,
    OmegaContinuousPll = 9,
}

pub const OUTPUT_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GflLinearModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub state_labels: Vec<String>,
    pub omega0: f64,
}

/// Integrator-chain data of one channel: `s J / ω0 = L + Σ r_k / s^k`.
struct Chain {
    l: f64,
    /// `r_1 .. r_{m-1}`.
    r: Vec<f64>,
}

fn chain(which: &'static str, j: &Rational, omega0: f64) -> Result<Chain, GflError> {
    let m = j.den.degree().unwrap_or(0);
    let pure_origin = m >= 1 && (0..m).all(|k| j.den.coeff(k) == 0.0);
    if !pure_origin || j.num.degree().is_some_and(|d| d >= m) {
        return Err(GflError::DegreeStructure { which, num: j.num.degree(), den: j.den.degree() });
    }
    // s J / ω0 = Σ n_k s^(k+1-m) / ω0
    let l = j.num.coeff(m - 1) / omega0;
    let r = (1..m).map(|k| j.num.coeff(m - 1 - k) / omega0).collect();
    Ok(Chain { l, r })
}

/// Builds the realization, extracting the equivalents on the way.
pub fn realize_linear_model(
    tfs: &TransferFunctions,
    coeffs: &LinearizationCoeffs,
    omega0: f64,
) -> Result<GflLinearModel, GflError> {
    let eq = extract_equivalents(tfs, coeffs, omega0)?;
    realize_from_equivalent(tfs, coeffs, &eq, omega0)
}

/// Realization when the equivalents are already known.
pub fn realize_from_equivalent(
    tfs: &TransferFunctions,
    coeffs: &LinearizationCoeffs,
    eq: &GflEquivalent,
    omega0: f64,
) -> Result<GflLinearModel, GflError> {
    let id = chain("J_id", &tfs.j_id, omega0)?;
    let pll = chain("J_pll", &tfs.j_pll, omega0)?;
    let (mi, mp) = (id.r.len(), pll.r.len());
    let n = mi + mp + 2;
    // state order: q_id.., Δi_d, q_pll.., Δθpll
    let (q_id0, x_id, q_pll0, x_pll) = (0, mi, mi + 1, mi + 1 + mp);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = DMatrix::zeros(OUTPUT_COUNT, n);
    let mut d = DVector::zeros(OUTPUT_COUNT);
    let row = |o: LinearOutput| o as usize;
    let cp = coeffs.c_pi;

    for (ch, q0, x, weight, own) in [
        (&id, q_id0, x_id, cp, LinearOutput::OmegaContinuousId),
        (&pll, q_pll0, x_pll, 1.0, LinearOutput::OmegaContinuousPll),
    ] {
        let m = ch.r.len();
        if m > 0 {
            b[q0] = 1.0;
        }
        for k in 1..m {
            a[(q0 + k, q0 + k - 1)] = 1.0;
        }
        b[x] = omega0 * ch.l;
        for (k, &rk) in ch.r.iter().enumerate() {
            a[(x, q0 + k)] = omega0 * rk;
            c[(row(own), q0 + k)] = rk;
            c[(row(LinearOutput::OmegaContinuous), q0 + k)] += weight * rk;
            c[(row(LinearOutput::OmegaF), q0 + k)] += weight * rk;
        }
        let omega = if x == x_id { LinearOutput::OmegaId } else { LinearOutput::OmegaPll };
        for k in 0..m {
            c[(row(omega), q0 + k)] = ch.r[k];
        }
        d[row(omega)] = ch.l;
    }
    c[(row(LinearOutput::ThetaI), x_id)] = cp;
    c[(row(LinearOutput::ThetaI), x_pll)] = 1.0;
    c[(row(LinearOutput::Id), x_id)] = 1.0;
    d[row(LinearOutput::OmegaF)] = eq.l;
    d[row(LinearOutput::OmegaDiscontinuous)] = eq.l;

    // J_F ω_c = 2H s ω_c + ΔP = 2H Σ r_k q_{k-1} + ΔP with q_0 = ΔP
    let h2 = 2.0 * eq.h_pll;
    if let Some(&r1) = pll.r.first() {
        d[row(LinearOutput::MechPll)] = 1.0 + h2 * r1;
    }
    for k in 1..mp {
        c[(row(LinearOutput::MechPll), q_pll0 + k - 1)] = h2 * pll.r[k];
    }

    let mut state_labels: Vec<String> = (1..=mi).map(|k| format!("dc_integrator_{k}")).collect();
    state_labels.push("delta_id".into());
    state_labels.extend((1..=mp).map(|k| format!("pll_integrator_{k}")));
    state_labels.push("delta_theta_pll".into());
    Ok(GflLinearModel { a, b, c, d, state_labels, omega0 })
}

impl GflLinearModel {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `dx/dt = A x + B ΔP` written into `dx`.
    pub fn derivatives(&self, x: &[f64], dp: f64, dx: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.b[i] * dp;
            for j in 0..n {
                s += self.a[(i, j)] * x[j];
            }
            dx[i] = s;
        }
    }

    pub fn output(&self, which: LinearOutput, x: &[f64], dp: f64) -> f64 {
        let r = which as usize;
        let mut s = self.d[r] * dp;
        for (j, xj) in x.iter().enumerate() {
            s += self.c[(r, j)] * xj;
        }
        s
    }

    /// `C (sI − A)^-1 B + D` for one output row.
    pub fn frequency_response(&self, which: LinearOutput, s: ComplexValue) -> ComplexValue {
        let n = self.dim();
        let m = CMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { ComplexValue::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs: Vec<ComplexValue> = self.b.iter().map(|&v| ComplexValue::new(v, 0.0)).collect();
        let x = ComplexLu::factor(&m).expect("s is not an eigenvalue").solve_vec(&rhs);
        let r = which as usize;
        let mut y = ComplexValue::new(self.d[r], 0.0);
        for (j, xj) in x.iter().enumerate() {
            y += self.c[(r, j)] * xj;
        }
        y
    }
}
