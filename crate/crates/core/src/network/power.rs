//! Local and tie power terms of the interface phasors.
//!
//! SG–SG and GFL–GFL ties use the reduced matrices directly. For SG–GFL
//! ties, [`tie_power_sg_gfl`] evaluates `A·B·(−V cos(α−β) + W sin(α−β))`
//! for a coefficient `V + jW`. Each end feeds it its own coefficient taken
//! from the current transfer block `T = V + jW`: the SG end uses `−conj(T)`,
//! the GFL end `conj(T)`. With those coefficients the terms sum to
//! `Re(E conj(I_G))` and `Re(U conj(I_F))` exactly, so power is conserved
//! across the network.

use super::HybridInterfaceMatrix;
use crate::linalg::{ComplexValue, Phasor};

/// `E_i E_j (G cos(δi−δj) + B sin(δi−δj))` for `y_ij = G + jB`.
pub fn tie_power_sg_sg(e_i: Phasor, e_j: Phasor, y_ij: ComplexValue) -> f64 {
    let d = e_i.angle - e_j.angle;
    e_i.magnitude * e_j.magnitude * (y_ij.re * d.cos() + y_ij.im * d.sin())
}

/// `E I (−V cos(δ−θ) + W sin(δ−θ))` for `t = V + jW`; swap the phasors to
/// evaluate from the other end.
pub fn tie_power_sg_gfl(e: Phasor, i: Phasor, t: ComplexValue) -> f64 {
    let d = e.angle - i.angle;
    e.magnitude * i.magnitude * (-t.re * d.cos() + t.im * d.sin())
}

/// `E^2 G_ii`.
pub fn local_power_sg(e: Phasor, g_ii: f64) -> f64 {
    e.magnitude * e.magnitude * g_ii
}

/// `I^2 R_ii`.
pub fn local_power_gfl(i: Phasor, r_ii: f64) -> f64 {
    i.magnitude * i.magnitude * r_ii
}

/// Electrical power of one SG split into its components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SgPowerTerms {
    pub local: f64,
    pub tie_sg: f64,
    pub tie_gfl: f64,
}

impl SgPowerTerms {
    pub fn total(&self) -> f64 {
        self.local + self.tie_sg + self.tie_gfl
    }
}

/// Electrical power of one GFL split into its components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GflPowerTerms {
    pub local: f64,
    pub tie_gfl: f64,
    pub tie_sg: f64,
}

impl GflPowerTerms {
    pub fn total(&self) -> f64 {
        self.local + self.tie_gfl + self.tie_sg
    }
}

/// Per-SG power components on the hybrid network.
pub fn sg_power_terms(h: &HybridInterfaceMatrix, e: &[Phasor], i: &[Phasor]) -> Vec<SgPowerTerms> {
    (0..h.n_g())
        .map(|g| {
            let local = local_power_sg(e[g], h.y_eq[(g, g)].re);
            let tie_sg = (0..h.n_g()).filter(|&k| k != g).map(|k| tie_power_sg_sg(e[g], e[k], h.y_eq[(g, k)])).sum();
            let tie_gfl = (0..h.n_f()).map(|f| tie_power_sg_gfl(e[g], i[f], -h.t_eq[(g, f)].conj())).sum();
            SgPowerTerms { local, tie_sg, tie_gfl }
        })
        .collect()
}

/// Per-GFL power components on the hybrid network.
pub fn gfl_power_terms(h: &HybridInterfaceMatrix, e: &[Phasor], i: &[Phasor]) -> Vec<GflPowerTerms> {
    (0..h.n_f())
        .map(|f| {
            let local = local_power_gfl(i[f], h.z_eq[(f, f)].re);
            let tie_gfl = (0..h.n_f())
                .filter(|&k| k != f)
                .map(|k| {
                    let z = h.z_eq[(f, k)];
                    let d = i[f].angle - i[k].angle;
                    i[f].magnitude * i[k].magnitude * (z.re * d.cos() + z.im * d.sin())
                })
                .sum();
            let tie_sg = (0..h.n_g()).map(|g| tie_power_sg_gfl(i[f], e[g], h.t_eq[(g, f)].conj())).sum();
            GflPowerTerms { local, tie_gfl, tie_sg }
        })
        .collect()
}
