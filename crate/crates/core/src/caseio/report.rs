//! Model parameters of an initialized case in the layout of the paper's
//! numerical summary: COI inertia, converter equivalents, network terms.

use super::CaseError;
use crate::network::{build_partitioned_admittance, coi_frame_reduction};
use crate::sim::PowerSystem;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct GflRows {
    pub name: String,
    pub c_pi: f64,
    pub h_id: f64,
    pub h_pll: f64,
    pub h: f64,
    pub l_id: f64,
    pub l_pll: f64,
    pub l: f64,
    /// `(a2, a1, b1, b0)` of the PLL governor when it is second order.
    pub governor: Option<(f64, f64, f64, f64)>,
    pub osc_hz: Option<f64>,
    /// COI–converter tie coefficients seen from the converter end.
    pub v_eq: f64,
    pub w_eq: f64,
    /// Diagonal of the converter impedance block.
    pub r_eq: f64,
    pub x_eq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub h_coi: f64,
    /// Real part of the COI self admittance.
    pub g_eq: f64,
    pub gfls: Vec<GflRows>,
}

pub fn model_summary(sys: &PowerSystem, gfl_names: &[String]) -> Result<ModelSummary, CaseError> {
    let part = build_partitioned_admittance(&sys.network)?;
    let coi = coi_frame_reduction(&part, &sys.network.shunt_loads)?;
    let (hs, s) = sys.sgs.iter().fold((0.0, 0.0), |(a, b), g| (a + g.weight(), b + g.rated_power_s));
    let gfls = sys
        .gfls
        .iter()
        .enumerate()
        .map(|(f, u)| {
            let eq = &u.equivalent;
            // the converter end sees conj(T)
            let t = coi.t_eq[f].conj();
            let z = coi.z_eq[(f, f)];
            GflRows {
                name: gfl_names.get(f).cloned().unwrap_or_else(|| format!("gfl{f}")),
                c_pi: eq.c_pi,
                h_id: eq.h_id,
                h_pll: eq.h_pll,
                h: eq.h,
                l_id: eq.l_id,
                l_pll: eq.l_pll,
                l: eq.l,
                governor: eq.governor_coefficients.map(|g| (g.a2, g.a1, g.b1, g.b0)),
                osc_hz: eq.osc_hz,
                v_eq: t.re,
                w_eq: t.im,
                r_eq: z.re,
                x_eq: z.im,
            }
        })
        .collect();
    Ok(ModelSummary { h_coi: hs / s, g_eq: coi.y_eq.re, gfls })
}

impl ModelSummary {
    /// Flat `(key, value)` pairs, keys prefixed by the converter name.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![("coi.h_s".to_string(), self.h_coi), ("network.g_eq_pu".to_string(), self.g_eq)];
        for g in &self.gfls {
            let k = |s: &str| format!("gfl.{}.{s}", g.name);
            out.extend([
                (k("c_pi"), g.c_pi),
                (k("h_f_id_s"), g.h_id),
                (k("h_f_pll_s"), g.h_pll),
                (k("h_f_s"), g.h),
                (k("l_f_id_pu"), g.l_id),
                (k("l_f_pll_pu"), g.l_pll),
                (k("l_f_pu"), g.l),
            ]);
            if let Some((a2, a1, b1, b0)) = g.governor {
                out.extend([(k("a2_pu"), a2), (k("a1_pu"), a1), (k("b1_pu"), b1), (k("b0_pu"), b0)]);
            }
            if let Some(w) = g.osc_hz {
                out.push((k("osc_hz"), w));
            }
            out.extend([(k("v_eq_pu"), g.v_eq), (k("w_eq_pu"), g.w_eq), (k("r_eq_pu"), g.r_eq), (k("x_eq_pu"), g.x_eq)]);
        }
        out
    }

    /// Plain-text table: part, parameter, unit, value.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut row = |part: &str, name: &str, unit: &str, v: Option<f64>| {
            let v = v.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(s, "{part:<22} {name:<14} {unit:<5} {v:>10}");
        };
        row("COI dynamics", "H_coi", "s", Some(self.h_coi));
        for g in &self.gfls {
            let part = format!("GFL {}", g.name);
            row(&part, "c_pi", "", Some(g.c_pi));
            row(&part, "H_f_id", "s", Some(g.h_id));
            row(&part, "H_f_pll", "s", Some(g.h_pll));
            row(&part, "H_f", "s", Some(g.h));
            row(&part, "L_f_id", "pu", Some(g.l_id));
            row(&part, "L_f_pll", "pu", Some(g.l_pll));
            row(&part, "L_f", "pu", Some(g.l));
            row(&part, "a2", "pu", g.governor.map(|x| x.0));
            row(&part, "a1", "pu", g.governor.map(|x| x.1));
            row(&part, "b1", "pu", g.governor.map(|x| x.2));
            row(&part, "b0", "pu", g.governor.map(|x| x.3));
            row(&part, "osc", "Hz", g.osc_hz);
        }
        row("Network", "G_eq", "pu", Some(self.g_eq));
        for g in &self.gfls {
            row("Network", &format!("V_eq {}", g.name), "pu", Some(g.v_eq));
            row("Network", &format!("W_eq {}", g.name), "pu", Some(g.w_eq));
            row("Network", &format!("R_eq {}", g.name), "pu", Some(g.r_eq));
            row("Network", &format!("X_eq {}", g.name), "pu", Some(g.x_eq));
        }
        s
    }
}
