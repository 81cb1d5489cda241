//! Newton–Raphson AC power flow on the bus network (no EMF nodes). Loads
//! are constant power here; callers convert them to admittances at the
//! solved voltages.

use super::{Branch, NetworkError};
use crate::linalg::{CMatrix, ComplexValue};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// Specified quantities of one bus; `p_gen`/`q_gen` are ignored where the
/// bus type leaves them free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowBus {
    pub kind: BusKind,
    pub p_gen: f64,
    pub q_gen: f64,
    pub p_load: f64,
    pub q_load: f64,
    pub v_set: f64,
}

impl PowerFlowBus {
    pub fn load(p_load: f64, q_load: f64) -> Self {
        PowerFlowBus { kind: BusKind::Pq, p_gen: 0.0, q_gen: 0.0, p_load, q_load, v_set: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub voltage: Vec<ComplexValue>,
    /// Net complex power injected into the network at each bus.
    pub injection: Vec<ComplexValue>,
    pub iterations: usize,
    pub mismatch: f64,
}

impl PowerFlowSolution {
    /// Complex generation at a bus (net injection plus its load).
    pub fn generation(&self, bus: usize, data: &[PowerFlowBus]) -> ComplexValue {
        self.injection[bus] + ComplexValue::new(data[bus].p_load, data[bus].q_load)
    }
}

fn bus_admittance(n: usize, branches: &[Branch]) -> CMatrix {
    let mut y = CMatrix::zeros(n, n);
    for b in branches {
        let (f, t, a) = (b.from, b.to, b.series_admittance);
        y[(f, f)] += a;
        y[(t, t)] += a;
        y[(f, t)] -= a;
        y[(t, f)] -= a;
        let half = ComplexValue::new(0.0, 0.5 * b.charging_susceptance);
        y[(f, f)] += half;
        y[(t, t)] += half;
    }
    y
}

/// Solves the power flow to `tol` (max mismatch, pu) within `max_iter`.
pub fn solve_power_flow(
    branches: &[Branch],
    buses: &[PowerFlowBus],
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution, NetworkError> {
    let n = buses.len();
    if buses.iter().filter(|b| b.kind == BusKind::Slack).count() != 1 {
        return Err(NetworkError::PowerFlow("exactly one slack bus is required".into()));
    }
    let y = bus_admittance(n, branches);
    let g = y.map(|z| z.re);
    let b = y.map(|z| z.im);
    let mut vm: Vec<f64> = buses.iter().map(|d| if d.kind == BusKind::Pq { 1.0 } else { d.v_set }).collect();
    let mut va = vec![0.0; n];
    let ang_idx: Vec<usize> = (0..n).filter(|&i| buses[i].kind != BusKind::Slack).collect();
    let mag_idx: Vec<usize> = (0..n).filter(|&i| buses[i].kind == BusKind::Pq).collect();
    let p_spec: Vec<f64> = buses.iter().map(|d| d.p_gen - d.p_load).collect();
    let q_spec: Vec<f64> = buses.iter().map(|d| d.q_gen - d.q_load).collect();

    let calc = |vm: &[f64], va: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                let d = va[i] - va[k];
                let (s, c) = d.sin_cos();
                p[i] += vm[i] * vm[k] * (g[(i, k)] * c + b[(i, k)] * s);
                q[i] += vm[i] * vm[k] * (g[(i, k)] * s - b[(i, k)] * c);
            }
        }
        (p, q)
    };

    let dim = ang_idx.len() + mag_idx.len();
    let mut iterations = 0;
    loop {
        let (p, q) = calc(&vm, &va);
        let mut f = DVector::zeros(dim);
        for (r, &i) in ang_idx.iter().enumerate() {
            f[r] = p_spec[i] - p[i];
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            f[ang_idx.len() + r] = q_spec[i] - q[i];
        }
        let mismatch = f.amax();
        if mismatch <= tol {
            let voltage: Vec<ComplexValue> = (0..n).map(|i| ComplexValue::from_polar(vm[i], va[i])).collect();
            let injection = (0..n).map(|i| ComplexValue::new(p[i], q[i])).collect();
            return Ok(PowerFlowSolution { voltage, injection, iterations, mismatch });
        }
        if iterations >= max_iter {
            return Err(NetworkError::PowerFlow(format!(
                "no convergence after {max_iter} iterations (mismatch {mismatch:.3e})"
            )));
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for (r, &i) in ang_idx.iter().enumerate() {
            for (cidx, &k) in ang_idx.iter().enumerate() {
                jac[(r, cidx)] = if i == k {
                    -q[i] - b[(i, i)] * vm[i] * vm[i]
                } else {
                    let d = va[i] - va[k];
                    vm[i] * vm[k] * (g[(i, k)] * d.sin() - b[(i, k)] * d.cos())
                };
            }
            for (cidx, &k) in mag_idx.iter().enumerate() {
                jac[(r, ang_idx.len() + cidx)] = if i == k {
                    p[i] / vm[i] + g[(i, i)] * vm[i]
                } else {
                    let d = va[i] - va[k];
                    vm[i] * (g[(i, k)] * d.cos() + b[(i, k)] * d.sin())
                };
            }
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            let row = ang_idx.len() + r;
            for (cidx, &k) in ang_idx.iter().enumerate() {
                jac[(row, cidx)] = if i == k {
                    p[i] - g[(i, i)] * vm[i] * vm[i]
                } else {
                    let d = va[i] - va[k];
                    -vm[i] * vm[k] * (g[(i, k)] * d.cos() + b[(i, k)] * d.sin())
                };
            }
            for (cidx, &k) in mag_idx.iter().enumerate() {
                jac[(row, ang_idx.len() + cidx)] = if i == k {
                    q[i] / vm[i] - b[(i, i)] * vm[i]
                } else {
                    let d = va[i] - va[k];
                    vm[i] * (g[(i, k)] * d.sin() - b[(i, k)] * d.cos())
                };
            }
        }
        let dx = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| NetworkError::PowerFlow("singular Jacobian".into()))?;
        for (r, &i) in ang_idx.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            vm[i] += dx[ang_idx.len() + r];
        }
        iterations += 1;
    }
}
