//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) on a uniform output grid.

use super::{Integrator, SimConfig, SimError};

/// Largest derivative accepted at `t = 0`.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;
/// Speed deviation treated as divergence, pu.
pub const DIVERGENCE_LIMIT: f64 = 0.5;

/// A model advanced by [`integrate`].
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), SimError>;
    /// Switches to the post-disturbance network.
    fn apply_disturbance(&mut self);
    fn output_count(&self) -> usize;
    fn outputs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), SimError>;
    /// Largest `|ω − 1|` over all speed states.
    fn speed_deviation(&self, x: &[f64]) -> f64;
    fn state_label(&self, k: usize) -> String {
        format!("x{k}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time: Vec<f64>,
    /// One output row per sample.
    pub outputs: Vec<Vec<f64>>,
    pub disturbance_index: Option<usize>,
    pub pre_disturbance: Option<Vec<f64>>,
    pub final_state: Vec<f64>,
}

/// Integrates from the equilibrium `x0` over `cfg.duration_s`.
pub fn integrate<M: Dynamics>(
    model: &mut M,
    x0: Vec<f64>,
    disturbance_time: Option<f64>,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let n = model.dim();
    if x0.len() != n {
        return Err(SimError::Setup(format!("initial state has {} entries, model needs {n}", x0.len())));
    }
    let mut dx = vec![0.0; n];
    model.derivatives(0.0, &x0, &mut dx)?;
    if let Some((k, r)) = dx.iter().map(|v| v.abs()).enumerate().fold(None, |best: Option<(usize, f64)>, (k, v)| {
        match best {
            Some((_, b)) if b >= v => best,
            _ => Some((k, v)),
        }
    }) {
        if !(r <= EQUILIBRIUM_TOL) {
            return Err(SimError::NotEquilibrium { residual: r, state: model.state_label(k) });
        }
    }

    let steps = cfg.steps();
    let dt = cfg.dt_s;
    let dist_index = disturbance_time.and_then(|td| {
        if td < 0.0 {
            return None;
        }
        let k = (td / dt - 1e-9).ceil().max(0.0) as usize;
        (k <= steps).then_some(k)
    });

    let m = model.output_count();
    let mut time = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut pre = None;
    let mut x = x0;
    let mut stepper = Stepper::new(n, cfg);
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 {
            let t0 = (k - 1) as f64 * dt;
            stepper.advance(model, t0, t, &mut x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite { time: t });
            }
            let dev = model.speed_deviation(&x);
            if dev > DIVERGENCE_LIMIT {
                return Err(SimError::Diverged { time: t, deviation: dev });
            }
        }
        if Some(k) == dist_index {
            let mut row = vec![0.0; m];
            model.outputs(t, &x, &mut row)?;
            pre = Some(row);
            model.apply_disturbance();
        }
        let mut row = vec![0.0; m];
        model.outputs(t, &x, &mut row)?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { time: t });
        }
        time.push(t);
        outputs.push(row);
    }
    Ok(Trajectory { time, outputs, disturbance_index: dist_index, pre_disturbance: pre, final_state: x })
}

struct Stepper {
    kind: Integrator,
    abs_tol: f64,
    rel_tol: f64,
    /// Last accepted adaptive step.
    h: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y5: Vec<f64>,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

impl Stepper {
    fn new(n: usize, cfg: &SimConfig) -> Self {
        Stepper {
            kind: cfg.integrator,
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
            h: cfg.dt_s,
            k: vec![vec![0.0; n]; 7],
            tmp: vec![0.0; n],
            y5: vec![0.0; n],
        }
    }

    fn advance<M: Dynamics>(&mut self, model: &M, t0: f64, t1: f64, x: &mut [f64]) -> Result<(), SimError> {
        match self.kind {
            Integrator::Rk4 => self.rk4(model, t0, t1 - t0, x),
            Integrator::Rk45 => self.dopri(model, t0, t1, x),
        }
    }

    fn rk4<M: Dynamics>(&mut self, model: &M, t: f64, h: f64, x: &mut [f64]) -> Result<(), SimError> {
        let n = x.len();
        let (k, tmp) = (&mut self.k, &mut self.tmp);
        model.derivatives(t, x, &mut k[0])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k[0][i];
        }
        model.derivatives(t + 0.5 * h, tmp, &mut k[1])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k[1][i];
        }
        model.derivatives(t + 0.5 * h, tmp, &mut k[2])?;
        for i in 0..n {
            tmp[i] = x[i] + h * k[2][i];
        }
        model.derivatives(t + h, tmp, &mut k[3])?;
        for i in 0..n {
            x[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        Ok(())
    }

    fn dopri<M: Dynamics>(&mut self, model: &M, t0: f64, t1: f64, x: &mut [f64]) -> Result<(), SimError> {
        let n = x.len();
        let mut t = t0;
        while t < t1 {
            let remaining = t1 - t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h <= 1e-14 * t1.max(1.0) {
                return Err(SimError::StepUnderflow { time: t });
            }
            model.derivatives(t, x, &mut self.k[0])?;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = x[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += h * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                model.derivatives(t + C[s] * h, &self.tmp, &mut self.k[s])?;
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut y5 = x[i];
                let mut e = 0.0;
                for s in 0..7 {
                    y5 += h * B5[s] * self.k[s][i];
                    e += h * (B5[s] - B4[s]) * self.k[s][i];
                }
                self.y5[i] = y5;
                let sc = self.abs_tol + self.rel_tol * x[i].abs().max(y5.abs());
                err = err.max(e.abs() / sc);
            }
            if !err.is_finite() {
                self.h = 0.25 * h;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                x.copy_from_slice(&self.y5);
                t = if last { t1 } else { t + h };
                // a step clipped to the grid only shrinks the proposal
                if !last || h * factor < self.h {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor;
            }
        }
        Ok(())
    }
}
