//! Error index, frequency metrics and spectral peak search.

use super::AnalysisError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance when checking that two series share a time grid.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorOptions {
    /// Integrate the signed difference instead of its magnitude.
    pub signed: bool,
    /// Shift the test series so it starts where the reference starts. Used
    /// for deviation models whose absolute operating point differs.
    pub align_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorIndex {
    pub value_pct: f64,
    pub window_s: (f64, f64),
    pub signal: String,
    pub reference: String,
    pub signed: bool,
}

/// A named, uniformly or non-uniformly sampled series.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub name: &'a str,
    pub time: &'a [f64],
    pub values: &'a [f64],
}

impl<'a> Series<'a> {
    pub fn new(name: &'a str, time: &'a [f64], values: &'a [f64]) -> Self {
        Series { name, time, values }
    }

    fn check(&self) -> Result<(), AnalysisError> {
        if self.time.len() != self.values.len() {
            return Err(AnalysisError::Length { name: self.name.into(), time: self.time.len(), values: self.values.len() });
        }
        if self.time.len() < 2 {
            return Err(AnalysisError::TooShort { name: self.name.into(), len: self.time.len(), needed: 2 });
        }
        if self.time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::Grid(format!("time of {} is not strictly increasing", self.name)));
        }
        Ok(())
    }

    /// Linear interpolation, `None` outside the sampled range.
    pub fn at(&self, t: f64) -> Option<f64> {
        let (t0, t1) = (self.time[0], *self.time.last()?);
        let slack = GRID_TOL * (t1 - t0).abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return None;
        }
        let k = self.time.partition_point(|&x| x < t);
        if k == 0 {
            return Some(self.values[0]);
        }
        if k >= self.time.len() {
            return self.values.last().copied();
        }
        let (ta, tb) = (self.time[k - 1], self.time[k]);
        let (va, vb) = (self.values[k - 1], self.values[k]);
        Some(va + (vb - va) * (t - ta) / (tb - ta))
    }
}

/// `∫ |test − ref| dt / (max |ref − ref(t0)| · T)` in percent over
/// `window` (whole reference when `None`), trapezoidal on the reference
/// grid. The test series is interpolated when its grid differs.
pub fn error_index(
    test: Series,
    reference: Series,
    window: Option<(f64, f64)>,
    opts: ErrorOptions,
) -> Result<ErrorIndex, AnalysisError> {
    test.check()?;
    reference.check()?;
    let (r0, r1) = (reference.time[0], *reference.time.last().unwrap());
    let (t0, t1) = window.unwrap_or((r0, r1));
    let slack = GRID_TOL * (r1 - r0).abs().max(1.0);
    if !(t1 > t0) || t0 < r0 - slack || t1 > r1 + slack || test.at(t0).is_none() || test.at(t1).is_none() {
        return Err(AnalysisError::Window { start: t0, end: t1 });
    }
    let same_grid = test.time.len() == reference.time.len()
        && test.time.iter().zip(reference.time).all(|(a, b)| (a - b).abs() <= slack);

    // samples inside the window plus the window edges
    let mut ts = vec![t0];
    ts.extend(reference.time.iter().copied().filter(|&t| t > t0 + slack && t < t1 - slack));
    ts.push(t1);
    let value_at = |s: &Series, k: Option<usize>, t: f64| match k {
        Some(k) => s.values[k],
        None => s.at(t).expect("inside window"),
    };
    let index_of = |t: f64| {
        let k = reference.time.partition_point(|&x| x < t - slack);
        (k < reference.time.len() && (reference.time[k] - t).abs() <= slack).then_some(k)
    };
    let mut rv = Vec::with_capacity(ts.len());
    let mut tv = Vec::with_capacity(ts.len());
    for &t in &ts {
        let k = index_of(t);
        rv.push(value_at(&reference, k, t));
        tv.push(value_at(&test, if same_grid { k } else { None }, t));
    }
    let shift = if opts.align_start { rv[0] - tv[0] } else { 0.0 };
    let max_dev = rv.iter().map(|v| (v - rv[0]).abs()).fold(0.0, f64::max);
    if max_dev == 0.0 {
        return Err(AnalysisError::FlatReference(reference.name.into()));
    }
    let diff = |k: usize| {
        let d = tv[k] + shift - rv[k];
        if opts.signed {
            d
        } else {
            d.abs()
        }
    };
    let mut integral = 0.0;
    for k in 1..ts.len() {
        integral += 0.5 * (ts[k] - ts[k - 1]) * (diff(k) + diff(k - 1));
    }
    Ok(ErrorIndex {
        value_pct: 100.0 * integral / (max_dev * (t1 - t0)),
        window_s: (t0, t1),
        signal: test.name.into(),
        reference: reference.name.into(),
        signed: opts.signed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMetrics {
    /// Centered-difference derivative with the largest magnitude, pu/s.
    pub max_rocof: f64,
    pub nadir: f64,
    pub nadir_time_s: f64,
    /// Mean over the final 10 % of samples.
    pub steady_state: f64,
}

/// RoCoF, nadir and settling value of a frequency trace on a uniform grid.
/// Difference stencils that straddle `disturbance_index` are skipped.
pub fn frequency_metrics(
    time: &[f64],
    values: &[f64],
    disturbance_index: Option<usize>,
) -> Result<FrequencyMetrics, AnalysisError> {
    let s = Series::new("frequency", time, values);
    s.check()?;
    if values.len() < 3 {
        return Err(AnalysisError::TooShort { name: "frequency".into(), len: values.len(), needed: 3 });
    }
    let dt = time[1] - time[0];
    let span = time[time.len() - 1] - time[0];
    let nonuniform = time.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(span * 1e-12));
    if nonuniform {
        return Err(AnalysisError::Grid("frequency metrics need a uniform grid".into()));
    }
    let mut rocof: f64 = 0.0;
    for k in 1..values.len() - 1 {
        if let Some(d) = disturbance_index {
            if k + 1 >= d && k < d + 1 {
                continue;
            }
        }
        let r = (values[k + 1] - values[k - 1]) / (time[k + 1] - time[k - 1]);
        if r.abs() > rocof.abs() {
            rocof = r;
        }
    }
    let (mut k_min, mut nadir) = (0, values[0]);
    for (k, &v) in values.iter().enumerate() {
        if v < nadir {
            nadir = v;
            k_min = k;
        }
    }
    let tail = (values.len() / 10).max(1);
    let steady_state = values[values.len() - tail..].iter().sum::<f64>() / tail as f64;
    Ok(FrequencyMetrics { max_rocof: rocof, nadir, nadir_time_s: time[k_min], steady_state })
}

/// Frequency (Hz) of the largest Hann-windowed DFT magnitude of the
/// detrended series within `[f_lo, f_hi]`, refined by golden-section search.
pub fn dominant_frequency(time: &[f64], values: &[f64], f_lo: f64, f_hi: f64) -> Result<f64, AnalysisError> {
    Series::new("signal", time, values).check()?;
    if !(f_hi > f_lo && f_lo >= 0.0) {
        return Err(AnalysisError::Grid(format!("bad frequency band [{f_lo}, {f_hi}]")));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let t0 = time[0];
    let span = time[n - 1] - t0;
    let w: Vec<f64> =
        (0..n).map(|k| (values[k] - mean) * (0.5 - 0.5 * (2.0 * PI * (time[k] - t0) / span).cos())).collect();
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..n {
            let a = 2.0 * PI * f * (time[k] - t0);
            re += w[k] * a.cos();
            im -= w[k] * a.sin();
        }
        re * re + im * im
    };
    let steps = (((f_hi - f_lo) * span * 8.0).ceil() as usize).max(16);
    let df = (f_hi - f_lo) / steps as f64;
    let (mut best, mut best_p) = (f_lo, f64::MIN);
    for k in 0..=steps {
        let f = f_lo + k as f64 * df;
        let p = power(f);
        if p > best_p {
            best = f;
            best_p = p;
        }
    }
    let (mut a, mut b) = ((best - df).max(f_lo), (best + df).min(f_hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}
