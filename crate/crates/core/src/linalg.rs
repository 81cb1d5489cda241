//! Complex scalars, phasors and a dense LU with an explicit pivot threshold.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Per-unit complex quantity (admittance, impedance, voltage, current).
pub type ComplexValue = Complex64;

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;

/// Relative pivot threshold: pivots below this fraction of the largest
/// diagonal magnitude are reported as singular.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Magnitude/angle pair with the angle kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub magnitude: f64,
    pub angle: f64,
}

impl Phasor {
    /// Builds a phasor, folding a negative magnitude into the angle.
    pub fn new(magnitude: f64, angle: f64) -> Self {
        if magnitude < 0.0 {
            Phasor { magnitude: -magnitude, angle: wrap_angle(angle + PI) }
        } else {
            Phasor { magnitude, angle: wrap_angle(angle) }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        let magnitude = z.norm();
        let angle = if magnitude == 0.0 { 0.0 } else { wrap_angle(z.arg()) };
        Phasor { magnitude, angle }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.angle)
    }
}

/// Maps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Raised when a factorization meets a pivot below the threshold.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("singular matrix: pivot {pivot:.3e} at column {column} below threshold {threshold:.3e}")]
pub struct SingularMatrix {
    pub column: usize,
    pub pivot: f64,
    pub threshold: f64,
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct ComplexLu {
    lu: CMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl ComplexLu {
    pub fn factor(a: &CMatrix) -> Result<Self, SingularMatrix> {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.nrows();
        let max_diag = (0..n).map(|i| a[(i, i)].norm()).fold(0.0, f64::max);
        let scale = if max_diag > 0.0 { max_diag } else { a.iter().map(|z| z.norm()).fold(0.0, f64::max) };
        let threshold = PIVOT_REL_TOL * scale;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, mag) = (k..n)
                .map(|r| (r, lu[(r, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(mag > threshold) {
                return Err(SingularMatrix { column: k, pivot: mag.max(0.0), threshold });
            }
            min_pivot = min_pivot.min(mag);
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let f = lu[(r, k)] / pivot;
                lu[(r, k)] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for c in k + 1..n {
                        let v = lu[(k, c)];
                        lu[(r, c)] -= f * v;
                    }
                }
            }
        }
        Ok(ComplexLu { lu, perm, min_pivot })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Smallest pivot magnitude met during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.nrows(), self.dim());
        let mut out = CMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col: Vec<Complex64> = b.column(c).iter().copied().collect();
            let x = self.solve_vec(&col);
            for (r, v) in x.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve_mat(&CMatrix::identity(self.dim(), self.dim()))
    }
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |M - M^T| (plain transpose, not conjugate).
pub fn asymmetry(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols().min(m.nrows()) {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

/// Matrix-vector product on plain slices.
pub fn mat_vec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}
