//! Coordinatewise shift making inputs positive for the `*_plus` variants.
//!
//! `K(x - c, y - c) = K(x, y)` for the Gaussian kernel, so shifting by any
//! `c` leaves the target unchanged.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_SHIFT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    c: Array1<f64>,
    epsilon: f64,
}

impl ShiftSpec {
    pub fn new(c: Array1<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "shift epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_parameter("shift vector must be non-empty and finite"));
        }
        Ok(Self { c, epsilon })
    }

    pub fn c(&self) -> &Array1<f64> {
        &self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }
}

/// `c_l = min(x_l, y_l over all rows) - epsilon`.
pub fn fit_shift(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, epsilon: f64) -> Result<ShiftSpec> {
    if x.nrows() + y.nrows() == 0 {
        return Err(Error::invalid_argument("cannot fit a shift to empty sets"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::invalid_argument(format!(
            "set dimensions differ ({} vs {})",
            x.ncols(),
            y.ncols()
        )));
    }
    let mut c = Array1::from_elem(x.ncols(), f64::INFINITY);
    for row in x.axis_iter(Axis(0)).chain(y.axis_iter(Axis(0))) {
        c.zip_mut_with(&row, |m, &v| *m = m.min(v));
    }
    c.mapv_inplace(|m| m - epsilon);
    ShiftSpec::new(c, epsilon)
}

/// `z - c`, clamped below at `epsilon` (only rows outside the fitting set
/// can fall below it).
pub fn apply_shift(z: ArrayView2<'_, f64>, shift: &ShiftSpec) -> Result<Array2<f64>> {
    if z.ncols() != shift.dim() {
        return Err(Error::invalid_argument(format!(
            "input dimension {} does not match shift dimension {}",
            z.ncols(),
            shift.dim()
        )));
    }
    let mut out = z.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        row.zip_mut_with(&shift.c, |v, &c| *v = (*v - c).max(shift.epsilon));
    }
    Ok(out)
}
