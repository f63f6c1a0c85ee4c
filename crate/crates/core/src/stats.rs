//! Set-averaged statistics for parameter fitting.
//!
//! When a mechanism is applied to whole sets `{x_i}`, `{y_j}` its parameters
//! are fitted on pair quantities averaged over all `L_x * L_y` pairs. Each
//! average factorizes over the two sets, so a single `O((L_x + L_y) d)` pass
//! suffices; the pairwise double loop is never formed.

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::Sign;
use crate::variance::PairStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_sq_norm_x: f64,
    pub mean_sq_norm_y: f64,
    /// `(mean x)^T (mean y)`, the average of `x_i^T y_j` over pairs.
    pub mean_dot: f64,
    pub mean_sq_norm_sum_plus: f64,
    pub mean_sq_norm_sum_minus: f64,
    pub mean_sum_sq_prod: f64,
    pub mean_abs_prod: Vec<f64>,
    pub count_x: usize,
    pub count_y: usize,
    pub d: usize,
}

impl DatasetStats {
    pub fn mean_sq_norm_sum(&self, s: Sign) -> f64 {
        match s {
            Sign::Plus => self.mean_sq_norm_sum_plus,
            Sign::Minus => self.mean_sq_norm_sum_minus,
        }
    }
}

struct SetSums {
    sum: Array1<f64>,
    sum_sq: Array1<f64>,
    sum_abs: Array1<f64>,
    sq_norm: f64,
}

fn set_sums(z: ArrayView2<'_, f64>) -> SetSums {
    let d = z.ncols();
    let mut sums = SetSums {
        sum: Array1::zeros(d),
        sum_sq: Array1::zeros(d),
        sum_abs: Array1::zeros(d),
        sq_norm: 0.0,
    };
    for row in z.axis_iter(Axis(0)) {
        for (l, &v) in row.iter().enumerate() {
            let v2 = v * v;
            sums.sum[l] += v;
            sums.sum_sq[l] += v2;
            sums.sum_abs[l] += v.abs();
            sums.sq_norm += v2;
        }
    }
    sums
}

pub fn compute_stats(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<DatasetStats> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::invalid_argument("statistics need non-empty sets"));
    }
    if x.ncols() != y.ncols() || x.ncols() == 0 {
        return Err(Error::invalid_argument(format!(
            "set dimensions must match and be positive ({} vs {})",
            x.ncols(),
            y.ncols()
        )));
    }
    let d = x.ncols();
    let (lx, ly) = (x.nrows() as f64, y.nrows() as f64);
    let sx = set_sums(x);
    let sy = set_sums(y);

    let mean_sq_norm_x = sx.sq_norm / lx;
    let mean_sq_norm_y = sy.sq_norm / ly;
    let mut mean_dot = 0.0;
    let mut mean_sum_sq_prod = 0.0;
    let mut mean_abs_prod = vec![0.0; d];
    for l in 0..d {
        mean_dot += (sx.sum[l] / lx) * (sy.sum[l] / ly);
        mean_sum_sq_prod += (sx.sum_sq[l] / lx) * (sy.sum_sq[l] / ly);
        mean_abs_prod[l] = (sx.sum_abs[l] / lx) * (sy.sum_abs[l] / ly);
    }
    let finite = mean_sq_norm_x.is_finite() && mean_sq_norm_y.is_finite() && mean_dot.is_finite();
    if !finite {
        return Err(Error::invalid_argument("statistics are not finite"));
    }

    Ok(DatasetStats {
        mean_sq_norm_x,
        mean_sq_norm_y,
        mean_dot,
        mean_sq_norm_sum_plus: (mean_sq_norm_x + mean_sq_norm_y + 2.0 * mean_dot).max(0.0),
        mean_sq_norm_sum_minus: (mean_sq_norm_x + mean_sq_norm_y - 2.0 * mean_dot).max(0.0),
        mean_sum_sq_prod,
        mean_abs_prod,
        count_x: x.nrows(),
        count_y: y.nrows(),
        d,
    })
}

/// Averages recast as a [`PairStats`] for the variance formulas.
pub fn pair_stats_from_dataset(stats: &DatasetStats) -> PairStats {
    PairStats {
        sq_norm_x: stats.mean_sq_norm_x,
        sq_norm_y: stats.mean_sq_norm_y,
        sq_norm_sum_plus: stats.mean_sq_norm_sum_plus,
        sq_norm_sum_minus: stats.mean_sq_norm_sum_minus,
        dot_xy: stats.mean_dot,
        sum_sq_prod: stats.mean_sum_sq_prod,
        abs_prod: stats.mean_abs_prod.clone(),
        d: stats.d,
    }
}
