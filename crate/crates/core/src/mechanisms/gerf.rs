//! Generalized exponential features `D exp(A|w|^2 + B w^T x + C|x|^2)`.

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;

use super::{add_half_sq_norms, exp_checked, FeatureMatrix, KernelMode, Side, Sign};
use crate::error::{Error, Result};
use crate::projections::ProjectionEnsemble;

/// `A` and `s` with the dependent `B`, `C`, `D` for a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GerfParams {
    a: Complex64,
    s: Sign,
    b: Complex64,
    c: f64,
    log_d: Complex64,
    dim: usize,
}

impl GerfParams {
    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn s(&self) -> Sign {
        self.s
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `D = (1 - 4A)^{d/4}`; may overflow for very large `d`, see [`Self::log_d`].
    pub fn d_value(&self) -> Complex64 {
        self.log_d.exp()
    }

    pub fn log_d(&self) -> Complex64 {
        self.log_d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Real `A` with `s = +1`: every coefficient is real and features are positive.
    pub fn is_real(&self) -> bool {
        self.a.im == 0.0 && self.s == Sign::Plus
    }
}

pub fn make_gerf_params(a: Complex64, s: Sign, d: usize) -> Result<GerfParams> {
    if d == 0 {
        return Err(Error::invalid_argument("dimension must be positive"));
    }
    // `+ 0.0` turns negative zeros into positive ones so principal roots of
    // `-(1 - 4A)` land on `+i` rather than `-i`.
    let a = Complex64::new(a.re + 0.0, a.im + 0.0);
    let one_minus_4a = Complex64::new(1.0 - 4.0 * a.re, -4.0 * a.im + 0.0);
    if !(one_minus_4a.re > 0.0) || !a.is_finite() {
        return Err(Error::invalid_parameter(format!(
            "GERF parameters need Re(1 - 4A) > 0, got A = {a}"
        )));
    }
    let sv = s.value();
    let b = if a.im == 0.0 {
        let r = sv * one_minus_4a.re;
        if r >= 0.0 {
            Complex64::new(r.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-r).sqrt())
        }
    } else {
        let arg = Complex64::new(sv * one_minus_4a.re + 0.0, sv * one_minus_4a.im + 0.0);
        arg.sqrt()
    };
    let log_d = if a.im == 0.0 {
        Complex64::new(0.25 * d as f64 * one_minus_4a.re.ln(), 0.0)
    } else {
        0.25 * d as f64 * one_minus_4a.ln()
    };
    Ok(GerfParams {
        a,
        s,
        b,
        c: -(sv + 1.0) / 2.0,
        log_d,
        dim: d,
    })
}

/// Logs of `D exp(A|w_m|^2 + B sigma w_m^T x_i + C|x_i|^2)`, `sigma = 1` on
/// the first side and `s` on the second.
pub(crate) fn gerf_log_features(
    x: ArrayView2<'_, f64>,
    params: &GerfParams,
    ens: &ProjectionEnsemble,
    side: Side,
) -> Array2<Complex64> {
    let sigma = match side {
        Side::First => 1.0,
        Side::Second => params.s.value(),
    };
    let proj = x.dot(&ens.rows().t());
    let w_sq: Vec<f64> = ens.rows().axis_iter(Axis(0)).map(|w| w.dot(&w)).collect();
    let x_sq: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
    let b = params.b * sigma;

    let mut out = Array2::zeros(proj.raw_dim());
    if params.is_real() {
        let (a, br, c, ld) = (params.a.re, b.re, params.c, params.log_d.re);
        for ((i, m), &p) in proj.indexed_iter() {
            out[[i, m]] = Complex64::new(ld + a * w_sq[m] + br * p + c * x_sq[i], 0.0);
        }
    } else {
        for ((i, m), &p) in proj.indexed_iter() {
            out[[i, m]] = params.log_d + params.a * w_sq[m] + b * p + params.c * x_sq[i];
        }
    }
    out
}

/// Features for the rows of `x`.
pub fn featurize_gerf(
    x: ArrayView2<'_, f64>,
    params: &GerfParams,
    ens: &ProjectionEnsemble,
    side: Side,
    kernel_mode: KernelMode,
) -> Result<FeatureMatrix> {
    if x.ncols() != ens.dim() || params.dim != ens.dim() {
        return Err(Error::invalid_argument(format!(
            "dimension mismatch: input {}, projections {}, parameters {}",
            x.ncols(),
            ens.dim(),
            params.dim
        )));
    }
    let mut logs = gerf_log_features(x, params, ens, side);
    if kernel_mode == KernelMode::Softmax {
        add_half_sq_norms(&mut logs, x);
    }
    Ok(FeatureMatrix {
        values: exp_checked(&logs)?,
        side,
        kernel_mode,
    })
}
