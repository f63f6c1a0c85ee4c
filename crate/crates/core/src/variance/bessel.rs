use crate::error::{Error, Result};

/// Below this argument the power series is summed directly; above it the
/// large-argument expansion of `e^{-t} I0(t)` is used.
const SERIES_LIMIT: f64 = 25.0;

/// `log I0(t)` for `t >= 0`, finite for arguments where `I0` itself overflows.
pub fn log_bessel_i0(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid_argument(format!(
            "log I0 needs a non-negative argument, got {t}"
        )));
    }
    Ok(log_i0_unchecked(t))
}

pub(crate) fn log_i0_unchecked(t: f64) -> f64 {
    if t == f64::INFINITY {
        return f64::INFINITY;
    }
    if t <= SERIES_LIMIT {
        series(t).ln()
    } else {
        t - 0.5 * (2.0 * std::f64::consts::PI * t).ln() + asymptotic_tail(t).ln()
    }
}

/// `sum_k (t^2 / 4)^k / (k!)^2`; all terms are positive.
fn series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// `sum_k ((2k-1)!!)^2 / (k! (8t)^k)`, truncated at the smallest term.
fn asymptotic_tail(t: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        let ratio = (2.0 * k + 1.0) * (2.0 * k + 1.0) / ((k + 1.0) * 8.0 * t);
        if ratio >= 1.0 {
            return sum;
        }
        term *= ratio;
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}
