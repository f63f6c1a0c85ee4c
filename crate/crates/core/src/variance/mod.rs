//! Closed-form variances of the single-draw estimator `Re(f1(w, x) f2(w, y))`
//! and fitting of the free mechanism parameters.
//!
//! Every variance has the shape `leading - K(x, y)^2` with a positive leading
//! term that can reach `e^{100}` and beyond, so both terms are carried as
//! logarithms ([`VarianceValue`]) and only differenced on demand.

mod bessel;
pub mod brent;
mod optimize;

pub use bessel::log_bessel_i0;
pub use optimize::{
    optimal_a_oprf, optimal_lambda, optimize_a_complex, optimize_a_for_sign, optimize_p,
    ComplexSearch, COMPLEX_SEARCH_ITERATIONS, GEOM_P_MARGIN, BRENT_ITERATIONS,
};

use ndarray::ArrayView1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{MechanismKind, MechanismSpec, Sign};

/// Per-pair quantities every variance formula is expressed through.
///
/// The `x + s y` norms are derived from `|x|^2 + |y|^2 + 2 s x^T y`, the same
/// identity the dataset averages use, so one-pair datasets reproduce these
/// fields bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub sq_norm_x: f64,
    pub sq_norm_y: f64,
    pub sq_norm_sum_plus: f64,
    pub sq_norm_sum_minus: f64,
    pub dot_xy: f64,
    pub sum_sq_prod: f64,
    pub abs_prod: Vec<f64>,
    pub d: usize,
}

impl PairStats {
    pub fn from_pair(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::invalid_argument(format!(
                "pair dimensions must match and be positive ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let mut stats = PairStats::zeros(x.len());
        stats.fill_from(x, y);
        Ok(stats)
    }

    pub(crate) fn zeros(d: usize) -> Self {
        PairStats {
            sq_norm_x: 0.0,
            sq_norm_y: 0.0,
            sq_norm_sum_plus: 0.0,
            sq_norm_sum_minus: 0.0,
            dot_xy: 0.0,
            sum_sq_prod: 0.0,
            abs_prod: vec![0.0; d],
            d,
        }
    }

    /// Refill in place; `x`, `y` must have length `self.d`.
    pub(crate) fn fill_from(&mut self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) {
        debug_assert_eq!(x.len(), self.d);
        let (mut nx, mut ny, mut dot, mut ssp) = (0.0, 0.0, 0.0, 0.0);
        for (l, (&a, &b)) in x.iter().zip(y.iter()).enumerate() {
            let (a2, b2) = (a * a, b * b);
            nx += a2;
            ny += b2;
            dot += a * b;
            ssp += a2 * b2;
            self.abs_prod[l] = a.abs() * b.abs();
        }
        self.sq_norm_x = nx;
        self.sq_norm_y = ny;
        self.dot_xy = dot;
        self.sum_sq_prod = ssp;
        self.sq_norm_sum_plus = (nx + ny + 2.0 * dot).max(0.0);
        self.sq_norm_sum_minus = (nx + ny - 2.0 * dot).max(0.0);
    }

    /// `|x + s y|^2`.
    pub fn sq_norm_sum(&self, s: Sign) -> f64 {
        match s {
            Sign::Plus => self.sq_norm_sum_plus,
            Sign::Minus => self.sq_norm_sum_minus,
        }
    }

    /// `log K(x, y)^2` for the Gaussian kernel.
    pub fn log_kernel_sq(&self) -> f64 {
        -self.sq_norm_sum_minus
    }
}

/// A variance `leading - K^2`, both terms held as logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceValue {
    pub log_leading: f64,
    pub log_kernel_sq: f64,
}

impl VarianceValue {
    pub fn leading(&self) -> f64 {
        self.log_leading.exp()
    }

    /// `leading - K^2` in linear scale; may be `inf` when the leading term overflows.
    pub fn variance(&self) -> f64 {
        if self.log_leading > 700.0 {
            return self.log_leading.exp();
        }
        self.log_leading.exp() - self.log_kernel_sq.exp()
    }

    /// `log(leading - K^2)`, `-inf` when the difference is not positive.
    pub fn log_variance(&self) -> f64 {
        let gap = self.log_kernel_sq - self.log_leading;
        if gap >= 0.0 || gap.is_nan() {
            return f64::NEG_INFINITY;
        }
        self.log_leading + (-gap.exp()).ln_1p()
    }

    /// The variance divided by `k` (averaging `k` independent draws).
    pub fn scaled_down(&self, k: f64) -> VarianceValue {
        let shift = k.ln();
        VarianceValue {
            log_leading: self.log_leading - shift,
            log_kernel_sq: self.log_kernel_sq - shift,
        }
    }
}

/// Trigonometric features: `(1 - K^2)^2 / 2`.
pub fn var_trig(stats: &PairStats) -> VarianceValue {
    let lk2 = stats.log_kernel_sq();
    // (1 - K^2)^2 / 2 = (1 + K^4) / 2 - K^2
    VarianceValue {
        log_leading: (2.0 * lk2).exp().ln_1p() - std::f64::consts::LN_2,
        log_kernel_sq: lk2,
    }
}

/// Positive features: `exp(4 x^T y) - K^2`.
pub fn var_pos(stats: &PairStats) -> VarianceValue {
    VarianceValue {
        log_leading: 4.0 * stats.dot_xy,
        log_kernel_sq: stats.log_kernel_sq(),
    }
}

/// Generalized exponential features with free `A` and sign `s`.
pub fn var_gerf(a: Complex64, s: Sign, stats: &PairStats) -> Result<VarianceValue> {
    let one_minus_8a = Complex64::new(1.0, 0.0) - 8.0 * a;
    if !(one_minus_8a.re > 0.0) || !a.is_finite() {
        return Err(Error::invalid_parameter(format!(
            "GERF variance needs Re(1 - 8A) > 0, got A = {a}"
        )));
    }
    Ok(VarianceValue {
        log_leading: gerf_log_leading(a, s, stats),
        log_kernel_sq: stats.log_kernel_sq(),
    })
}

/// Log of `exp(-(s+1)(|x|^2+|y|^2)) (Re(a1 e^{a2 z}) + a3 e^{a4 z}) / 2`
/// with `z = |x + s y|^2`; assumes `Re(1 - 8A) > 0`.
pub(crate) fn gerf_log_leading(a: Complex64, s: Sign, stats: &PairStats) -> f64 {
    let sv = s.value();
    let d = stats.d as f64;
    let z = stats.sq_norm_sum(s);
    let one = Complex64::new(1.0, 0.0);
    let one_minus_8a = one - 8.0 * a;
    let re_denom = 1.0 - 8.0 * a.re;

    let prefactor = -std::f64::consts::LN_2 - (sv + 1.0) * (stats.sq_norm_x + stats.sq_norm_y);

    let alpha4 = 0.5 * sv + (sv + 2.0 * (one - 4.0 * a).norm()) / (2.0 * re_denom);
    let log_alpha3 = 0.5 * d * (16.0 * a.norm_sqr() / re_denom).ln_1p();
    let log_term3 = log_alpha3 + alpha4 * z;

    if a.im == 0.0 && s == Sign::Plus {
        // The complex term coincides with the modulus term for real A, s = +1.
        return -(sv + 1.0) * (stats.sq_norm_x + stats.sq_norm_y) + log_term3;
    }

    let w = one + 16.0 * a * a / one_minus_8a;
    let log_alpha1 = 0.5 * d * w.ln();
    let alpha2 = sv * (one + one / one_minus_8a);
    let log_term1 = log_alpha1 + alpha2 * z;
    // |term1| <= term3, so the ratio lies in the closed unit disc.
    let ratio = (log_term1 - log_term3).exp().re;
    prefactor + log_term3 + ratio.max(-1.0).ln_1p()
}

/// Poisson features with rate `lambda`.
pub fn var_pois(lambda: f64, stats: &PairStats) -> Result<VarianceValue> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid_parameter(format!(
            "Poisson rate must be positive and finite, got {lambda}"
        )));
    }
    let d = stats.d as f64;
    Ok(VarianceValue {
        log_leading: lambda * d + stats.sum_sq_prod / lambda - stats.sq_norm_x - stats.sq_norm_y,
        log_kernel_sq: stats.log_kernel_sq(),
    })
}

/// Geometric features with success probability `p`.
pub fn var_geom(p: f64, stats: &PairStats) -> Result<VarianceValue> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid_parameter(format!(
            "geometric parameter must lie in (0, 1), got {p}"
        )));
    }
    Ok(VarianceValue {
        log_leading: geom_log_leading(p, stats),
        log_kernel_sq: stats.log_kernel_sq(),
    })
}

pub(crate) fn geom_log_leading(p: f64, stats: &PairStats) -> f64 {
    let scale = 2.0 / (1.0 - p).sqrt();
    let bessel: f64 = stats
        .abs_prod
        .iter()
        .map(|&v| bessel::log_i0_unchecked(scale * v))
        .sum();
    -(stats.d as f64) * p.ln() - stats.sq_norm_x - stats.sq_norm_y + bessel
}

/// Analytic variance of a fully parameterized mechanism in Gaussian mode.
///
/// For the shifted variants `stats` must describe the shifted pair.
pub fn variance_of(spec: &MechanismSpec, stats: &PairStats) -> Result<VarianceValue> {
    match spec.kind() {
        MechanismKind::Trig => Ok(var_trig(stats)),
        MechanismKind::Pos => Ok(var_pos(stats)),
        MechanismKind::Gerf | MechanismKind::Oprf => {
            let g = spec
                .gerf()
                .ok_or_else(|| Error::invalid_parameter("GERF mechanism without parameters"))?;
            var_gerf(g.a(), g.s(), stats)
        }
        MechanismKind::Pois | MechanismKind::PoisPlus => {
            let p = discrete_param(spec)?;
            var_pois(p, stats)
        }
        MechanismKind::Geom | MechanismKind::GeomPlus => {
            let p = discrete_param(spec)?;
            var_geom(p, stats)
        }
    }
}

fn discrete_param(spec: &MechanismSpec) -> Result<f64> {
    spec.discrete()
        .map(|d| d.value())
        .ok_or_else(|| Error::invalid_parameter("discrete mechanism without parameters"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pair(x: &[f64], y: &[f64]) -> PairStats {
        PairStats::from_pair(ArrayView1::from(x), ArrayView1::from(y)).unwrap()
    }

    #[test]
    fn pair_stats_identities() {
        let s = pair(&[1.0, -2.0, 0.5], &[0.25, 3.0, -1.0]);
        assert_eq!(s.d, 3);
        assert!((s.sq_norm_x - 5.25).abs() < 1e-14);
        assert!((s.sq_norm_y - 10.0625).abs() < 1e-14);
        assert!((s.dot_xy - (0.25 - 6.0 - 0.5)).abs() < 1e-14);
        assert!((s.sq_norm_sum_plus - (1.25f64.powi(2) + 1.0 + 0.25)).abs() < 1e-12);
        assert!((s.sq_norm_sum_minus - (0.75f64.powi(2) + 25.0 + 2.25)).abs() < 1e-12);
        assert!((s.sum_sq_prod - (0.0625 + 36.0 + 0.25)).abs() < 1e-12);
        assert_eq!(s.abs_prod, vec![0.25, 6.0, 0.5]);
    }

    #[test]
    fn mismatched_pair_rejected() {
        let x = array![1.0, 2.0];
        let y = array![1.0];
        assert!(PairStats::from_pair(x.view(), y.view()).is_err());
    }

    #[test]
    fn trig_identical_inputs_zero() {
        let s = pair(&[0.3, -0.7], &[0.3, -0.7]);
        let v = var_trig(&s);
        assert_eq!(v.log_variance(), f64::NEG_INFINITY);
        assert!(v.variance().abs() < 1e-15);
    }

    #[test]
    fn trig_far_apart_half() {
        let s = pair(&[40.0, 0.0], &[-40.0, 0.0]);
        assert!((var_trig(&s).variance() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pos_exact_cases() {
        let s = pair(&[0.4, -1.1, 0.2], &[-0.4, 1.1, -0.2]);
        assert!(var_pos(&s).variance().abs() < 1e-15);
        let z = pair(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(var_pos(&z).variance(), 0.0);
    }

    #[test]
    fn gerf_reduces_to_baselines() {
        let s = pair(&[0.5, -0.2, 0.9, 0.1], &[0.3, 0.4, -0.6, 1.2]);
        let zero = Complex64::new(0.0, 0.0);
        let g_pos = var_gerf(zero, Sign::Plus, &s).unwrap();
        let g_trig = var_gerf(zero, Sign::Minus, &s).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(g_pos.variance(), var_pos(&s).variance()) < 1e-12);
        assert!(rel(g_trig.variance(), var_trig(&s).variance()) < 1e-12);
    }

    #[test]
    fn gerf_domain() {
        let s = pair(&[0.5], &[0.3]);
        assert!(var_gerf(Complex64::new(0.125, 0.0), Sign::Plus, &s).is_err());
        assert!(var_gerf(Complex64::new(0.2, 1.0), Sign::Minus, &s).is_err());
        assert!(var_gerf(Complex64::new(0.1, 1.0), Sign::Minus, &s).is_ok());
    }

    #[test]
    fn pois_domain_and_zero_case() {
        let s = pair(&[2.0], &[3.0]);
        assert!(var_pois(0.0, &s).is_err());
        assert!(var_pois(-1.0, &s).is_err());
        let v = var_pois(6.0, &s).unwrap();
        assert!(v.variance().abs() < 1e-15);
    }

    #[test]
    fn geom_domain_and_bessel_at_zero() {
        let s = pair(&[0.0, 0.0], &[1.0, -2.0]);
        assert!(var_geom(0.0, &s).is_err());
        assert!(var_geom(1.0, &s).is_err());
        let p = 0.3;
        let v = var_geom(p, &s).unwrap();
        let expected = p.powi(-2) * (-5.0f64).exp() - (-5.0f64).exp();
        assert!(((v.variance() - expected) / expected).abs() < 1e-13);
    }

    #[test]
    fn log_variance_is_stable_far_out() {
        let v = VarianceValue {
            log_leading: 900.0,
            log_kernel_sq: -3.0,
        };
        assert_eq!(v.log_variance(), 900.0);
        assert_eq!(v.variance(), f64::INFINITY);
        let halved = v.scaled_down(2.0);
        assert!((halved.log_variance() - (900.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
