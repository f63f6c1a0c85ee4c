//! Discretely-induced features built from the Taylor series of `exp(x^T y)`.
//!
//! With `w_1..w_d` i.i.d. from a law `p_k` on `{0, 1, 2, ..}`,
//! `f(w, x) = exp(-|x|^2 / 2) prod_l x_l^{w_l} (w_l!)^{-1/2} p_{w_l}^{-1/2}`
//! is used on both sides. Products are accumulated as a log-magnitude plus a
//! sign, with `0^0 = 1`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::distr::Distribution;
use rand_distr::{Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::{add_half_sq_norms, exp_checked, FeatureMatrix, KernelMode, Side};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteFamily {
    Poisson,
    Geometric,
}

/// A Poisson rate `lambda` or a geometric success probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteParams {
    family: DiscreteFamily,
    value: f64,
}

impl DiscreteParams {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "Poisson rate must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self {
            family: DiscreteFamily::Poisson,
            value: lambda,
        })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid_parameter(format!(
                "geometric parameter must lie in (0, 1), got {p}"
            )));
        }
        Ok(Self {
            family: DiscreteFamily::Geometric,
            value: p,
        })
    }

    pub fn family(&self) -> DiscreteFamily {
        self.family
    }

    /// `lambda` or `p`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `log p_k`.
    pub fn log_pmf(&self, k: u32) -> f64 {
        let k = k as f64;
        match self.family {
            DiscreteFamily::Poisson => -self.value + k * self.value.ln() - ln_factorial(k),
            DiscreteFamily::Geometric => self.value.ln() + k * (-self.value).ln_1p(),
        }
    }
}

fn ln_factorial(k: f64) -> f64 {
    let mut acc = 0.0;
    let mut j = 2.0;
    while j <= k {
        acc += f64::ln(j);
        j += 1.0;
    }
    acc
}

/// `M x d` counts; row `m` is one draw `w_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample {
    counts: Array2<u32>,
}

impl DiscreteSample {
    pub fn from_counts(counts: Array2<u32>) -> Result<Self> {
        if counts.nrows() == 0 || counts.ncols() == 0 {
            return Err(Error::invalid_argument("discrete sample must be non-empty"));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn count(&self) -> usize {
        self.counts.nrows()
    }

    pub fn dim(&self) -> usize {
        self.counts.ncols()
    }
}

pub fn sample_discrete(rng: &mut RngState, params: &DiscreteParams, m: usize, d: usize) -> Result<DiscreteSample> {
    if m == 0 || d == 0 {
        return Err(Error::invalid_argument(format!(
            "need at least one draw and one dimension, got M = {m}, d = {d}"
        )));
    }
    let to_u32 = |v: u64| u32::try_from(v).unwrap_or(u32::MAX);
    let counts = match params.family {
        DiscreteFamily::Poisson => {
            let law = Poisson::new(params.value)
                .map_err(|e| Error::invalid_parameter(format!("Poisson rate {}: {e}", params.value)))?;
            let inner = rng.inner_mut();
            Array2::from_shape_simple_fn((m, d), || to_u32(law.sample(inner) as u64))
        }
        DiscreteFamily::Geometric => {
            let law = Geometric::new(params.value)
                .map_err(|e| Error::invalid_parameter(format!("geometric p {}: {e}", params.value)))?;
            let inner = rng.inner_mut();
            Array2::from_shape_simple_fn((m, d), || to_u32(law.sample(inner)))
        }
    };
    Ok(DiscreteSample { counts })
}

/// `-ln(k!)/2 - ln(p_k)/2` for `k = 0..=k_max`.
fn coefficient_table(params: &DiscreteParams, k_max: u32) -> Vec<f64> {
    let mut table = Vec::with_capacity(k_max as usize + 1);
    let mut ln_fact = 0.0;
    for k in 0..=k_max {
        if k > 1 {
            ln_fact += f64::from(k).ln();
        }
        let log_p = match params.family {
            DiscreteFamily::Poisson => -params.value + f64::from(k) * params.value.ln() - ln_fact,
            DiscreteFamily::Geometric => params.value.ln() + f64::from(k) * (-params.value).ln_1p(),
        };
        table.push(-0.5 * ln_fact - 0.5 * log_p);
    }
    table
}

pub(crate) fn discrete_log_features(
    x: ArrayView2<'_, f64>,
    params: &DiscreteParams,
    sample: &DiscreteSample,
) -> Array2<Complex64> {
    let k_max = sample.counts.iter().copied().max().unwrap_or(0);
    let table = coefficient_table(params, k_max);
    let (l, m) = (x.nrows(), sample.count());
    let mut out = Array2::zeros((l, m));
    for (i, xi) in x.axis_iter(Axis(0)).enumerate() {
        let log_abs: Vec<f64> = xi.iter().map(|v| v.abs().ln()).collect();
        let negative: Vec<bool> = xi.iter().map(|&v| v < 0.0).collect();
        let base = -0.5 * xi.dot(&xi);
        for (j, w) in sample.counts.axis_iter(Axis(0)).enumerate() {
            let mut acc = base;
            let mut flips = 0u32;
            for (l, &k) in w.iter().enumerate() {
                if k == 0 {
                    acc += table[0];
                    continue;
                }
                acc += f64::from(k) * log_abs[l] + table[k as usize];
                if negative[l] {
                    flips += k;
                }
            }
            let phase = if flips % 2 == 1 { PI } else { 0.0 };
            out[[i, j]] = Complex64::new(acc, phase);
        }
    }
    out
}

/// Features for the rows of `x`. The map is the same on both sides, so the
/// result is tagged [`Side::First`].
pub fn featurize_discrete(
    x: ArrayView2<'_, f64>,
    params: &DiscreteParams,
    sample: &DiscreteSample,
    kernel_mode: KernelMode,
) -> Result<FeatureMatrix> {
    if x.ncols() != sample.dim() {
        return Err(Error::invalid_argument(format!(
            "input dimension {} does not match sample dimension {}",
            x.ncols(),
            sample.dim()
        )));
    }
    let mut logs = discrete_log_features(x, params, sample);
    if kernel_mode == KernelMode::Softmax {
        add_half_sq_norms(&mut logs, x);
    }
    Ok(FeatureMatrix {
        values: exp_checked(&logs)?,
        side: Side::First,
        kernel_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parameter_domains() {
        assert!(DiscreteParams::poisson(0.0).is_err());
        assert!(DiscreteParams::poisson(f64::INFINITY).is_err());
        assert!(DiscreteParams::geometric(0.0).is_err());
        assert!(DiscreteParams::geometric(1.0).is_err());
        assert!(DiscreteParams::geometric(0.3).is_ok());
    }

    #[test]
    fn pmf_sums_to_one() {
        for p in [DiscreteParams::poisson(2.5).unwrap(), DiscreteParams::geometric(0.4).unwrap()] {
            let total: f64 = (0..200).map(|k| p.log_pmf(k).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn table_matches_pmf() {
        let p = DiscreteParams::poisson(3.0).unwrap();
        let t = coefficient_table(&p, 30);
        for k in 0..=30u32 {
            let direct = -0.5 * ln_factorial(f64::from(k)) - 0.5 * p.log_pmf(k);
            assert!((t[k as usize] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_row_gives_prefactor_only() {
        let p = DiscreteParams::geometric(0.5).unwrap();
        let sample = DiscreteSample::from_counts(Array2::zeros((3, 2))).unwrap();
        let x = array![[0.7, -1.3]];
        let f = featurize_discrete(x.view(), &p, &sample, KernelMode::Gaussian).unwrap();
        let expected = (-0.5f64 * (0.49 + 1.69)).exp() * 0.5f64.powf(-1.0);
        for v in f.values() {
            assert!((v.re - expected).abs() < 1e-14 * expected);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        let p = DiscreteParams::poisson(1.0).unwrap();
        let sample = DiscreteSample::from_counts(array![[0u32, 2], [1, 0]]).unwrap();
        let x = array![[0.0, 2.0]];
        let f = featurize_discrete(x.view(), &p, &sample, KernelMode::Softmax).unwrap();
        // w = (0, 2): 2^2 / sqrt(2!) / sqrt(p0 p2), p0 = e^-1, p2 = e^-1 / 2
        let expected = 4.0 / 2f64.sqrt() / ((-1f64).exp() * (-1f64).exp() / 2.0).sqrt();
        assert!((f.values()[[0, 0]].re - expected).abs() < 1e-12 * expected);
        assert_eq!(f.values()[[0, 1]].re, 0.0);
    }

    #[test]
    fn negative_coordinates_alternate_sign() {
        let p = DiscreteParams::poisson(1.0).unwrap();
        let sample = DiscreteSample::from_counts(array![[1u32], [2], [3]]).unwrap();
        let x = array![[-0.5]];
        let f = featurize_discrete(x.view(), &p, &sample, KernelMode::Gaussian).unwrap();
        let v = f.values();
        assert!(v[[0, 0]].re < 0.0 && v[[0, 1]].re > 0.0 && v[[0, 2]].re < 0.0);
        assert!(v.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn sampling_is_seeded() {
        let p = DiscreteParams::geometric(0.3).unwrap();
        let a = sample_discrete(&mut RngState::new(5), &p, 20, 3).unwrap();
        let b = sample_discrete(&mut RngState::new(5), &p, 20, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_discrete(&mut RngState::new(5), &p, 0, 3).is_err());
    }

    #[test]
    fn tiny_rate_gives_zero_counts() {
        let p = DiscreteParams::poisson(1e-8).unwrap();
        let s = sample_discrete(&mut RngState::new(11), &p, 100, 4).unwrap();
        assert!(s.counts().iter().all(|&k| k == 0));
    }
}
