//! Shared oracles: streaming Monte Carlo, block bootstrap, brute-force sums
//! and a signed-rank test.
#![allow(dead_code)]

use crt::mechanisms::{featurize, MechanismSpec, Side};
use crt::projections::SamplingMode;
use crt::stats::DatasetStats;
use crt::RngState;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn gaussian_vec(rng: &mut RngState, d: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(d, || scale * rng.standard_normal())
}

pub fn gaussian_mat(rng: &mut RngState, l: usize, d: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((l, d), || scale * rng.standard_normal())
}

pub fn uniform_vec(rng: &mut RngState, d: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(d, || lo + (hi - lo) * rng.uniform())
}

pub fn gaussian_kernel(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-0.5 * sq).exp()
}

/// Count, mean and sum of squared deviations of one batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct Batch {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Batch {
    pub fn from_values(v: &[f64]) -> Batch {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        Batch { n, mean, m2 }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(self, o: Batch) -> Batch {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Batch {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }

    pub fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }
}

/// Single-draw products `Re(f1(w, x) f2(w, y))` over `batches * batch`
/// i.i.d. draws, summarized per batch.
pub fn mc_batches(
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &MechanismSpec,
    batches: usize,
    batch: usize,
    seed: u64,
) -> Vec<Batch> {
    let d = x.len();
    let mut rng = RngState::new(seed);
    let xm = x.to_owned().insert_axis(Axis(0));
    let ym = y.to_owned().insert_axis(Axis(0));
    let mut out = Vec::with_capacity(batches);
    let mut vals = vec![0.0; batch];
    for _ in 0..batches {
        let draws = spec.draw(&mut rng, batch, d, SamplingMode::Iid).unwrap();
        let f1 = featurize(xm.view(), spec, &draws, Side::First).unwrap();
        let f2 = featurize(ym.view(), spec, &draws, Side::Second).unwrap();
        for (m, v) in vals.iter_mut().enumerate() {
            *v = (f1.values()[[0, m]] * f2.values()[[0, m]]).re;
        }
        out.push(Batch::from_values(&vals));
    }
    out
}

pub fn merge_all(batches: &[Batch]) -> Batch {
    batches.iter().fold(Batch::default(), |acc, b| acc.merge(*b))
}

/// Percentile interval of the variance under resampling whole batches.
pub fn bootstrap_variance_ci(batches: &[Batch], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut rng = RngState::new(seed);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut acc = Batch::default();
            for _ in 0..batches.len() {
                acc = acc.merge(batches[rng.index(batches.len())]);
            }
            acc.variance()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(alpha), at(1.0 - alpha))
}

/// One-sided Wilcoxon signed-rank p-value for "differences tend to be
/// positive" (normal approximation with tie and continuity corrections;
/// zero differences are dropped).
pub fn wilcoxon_greater(diffs: &[f64]) -> f64 {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = nz.len();
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for v in &nz[i..=j] {
            if *v > 0.0 {
                w_plus += rank;
            }
        }
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    1.0 - Normal::standard().cdf(z)
}

/// Averages over all `L_x * L_y` pairs by explicit double loop.
pub fn brute_force_stats(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> DatasetStats {
    let d = x.ncols();
    let pairs = (x.nrows() * y.nrows()) as f64;
    let (mut nx, mut ny, mut dot, mut plus, mut minus, mut ssp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut abs = vec![0.0; d];
    for xi in x.axis_iter(Axis(0)) {
        for yj in y.axis_iter(Axis(0)) {
            for l in 0..d {
                let (a, b) = (xi[l], yj[l]);
                nx += a * a;
                ny += b * b;
                dot += a * b;
                plus += (a + b) * (a + b);
                minus += (a - b) * (a - b);
                ssp += a * a * b * b;
                abs[l] += (a * b).abs();
            }
        }
    }
    DatasetStats {
        mean_sq_norm_x: nx / pairs,
        mean_sq_norm_y: ny / pairs,
        mean_dot: dot / pairs,
        mean_sq_norm_sum_plus: plus / pairs,
        mean_sq_norm_sum_minus: minus / pairs,
        mean_sum_sq_prod: ssp / pairs,
        mean_abs_prod: abs.into_iter().map(|v| v / pairs).collect(),
        count_x: x.nrows(),
        count_y: y.nrows(),
        d,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Every field of `a` within `tol` relative of `b` (absolute near zero,
/// scaled by the magnitudes the field is built from).
pub fn stats_close(a: &DatasetStats, b: &DatasetStats, tol: f64) -> bool {
    let scale = a.mean_sq_norm_x + a.mean_sq_norm_y;
    let close = |u: f64, v: f64, s: f64| (u - v).abs() <= tol * s.max(u.abs()).max(1e-300);
    close(a.mean_sq_norm_x, b.mean_sq_norm_x, 0.0)
        && close(a.mean_sq_norm_y, b.mean_sq_norm_y, 0.0)
        && close(a.mean_dot, b.mean_dot, scale)
        && close(a.mean_sq_norm_sum_plus, b.mean_sq_norm_sum_plus, scale)
        && close(a.mean_sq_norm_sum_minus, b.mean_sq_norm_sum_minus, scale)
        && close(a.mean_sum_sq_prod, b.mean_sum_sq_prod, 0.0)
        && a.mean_abs_prod.iter().zip(&b.mean_abs_prod).all(|(u, v)| close(*u, *v, 0.0))
        && a.count_x == b.count_x
        && a.count_y == b.count_y
        && a.d == b.d
}

/// `log(n!)` by summation.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}
