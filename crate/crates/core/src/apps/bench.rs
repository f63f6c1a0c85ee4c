//! Analytic-variance benchmark and the attention error benchmark.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::data::{generate_regime, Regime, RegimeKind};
use super::emit::{format_float, Tabular};
use crate::error::{Error, Result};
use crate::kernel_ops::{attention_error_report, AttentionErrorRow, AttentionInputs, AttentionMode};
use crate::mechanisms::{apply_shift, MechanismConfig, MechanismKind, MechanismSpec};
use crate::rng::RngState;
use crate::variance::{variance_of, PairStats};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub regime: RegimeKind,
    pub sigma: f64,
    pub d: usize,
    pub l: usize,
    pub mechanism: MechanismKind,
    /// Reported variances are the single-draw variance divided by this.
    pub fairness_divisor: f64,
    pub log_variance_mean: f64,
    pub log_variance_std: f64,
    pub pairs: usize,
    /// Pairs estimated exactly (variance `<= 0`), left out of the moments.
    pub zero_variance_pairs: usize,
    /// Fitted parameters, one per repeat.
    pub parameters: Vec<MechanismConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub seed: u64,
    pub repeats: usize,
    pub entries: Vec<BenchEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_sec: Option<f64>,
}

impl Tabular for BenchResult {
    fn header(&self) -> Vec<String> {
        [
            "regime",
            "sigma",
            "d",
            "l",
            "mechanism",
            "fairness_divisor",
            "log_variance_mean",
            "log_variance_std",
            "pairs",
            "zero_variance_pairs",
        ]
        .map(String::from)
        .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                vec![
                    e.regime.to_string(),
                    format_float(e.sigma),
                    e.d.to_string(),
                    e.l.to_string(),
                    e.mechanism.to_string(),
                    format_float(e.fairness_divisor),
                    format_float(e.log_variance_mean),
                    format_float(e.log_variance_std),
                    e.pairs.to_string(),
                    e.zero_variance_pairs.to_string(),
                ]
            })
            .collect()
    }
}

/// Real-valued mechanisms are compared at two features per complex one, so
/// their single-draw variance is halved.
pub fn fairness_divisor(spec: &MechanismSpec) -> f64 {
    if spec.is_complex() {
        1.0
    } else {
        2.0
    }
}

/// Per-pair log-variances of one fitted mechanism over all `x_i, y_j`.
pub struct PairSweep {
    pub spec: MechanismSpec,
    pub log_variances: Vec<f64>,
    pub zero_variance_pairs: usize,
}

fn sweep(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, spec: &MechanismSpec, mut sink: impl FnMut(f64)) -> Result<usize> {
    let shifted;
    let (x, y) = match spec.shift() {
        Some(sh) => {
            shifted = (apply_shift(x, sh)?, apply_shift(y, sh)?);
            (shifted.0.view(), shifted.1.view())
        }
        None => (x, y),
    };
    let halve = fairness_divisor(spec).ln();
    let mut stats = PairStats::zeros(x.ncols());
    let mut zeros = 0;
    for xi in x.axis_iter(Axis(0)) {
        for yj in y.axis_iter(Axis(0)) {
            stats.fill_from(xi, yj);
            let lv = variance_of(spec, &stats)?.log_variance();
            if lv == f64::NEG_INFINITY {
                zeros += 1;
            } else {
                sink(lv - halve);
            }
        }
    }
    Ok(zeros)
}

/// Fit `kind` on the sets and evaluate its variance for every pair.
pub fn pair_sweep(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, kind: MechanismKind) -> Result<PairSweep> {
    let spec = MechanismConfig::new(kind).fit(x, y)?;
    let mut log_variances = Vec::with_capacity(x.nrows() * y.nrows());
    let zero_variance_pairs = sweep(x, y, &spec, |v| log_variances.push(v))?;
    Ok(PairSweep {
        spec,
        log_variances,
        zero_variance_pairs,
    })
}

/// For every regime and repeat: draw two sets, fit each mechanism on their
/// averaged statistics, and evaluate the analytic variance over all pairs.
pub fn variance_benchmark(
    regimes: &[Regime],
    mechanisms: &[MechanismKind],
    repeats: usize,
    rng: &mut RngState,
    timing: bool,
) -> Result<BenchResult> {
    if regimes.is_empty() || mechanisms.is_empty() || repeats == 0 {
        return Err(Error::invalid_argument("regimes, mechanisms and repeats must be non-empty"));
    }
    let seed = rng.seed();
    let start = Instant::now();
    let mut entries = Vec::new();
    for regime in regimes {
        let mut moments = vec![Moments::default(); mechanisms.len()];
        let mut zeros = vec![0usize; mechanisms.len()];
        let mut params: Vec<Vec<MechanismConfig>> = vec![Vec::new(); mechanisms.len()];
        let mut divisors = vec![1.0; mechanisms.len()];
        let mut dims = (regime.d, regime.l);
        for _ in 0..repeats {
            let (x, y): (Array2<f64>, Array2<f64>) = generate_regime(rng, regime)?;
            dims = (x.ncols(), x.nrows());
            for (k, &kind) in mechanisms.iter().enumerate() {
                let spec = MechanismConfig::new(kind).fit(x.view(), y.view())?;
                divisors[k] = fairness_divisor(&spec);
                let mom = &mut moments[k];
                zeros[k] += sweep(x.view(), y.view(), &spec, |v| mom.push(v))?;
                params[k].push(spec.to_config());
            }
        }
        for (k, &kind) in mechanisms.iter().enumerate() {
            let m = moments[k];
            entries.push(BenchEntry {
                regime: regime.kind,
                sigma: regime.sigma,
                d: dims.0,
                l: dims.1,
                mechanism: kind,
                fairness_divisor: divisors[k],
                log_variance_mean: if m.n > 0 { m.mean } else { f64::NEG_INFINITY },
                log_variance_std: m.std(),
                pairs: m.n + zeros[k],
                zero_variance_pairs: zeros[k],
                parameters: std::mem::take(&mut params[k]),
            });
        }
    }
    Ok(BenchResult {
        seed,
        repeats,
        entries,
        wall_time_sec: timing.then(|| start.elapsed().as_secs_f64()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBenchResult {
    pub seed: u64,
    pub l: usize,
    pub d: usize,
    pub rf_seeds: Vec<u64>,
    pub rows: Vec<AttentionErrorRow>,
}

impl Tabular for AttentionBenchResult {
    fn header(&self) -> Vec<String> {
        ["mode", "m", "seeds", "median", "q1", "q3", "iqr", "wall_time_sec"]
            .map(String::from)
            .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.mode.to_string(),
                    r.m.to_string(),
                    r.seeds.to_string(),
                    format_float(r.median),
                    format_float(r.q1),
                    format_float(r.q3),
                    format_float(r.iqr),
                    r.wall_time_sec.map(format_float).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

/// Random Gaussian `Q`, `K`, `V` from `seed`, then the error report over
/// `n_seeds` projection seeds derived from it.
pub fn attention_benchmark(
    seed: u64,
    l: usize,
    d: usize,
    modes: &[AttentionMode],
    ms: &[usize],
    n_seeds: usize,
    timing: bool,
) -> Result<AttentionBenchResult> {
    let inp = AttentionInputs::random(&mut RngState::with_stream(seed, 1), l, d)?;
    let mut seed_rng = RngState::with_stream(seed, 2);
    let rf_seeds: Vec<u64> = (0..n_seeds).map(|_| seed_rng.fork().seed()).collect();
    let rows = attention_error_report(&inp, modes, ms, &rf_seeds, timing)?;
    Ok(AttentionBenchResult {
        seed,
        l,
        d,
        rf_seeds,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn opposite_pair_has_zero_variance() {
        let x = array![[0.3, -0.2, 0.5]];
        let y = x.mapv(|v| -v);
        for kind in [MechanismKind::Pos, MechanismKind::Oprf] {
            let s = pair_sweep(x.view(), y.view(), kind).unwrap();
            assert_eq!(s.zero_variance_pairs, 1, "{kind}");
            assert!(s.log_variances.is_empty());
        }
    }

    #[test]
    fn benchmark_is_deterministic() {
        let regimes = [Regime::new(RegimeKind::Normal, 0.3, 4, 6)];
        let mechs = [MechanismKind::Trig, MechanismKind::Oprf];
        let a = variance_benchmark(&regimes, &mechs, 2, &mut RngState::new(5), false).unwrap();
        let b = variance_benchmark(&regimes, &mechs, 2, &mut RngState::new(5), false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.len(), 2);
        assert_eq!(a.entries[0].pairs, 72);
        assert_eq!(a.entries[0].fairness_divisor, 1.0);
        assert_eq!(a.entries[1].fairness_divisor, 2.0);
        assert_eq!(a.entries[1].parameters.len(), 2);
        assert!(a.wall_time_sec.is_none());
    }

    #[test]
    fn csv_rows_per_mechanism() {
        let regimes = [Regime::new(RegimeKind::Sphere, 0.5, 3, 4)];
        let r = variance_benchmark(&regimes, &[MechanismKind::Pos, MechanismKind::Geom], 1, &mut RngState::new(1), false)
            .unwrap();
        assert_eq!(r.rows().len(), 2);
        assert_eq!(r.header().len(), r.rows()[0].len());
    }

    #[test]
    fn moments_match_two_pass() {
        let v = [1.0, 4.0, -2.0, 7.5];
        let mut m = Moments::default();
        v.iter().for_each(|&x| m.push(x));
        let (mean, std) = crate::summary::mean_std(&v);
        assert!((m.mean - mean).abs() < 1e-14);
        assert!((m.std() - std).abs() < 1e-14);
    }
}
