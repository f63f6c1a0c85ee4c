//! Nadaraya–Watson classification with random-feature kernels.
//!
//! The class score of a query `o` is `sum_i K(sigma o, sigma o_i) r_i` over
//! one-hot training labels `r_i`; the normalizing denominator is shared by all
//! classes and dropped, which is what lets non-positive features be used.

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use super::emit::{format_float, Tabular};
use crate::error::{Error, Result};
use crate::kernel_ops::stabilized_features;
use crate::mechanisms::{Draws, MechanismConfig, MechanismKind, MechanismSpec, Side};
use crate::projections::SamplingMode;
use crate::rng::RngState;
use crate::summary;

pub const DEFAULT_RF_SEEDS: usize = 50;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.05;

/// Ten log-uniform values from `1e-2` to `1e2`.
pub fn default_sigma_grid() -> Vec<f64> {
    (0..10).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 9.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub mechanism: MechanismConfig,
    /// Real-number budget per object; complex mechanisms get `m / 2` features.
    pub m: usize,
    pub sigmas: Vec<f64>,
    pub rf_seeds: usize,
    pub validation_fraction: f64,
    /// Use the exact kernel instead of random features.
    pub exact: bool,
}

impl ClassifyConfig {
    pub fn new(kind: MechanismKind, m: usize) -> Self {
        Self {
            mechanism: MechanismConfig::new(kind),
            m,
            sigmas: default_sigma_grid(),
            rf_seeds: DEFAULT_RF_SEEDS,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            exact: false,
        }
    }

    pub fn exact() -> Self {
        Self {
            exact: true,
            ..Self::new(MechanismKind::Pos, 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub mechanism: MechanismKind,
    pub exact: bool,
    /// Features actually drawn per seed (0 in exact mode).
    pub features: usize,
    pub seed: u64,
    pub rf_seeds: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub sigmas: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub best_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<MechanismConfig>,
    pub test_accuracy_mean: f64,
    pub test_accuracy_std: f64,
}

impl Tabular for ClassifyReport {
    fn header(&self) -> Vec<String> {
        ["mechanism", "exact", "features", "sigma", "validation_accuracy", "selected", "test_accuracy_mean", "test_accuracy_std"]
            .map(String::from)
            .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.sigmas
            .iter()
            .zip(&self.validation_accuracy)
            .map(|(&s, &acc)| {
                let selected = s == self.best_sigma;
                vec![
                    self.mechanism.to_string(),
                    self.exact.to_string(),
                    self.features.to_string(),
                    format_float(s),
                    format_float(acc),
                    selected.to_string(),
                    if selected { format_float(self.test_accuracy_mean) } else { String::new() },
                    if selected { format_float(self.test_accuracy_std) } else { String::new() },
                ]
            })
            .collect()
    }
}

/// First index of the maximum; `NaN` scores never win.
fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (c, v);
        }
    }
    best.0
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Exact Nadaraya–Watson prediction, class sums taken in log space.
pub fn predict_exact(train: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, query: ArrayView2<'_, f64>) -> Vec<usize> {
    let mut scores = vec![f64::NEG_INFINITY; n_classes];
    let mut logs = vec![0.0; train.nrows()];
    query
        .axis_iter(Axis(0))
        .map(|q| {
            for (lk, o) in logs.iter_mut().zip(train.axis_iter(Axis(0))) {
                let sq: f64 = q.iter().zip(o.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                *lk = -0.5 * sq;
            }
            scores.fill(f64::NEG_INFINITY);
            let mut maxes = vec![f64::NEG_INFINITY; n_classes];
            for (&lk, &c) in logs.iter().zip(labels) {
                maxes[c] = maxes[c].max(lk);
            }
            let mut sums = vec![0.0; n_classes];
            for (&lk, &c) in logs.iter().zip(labels) {
                sums[c] += (lk - maxes[c]).exp();
            }
            for c in 0..n_classes {
                if sums[c] > 0.0 {
                    scores[c] = maxes[c] + sums[c].ln();
                }
            }
            argmax(scores.iter().copied())
        })
        .collect()
}

/// Random-feature prediction: `argmax_c Re(phi(q) . sum_{i in c} phi(o_i))`.
pub fn predict_rf(
    train: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    query: ArrayView2<'_, f64>,
    spec: &MechanismSpec,
    draws: &Draws,
) -> Result<Vec<usize>> {
    let phi_train = stabilized_features(train, spec, draws, Side::Second, false)?;
    let phi_query = stabilized_features(query, spec, draws, Side::First, true)?;
    let mut class_sums = Array2::<Complex64>::zeros((draws.count(), n_classes));
    for (row, &c) in phi_train.axis_iter(Axis(0)).zip(labels) {
        let mut col = class_sums.column_mut(c);
        col += &row;
    }
    let scores = phi_query.dot(&class_sums);
    Ok(scores.axis_iter(Axis(0)).map(|r| argmax(r.iter().map(|v| v.re))).collect())
}

fn features_for(spec: &MechanismSpec, m: usize) -> usize {
    if spec.is_complex() {
        (m / 2).max(1)
    } else {
        m
    }
}

fn draw_for(spec: &MechanismSpec, seed: u64, r: usize, m: usize, d: usize) -> Result<Draws> {
    let mut rng = RngState::with_stream(seed, r as u64);
    spec.draw(&mut rng, m, d, SamplingMode::Orthogonal)
}

/// Random split of `n` indices into `(fit, validation)`; with fewer than two
/// points both parts are the whole set.
fn split(n: usize, fraction: f64, rng: &mut RngState) -> (Vec<usize>, Vec<usize>) {
    if n < 2 {
        return ((0..n).collect(), (0..n).collect());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.index(i + 1));
    }
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Tune `sigma` on a validation fold of `train`, then report test accuracy
/// at the selected `sigma`, averaged over the random-feature seeds.
pub fn classify(train: &LabeledDataset, test: &LabeledDataset, cfg: &ClassifyConfig, rng: &mut RngState) -> Result<ClassifyReport> {
    if test.dim() != train.dim() {
        return Err(Error::invalid_argument(format!(
            "train has dimension {}, test has {}",
            train.dim(),
            test.dim()
        )));
    }
    if test.n_classes > train.n_classes {
        return Err(Error::invalid_argument(format!(
            "test uses {} classes, train only {}",
            test.n_classes, train.n_classes
        )));
    }
    if cfg.sigmas.is_empty() || cfg.sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid_argument("sigma grid must be non-empty and positive"));
    }
    if !cfg.exact && (cfg.m == 0 || cfg.rf_seeds == 0) {
        return Err(Error::invalid_argument("feature count and seed count must be positive"));
    }
    let seed = rng.seed();
    let n_classes = train.n_classes;
    let (fit_idx, val_idx) = split(train.len(), cfg.validation_fraction, rng);
    let fit = train.subset(&fit_idx)?;
    let val = train.subset(&val_idx)?;
    let d = train.dim();

    // Everything that depends on sigma: scaled sets and the fitted mechanism.
    let prepare = |sigma: f64| -> Result<(Array2<f64>, Option<MechanismSpec>)> {
        let scaled = &fit.objects * sigma;
        let spec = if cfg.exact {
            None
        } else {
            Some(cfg.mechanism.fit(scaled.view(), scaled.view())?)
        };
        Ok((scaled, spec))
    };
    let evaluate = |scaled: &Array2<f64>, spec: &Option<MechanismSpec>, query: &LabeledDataset, sigma: f64| -> Result<Vec<f64>> {
        let q = &query.objects * sigma;
        match spec {
            None => {
                let pred = predict_exact(scaled.view(), &fit.labels, n_classes, q.view());
                Ok(vec![accuracy(&pred, &query.labels)])
            }
            Some(spec) => (0..cfg.rf_seeds)
                .map(|r| {
                    let draws = draw_for(spec, seed, r, features_for(spec, cfg.m), d)?;
                    let pred = predict_rf(scaled.view(), &fit.labels, n_classes, q.view(), spec, &draws)?;
                    Ok(accuracy(&pred, &query.labels))
                })
                .collect(),
        }
    };

    let mut validation_accuracy = Vec::with_capacity(cfg.sigmas.len());
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &sigma) in cfg.sigmas.iter().enumerate() {
        let (scaled, spec) = prepare(sigma)?;
        let acc = summary::mean_std(&evaluate(&scaled, &spec, &val, sigma)?).0;
        validation_accuracy.push(acc);
        let better = acc > best.1 || (acc == best.1 && sigma < cfg.sigmas[best.0]);
        if better {
            best = (k, acc);
        }
    }
    let best_sigma = cfg.sigmas[best.0];
    let (scaled, spec) = prepare(best_sigma)?;
    let (mean, std) = summary::mean_std(&evaluate(&scaled, &spec, test, best_sigma)?);

    Ok(ClassifyReport {
        mechanism: cfg.mechanism.kind,
        exact: cfg.exact,
        features: spec.as_ref().map_or(0, |s| features_for(s, cfg.m)),
        seed,
        rf_seeds: if cfg.exact { 0 } else { cfg.rf_seeds },
        n_train: fit.len(),
        n_validation: val.len(),
        n_test: test.len(),
        sigmas: cfg.sigmas.clone(),
        validation_accuracy,
        best_sigma,
        parameters: spec.map(|s| s.to_config()),
        test_accuracy_mean: mean,
        test_accuracy_std: std,
    })
}
