//! Exact kernel oracles, the low-rank random-feature operator, and FAVOR++
//! linear attention.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{exp_log, log_features, Draws, KernelMode, MechanismSpec, Side};
use crate::projections::{self, SamplingMode};
use crate::rng::RngState;
use crate::stats::compute_stats;
use crate::summary;
use crate::variance::optimal_a_oprf;

pub type KernelKind = KernelMode;

fn check_dims(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != y.ncols() {
        return Err(Error::invalid_argument(format!(
            "dimension mismatch ({} vs {})",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Dense `K(x_i, y_j)`; `O(d L L')`, intended as a reference.
pub fn exact_kernel_matrix(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, kind: KernelKind) -> Result<Array2<f64>> {
    check_dims(x, y)?;
    let dots = x.dot(&y.t());
    Ok(match kind {
        KernelMode::Softmax => dots.mapv(f64::exp),
        KernelMode::Gaussian => {
            let nx: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
            let ny: Vec<f64> = y.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
            let mut k = dots;
            for ((i, j), v) in k.indexed_iter_mut() {
                let sq = (nx[i] + ny[j] - 2.0 * *v).max(0.0);
                *v = (-0.5 * sq).exp();
            }
            k
        }
    })
}

/// Queries, keys and values for one attention call.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInputs {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
}

impl AttentionInputs {
    pub fn new(q: Array2<f64>, k: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        let (l, d) = q.dim();
        if l == 0 || d == 0 {
            return Err(Error::invalid_argument("attention inputs must be non-empty"));
        }
        if k.dim() != (l, d) || v.nrows() != l || v.ncols() == 0 {
            return Err(Error::invalid_argument(format!(
                "shape mismatch: Q {:?}, K {:?}, V {:?}",
                q.dim(),
                k.dim(),
                v.dim()
            )));
        }
        Ok(Self { q, k, v })
    }

    /// Standard Gaussian `Q`, `K`, `V` of shape `l x d`.
    pub fn random(rng: &mut RngState, l: usize, d: usize) -> Result<Self> {
        let mut draw = || Array2::from_shape_simple_fn((l, d), || rng.standard_normal());
        let (q, k, v) = (draw(), draw(), draw());
        Self::new(q, k, v)
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    /// `d^{-1/4} Q` and `d^{-1/4} K`.
    pub fn scaled(&self) -> (Array2<f64>, Array2<f64>) {
        let s = (self.dim() as f64).powf(-0.25);
        (&self.q * s, &self.k * s)
    }
}

/// Softmax attention `D^{-1} A V` with `A_ij = exp(q_i^T k_j / sqrt(d))`.
pub fn exact_attention(inp: &AttentionInputs) -> Result<Array2<f64>> {
    let (x, y) = inp.scaled();
    let mut logits = x.dot(&y.t());
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    Ok(logits.dot(&inp.v))
}

/// Features with a constant subtracted from their logarithms: the row max on
/// the query side (per row), the global max on the key side.
pub(crate) fn stabilized_features(
    x: ArrayView2<'_, f64>,
    spec: &MechanismSpec,
    draws: &Draws,
    side: Side,
    per_row: bool,
) -> Result<Array2<Complex64>> {
    let mut logs = log_features(x, spec, draws, side)?;
    let row_max = |row: ArrayView1<'_, Complex64>| row.fold(f64::NEG_INFINITY, |m, v| m.max(v.re));
    let global = if per_row {
        0.0
    } else {
        logs.axis_iter(Axis(0)).map(row_max).fold(f64::NEG_INFINITY, f64::max)
    };
    for (i, mut row) in logs.axis_iter_mut(Axis(0)).enumerate() {
        let shift = if per_row { row_max(row.view()) } else { global };
        if shift.is_nan() || shift == f64::INFINITY {
            return Err(Error::NumericOverflow {
                row: i,
                detail: format!("feature log-magnitude {shift}"),
            });
        }
        if shift.is_finite() {
            row.mapv_inplace(|z| Complex64::new(z.re - shift, z.im));
        }
    }
    Ok(logs.mapv(exp_log))
}

fn features(x: ArrayView2<'_, f64>, spec: &MechanismSpec, draws: &Draws, side: Side) -> Result<Array2<Complex64>> {
    let logs = log_features(x, spec, draws, side)?;
    crate::mechanisms::exp_checked(&logs)
}

/// `(1/M) Re(Phi_x (Phi_y^T c))`, the random-feature approximation of
/// `K c` with `K_ij = K(x_i, y_j)` in the mechanism's kernel mode.
///
/// Runs in `O(d M (L + L'))` without forming the kernel matrix.
pub fn rf_apply(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    c: ArrayView1<'_, f64>,
    spec: &MechanismSpec,
    draws: &Draws,
) -> Result<Array1<f64>> {
    check_dims(x, y)?;
    if c.len() != y.nrows() {
        return Err(Error::invalid_argument(format!(
            "weight vector has length {}, expected {}",
            c.len(),
            y.nrows()
        )));
    }
    let phi_x = features(x, spec, draws, Side::First)?;
    let phi_y = features(y, spec, draws, Side::Second)?;
    let c = c.mapv(|v| Complex64::new(v, 0.0));
    let t = phi_y.t().dot(&c);
    let m = draws.count() as f64;
    Ok(phi_x.dot(&t).mapv(|v| v.re / m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    OprfOrtho,
    OprfIid,
    PosrfOrtho,
}

impl AttentionMode {
    pub const ALL: [AttentionMode; 3] = [AttentionMode::OprfOrtho, AttentionMode::OprfIid, AttentionMode::PosrfOrtho];

    pub fn name(self) -> &'static str {
        match self {
            AttentionMode::OprfOrtho => "oprf_ortho",
            AttentionMode::OprfIid => "oprf_iid",
            AttentionMode::PosrfOrtho => "posrf_ortho",
        }
    }

    pub fn sampling(self) -> SamplingMode {
        match self {
            AttentionMode::OprfIid => SamplingMode::Iid,
            _ => SamplingMode::Orthogonal,
        }
    }
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AttentionMode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::invalid_argument(format!("unknown attention mode '{s}'")))
    }
}

/// The softmax-mode mechanism a FAVOR call uses for the scaled inputs.
pub fn attention_mechanism(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, mode: AttentionMode) -> Result<MechanismSpec> {
    let d = x.ncols();
    match mode {
        AttentionMode::PosrfOrtho => Ok(MechanismSpec::pos(KernelMode::Softmax)),
        AttentionMode::OprfOrtho | AttentionMode::OprfIid => {
            let stats = compute_stats(x, y)?;
            let a = optimal_a_oprf(stats.mean_sq_norm_sum_plus, d)?;
            MechanismSpec::oprf(a, d, KernelMode::Softmax)
        }
    }
}

/// Linear-time attention `diag(Phi_Q (Phi_K^T 1))^{-1} Phi_Q (Phi_K^T V)`
/// with `M` positive features (FAVOR++ for the OPRF modes).
pub fn favorpp_attention(inp: &AttentionInputs, m: usize, rng: &mut RngState, mode: AttentionMode) -> Result<Array2<f64>> {
    let (x, y) = inp.scaled();
    let spec = attention_mechanism(x.view(), y.view(), mode)?;
    let ens = projections::sample(rng, m, inp.dim(), mode.sampling())?;
    let draws = Draws::Projections(ens);

    let phi_q = stabilized_features(x.view(), &spec, &draws, Side::First, true)?.mapv(|v| v.re);
    let phi_k = stabilized_features(y.view(), &spec, &draws, Side::Second, false)?.mapv(|v| v.re);

    let kv = phi_k.t().dot(&inp.v);
    let k_sum = phi_k.sum_axis(Axis(0));
    let mut out = phi_q.dot(&kv);
    let denom = phi_q.dot(&k_sum);
    for (i, (mut row, &den)) in out.axis_iter_mut(Axis(0)).zip(denom.iter()).enumerate() {
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::DegenerateDenominator { row: i, value: den });
        }
        row.mapv_inplace(|v| v / den);
    }
    Ok(out)
}

/// `|approx - exact|_F / |exact|_F`.
pub fn relative_frobenius_error(approx: &Array2<f64>, exact: &Array2<f64>) -> f64 {
    let num: f64 = approx.iter().zip(exact).map(|(a, e)| (a - e) * (a - e)).sum();
    let den: f64 = exact.iter().map(|e| e * e).sum();
    (num / den).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionErrorRow {
    pub mode: AttentionMode,
    pub m: usize,
    pub seeds: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_sec: Option<f64>,
}

/// Relative Frobenius error against exact attention for every `(mode, M)`
/// over the seeds. Seed `s` drives the projections through
/// `RngState::new(s)`, so modes are paired seed by seed. Wall time is only
/// recorded when `timing` is set, keeping the default output deterministic.
pub fn attention_error_report(
    inp: &AttentionInputs,
    modes: &[AttentionMode],
    ms: &[usize],
    seeds: &[u64],
    timing: bool,
) -> Result<Vec<AttentionErrorRow>> {
    if modes.is_empty() || ms.is_empty() || seeds.is_empty() {
        return Err(Error::invalid_argument("modes, feature counts and seeds must be non-empty"));
    }
    let exact = exact_attention(inp)?;
    let mut rows = Vec::with_capacity(modes.len() * ms.len());
    for &mode in modes {
        for &m in ms {
            let start = Instant::now();
            let mut errors = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let approx = favorpp_attention(inp, m, &mut RngState::new(seed), mode)?;
                errors.push(relative_frobenius_error(&approx, &exact));
            }
            let elapsed = start.elapsed().as_secs_f64();
            let sorted = summary::sorted(&errors);
            let q1 = summary::quantile_sorted(&sorted, 0.25);
            let q3 = summary::quantile_sorted(&sorted, 0.75);
            rows.push(AttentionErrorRow {
                mode,
                m,
                seeds: seeds.len(),
                median: summary::quantile_sorted(&sorted, 0.5),
                q1,
                q3,
                iqr: q3 - q1,
                wall_time_sec: timing.then_some(elapsed),
            });
        }
    }
    Ok(rows)
}
