use ndarray::{Array1, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fit_shift, apply_shift, KernelMode, MechanismKind, MechanismSpec, ShiftSpec, Sign, DEFAULT_SHIFT_EPSILON};
use crate::error::{Error, Result};
use crate::stats::{compute_stats, pair_stats_from_dataset, DatasetStats};
use crate::variance::{optimal_a_oprf, optimal_lambda, optimize_a_complex, optimize_a_for_sign, optimize_p};

/// Rate used when `sum_l x_l^2 y_l^2 = 0` and the Poisson variance has no
/// interior minimum.
pub const POISSON_RATE_FLOOR: f64 = 1e-8;

/// JSON form of a mechanism. Parameters left as `null` are fitted from data
/// by [`MechanismConfig::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    #[serde(rename = "A_re", default)]
    pub a_re: Option<f64>,
    #[serde(rename = "A_im", default)]
    pub a_im: Option<f64>,
    #[serde(default)]
    pub s: Option<i64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub kernel_mode: KernelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind) -> Self {
        Self {
            kind,
            a_re: None,
            a_im: None,
            s: None,
            lambda: None,
            p: None,
            epsilon: None,
            kernel_mode: KernelMode::Gaussian,
            c: None,
        }
    }

    pub fn with_kernel_mode(mut self, kernel_mode: KernelMode) -> Self {
        self.kernel_mode = kernel_mode;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn sign(&self) -> Result<Option<Sign>> {
        self.s.map(Sign::from_value).transpose()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_SHIFT_EPSILON)
    }

    /// Build the mechanism from explicit parameters only.
    pub fn resolve(&self, d: usize) -> Result<MechanismSpec> {
        let missing = |name: &str| Error::invalid_parameter(format!("{} needs '{name}'", self.kind));
        let shift = || -> Result<ShiftSpec> {
            let c = self.c.as_ref().ok_or_else(|| missing("c"))?;
            if c.len() != d {
                return Err(Error::invalid_parameter(format!(
                    "shift has dimension {}, data has {d}",
                    c.len()
                )));
            }
            ShiftSpec::new(Array1::from(c.clone()), self.epsilon())
        };
        let km = self.kernel_mode;
        match self.kind {
            MechanismKind::Trig => Ok(MechanismSpec::trig(km)),
            MechanismKind::Pos => Ok(MechanismSpec::pos(km)),
            MechanismKind::Oprf => {
                if self.a_im.is_some_and(|v| v != 0.0) || self.sign()?.is_some_and(|s| s != Sign::Plus) {
                    return Err(Error::invalid_parameter("OPRF needs real A and s = +1"));
                }
                MechanismSpec::oprf(self.a_re.ok_or_else(|| missing("A_re"))?, d, km)
            }
            MechanismKind::Gerf => {
                let a = Complex64::new(self.a_re.ok_or_else(|| missing("A_re"))?, self.a_im.unwrap_or(0.0));
                let s = self.sign()?.ok_or_else(|| missing("s"))?;
                MechanismSpec::generalized(a, s, d, km)
            }
            MechanismKind::Pois => MechanismSpec::pois(self.lambda.ok_or_else(|| missing("lambda"))?, km),
            MechanismKind::Geom => MechanismSpec::geom(self.p.ok_or_else(|| missing("p"))?, km),
            MechanismKind::PoisPlus => {
                MechanismSpec::pois_plus(self.lambda.ok_or_else(|| missing("lambda"))?, shift()?, km)
            }
            MechanismKind::GeomPlus => MechanismSpec::geom_plus(self.p.ok_or_else(|| missing("p"))?, shift()?, km),
        }
    }

    /// Fill every missing parameter from the sets `x`, `y` and build the
    /// mechanism. Shifted variants fit their shift first and their law on
    /// the shifted sets.
    pub fn fit(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<MechanismSpec> {
        let d = x.ncols();
        let mut cfg = self.clone();
        if self.kind.is_shifted() {
            let shift = match self.c.as_ref() {
                Some(_) => cfg.resolve_shift(d)?,
                None => fit_shift(x, y, self.epsilon())?,
            };
            cfg.c = Some(shift.c().to_vec());
            let xs = apply_shift(x, &shift)?;
            let ys = apply_shift(y, &shift)?;
            return cfg.fit_with_stats(&compute_stats(xs.view(), ys.view())?);
        }
        cfg.fit_with_stats(&compute_stats(x, y)?)
    }

    fn resolve_shift(&self, d: usize) -> Result<ShiftSpec> {
        let c = self.c.clone().unwrap_or_default();
        if c.len() != d {
            return Err(Error::invalid_parameter(format!("shift has dimension {}, data has {d}", c.len())));
        }
        ShiftSpec::new(Array1::from(c), self.epsilon())
    }

    /// Fill missing parameters from precomputed statistics. Shifted variants
    /// must already carry `c`, and `stats` must describe the shifted sets.
    pub fn fit_with_stats(&self, stats: &DatasetStats) -> Result<MechanismSpec> {
        let mut cfg = self.clone();
        let pair = pair_stats_from_dataset(stats);
        match self.kind {
            MechanismKind::Trig | MechanismKind::Pos => {}
            MechanismKind::Oprf => {
                if cfg.a_re.is_none() {
                    cfg.a_re = Some(optimal_a_oprf(stats.mean_sq_norm_sum_plus, stats.d)?);
                }
            }
            MechanismKind::Gerf => {
                if cfg.a_re.is_none() {
                    let found = match cfg.sign()? {
                        Some(s) => optimize_a_for_sign(&pair, s),
                        None => optimize_a_complex(&pair),
                    };
                    cfg.a_re = Some(found.a.re);
                    cfg.a_im = Some(found.a.im);
                    cfg.s = Some(found.s.value() as i64);
                } else if cfg.s.is_none() {
                    cfg.s = Some(1);
                }
            }
            MechanismKind::Pois | MechanismKind::PoisPlus => {
                if cfg.lambda.is_none() {
                    cfg.lambda = Some(optimal_lambda(&pair).unwrap_or(POISSON_RATE_FLOOR));
                }
            }
            MechanismKind::Geom | MechanismKind::GeomPlus => {
                if cfg.p.is_none() {
                    cfg.p = Some(optimize_p(&pair));
                }
            }
        }
        cfg.resolve(stats.d)
    }
}

impl MechanismSpec {
    /// Fully populated JSON form.
    pub fn to_config(&self) -> MechanismConfig {
        let mut cfg = MechanismConfig::new(self.kind()).with_kernel_mode(self.kernel_mode());
        if let Some(g) = self.gerf() {
            cfg.a_re = Some(g.a().re);
            cfg.a_im = Some(g.a().im);
            cfg.s = Some(g.s().value() as i64);
        }
        if let Some(dp) = self.discrete() {
            match dp.family() {
                super::DiscreteFamily::Poisson => cfg.lambda = Some(dp.value()),
                super::DiscreteFamily::Geometric => cfg.p = Some(dp.value()),
            }
        }
        if let Some(sh) = self.shift() {
            cfg.epsilon = Some(sh.epsilon());
            cfg.c = Some(sh.c().to_vec());
        }
        cfg
    }
}
