//! Feature maps `f1`, `f2` for every mechanism.
//!
//! | kind        | draws             | features                                          |
//! |-------------|-------------------|---------------------------------------------------|
//! | `trig`      | Gaussian          | `exp(+-i w^T x)`                                  |
//! | `pos`       | Gaussian          | `exp(w^T x - |x|^2)`                              |
//! | `gerf`      | Gaussian          | `D exp(A|w|^2 + B w^T x + C|x|^2)`, complex `A`   |
//! | `oprf`      | Gaussian          | GERF with real variance-optimal `A < 0`, `s = +1` |
//! | `pois`      | Poisson counts    | discretely-induced, Taylor terms of `exp(x^T y)`  |
//! | `geom`      | geometric counts  | discretely-induced                                |
//! | `*_plus`    | as above          | discretely-induced on shifted, positive inputs    |
//!
//! Internally every map is evaluated as a complex logarithm (log-magnitude
//! plus phase) and exponentiated once; the softmax-kernel variant adds
//! `|x|^2 / 2` to the Gaussian-kernel logarithm.

mod config;
pub mod discrete;
pub mod gerf;
pub mod shift;

pub use config::{MechanismConfig, POISSON_RATE_FLOOR};
pub use discrete::{featurize_discrete, sample_discrete, DiscreteFamily, DiscreteParams, DiscreteSample};
pub use gerf::{featurize_gerf, make_gerf_params, GerfParams};
pub use shift::{apply_shift, fit_shift, ShiftSpec, DEFAULT_SHIFT_EPSILON};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::{self, ProjectionEnsemble, SamplingMode};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Trig,
    Pos,
    Gerf,
    Oprf,
    Pois,
    Geom,
    PoisPlus,
    GeomPlus,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 8] = [
        MechanismKind::Trig,
        MechanismKind::Pos,
        MechanismKind::Gerf,
        MechanismKind::Oprf,
        MechanismKind::Pois,
        MechanismKind::Geom,
        MechanismKind::PoisPlus,
        MechanismKind::GeomPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Trig => "trig",
            MechanismKind::Pos => "pos",
            MechanismKind::Gerf => "gerf",
            MechanismKind::Oprf => "oprf",
            MechanismKind::Pois => "pois",
            MechanismKind::Geom => "geom",
            MechanismKind::PoisPlus => "pois_plus",
            MechanismKind::GeomPlus => "geom_plus",
        }
    }

    /// Mechanisms drawing Gaussian projections (the GERF family).
    pub fn uses_projections(self) -> bool {
        matches!(
            self,
            MechanismKind::Trig | MechanismKind::Pos | MechanismKind::Gerf | MechanismKind::Oprf
        )
    }

    pub fn is_discrete(self) -> bool {
        !self.uses_projections()
    }

    pub fn is_shifted(self) -> bool {
        matches!(self, MechanismKind::PoisPlus | MechanismKind::GeomPlus)
    }

    pub fn family(self) -> Option<DiscreteFamily> {
        match self {
            MechanismKind::Pois | MechanismKind::PoisPlus => Some(DiscreteFamily::Poisson),
            MechanismKind::Geom | MechanismKind::GeomPlus => Some(DiscreteFamily::Geometric),
            _ => None,
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '+'], "_");
        let norm = match norm.as_str() {
            "pois_" => "pois_plus",
            "geom_" => "geom_plus",
            other => other,
        };
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid_argument(format!("unknown mechanism '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    #[default]
    Gaussian,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

/// The sign `s` of the second GERF feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn from_value(v: i64) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(Error::invalid_parameter(format!("sign must be -1 or +1, got {v}"))),
        }
    }
}

/// A fully parameterized mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSpec {
    kind: MechanismKind,
    gerf: Option<GerfParams>,
    discrete: Option<DiscreteParams>,
    shift: Option<ShiftSpec>,
    kernel_mode: KernelMode,
}

impl MechanismSpec {
    pub fn new(
        kind: MechanismKind,
        gerf: Option<GerfParams>,
        discrete: Option<DiscreteParams>,
        shift: Option<ShiftSpec>,
        kernel_mode: KernelMode,
    ) -> Result<Self> {
        let wants_gerf = matches!(kind, MechanismKind::Gerf | MechanismKind::Oprf);
        if wants_gerf != gerf.is_some() {
            return Err(Error::invalid_parameter(format!(
                "{kind} {} GERF parameters",
                if wants_gerf { "requires" } else { "does not take" }
            )));
        }
        if kind.is_discrete() != discrete.is_some() {
            return Err(Error::invalid_parameter(format!(
                "{kind} {} a discrete law",
                if kind.is_discrete() { "requires" } else { "does not take" }
            )));
        }
        if let (Some(fam), Some(dp)) = (kind.family(), discrete.as_ref()) {
            if dp.family() != fam {
                return Err(Error::invalid_parameter(format!(
                    "{kind} needs a {fam:?} law, got {:?}",
                    dp.family()
                )));
            }
        }
        if kind.is_shifted() != shift.is_some() {
            return Err(Error::invalid_parameter(format!(
                "{kind} {} a shift",
                if kind.is_shifted() { "requires" } else { "does not take" }
            )));
        }
        if let Some(g) = gerf.as_ref() {
            if kind == MechanismKind::Oprf && !(g.a().im == 0.0 && g.s() == Sign::Plus) {
                return Err(Error::invalid_parameter("OPRF needs real A and s = +1"));
            }
        }
        Ok(Self {
            kind,
            gerf,
            discrete,
            shift,
            kernel_mode,
        })
    }

    pub fn trig(kernel_mode: KernelMode) -> Self {
        Self::new(MechanismKind::Trig, None, None, None, kernel_mode).expect("valid")
    }

    pub fn pos(kernel_mode: KernelMode) -> Self {
        Self::new(MechanismKind::Pos, None, None, None, kernel_mode).expect("valid")
    }

    pub fn generalized(a: Complex64, s: Sign, d: usize, kernel_mode: KernelMode) -> Result<Self> {
        let p = make_gerf_params(a, s, d)?;
        Self::new(MechanismKind::Gerf, Some(p), None, None, kernel_mode)
    }

    pub fn oprf(a: f64, d: usize, kernel_mode: KernelMode) -> Result<Self> {
        let p = make_gerf_params(Complex64::new(a, 0.0), Sign::Plus, d)?;
        Self::new(MechanismKind::Oprf, Some(p), None, None, kernel_mode)
    }

    pub fn pois(lambda: f64, kernel_mode: KernelMode) -> Result<Self> {
        let p = DiscreteParams::poisson(lambda)?;
        Self::new(MechanismKind::Pois, None, Some(p), None, kernel_mode)
    }

    pub fn geom(p: f64, kernel_mode: KernelMode) -> Result<Self> {
        let p = DiscreteParams::geometric(p)?;
        Self::new(MechanismKind::Geom, None, Some(p), None, kernel_mode)
    }

    pub fn pois_plus(lambda: f64, shift: ShiftSpec, kernel_mode: KernelMode) -> Result<Self> {
        let p = DiscreteParams::poisson(lambda)?;
        Self::new(MechanismKind::PoisPlus, None, Some(p), Some(shift), kernel_mode)
    }

    pub fn geom_plus(p: f64, shift: ShiftSpec, kernel_mode: KernelMode) -> Result<Self> {
        let p = DiscreteParams::geometric(p)?;
        Self::new(MechanismKind::GeomPlus, None, Some(p), Some(shift), kernel_mode)
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn gerf(&self) -> Option<&GerfParams> {
        self.gerf.as_ref()
    }

    pub fn discrete(&self) -> Option<&DiscreteParams> {
        self.discrete.as_ref()
    }

    pub fn shift(&self) -> Option<&ShiftSpec> {
        self.shift.as_ref()
    }

    pub fn kernel_mode(&self) -> KernelMode {
        self.kernel_mode
    }

    pub fn with_kernel_mode(mut self, kernel_mode: KernelMode) -> Self {
        self.kernel_mode = kernel_mode;
        self
    }

    /// GERF parameters used for featurization, including the fixed ones of
    /// the trigonometric and positive baselines.
    pub fn effective_gerf(&self, d: usize) -> Result<Option<GerfParams>> {
        match self.kind {
            MechanismKind::Trig => make_gerf_params(Complex64::new(0.0, 0.0), Sign::Minus, d).map(Some),
            MechanismKind::Pos => make_gerf_params(Complex64::new(0.0, 0.0), Sign::Plus, d).map(Some),
            MechanismKind::Gerf | MechanismKind::Oprf => {
                let g = self.gerf.as_ref().expect("checked in constructor");
                if g.dim() == d {
                    Ok(Some(g.clone()))
                } else {
                    make_gerf_params(g.a(), g.s(), d).map(Some)
                }
            }
            _ => Ok(None),
        }
    }

    /// Whether the feature values are complex (a single complex feature
    /// carries two real numbers).
    pub fn is_complex(&self) -> bool {
        match self.kind {
            MechanismKind::Trig => true,
            MechanismKind::Gerf => self.gerf.as_ref().is_some_and(|g| !g.is_real()),
            _ => false,
        }
    }

    /// Sample the randomness this mechanism consumes.
    pub fn draw(&self, rng: &mut RngState, m: usize, d: usize, mode: SamplingMode) -> Result<Draws> {
        if let Some(dp) = self.discrete.as_ref() {
            Ok(Draws::Discrete(sample_discrete(rng, dp, m, d)?))
        } else {
            Ok(Draws::Projections(projections::sample(rng, m, d, mode)?))
        }
    }
}

/// The random draws `w_1 .. w_M` behind a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Draws {
    Projections(ProjectionEnsemble),
    Discrete(DiscreteSample),
}

impl Draws {
    pub fn count(&self) -> usize {
        match self {
            Draws::Projections(e) => e.count(),
            Draws::Discrete(s) => s.count(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Draws::Projections(e) => e.dim(),
            Draws::Discrete(s) => s.dim(),
        }
    }
}

/// `L x M` feature values for one side of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<Complex64>,
    side: Side,
    kernel_mode: KernelMode,
}

impl FeatureMatrix {
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn kernel_mode(&self) -> KernelMode {
        self.kernel_mode
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Real parts.
    pub fn real(&self) -> Array2<f64> {
        self.values.mapv(|v| v.re)
    }
}

/// Featurize the rows of `x` for `side`, applying the mechanism's shift and
/// kernel mode.
pub fn featurize(x: ArrayView2<'_, f64>, spec: &MechanismSpec, draws: &Draws, side: Side) -> Result<FeatureMatrix> {
    let logs = log_features(x, spec, draws, side)?;
    let values = exp_checked(&logs)?;
    Ok(FeatureMatrix {
        values,
        side,
        kernel_mode: spec.kernel_mode,
    })
}

/// Complex logarithms of the features (see the module docs).
pub(crate) fn log_features(
    x: ArrayView2<'_, f64>,
    spec: &MechanismSpec,
    draws: &Draws,
    side: Side,
) -> Result<Array2<Complex64>> {
    if x.ncols() != draws.dim() {
        return Err(Error::invalid_argument(format!(
            "input dimension {} does not match draws dimension {}",
            x.ncols(),
            draws.dim()
        )));
    }
    let shifted;
    let inputs = match spec.shift.as_ref() {
        Some(sh) => {
            shifted = apply_shift(x, sh)?;
            shifted.view()
        }
        None => x,
    };
    let mut logs = match (spec.effective_gerf(x.ncols())?, draws) {
        (Some(g), Draws::Projections(ens)) => gerf::gerf_log_features(inputs, &g, ens, side),
        (None, Draws::Discrete(sample)) => {
            let dp = spec.discrete.as_ref().expect("checked in constructor");
            discrete::discrete_log_features(inputs, dp, sample)
        }
        _ => {
            return Err(Error::invalid_argument(format!(
                "{} cannot consume the supplied draws",
                spec.kind
            )))
        }
    };
    if spec.kernel_mode == KernelMode::Softmax {
        add_half_sq_norms(&mut logs, x);
    }
    Ok(logs)
}

/// `log f += |x_i|^2 / 2` per row (of the unshifted input).
pub(crate) fn add_half_sq_norms(logs: &mut Array2<Complex64>, x: ArrayView2<'_, f64>) {
    for (mut row, xi) in logs.axis_iter_mut(Axis(0)).zip(x.axis_iter(Axis(0))) {
        let h = 0.5 * xi.dot(&xi);
        row.mapv_inplace(|v| Complex64::new(v.re + h, v.im));
    }
}

/// `exp` that keeps real features exactly real: phases of exactly `0` or `pi`
/// map to `+-|f|` with no imaginary residue.
pub(crate) fn exp_log(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(z.re.exp(), 0.0)
    } else if z.im == std::f64::consts::PI {
        Complex64::new(-z.re.exp(), 0.0)
    } else {
        z.exp()
    }
}

pub(crate) fn exp_checked(logs: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let mut out = Array2::zeros(logs.raw_dim());
    for ((i, m), &z) in logs.indexed_iter() {
        let v = exp_log(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NumericOverflow {
                row: i,
                detail: format!("feature {m} has log-magnitude {}", z.re),
            });
        }
        out[[i, m]] = v;
    }
    Ok(out)
}
