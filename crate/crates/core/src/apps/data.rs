//! Synthetic regimes and labeled CSV datasets.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `x, y ~ N(0, sigma^2 I)`.
    Normal,
    /// Uniform on the sphere of radius `sigma`.
    Sphere,
    /// `x ~ N(0, sigma^2 I)`, `y ~ N(sigma 1, sigma^2 I)`.
    Heterogen,
    /// Rows resampled from a labeled CSV file and scaled by `sigma`.
    Csv,
}

impl RegimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::Normal => "normal",
            RegimeKind::Sphere => "sphere",
            RegimeKind::Heterogen => "heterogen",
            RegimeKind::Csv => "csv",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(RegimeKind::Normal),
            "sphere" => Ok(RegimeKind::Sphere),
            "heterogen" => Ok(RegimeKind::Heterogen),
            "csv" => Ok(RegimeKind::Csv),
            _ => Err(Error::invalid_argument(format!("unknown regime '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub sigma: f64,
    pub d: usize,
    pub l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Regime {
    pub fn new(kind: RegimeKind, sigma: f64, d: usize, l: usize) -> Self {
        Self {
            kind,
            sigma,
            d,
            l,
            path: None,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, sigma: f64, l: usize) -> Self {
        Self {
            kind: RegimeKind::Csv,
            sigma,
            d: 0,
            l,
            path: Some(path.into()),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid_argument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.l == 0 {
            return Err(Error::invalid_argument("set size must be positive"));
        }
        if self.kind != RegimeKind::Csv && self.d == 0 {
            return Err(Error::invalid_argument("dimension must be positive"));
        }
        if self.kind == RegimeKind::Csv && self.path.is_none() {
            return Err(Error::invalid_argument("csv regime needs a path"));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut RngState, l: usize, d: usize, sigma: f64, mean: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((l, d), || mean + sigma * rng.standard_normal())
}

fn sphere(rng: &mut RngState, l: usize, d: usize, radius: f64) -> Array2<f64> {
    let mut out = Array2::zeros((l, d));
    for mut row in out.axis_iter_mut(Axis(0)) {
        loop {
            row.mapv_inplace(|_| rng.standard_normal());
            let norm = row.dot(&row).sqrt();
            if norm > 1e-12 {
                row.mapv_inplace(|v| radius * v / norm);
                break;
            }
        }
    }
    out
}

/// Two `L x d` sets drawn according to the regime. The csv regime takes its
/// dimension from the file and ignores `regime.d`.
pub fn generate_regime(rng: &mut RngState, regime: &Regime) -> Result<(Array2<f64>, Array2<f64>)> {
    regime.validate()?;
    let (s, d, l) = (regime.sigma, regime.d, regime.l);
    Ok(match regime.kind {
        RegimeKind::Normal => {
            let x = gaussian(rng, l, d, s, 0.0);
            (x, gaussian(rng, l, d, s, 0.0))
        }
        RegimeKind::Sphere => {
            let x = sphere(rng, l, d, s);
            (x, sphere(rng, l, d, s))
        }
        RegimeKind::Heterogen => {
            let x = gaussian(rng, l, d, s, 0.0);
            (x, gaussian(rng, l, d, s, s))
        }
        RegimeKind::Csv => {
            let data = LabeledDataset::load_csv(regime.path.as_ref().expect("validated"))?;
            let mut pick = || {
                let mut out = Array2::zeros((l, data.dim()));
                for mut row in out.axis_iter_mut(Axis(0)) {
                    let i = rng.index(data.len());
                    row.assign(&(&data.objects.row(i) * s));
                }
                out
            };
            let x = pick();
            (x, pick())
        }
    })
}

/// Objects with class indices in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub objects: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    /// `n_classes` defaults to one past the largest label.
    pub fn new(objects: Array2<f64>, labels: Vec<usize>, n_classes: Option<usize>) -> Result<Self> {
        if objects.nrows() == 0 || objects.ncols() == 0 {
            return Err(Error::invalid_argument("dataset must have at least one row and column"));
        }
        if labels.len() != objects.nrows() {
            return Err(Error::invalid_argument(format!(
                "{} labels for {} objects",
                labels.len(),
                objects.nrows()
            )));
        }
        let needed = labels.iter().max().map_or(0, |m| m + 1);
        let n_classes = n_classes.unwrap_or(needed);
        if needed > n_classes {
            return Err(Error::invalid_argument(format!(
                "label {} out of range for {n_classes} classes",
                needed - 1
            )));
        }
        if objects.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self {
            objects,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.objects.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.objects.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let objects = self.objects.select(Axis(0), rows);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::new(objects, labels, Some(self.n_classes))
    }

    /// Numeric CSV, last column an integer label; a first row that does not
    /// parse as numbers is taken as a header.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path.as_ref())?.read_to_string(&mut text)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (n, record) in reader.records().enumerate() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(f64::from_str).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if n == 0 => continue,
                Err(e) => return Err(Error::Data(format!("line {}: {e}", n + 1))),
            };
            if row.len() < 2 {
                return Err(Error::Data(format!("line {}: need features and a label", n + 1)));
            }
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(Error::Data(format!("line {}: ragged row", n + 1)));
            }
            let label = row[row.len() - 1];
            if label < 0.0 || label.fract() != 0.0 || label > u32::MAX as f64 {
                return Err(Error::Data(format!("line {}: label {label} is not a class index", n + 1)));
            }
            labels.push(label as usize);
            values.extend_from_slice(&row[..row.len() - 1]);
        }
        let d = width.ok_or_else(|| Error::Data("no data rows".into()))? - 1;
        let objects = Array2::from_shape_vec((labels.len(), d), values)
            .map_err(|e| Error::Data(e.to_string()))?;
        Self::new(objects, labels, None)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_labeled_csv(out, self.objects.view(), &self.labels)
    }
}

/// `x0,..,x{d-1},label` header followed by one row per object.
pub fn write_labeled_csv(out: impl Write, objects: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..objects.ncols()).map(|l| format!("x{l}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in objects.axis_iter(Axis(0)).zip(labels) {
        let mut rec: Vec<String> = row.iter().map(|v| super::emit::format_float(*v)).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Two Gaussian blobs with unit covariance centred at `+-separation * 1`,
/// `l` points split evenly (class 0 at the negative centre).
pub fn generate_blobs(rng: &mut RngState, l: usize, d: usize, separation: f64) -> Result<LabeledDataset> {
    if l == 0 || d == 0 {
        return Err(Error::invalid_argument("blobs need at least one point and one dimension"));
    }
    let labels: Vec<usize> = (0..l).map(|i| i % 2).collect();
    let mut objects = Array2::zeros((l, d));
    for (mut row, &c) in objects.axis_iter_mut(Axis(0)).zip(&labels) {
        let centre = if c == 0 { -separation } else { separation };
        row.mapv_inplace(|_| centre + rng.standard_normal());
    }
    LabeledDataset::new(objects, labels, Some(2))
}

/// Stack two sets into one labeled dataset (`x` rows labeled 0, `y` rows 1).
pub fn stack_sets(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<LabeledDataset> {
    let objects = ndarray::concatenate(Axis(0), &[x, y]).map_err(|e| Error::invalid_argument(e.to_string()))?;
    let labels = std::iter::repeat_n(0, x.nrows()).chain(std::iter::repeat_n(1, y.nrows())).collect();
    LabeledDataset::new(objects, labels, Some(2))
}

/// Squared row norms.
pub fn row_sq_norms(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_rows_have_radius() {
        let r = Regime::new(RegimeKind::Sphere, 2.0, 8, 100);
        let (x, y) = generate_regime(&mut RngState::new(1), &r).unwrap();
        for n in row_sq_norms(x.view()).iter().chain(row_sq_norms(y.view()).iter()) {
            assert!((n.sqrt() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn regimes_are_seeded() {
        for kind in [RegimeKind::Normal, RegimeKind::Sphere, RegimeKind::Heterogen] {
            let r = Regime::new(kind, 0.5, 3, 4);
            let a = generate_regime(&mut RngState::new(8), &r).unwrap();
            let b = generate_regime(&mut RngState::new(8), &r).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_regimes() {
        let mut rng = RngState::new(0);
        assert!(generate_regime(&mut rng, &Regime::new(RegimeKind::Normal, 0.0, 3, 4)).is_err());
        assert!(generate_regime(&mut rng, &Regime::new(RegimeKind::Normal, 1.0, 0, 4)).is_err());
        let missing = Regime::csv("/nonexistent/data.csv", 1.0, 4);
        assert!(matches!(generate_regime(&mut rng, &missing), Err(Error::Io(_))));
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = LabeledDataset::parse_csv("f1,f2,class\n1.0,2.0,0\n-3,4.5,2\n").unwrap();
        let b = LabeledDataset::parse_csv("1.0,2.0,0\n-3,4.5,2\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_classes, 3);
        assert_eq!(a.dim(), 2);
        assert_eq!(a.labels, vec![0, 2]);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        assert!(LabeledDataset::parse_csv("1,2,0\n1,x,0\n").is_err());
        assert!(LabeledDataset::parse_csv("1,2,0.5\n").is_err());
        assert!(LabeledDataset::parse_csv("1,2,-1\n").is_err());
        assert!(LabeledDataset::parse_csv("1,2,0\n1,0\n").is_err());
        assert!(LabeledDataset::parse_csv("a,b\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_blobs(&mut RngState::new(3), 6, 3, 1.0).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn blobs_are_balanced() {
        let ds = generate_blobs(&mut RngState::new(3), 11, 2, 1.0).unwrap();
        assert_eq!(ds.labels.iter().filter(|&&c| c == 0).count(), 6);
        assert_eq!(ds.n_classes, 2);
    }
}
