//! Gaussian projection ensembles.
//!
//! Rows of a [`ProjectionEnsemble`] are the random vectors `w_m` consumed by
//! the Gaussian-family mechanisms. In orthogonal mode the rows come in
//! consecutive blocks of `min(d, remaining)` mutually orthogonal directions;
//! each row length is redrawn independently as the norm of a fresh
//! `N(0, I_d)` vector, so every row keeps the standard Gaussian marginal.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Iid,
    Orthogonal,
}

/// `M x d` matrix of projection rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEnsemble {
    rows: Array2<f64>,
    mode: SamplingMode,
}

impl ProjectionEnsemble {
    /// Wrap an explicit matrix (treated as i.i.d.; no structure is assumed).
    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::invalid_argument("projection matrix must be non-empty"));
        }
        Ok(Self {
            rows,
            mode: SamplingMode::Iid,
        })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, m: usize) -> ArrayView1<'_, f64> {
        self.rows.row(m)
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn count(&self) -> usize {
        self.rows.nrows()
    }

    /// Row index ranges of the orthogonal blocks (a single block per row for i.i.d.).
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let m = self.count();
        let step = match self.mode {
            SamplingMode::Iid => 1,
            SamplingMode::Orthogonal => self.dim(),
        };
        (0..m).step_by(step).map(|s| s..(s + step).min(m)).collect()
    }
}

fn check_shape(m: usize, d: usize) -> Result<()> {
    if m == 0 || d == 0 {
        return Err(Error::invalid_argument(format!(
            "projection count and dimension must be positive (got M={m}, d={d})"
        )));
    }
    Ok(())
}

pub fn sample(rng: &mut RngState, m: usize, d: usize, mode: SamplingMode) -> Result<ProjectionEnsemble> {
    match mode {
        SamplingMode::Iid => sample_iid(rng, m, d),
        SamplingMode::Orthogonal => sample_orthogonal(rng, m, d),
    }
}

/// `M` independent standard Gaussian vectors in `R^d`.
pub fn sample_iid(rng: &mut RngState, m: usize, d: usize) -> Result<ProjectionEnsemble> {
    check_shape(m, d)?;
    let rows = Array2::from_shape_simple_fn((m, d), || rng.standard_normal());
    Ok(ProjectionEnsemble {
        rows,
        mode: SamplingMode::Iid,
    })
}

/// Block-orthogonal ensemble: `ceil(M / d)` independent blocks.
pub fn sample_orthogonal(rng: &mut RngState, m: usize, d: usize) -> Result<ProjectionEnsemble> {
    check_shape(m, d)?;
    let mut rows = Array2::zeros((m, d));
    let mut start = 0;
    while start < m {
        let b = d.min(m - start);
        let mut block = orthonormal_block(rng, b, d);
        for (i, mut row) in block.rows_mut().into_iter().enumerate() {
            let len = chi_norm(rng, d);
            row.mapv_inplace(|v| v * len);
            rows.row_mut(start + i).assign(&row);
        }
        start += b;
    }
    Ok(ProjectionEnsemble {
        rows,
        mode: SamplingMode::Orthogonal,
    })
}

/// Norm of a fresh `N(0, I_d)` draw.
fn chi_norm(rng: &mut RngState, d: usize) -> f64 {
    (0..d)
        .map(|_| {
            let g = rng.standard_normal();
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// `b <= d` orthonormal rows from Gram-Schmidt (applied twice) on Gaussian
/// draws; a numerically rank-deficient draw is discarded and redrawn.
fn orthonormal_block(rng: &mut RngState, b: usize, d: usize) -> Array2<f64> {
    'draw: loop {
        let mut block = Array2::from_shape_simple_fn((b, d), || rng.standard_normal());
        for i in 0..b {
            let original = block.row(i).dot(&block.row(i)).sqrt();
            for _pass in 0..2 {
                for j in 0..i {
                    let (done, mut rest) = block.view_mut().split_at(ndarray::Axis(0), i);
                    let q = done.row(j);
                    let mut v = rest.row_mut(0);
                    let proj = q.dot(&v);
                    axpy(-proj, q, &mut v);
                }
            }
            let norm = block.row(i).dot(&block.row(i)).sqrt();
            if !(norm > 1e-10 * original) || !norm.is_finite() {
                continue 'draw;
            }
            block.row_mut(i).mapv_inplace(|v| v / norm);
        }
        return block;
    }
}

fn axpy(a: f64, x: ArrayView1<'_, f64>, y: &mut ArrayViewMut1<'_, f64>) {
    y.zip_mut_with(&x, |yi, &xi| *yi += a * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sizes_rejected() {
        let mut rng = RngState::new(1);
        assert!(sample_iid(&mut rng, 0, 3).is_err());
        assert!(sample_iid(&mut rng, 3, 0).is_err());
        assert!(sample_orthogonal(&mut rng, 0, 3).is_err());
        assert!(sample_orthogonal(&mut rng, 3, 0).is_err());
    }

    #[test]
    fn iid_is_reproducible() {
        let a = sample_iid(&mut RngState::new(7), 4, 3).unwrap();
        let b = sample_iid(&mut RngState::new(7), 4, 3).unwrap();
        assert_eq!(a.rows().shape(), &[4, 3]);
        assert!(a
            .rows()
            .iter()
            .zip(b.rows().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn full_block_is_orthogonal() {
        let ens = sample_orthogonal(&mut RngState::new(3), 4, 4).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (ens.row(i), ens.row(j));
                let bound = 1e-10 * a.dot(&a).sqrt() * b.dot(&b).sqrt();
                assert!(a.dot(&b).abs() <= bound, "rows {i},{j}");
            }
        }
    }

    #[test]
    fn partial_second_block() {
        let ens = sample_orthogonal(&mut RngState::new(3), 6, 4).unwrap();
        assert_eq!(ens.blocks(), vec![0..4, 4..6]);
        let cos = |i: usize, j: usize| {
            let (a, b) = (ens.row(i), ens.row(j));
            a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
        };
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(cos(i, j).abs() < 1e-10);
            }
        }
        assert!(cos(4, 5).abs() < 1e-10);
        let cross_max = (0..4)
            .flat_map(|i| (4..6).map(move |j| (i, j)))
            .map(|(i, j)| cos(i, j).abs())
            .fold(0.0, f64::max);
        assert!(cross_max > 1e-3);
    }

    #[test]
    fn orthogonal_when_m_below_d() {
        let ens = sample_orthogonal(&mut RngState::new(9), 3, 10).unwrap();
        assert_eq!(ens.blocks(), vec![0..3]);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let (a, b) = (ens.row(i), ens.row(j));
                assert!(a.dot(&b).abs() <= 1e-10 * a.dot(&a).sqrt() * b.dot(&b).sqrt());
            }
        }
    }

    #[test]
    fn one_dimensional_blocks() {
        let ens = sample_orthogonal(&mut RngState::new(2), 5, 1).unwrap();
        assert_eq!(ens.blocks().len(), 5);
        assert!(ens.rows().iter().all(|v| v.is_finite()));
    }
}
