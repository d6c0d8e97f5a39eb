use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen directions whose eigenvalue falls below this fraction of the largest
/// one are dropped from the factor.
const RANK_CUTOFF: f64 = 1e-14;

/// Tall factor `F` (order x rank) with `F F^T` reproducing a PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    factor: DMatrix<f64>,
}

impl PsdFactor {
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn order(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

/// Eigen-based square root `V diag(sqrt(lambda))` of a symmetric PSD matrix,
/// keeping only numerically nonzero directions.
///
/// Eigenvalues down to `-tolerance` are treated as zero; anything more
/// negative is reported as [`Error::NotPsd`].
pub fn psd_sqrt(matrix: &DMatrix<f64>, tolerance: f64) -> Result<PsdFactor> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::invalid(
            "matrix",
            "expected a non-empty square matrix",
        ));
    }
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    if (matrix - matrix.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("matrix", "not symmetric"));
    }
    let max_iterations = 1000 * n;
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, max_iterations).ok_or(
        Error::EigenNoConvergence {
            order: n,
            max_iterations,
        },
    )?;
    let min = eig.eigenvalues.min();
    if min < -tolerance {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance,
        });
    }
    let max = eig.eigenvalues.max();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > RANK_CUTOFF * max)
        .collect();
    let factor = DMatrix::from_fn(n, kept.len().max(1), |i, c| match kept.get(c) {
        Some(&k) => eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt(),
        None => 0.0,
    });
    Ok(PsdFactor { factor })
}
