//! Dense symmetric eigendecomposition, backed by faer.

use faer::linalg::solvers::SelfAdjointEigen;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix. Eigenvalues ascending,
/// eigenvectors stored as columns.
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub fn eigh(a: MatRef<'_, f64>) -> Result<Eigh> {
    let n = a.nrows();
    let decomp: SelfAdjointEigen<f64> = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?} (dim {n})")))?;
    let values: Vec<f64> = (0..n).map(|i| decomp.S()[i]).collect();
    Ok(Eigh {
        values,
        vectors: decomp.U().to_owned(),
    })
}

pub fn eigvalsh(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?} (dim {n})")))
}

/// Max |a - a^T| over all entries.
pub fn asymmetry(a: MatRef<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Max deviation of V^T V from the identity.
pub fn orthonormality_defect(v: MatRef<'_, f64>) -> f64 {
    let g = v.transpose() * v;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
