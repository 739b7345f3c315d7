use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = symmetrize(a);
    let chol = sym.cholesky().ok_or(Error::NotPositiveDefinite(what))?;
    Ok(symmetrize(&chol.inverse()))
}

pub(crate) fn spd_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    what: &'static str,
) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let chol = symmetrize(a)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite(what))?;
    Ok(chol.solve(b))
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Fails when the smallest singular value is below `1e-10` times the largest.
pub(crate) fn check_full_column_rank(x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() == 0 {
        return Ok(());
    }
    if x.nrows() < x.ncols() {
        return Err(Error::RankDeficient {
            smallest: 0.0,
            largest: 0.0,
        });
    }
    let sv = x.clone().svd(false, false).singular_values;
    let largest = sv.max();
    let smallest = sv.min();
    if !(smallest >= RANK_TOLERANCE * largest) || largest == 0.0 {
        return Err(Error::RankDeficient { smallest, largest });
    }
    Ok(())
}

/// `Xᵀ diag(w) X`.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (mut row, &wi) in scaled.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    symmetrize(&(x.transpose() * scaled))
}

/// Schur complement `X₂ᵀWX₂ − X₂ᵀWX₁(X₁ᵀWX₁)⁻¹X₁ᵀWX₂`, i.e. `RᵀWR`.
pub(crate) fn schur_rwr(x: &DMatrix<f64>, w: &DVector<f64>, q: usize) -> Result<DMatrix<f64>> {
    let gram = weighted_gram(x, w);
    let p = x.ncols();
    let k22 = gram.view((q, q), (p - q, p - q)).into_owned();
    if q == 0 {
        return Ok(k22);
    }
    let k11 = gram.view((0, 0), (q, q)).into_owned();
    let k12 = gram.view((0, q), (q, p - q)).into_owned();
    let k11_inv = spd_inverse(&k11, "X1'WX1")?;
    Ok(symmetrize(&(k22 - k12.transpose() * k11_inv * k12)))
}
