//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};

use crate::error::{Error, Result};

/// Relative ridge applied to every Gram or moment-matrix inversion.
pub const RIDGE: f64 = 1e-10;

pub type Mat2 = Matrix2<f64>;

/// Default eigenvalue clamp for [`sym_inv_sqrt`]: `1e-10 * trace(M)`.
pub fn default_clamp_tol(m: &Mat2) -> f64 {
    (RIDGE * m.trace().abs()).max(f64::MIN_POSITIVE)
}

/// Symmetric inverse square root with eigenvalue clamping.
///
/// `M` is symmetrized, eigenvalues below `tol` are raised to `tol`, and
/// `V diag(lambda^-1/2) V^T` is returned.
pub fn sym_inv_sqrt(m: &Mat2, tol: f64) -> Result<Mat2> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sym_inv_sqrt: non-finite matrix entry"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("sym_inv_sqrt: tolerance {tol} must be positive")));
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let v = eig.eigenvectors;
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(tol).sqrt());
    let r = v * Mat2::from_diagonal(&d) * v.transpose();
    Ok(0.5 * (r + r.transpose()))
}

/// Clamped symmetric inverse, `sym_inv_sqrt(M)^2`.
pub fn sym_inv_clamped(m: &Mat2) -> Result<Mat2> {
    let r = sym_inv_sqrt(m, default_clamp_tol(m))?;
    Ok(r * r)
}

/// Inverse of a 2x2 moment matrix after adding `1e-10 * trace` to the diagonal.
pub fn ridge_inv2(m: &Mat2) -> Option<Mat2> {
    let tr = m.trace();
    if !(tr.is_finite() && tr > 0.0) {
        return None;
    }
    let lam = RIDGE * tr;
    let r = m + Mat2::identity() * lam;
    let det = r[(0, 0)] * r[(1, 1)] - r[(0, 1)] * r[(1, 0)];
    if !(det.abs() > f64::MIN_POSITIVE) || !det.is_finite() {
        return None;
    }
    let inv = Mat2::new(r[(1, 1)], -r[(0, 1)], -r[(1, 0)], r[(0, 0)]) / det;
    Some(inv)
}

/// Solution of a ridge-stabilized 4x4 system together with a condition
/// diagnostic (ratio of largest to smallest absolute LU pivot).
pub(crate) fn ridge_solve4(gram: &Matrix4<f64>, rhs: &Vector4<f64>) -> Option<(Vector4<f64>, f64)> {
    let tr = gram.trace();
    if !(tr.is_finite() && tr > 0.0) {
        return None;
    }
    let g = gram + Matrix4::identity() * (RIDGE * tr);
    let lu = g.lu();
    let u = lu.u();
    let pivots = u.diagonal().map(f64::abs);
    let pmax = pivots.max();
    let pmin = pivots.min();
    if !(pmin > pmax * 1e-14) {
        return None;
    }
    let sol = lu.solve(rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol, pmax / pmin))
}

/// Symmetric part `(M + M^T) / 2`.
#[inline]
pub fn symmetrize(m: &Mat2) -> Mat2 {
    0.5 * (m + m.transpose())
}
