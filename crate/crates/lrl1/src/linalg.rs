//! Dense kernels: decompositions, least-norm solves, kernel bases and
//! Grassmannian projections.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Anything that crosses a file or
//! text boundary is flattened in row-major order via [`to_row_major`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type Mat = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("decomposition failed to converge")]
    DecompositionFailed,
    #[error("singular system (sigma_min = {sigma_min:e})")]
    Singular { sigma_min: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Builds a matrix from row-major data, rejecting NaN/Inf.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Mat, LinalgError> {
    if data.len() != rows * cols {
        return Err(LinalgError::Dimension(format!(
            "{} entries for a {rows}x{cols} matrix",
            data.len()
        )));
    }
    if !data.iter().all(|x| x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(Mat::from_row_slice(rows, cols, data))
}

pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Symmetric part (M + Mᵀ)/2.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Sum with a fixed pairwise tree, so the result only depends on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Mat,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    pub v: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.transpose()
    }
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd(m: &Mat) -> Result<SvdResult, LinalgError> {
    if !is_finite(m) {
        return Err(LinalgError::NonFinite);
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            u: Mat::zeros(rows, 0),
            s: vec![],
            v: Mat::zeros(cols, 0),
        });
    }
    let dec = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(LinalgError::DecompositionFailed)?;
    let (u, vt) = match (dec.u, dec.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LinalgError::DecompositionFailed),
    };
    let sv = dec.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let n = order.len();
    let mut us = Mat::zeros(rows, n);
    let mut vs = Mat::zeros(cols, n);
    let mut s = Vec::with_capacity(n);
    for (j, &o) in order.iter().enumerate() {
        us.set_column(j, &u.column(o));
        vs.set_column(j, &vt.row(o).transpose());
        s.push(sv[o].max(0.0));
    }
    Ok(SvdResult { u: us, s, v: vs })
}

/// Singular values at or below this are treated as zero.
pub fn rank_tolerance(rows: usize, cols: usize, sigma1: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma1
}

pub fn numeric_rank(m: &Mat) -> Result<usize, LinalgError> {
    let dec = svd(m)?;
    let tol = rank_tolerance(m.nrows(), m.ncols(), dec.s.first().copied().unwrap_or(0.0));
    Ok(dec.s.iter().filter(|&&s| s > tol).count())
}

/// Truncated SVD keeping singular values strictly above `tau` (and above the
/// numeric rank tolerance). Returns the truncation and its rank.
pub fn threshold_svd(m: &Mat, tau: f64) -> Result<(Mat, usize), LinalgError> {
    let dec = svd(m)?;
    let tol = rank_tolerance(m.nrows(), m.ncols(), dec.s.first().copied().unwrap_or(0.0));
    let cut = tau.max(tol);
    let keep = dec.s.iter().filter(|&&s| s > cut).count();
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for j in 0..keep {
        out += dec.u.column(j) * dec.v.column(j).transpose() * dec.s[j];
    }
    Ok((out, keep))
}

/// Orthonormal basis of ker(M), one column per null direction.
pub fn kernel_basis(m: &Mat) -> Result<Mat, LinalgError> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    // Pad to at least square so the thin SVD returns the full right factor.
    let padded = if rows < cols {
        let mut p = Mat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let dec = svd(&padded)?;
    let sigma1 = dec.s.first().copied().unwrap_or(0.0);
    let rank = if sigma1 == 0.0 {
        0
    } else {
        let tol = rank_tolerance(rows, cols, sigma1);
        dec.s.iter().filter(|&&s| s > tol).count()
    };
    Ok(dec.v.columns(rank, cols - rank).into_owned())
}

/// Minimum-norm solution of A u = b for a full-row-rank wide A, via the SVD
/// pseudo-inverse. Also returns σ_min(A).
pub fn least_norm_solution(a: &Mat, b: &[f64]) -> Result<(Vec<f64>, f64), LinalgError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(LinalgError::Dimension(format!("rhs length {} vs {m} rows", b.len())));
    }
    if m > n {
        return Err(LinalgError::Dimension(format!("{m} equations exceed {n} unknowns")));
    }
    if m == 0 {
        return Ok((vec![0.0; n], f64::INFINITY));
    }
    let dec = svd(a)?;
    let sigma_min = dec.s[m - 1];
    if sigma_min <= rank_tolerance(m, n, dec.s[0]) || sigma_min == 0.0 {
        return Err(LinalgError::Singular { sigma_min });
    }
    let bv = nalgebra::DVector::from_column_slice(b);
    let mut c = dec.u.tr_mul(&bv);
    for (ci, si) in c.iter_mut().zip(&dec.s) {
        *ci /= si;
    }
    let u = &dec.v * c;
    Ok((u.as_slice().to_vec(), sigma_min))
}

/// Maximises ⟨A, P⟩ over rank-p orthogonal projections P: the sum of the p
/// largest eigenvalues and the matching eigenvectors.
pub fn top_p_projection(a: &Mat, p: usize) -> Result<(f64, Mat), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::Dimension(format!("{}x{} is not square", n, a.ncols())));
    }
    if p > n {
        return Err(LinalgError::Dimension(format!("p = {p} exceeds n = {n}")));
    }
    if !is_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-10 * scale {
        return Err(LinalgError::NotSymmetric);
    }
    let eig = SymmetricEigen::try_new(sym(a), f64::EPSILON, 0)
        .ok_or(LinalgError::DecompositionFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut q = Mat::zeros(n, p);
    let mut value = 0.0;
    for (j, &o) in order.iter().take(p).enumerate() {
        q.set_column(j, &eig.eigenvectors.column(o));
        value += eig.eigenvalues[o];
    }
    Ok((value, q))
}

/// I.i.d. standard normal entries, drawn in row-major order.
pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_row_slice(rows, cols, &data)
}

/// Haar-distributed matrix with orthonormal rows (rows ≤ cols) or columns.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    let (n, p) = (rows.max(cols), rows.min(cols));
    let g = random_gaussian(n, p, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows <= cols {
        q.transpose()
    } else {
        q
    }
}

/// Spectral norm.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).map(|d| d.s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
}
