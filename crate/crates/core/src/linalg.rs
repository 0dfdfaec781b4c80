//! Orthonormal bases, principal angles between subspaces, and matrix
//! subspace iteration.

use nalgebra::SVD;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Largest allowed `‖QᵀQ − I‖_F` for a basis.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// Relative threshold on `|R_jj| / ‖M‖_F` below which a column counts as
/// dependent.
pub const RANK_TOL: f64 = 1e-12;

/// A `d × r` matrix with orthonormal columns, `d ≥ r ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    matrix: Matrix,
}

impl OrthonormalBasis {
    /// Validates shape and orthonormality.
    pub fn new(matrix: Matrix) -> Result<Self> {
        let (d, r) = matrix.shape();
        if r == 0 || d < r {
            return Err(Error::DimensionMismatch(format!(
                "basis must be d x r with d >= r >= 1, got {d} x {r}"
            )));
        }
        let err = orthonormality_error(&matrix);
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal: |QtQ - I|_F = {err:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: Matrix) -> Self {
        Self { matrix }
    }

    /// `d × d` identity basis.
    pub fn identity(d: usize) -> Self {
        Self {
            matrix: Matrix::identity(d, d),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of columns `r`.
    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.matrix.as_slice()[i * d..(i + 1) * d]
    }

    /// The leading `cols` columns.
    pub fn leading(&self, cols: usize) -> Self {
        assert!(cols >= 1 && cols <= self.rank(), "column count out of range");
        Self {
            matrix: self.matrix.columns(0, cols).into_owned(),
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.matrix)
    }
}

pub fn orthonormality_error(m: &Matrix) -> f64 {
    let gram = m.transpose() * m;
    (gram - Matrix::identity(m.ncols(), m.ncols())).norm()
}

/// Cosine, sine and tangent of the largest principal angle between two
/// subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleTriple {
    pub cos: f64,
    pub sin: f64,
    pub tan: f64,
}

impl AngleTriple {
    pub const ALIGNED: AngleTriple = AngleTriple {
        cos: 1.0,
        sin: 0.0,
        tan: 0.0,
    };
}

/// Thin QR with the nonnegative-diagonal convention, returning `(Q, R)`.
///
/// Fails with `RankDeficient` when some `|R_jj|` is at most
/// `RANK_TOL · ‖M‖_F`.
pub fn qr_orthonormalize(m: &Matrix) -> Result<(OrthonormalBasis, Matrix)> {
    let (d, r) = m.shape();
    if r == 0 || d < r {
        return Err(Error::DimensionMismatch(format!(
            "QR needs a d x r matrix with d >= r >= 1, got {d} x {r}"
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let scale = m.norm();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut rf = qr.r();
    let tol = RANK_TOL * scale;
    let rank = (0..r).filter(|&j| rf[(j, j)].abs() > tol).count();
    if rank < r {
        return Err(Error::RankDeficient { rank, cols: r });
    }
    for j in 0..r {
        if rf[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            rf.row_mut(j).neg_mut();
        }
    }
    Ok((OrthonormalBasis::new_unchecked(q), rf))
}

/// Haar-distributed `d × r` orthonormal basis: QR of a standard Gaussian
/// matrix.
pub fn haar_random_orthonormal<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> OrthonormalBasis {
    assert!(d >= r && r >= 1, "need d >= r >= 1, got d = {d}, r = {r}");
    loop {
        let g = Matrix::from_fn(d, r, |_, _| StandardNormal.sample(rng));
        if let Ok((q, _)) = qr_orthonormalize(&g) {
            return q;
        }
    }
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `σ_max / σ_min`; `+∞` when the smallest singular value is zero.
pub fn condition_number(m: &Matrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => f64::NAN,
    }
}

/// Largest principal angle between `span(U)` and `span(Q)`.
///
/// The cosine is `σ_min(UᵀQ)` and the sine is `σ_max(Q − UUᵀQ)`, the
/// projector form of the complement product.
pub fn principal_angles(u: &OrthonormalBasis, q: &OrthonormalBasis) -> AngleTriple {
    assert_eq!(
        u.matrix.shape(),
        q.matrix.shape(),
        "principal angles need equally shaped bases"
    );
    if u.rank() == u.dim() {
        return AngleTriple::ALIGNED;
    }
    let cross = u.matrix.transpose() * &q.matrix;
    let cos = singular_values(&cross).last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    let residual = &q.matrix - &u.matrix * &cross;
    let sin = spectral_norm(&residual).clamp(0.0, 1.0);
    let tan = if cos > 0.0 { sin / cos } else { f64::INFINITY };
    AngleTriple { cos, sin, tan }
}

/// Flips columns of `q` so that `q_iᵀu_i ≥ 0`.
pub fn sign_align(q: &OrthonormalBasis, u: &OrthonormalBasis) -> OrthonormalBasis {
    assert_eq!(q.matrix.shape(), u.matrix.shape(), "sign alignment needs equal shapes");
    let mut out = q.matrix.clone();
    for j in 0..out.ncols() {
        if out.column(j).dot(&u.matrix.column(j)) < 0.0 {
            out.column_mut(j).neg_mut();
        }
    }
    OrthonormalBasis::new_unchecked(out)
}

/// Per-column distances `‖q_i − u_i‖₂` after sign alignment.
pub fn column_errors(q: &OrthonormalBasis, u: &OrthonormalBasis) -> Vec<f64> {
    let aligned = sign_align(q, u);
    (0..q.rank())
        .map(|j| (aligned.matrix.column(j) - u.matrix.column(j)).norm())
        .collect()
}

/// Column error summary used by the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorError {
    /// Largest per-column 2-norm error.
    pub max_column: f64,
    /// Frobenius norm of the aligned difference.
    pub frobenius: f64,
}

pub fn factor_error(q: &OrthonormalBasis, u: &OrthonormalBasis) -> FactorError {
    let cols = column_errors(q, u);
    FactorError {
        max_column: cols.iter().copied().fold(0.0, f64::max),
        frobenius: cols.iter().map(|e| e * e).sum::<f64>().sqrt(),
    }
}

/// How many matrix subspace iterations to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationPolicy {
    /// Exactly this many iterations.
    Fixed { iters: usize },
    /// Iterate until the largest per-column drift between successive
    /// iterates, `max_i sqrt(1 − (q_iᵀp_i)²)`, is at most `threshold`, with a
    /// hard cap of `max_iters`. At least one iteration always runs.
    Adaptive { threshold: f64, max_iters: usize },
}

impl Default for IterationPolicy {
    fn default() -> Self {
        IterationPolicy::Adaptive {
            threshold: 1e-6,
            max_iters: 200,
        }
    }
}

/// Runs `J` steps of `Q ← qr(M Q)` from `q0`.
pub fn matrix_subspace_iteration(
    m: &Matrix,
    r: usize,
    iters: usize,
    q0: &OrthonormalBasis,
) -> Result<OrthonormalBasis> {
    if q0.rank() != r {
        return Err(Error::DimensionMismatch(format!(
            "starting basis has {} columns, expected {r}",
            q0.rank()
        )));
    }
    subspace_iteration(m, q0, IterationPolicy::Fixed { iters }).map(|(q, _)| q)
}

/// Subspace iteration under a policy; returns the final basis and the number
/// of iterations performed.
pub fn subspace_iteration(
    m: &Matrix,
    q0: &OrthonormalBasis,
    policy: IterationPolicy,
) -> Result<(OrthonormalBasis, usize)> {
    let d = q0.dim();
    if m.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "iteration matrix is {} x {}, basis dimension is {d}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut q = q0.clone();
    match policy {
        IterationPolicy::Fixed { iters } => {
            for _ in 0..iters {
                q = qr_orthonormalize(&(m * q.matrix()))?.0;
            }
            Ok((q, iters))
        }
        IterationPolicy::Adaptive { threshold, max_iters } => {
            let cap = max_iters.max(1);
            for it in 1..=cap {
                let next = qr_orthonormalize(&(m * q.matrix()))?.0;
                let drift = column_drift(&q, &next);
                q = next;
                if drift <= threshold {
                    return Ok((q, it));
                }
            }
            Ok((q, cap))
        }
    }
}

fn column_drift(prev: &OrthonormalBasis, next: &OrthonormalBasis) -> f64 {
    (0..prev.rank())
        .map(|j| {
            let c = prev.matrix.column(j).dot(&next.matrix.column(j));
            (1.0 - c * c).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}
