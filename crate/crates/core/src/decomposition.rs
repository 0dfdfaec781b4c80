//! Slice-initialized alternating subspace iteration.
//!
//! The pipeline has three stages:
//!
//! 1. [`slice_matrices_asymmetric`] or [`slice_matrices_symmetric`] build one
//!    `d × d` matrix per mode whose dominant eigenvectors are the factor
//!    columns in weight order.
//! 2. [`initialize`] runs matrix subspace iteration on each of them.
//! 3. [`asi_step`] refines the three bases jointly; [`recover_weights`]
//!    reads off the weights.
//!
//! [`asi_decompose`] chains them and records an [`IterationTrace`].

use std::path::Path;
use std::time::Instant;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    factor_error, haar_random_orthonormal, principal_angles, qr_orthonormalize, subspace_iteration, AngleTriple,
    IterationPolicy, OrthonormalBasis,
};
use crate::tensor::{Matrix, Tensor3, Vector};
use crate::trace::{IterationTrace, TraceRow};

/// Weights plus three factor bases: `Σ λᵢ aᵢ ⊗ bᵢ ⊗ cᵢ`.
///
/// Recovered models may carry negative weights; the sign records the parity
/// of column sign flips across the three factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    lambda: Vec<f64>,
    a: OrthonormalBasis,
    b: OrthonormalBasis,
    c: OrthonormalBasis,
}

#[derive(Serialize, Deserialize)]
struct CpModelFile {
    dims: [usize; 3],
    r: usize,
    lambda: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64], name: &str) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "factor {name} holds {} values, expected {rows} x {cols}",
            data.len()
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, data))
}

impl CpModel {
    pub fn new(lambda: Vec<f64>, a: OrthonormalBasis, b: OrthonormalBasis, c: OrthonormalBasis) -> Result<Self> {
        let r = lambda.len();
        if r == 0 {
            return Err(Error::InvalidArgument("a model needs at least one component".into()));
        }
        for (name, f) in [("A", &a), ("B", &b), ("C", &c)] {
            if f.rank() != r {
                return Err(Error::DimensionMismatch(format!(
                    "factor {name} has {} columns, lambda has {r} entries",
                    f.rank()
                )));
            }
        }
        if let Some(bad) = lambda.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite weight {bad}")));
        }
        Ok(Self { lambda, a, b, c })
    }

    /// Symmetric model `Σ λᵢ uᵢ ⊗ uᵢ ⊗ uᵢ`.
    pub fn symmetric(lambda: Vec<f64>, u: OrthonormalBasis) -> Result<Self> {
        Self::new(lambda, u.clone(), u.clone(), u)
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.dim(), self.b.dim(), self.c.dim()]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn a(&self) -> &OrthonormalBasis {
        &self.a
    }

    pub fn b(&self) -> &OrthonormalBasis {
        &self.b
    }

    pub fn c(&self) -> &OrthonormalBasis {
        &self.c
    }

    pub fn factors(&self) -> [&OrthonormalBasis; 3] {
        [&self.a, &self.b, &self.c]
    }

    pub fn is_symmetric(&self) -> bool {
        self.a == self.b && self.b == self.c
    }

    /// The leading `r` components.
    pub fn leading(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.rank() {
            return Err(Error::InvalidArgument(format!(
                "cannot take {r} leading components of a rank-{} model",
                self.rank()
            )));
        }
        Ok(Self {
            lambda: self.lambda[..r].to_vec(),
            a: self.a.leading(r),
            b: self.b.leading(r),
            c: self.c.leading(r),
        })
    }

    /// Dense tensor `Σ λᵢ aᵢ ⊗ bᵢ ⊗ cᵢ`.
    pub fn to_tensor(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.dims());
        for (i, &w) in self.lambda.iter().enumerate() {
            t.add_rank_one(w, self.a.column(i), self.b.column(i), self.c.column(i));
        }
        t
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CpModelFile {
            dims: self.dims(),
            r: self.rank(),
            lambda: self.lambda.clone(),
            a: row_major(self.a.matrix()),
            b: row_major(self.b.matrix()),
            c: row_major(self.c.matrix()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses and re-validates a model.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: CpModelFile = serde_json::from_str(text)?;
        if f.lambda.len() != f.r {
            return Err(Error::DimensionMismatch(format!(
                "r = {} but lambda has {} entries",
                f.r,
                f.lambda.len()
            )));
        }
        let a = OrthonormalBasis::new(from_row_major(f.dims[0], f.r, &f.a, "A")?)?;
        let b = OrthonormalBasis::new(from_row_major(f.dims[1], f.r, &f.b, "B")?)?;
        let c = OrthonormalBasis::new(from_row_major(f.dims[2], f.r, &f.c, "C")?)?;
        Self::new(f.lambda, a, b, c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Conditions worth surfacing without failing the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Recovered weights are not descending in magnitude.
    NonDescending { lambda: Vec<f64> },
    /// `λ_r − λ_{r+1}` is below `1e-10 · λ_1`.
    SpectralGap { r: usize, gap: f64 },
}

/// Tolerance, relative to the largest weight, for the descending check.
pub const DESCENDING_TOL: f64 = 1e-8;

/// Relative gap below which `SpectralGap` is raised.
pub const SPECTRAL_GAP_TOL: f64 = 1e-10;

/// Whether `|λ|` is descending within `DESCENDING_TOL`.
pub fn is_descending(lambda: &[f64]) -> bool {
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    lambda
        .windows(2)
        .all(|w| w[1].abs() - w[0].abs() <= DESCENDING_TOL * scale)
}

/// Checks the gap after the first `r` weights (`λ_{R+1} = 0`).
pub fn spectral_gap_warning(lambda: &[f64], r: usize) -> Option<Warning> {
    if r == 0 || r > lambda.len() {
        return None;
    }
    let next = lambda.get(r).copied().unwrap_or(0.0);
    let gap = lambda[r - 1] - next;
    let top = lambda[0].abs();
    if gap < SPECTRAL_GAP_TOL * top {
        warn!("spectral gap after component {r} is {gap:e}, below {SPECTRAL_GAP_TOL:e} x lambda_1");
        Some(Warning::SpectralGap { r, gap })
    } else {
        None
    }
}

/// Slice matrices for a general tensor:
/// `M_A = Σ_k S_k S_kᵀ`, `M_B = Σ_i T(e_i,I,I) T(e_i,I,I)ᵀ` and
/// `M_C = Σ_j T(I,e_j,I)ᵀ T(I,e_j,I)`, where `S_k = T(I,I,e_k)`.
///
/// These are the Gram matrices of the three unfoldings. For an orthogonal CP
/// tensor they equal `A Λ² Aᵀ`, `B Λ² Bᵀ` and `C Λ² Cᵀ`.
pub fn slice_matrices_asymmetric(t: &Tensor3) -> Result<[Matrix; 3]> {
    t.cubical_dim()?;
    Ok([t.mode_gram(1)?, t.mode_gram(2)?, t.mode_gram(3)?])
}

/// Slice traces `(v_A, v_B, v_C)` with `v_A[i] = tr T(e_i,I,I)`,
/// `v_B[j] = tr T(I,e_j,I)` and `v_C[k] = tr T(I,I,e_k)`.
pub fn slice_traces(t: &Tensor3) -> Result<[Vector; 3]> {
    let d = t.cubical_dim()?;
    let va = Vector::from_fn(d, |i, _| (0..d).map(|j| t.get(i, j, j)).sum());
    let vb = Vector::from_fn(d, |j, _| (0..d).map(|i| t.get(i, j, i)).sum());
    let vc = Vector::from_fn(d, |k, _| (0..d).map(|i| t.get(i, i, k)).sum());
    Ok([va, vb, vc])
}

/// Slice matrices for a symmetric tensor:
/// `M_A = T(I,I,v_C)`, `M_B = T(v_A,I,I)`, `M_C = T(I,v_B,I)ᵀ`.
///
/// For `Σ λᵢ uᵢ ⊗ uᵢ ⊗ uᵢ` each trace vector is `Σ λᵢ uᵢ` and each matrix
/// is `U Λ² Uᵀ`. Symmetry is not checked; see [`Tensor3::max_asymmetry`].
pub fn slice_matrices_symmetric(t: &Tensor3) -> Result<[Matrix; 3]> {
    let [va, vb, vc] = slice_traces(t)?;
    Ok([
        t.contract_mode3(vc.as_slice()),
        t.contract_mode1(va.as_slice()),
        t.contract_mode2(vb.as_slice()).transpose(),
    ])
}

/// Starting bases produced by the slice initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct InitTriple {
    pub q_a: OrthonormalBasis,
    pub q_b: OrthonormalBasis,
    pub q_c: OrthonormalBasis,
    /// Angles to the true leading subspaces, when the truth is known.
    pub oracle_angles: Option<[AngleTriple; 3]>,
    /// Matrix subspace iterations spent per mode.
    pub iterations: [usize; 3],
}

impl InitTriple {
    /// All three tangents below one.
    pub fn is_sufficient(&self) -> Option<bool> {
        self.oracle_angles.map(|a| a.iter().all(|x| x.tan < 1.0))
    }

    pub fn bases(&self) -> [&OrthonormalBasis; 3] {
        [&self.q_a, &self.q_b, &self.q_c]
    }
}

/// Which slice matrices the initialization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    #[default]
    Asymmetric,
    Symmetric,
}

fn check_rank(t: &Tensor3, r: usize) -> Result<usize> {
    let d = t.cubical_dim()?;
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!("target rank {r} outside 1..={d}")));
    }
    Ok(d)
}

/// Oracle angles between three bases and the leading `r` truth factors;
/// `None` if the truth has fewer than `r` components or other dimensions.
pub fn oracle_angles(bases: [&OrthonormalBasis; 3], truth: Option<&CpModel>) -> Option<[AngleTriple; 3]> {
    let truth = truth?;
    let r = bases[0].rank();
    if truth.rank() < r || truth.dims() != [bases[0].dim(), bases[1].dim(), bases[2].dim()] {
        return None;
    }
    let f = truth.factors();
    Some([0, 1, 2].map(|m| principal_angles(&f[m].leading(r), bases[m])))
}

/// Largest sign-aligned column error per mode against the leading truth.
pub fn oracle_errors(bases: [&OrthonormalBasis; 3], truth: Option<&CpModel>) -> Option<[f64; 3]> {
    let truth = truth?;
    let r = bases[0].rank();
    if truth.rank() < r || truth.dims() != [bases[0].dim(), bases[1].dim(), bases[2].dim()] {
        return None;
    }
    let f = truth.factors();
    Some([0, 1, 2].map(|m| factor_error(bases[m], &f[m].leading(r)).max_column))
}

/// Slice matrices followed by matrix subspace iteration from independent
/// Haar starts (drawn for modes A, B, C in that order).
pub fn initialize<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    kind: SliceKind,
    policy: IterationPolicy,
    rng: &mut R,
    truth: Option<&CpModel>,
) -> Result<InitTriple> {
    let d = check_rank(t, r)?;
    let mats = match kind {
        SliceKind::Asymmetric => slice_matrices_asymmetric(t)?,
        SliceKind::Symmetric => slice_matrices_symmetric(t)?,
    };
    let starts = [0, 1, 2].map(|_| haar_random_orthonormal(d, r, rng));
    let mut out = Vec::with_capacity(3);
    let mut iterations = [0usize; 3];
    for (m, (mat, q0)) in mats.iter().zip(&starts).enumerate() {
        let (q, iters) = subspace_iteration(mat, q0, policy)?;
        iterations[m] = iters;
        out.push(q);
    }
    let q_c = out.pop().expect("three bases");
    let q_b = out.pop().expect("three bases");
    let q_a = out.pop().expect("three bases");
    let oracle = oracle_angles([&q_a, &q_b, &q_c], truth);
    Ok(InitTriple {
        q_a,
        q_b,
        q_c,
        oracle_angles: oracle,
        iterations,
    })
}

/// One Gauss–Seidel sweep. Column `j` of the mode-A update is
/// `T(I, q_B_j, q_C_j)`; mode B then uses the fresh A basis and mode C uses
/// both fresh bases. Each update is orthonormalized by QR.
pub fn asi_step(
    t: &Tensor3,
    q_a: &OrthonormalBasis,
    q_b: &OrthonormalBasis,
    q_c: &OrthonormalBasis,
) -> Result<(OrthonormalBasis, OrthonormalBasis, OrthonormalBasis)> {
    let r = q_a.rank();
    if q_b.rank() != r || q_c.rank() != r {
        return Err(Error::DimensionMismatch("bases have different column counts".into()));
    }
    if t.dims() != [q_a.dim(), q_b.dim(), q_c.dim()] {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?} do not match basis dims {:?}",
            t.dims(),
            [q_a.dim(), q_b.dim(), q_c.dim()]
        )));
    }
    let [d1, d2, d3] = t.dims();

    let mut ya = Matrix::zeros(d1, r);
    for j in 0..r {
        ya.set_column(j, &t.contract_modes_23(q_b.column(j), q_c.column(j)));
    }
    let (na, _) = qr_orthonormalize(&ya)?;

    let mut yb = Matrix::zeros(d2, r);
    for j in 0..r {
        yb.set_column(j, &t.contract_modes_13(na.column(j), q_c.column(j)));
    }
    let (nb, _) = qr_orthonormalize(&yb)?;

    let mut yc = Matrix::zeros(d3, r);
    for j in 0..r {
        yc.set_column(j, &t.contract_modes_12(na.column(j), nb.column(j)));
    }
    let (nc, _) = qr_orthonormalize(&yc)?;
    Ok((na, nb, nc))
}

/// `λ*_i = T(a_i, b_i, c_i)`, without taking absolute values.
pub fn recover_weights(
    t: &Tensor3,
    q_a: &OrthonormalBasis,
    q_b: &OrthonormalBasis,
    q_c: &OrthonormalBasis,
) -> Vec<f64> {
    (0..q_a.rank())
        .map(|i| t.contract_all(q_a.column(i), q_b.column(i), q_c.column(i)))
        .collect()
}

/// Reconstruction `Σ λᵢ aᵢ ⊗ bᵢ ⊗ cᵢ` and its Frobenius distance to `t`.
pub fn reconstruct_and_residual(t: &Tensor3, model: &CpModel) -> Result<(Tensor3, f64)> {
    if t.dims() != model.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?}, model dims {:?}",
            t.dims(),
            model.dims()
        )));
    }
    let recon = model.to_tensor();
    let residual = (t - &recon).frobenius_norm();
    Ok((recon, residual))
}

/// Settings for [`asi_decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsiOptions {
    /// Number of sweeps `K`, at least 1.
    pub iters: usize,
    pub slice: SliceKind,
    pub init_policy: IterationPolicy,
    /// Stop once the largest principal-angle sine between successive iterates
    /// is below this value in all modes.
    pub early_stop: Option<f64>,
}

impl Default for AsiOptions {
    fn default() -> Self {
        Self {
            iters: 10,
            slice: SliceKind::Asymmetric,
            init_policy: IterationPolicy::default(),
            early_stop: None,
        }
    }
}

/// Result of [`asi_decompose`].
#[derive(Debug, Clone)]
pub struct AsiOutput {
    pub model: CpModel,
    pub trace: IterationTrace,
    pub init: InitTriple,
    /// Sweeps actually run.
    pub iterations: usize,
    pub warnings: Vec<Warning>,
}

pub(crate) fn trace_row(
    t: &Tensor3,
    bases: [&OrthonormalBasis; 3],
    iter: usize,
    truth: Option<&CpModel>,
    start: Instant,
) -> Result<TraceRow> {
    let lambda = recover_weights(t, bases[0], bases[1], bases[2]);
    let model = CpModel::new(lambda, bases[0].clone(), bases[1].clone(), bases[2].clone())?;
    let (_, residual) = reconstruct_and_residual(t, &model)?;
    Ok(TraceRow {
        iter,
        tan: oracle_angles(bases, truth).map(|a| a.map(|x| x.tan)),
        err: oracle_errors(bases, truth),
        residual,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Full pipeline: slice initialization, `K` sweeps, weight recovery.
///
/// With `truth` supplied, trace rows carry oracle tangents and column errors
/// against its leading `r` factors.
pub fn asi_decompose<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    opts: &AsiOptions,
    rng: &mut R,
    truth: Option<&CpModel>,
) -> Result<AsiOutput> {
    if opts.iters == 0 {
        return Err(Error::InvalidArgument("the number of sweeps must be at least 1".into()));
    }
    check_rank(t, r)?;
    let start = Instant::now();
    let init = initialize(t, r, opts.slice, opts.init_policy, rng, truth)?;
    let mut trace = IterationTrace::new();
    let (mut qa, mut qb, mut qc) = (init.q_a.clone(), init.q_b.clone(), init.q_c.clone());
    trace.push(trace_row(t, [&qa, &qb, &qc], 0, truth, start)?);
    let mut iterations = 0;
    for k in 1..=opts.iters {
        let (na, nb, nc) = asi_step(t, &qa, &qb, &qc)?;
        let settled = opts.early_stop.is_some_and(|tol| {
            [(&qa, &na), (&qb, &nb), (&qc, &nc)]
                .iter()
                .all(|(p, n)| principal_angles(p, n).sin < tol)
        });
        (qa, qb, qc) = (na, nb, nc);
        iterations = k;
        trace.push(trace_row(t, [&qa, &qb, &qc], k, truth, start)?);
        if settled {
            break;
        }
    }
    let lambda = recover_weights(t, &qa, &qb, &qc);
    let mut warnings = Vec::new();
    if !is_descending(&lambda) {
        warn!("recovered weights are not descending: {lambda:?}");
        warnings.push(Warning::NonDescending { lambda: lambda.clone() });
    }
    if let Some(w) = truth.and_then(|m| spectral_gap_warning(m.lambda(), r)) {
        warnings.push(w);
    }
    let model = CpModel::new(lambda, qa, qb, qc)?;
    Ok(AsiOutput {
        model,
        trace,
        init,
        iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{column_errors, sign_align};
    use crate::tensor::{khatri_rao, random_gaussian_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn model(d: usize, lambda: &[f64], symmetric: bool, g: &mut ChaCha8Rng) -> CpModel {
        let r = lambda.len();
        if symmetric {
            CpModel::symmetric(lambda.to_vec(), haar_random_orthonormal(d, r, g)).unwrap()
        } else {
            let a = haar_random_orthonormal(d, r, g);
            let b = haar_random_orthonormal(d, r, g);
            let c = haar_random_orthonormal(d, r, g);
            CpModel::new(lambda.to_vec(), a, b, c).unwrap()
        }
    }

    fn geometric(n: usize, ratio: f64) -> Vec<f64> {
        (0..n).map(|i| ratio.powi(i as i32)).collect()
    }

    fn squared_form(f: &OrthonormalBasis, lambda: &[f64]) -> Matrix {
        let sq = Vector::from_iterator(lambda.len(), lambda.iter().map(|l| l * l));
        f.matrix() * Matrix::from_diagonal(&sq) * f.matrix().transpose()
    }

    // Literal slice sums, independent of the unfolding Gram shortcut.
    fn slice_sums(t: &Tensor3) -> [Matrix; 3] {
        let d = t.dims()[0];
        let e = |i: usize| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        };
        let mut out = [Matrix::zeros(d, d), Matrix::zeros(d, d), Matrix::zeros(d, d)];
        for i in 0..d {
            let s3 = t.contract_mode3(&e(i));
            out[0] += &s3 * s3.transpose();
            let s1 = t.contract_mode1(&e(i));
            out[1] += &s1 * s1.transpose();
            let s2 = t.contract_mode2(&e(i));
            out[2] += s2.transpose() * &s2;
        }
        out
    }

    #[test]
    fn slice_matrices_of_rank_one() {
        let mut g = rng(1);
        let m = model(5, &[1.7], false, &mut g);
        let t = m.to_tensor();
        let mats = slice_matrices_asymmetric(&t).unwrap();
        for (mat, f) in mats.iter().zip(m.factors()) {
            let expected = squared_form(f, m.lambda());
            assert!((mat - expected).amax() < 1e-14);
        }
        let zero = slice_matrices_asymmetric(&Tensor3::zeros([3, 3, 3])).unwrap();
        assert!(zero.iter().all(|z| z.amax() == 0.0));
        assert!(matches!(
            slice_matrices_asymmetric(&Tensor3::zeros([3, 3, 2])),
            Err(Error::NotCubical(_))
        ));
    }

    #[test]
    fn slice_matrices_match_literal_sums_and_factored_form() {
        let mut g = rng(2);
        let t = random_gaussian_tensor([6, 6, 6], &mut g);
        let fast = slice_matrices_asymmetric(&t).unwrap();
        let slow = slice_sums(&t);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).amax() < 1e-12);
        }

        let m = model(8, &[3.0, 2.0, 1.5, 0.5], false, &mut g);
        let mats = slice_matrices_asymmetric(&m.to_tensor()).unwrap();
        for (mat, f) in mats.iter().zip(m.factors()) {
            let expected = squared_form(f, m.lambda());
            assert!((mat - &expected).norm() <= 1e-10 * expected.norm());
        }
    }

    #[test]
    fn symmetric_slice_matrices() {
        let mut g = rng(3);
        let u = haar_random_orthonormal(4, 1, &mut g);
        let t = CpModel::symmetric(vec![2.0], u.clone()).unwrap().to_tensor();
        let [va, vb, vc] = slice_traces(&t).unwrap();
        for v in [&va, &vb, &vc] {
            assert!((v - u.matrix().column(0) * 2.0).amax() < 1e-14);
        }
        let m = slice_matrices_symmetric(&t).unwrap();
        assert!((&m[0] - squared_form(&u, &[2.0])).amax() < 1e-14);

        let sym = model(7, &[4.0, 2.5, 1.0], true, &mut g);
        let t = sym.to_tensor();
        let [va, vb, vc] = slice_traces(&t).unwrap();
        assert!((&va - &vb).amax() < 1e-14 && (&vb - &vc).amax() < 1e-14);
        let expected = squared_form(sym.a(), sym.lambda());
        for mat in slice_matrices_symmetric(&t).unwrap() {
            assert!((mat - &expected).norm() <= 1e-10 * expected.norm());
        }
    }

    #[test]
    fn initialization_is_sufficient_and_deterministic() {
        for seed in 0..20 {
            let mut g = rng(seed);
            let m = model(20, &geometric(6, 0.7), false, &mut g);
            let t = m.to_tensor();
            let init = initialize(
                &t,
                3,
                SliceKind::Asymmetric,
                IterationPolicy::default(),
                &mut rng(100 + seed),
                Some(&m),
            )
            .unwrap();
            assert_eq!(init.is_sufficient(), Some(true));
            let again = initialize(
                &t,
                3,
                SliceKind::Asymmetric,
                IterationPolicy::default(),
                &mut rng(100 + seed),
                Some(&m),
            )
            .unwrap();
            assert_eq!(init, again);
        }
    }

    #[test]
    fn full_rank_initialization_has_zero_tangent() {
        let mut g = rng(4);
        let m = model(5, &[5.0, 4.0, 3.0, 2.0, 1.0], false, &mut g);
        let init = initialize(
            &m.to_tensor(),
            5,
            SliceKind::Asymmetric,
            IterationPolicy::Fixed { iters: 3 },
            &mut g,
            Some(&m),
        )
        .unwrap();
        assert!(init.oracle_angles.unwrap().iter().all(|a| a.tan == 0.0));
    }

    #[test]
    fn asi_step_fixes_true_factors() {
        let mut g = rng(5);
        let m = model(9, &[3.0, 2.0, 1.0, 0.5], false, &mut g);
        let t = m.to_tensor();
        let top = m.leading(3).unwrap();
        let (a, b, c) = asi_step(&t, top.a(), top.b(), top.c()).unwrap();
        for (new, old) in [(&a, top.a()), (&b, top.b()), (&c, top.c())] {
            assert!((sign_align(new, old).matrix() - old.matrix()).amax() < 1e-13);
            assert!(new.orthonormality_error() < 1e-12);
        }
    }

    #[test]
    fn asi_step_rank_one_is_exact_in_one_sweep() {
        let mut g = rng(6);
        let m = model(6, &[2.5], false, &mut g);
        let t = m.to_tensor();
        let qa = haar_random_orthonormal(6, 1, &mut g);
        let qb = haar_random_orthonormal(6, 1, &mut g);
        let qc = haar_random_orthonormal(6, 1, &mut g);
        let (a, b, c) = asi_step(&t, &qa, &qb, &qc).unwrap();
        for (new, truth) in [(&a, m.a()), (&b, m.b()), (&c, m.c())] {
            assert!(column_errors(new, truth)[0] < 1e-14);
        }
    }

    // The mode-A update via the unfolding and an explicit Khatri-Rao product.
    #[test]
    fn asi_step_matches_matricized_path() {
        let mut g = rng(7);
        for d in [3usize, 5, 8] {
            let t = random_gaussian_tensor([d, d, d], &mut g);
            let r = 2;
            let qa = haar_random_orthonormal(d, r, &mut g);
            let qb = haar_random_orthonormal(d, r, &mut g);
            let qc = haar_random_orthonormal(d, r, &mut g);
            let (na, nb, nc) = asi_step(&t, &qa, &qb, &qc).unwrap();
            let ea = qr_orthonormalize(&(t.matricize(1).unwrap() * khatri_rao(qc.matrix(), qb.matrix()).unwrap()))
                .unwrap()
                .0;
            let eb = qr_orthonormalize(&(t.matricize(2).unwrap() * khatri_rao(qc.matrix(), ea.matrix()).unwrap()))
                .unwrap()
                .0;
            let ec = qr_orthonormalize(&(t.matricize(3).unwrap() * khatri_rao(eb.matrix(), ea.matrix()).unwrap()))
                .unwrap()
                .0;
            assert!((na.matrix() - ea.matrix()).amax() < 1e-12);
            assert!((nb.matrix() - eb.matrix()).amax() < 1e-12);
            assert!((nc.matrix() - ec.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn matricization_matches_khatri_rao_form() {
        let mut g = rng(8);
        for _ in 0..10 {
            let d = 6;
            let m = model(d, &[4.0, 3.0, 2.0, 1.0], false, &mut g);
            let t = m.to_tensor();
            let lam = Matrix::from_diagonal(&Vector::from_vec(m.lambda().to_vec()));
            let (a, b, c) = (m.a().matrix(), m.b().matrix(), m.c().matrix());
            let forms = [
                a * &lam * khatri_rao(c, b).unwrap().transpose(),
                b * &lam * khatri_rao(c, a).unwrap().transpose(),
                c * &lam * khatri_rao(b, a).unwrap().transpose(),
            ];
            for (mode, f) in (1..=3).zip(forms) {
                assert!((t.matricize(mode).unwrap() - f).norm() <= 1e-12 * t.frobenius_norm());
            }
        }
    }

    #[test]
    fn weight_examples() {
        let mut g = rng(9);
        let m = model(5, &[3.0, 2.0, 1.0], false, &mut g);
        let t = m.to_tensor();
        let w = recover_weights(&t, m.a(), m.b(), m.c());
        for (x, y) in w.iter().zip([3.0, 2.0, 1.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        let mut flipped = m.a().matrix().clone();
        flipped.column_mut(0).neg_mut();
        let fa = OrthonormalBasis::new(flipped).unwrap();
        assert!((recover_weights(&t, &fa, m.b(), m.c())[0] + 3.0).abs() < 1e-14);
        let z = recover_weights(&Tensor3::zeros([5, 5, 5]), m.a(), m.b(), m.c());
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_examples() {
        let mut g = rng(10);
        let m = model(6, &[2.0, 1.0], false, &mut g);
        let t = m.to_tensor();
        let (_, res) = reconstruct_and_residual(&t, &m).unwrap();
        assert!(res <= 1e-12 * t.frobenius_norm());
        let (_, res) = reconstruct_and_residual(&t, &m.leading(1).unwrap()).unwrap();
        assert!((res - 1.0).abs() < 1e-12);
        assert!(m.leading(0).is_err());
    }

    #[test]
    fn decompose_recovers_leading_factors() {
        for seed in 0..10 {
            let mut g = rng(seed);
            let m = model(20, &geometric(6, 0.7), false, &mut g);
            let t = m.to_tensor();
            let opts = AsiOptions {
                iters: 8,
                ..Default::default()
            };
            let out = asi_decompose(&t, 3, &opts, &mut g, Some(&m)).unwrap();
            assert_eq!(out.trace.len(), 9);
            let err = out.trace.final_error().unwrap();
            assert!(err <= 1e-10, "seed {seed}: {err}");
            assert!(out.warnings.is_empty());
            for (x, y) in out.model.lambda().iter().zip(m.lambda()) {
                assert!((x.abs() - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decompose_full_rank_reconstructs() {
        let mut g = rng(11);
        let m = model(8, &[8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0], false, &mut g);
        let t = m.to_tensor();
        let out = asi_decompose(&t, 8, &AsiOptions::default(), &mut g, Some(&m)).unwrap();
        let rel = out.trace.last().unwrap().residual / t.frobenius_norm();
        assert!(rel <= 1e-10, "{rel}");
    }

    #[test]
    fn decompose_rejects_bad_arguments() {
        let t = Tensor3::zeros([4, 4, 4]);
        let opts = AsiOptions {
            iters: 0,
            ..Default::default()
        };
        assert!(matches!(
            asi_decompose(&t, 2, &opts, &mut rng(0), None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            asi_decompose(&t, 5, &AsiOptions::default(), &mut rng(0), None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rank_above_true_rank_is_reported() {
        let mut g = rng(12);
        let m = model(8, &[3.0, 2.0], false, &mut g);
        match asi_decompose(&m.to_tensor(), 4, &AsiOptions::default(), &mut g, None) {
            Err(Error::RankDeficient { rank, cols }) => assert_eq!((rank, cols), (2, 4)),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn early_stop_truncates_trace() {
        let mut g = rng(13);
        let m = model(10, &geometric(4, 0.5), false, &mut g);
        let opts = AsiOptions {
            iters: 50,
            early_stop: Some(1e-13),
            ..Default::default()
        };
        let out = asi_decompose(&m.to_tensor(), 2, &opts, &mut g, Some(&m)).unwrap();
        assert!(out.iterations < 50);
        assert_eq!(out.trace.len(), out.iterations + 1);
    }

    #[test]
    fn model_json_round_trip() {
        let mut g = rng(14);
        let m = model(4, &[2.0, 1.0], false, &mut g);
        let back = CpModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let text = m.to_json().unwrap().replace("\"r\": 2", "\"r\": 3");
        assert!(CpModel::from_json(&text).is_err());
    }

    #[test]
    fn descending_and_gap_checks() {
        assert!(is_descending(&[3.0, -2.0, 1.0]));
        assert!(!is_descending(&[1.0, 2.0]));
        assert!(spectral_gap_warning(&[1.0, 0.5], 1).is_none());
        assert!(matches!(
            spectral_gap_warning(&[1.0, 1.0, 0.5], 1),
            Some(Warning::SpectralGap { r: 1, .. })
        ));
        assert!(spectral_gap_warning(&[1.0, 0.5], 2).is_none());
    }
}
