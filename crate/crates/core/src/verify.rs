//! Numerical checks of the convergence and perturbation inequalities that
//! the algorithms rely on. Each check runs on random instances and counts
//! violations; none of them proves anything, but a violation flags a bug or
//! a broken assumption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::{asi_decompose, slice_matrices_asymmetric, slice_matrices_symmetric, AsiOptions, CpModel};
use crate::error::Result;
use crate::linalg::{haar_random_orthonormal, matrix_subspace_iteration, principal_angles, spectral_norm};
use crate::synthesis::{make_noise, random_cp_model, LambdaSpec, NoiseKind};
use crate::tensor::{khatri_rao, op_norm_estimate, Matrix, Tensor3, Vector};
use crate::trace::IterationTrace;

/// Result of one check over many instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub instances: usize,
    /// Individual inequalities evaluated.
    pub comparisons: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen, slack excluded; negative when every
    /// inequality held strictly.
    pub worst_margin: f64,
}

impl CheckOutcome {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            comparisons: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
        }
    }

    /// Records `lhs ≤ rhs + slack`.
    pub fn record(&mut self, lhs: f64, rhs: f64, slack: f64) {
        self.comparisons += 1;
        let margin = lhs - rhs;
        if margin.is_nan() || margin > self.worst_margin {
            self.worst_margin = margin;
        }
        if !(lhs <= rhs + slack) {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.comparisons > 0
    }

    pub fn merge(&mut self, other: &CheckOutcome) {
        self.instances += other.instances;
        self.comparisons += other.comparisons;
        self.violations += other.violations;
        if other.worst_margin > self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
    }
}

/// Per-sweep contraction of the oracle tangents under the Gauss–Seidel
/// update order:
///
/// ```text
/// tan_A(k+1) ≤ ρ · tan_B(k)   · tan_C(k)
/// tan_B(k+1) ≤ ρ · tan_A(k+1) · tan_C(k)
/// tan_C(k+1) ≤ ρ · tan_A(k+1) · tan_B(k+1)
/// ```
///
/// with `ρ = λ_{r+1} / λ_r`.
pub fn check_tangent_recursion(out: &mut CheckOutcome, trace: &IterationTrace, rho: f64, slack: f64) {
    out.instances += 1;
    for pair in trace.rows.windows(2) {
        let (Some(p), Some(n)) = (pair[0].tan, pair[1].tan) else {
            continue;
        };
        out.record(n[0], rho * p[1] * p[2], slack);
        out.record(n[1], rho * n[0] * p[2], slack);
        out.record(n[2], rho * n[0] * n[1], slack);
    }
}

/// At the last row, with mode tangent `ε`, every column error satisfies
/// `‖q_i − a_i‖² ≤ 2ε`. The trace carries the largest column error, which
/// is the binding case.
pub fn check_column_bound(out: &mut CheckOutcome, trace: &IterationTrace, slack: f64) {
    out.instances += 1;
    let Some(last) = trace.last() else { return };
    let (Some(tan), Some(err)) = (last.tan, last.err) else {
        return;
    };
    for m in 0..3 {
        if tan[m] < 1.0 {
            out.record(err[m] * err[m], 2.0 * tan[m], slack);
        }
    }
}

fn squared_form(f: &Matrix, lambda: &[f64]) -> Matrix {
    let sq = Vector::from_iterator(lambda.len(), lambda.iter().map(|l| l * l));
    f * Matrix::from_diagonal(&sq) * f.transpose()
}

/// Slice matrices of exact CP tensors against `F Λ² Fᵀ`, in relative
/// Frobenius error. Dimensions are drawn from `4..=max_dim`.
pub fn check_slice_identities<R: Rng + ?Sized>(
    instances: usize,
    max_dim: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("slice identities");
    for _ in 0..instances {
        let d = rng.random_range(4..=max_dim);
        let rank = rng.random_range(1..=d);
        let spec = LambdaSpec::Linear {
            scale: rng.random_range(0.5..2.0),
        };
        let asym = random_cp_model(d, rank, &spec, false, rng)?;
        let mats = slice_matrices_asymmetric(&asym.to_tensor())?;
        for (m, f) in mats.iter().zip(asym.factors()) {
            let expected = squared_form(f.matrix(), asym.lambda());
            out.record((m - &expected).norm() / expected.norm(), 0.0, tol);
        }
        let sym = random_cp_model(d, rank, &spec, true, rng)?;
        let expected = squared_form(sym.a().matrix(), sym.lambda());
        for m in slice_matrices_symmetric(&sym.to_tensor())? {
            out.record((m - &expected).norm() / expected.norm(), 0.0, tol);
        }
        out.instances += 1;
    }
    Ok(out)
}

/// Matrix subspace iteration on random PSD matrices with known spectra: the
/// tangent shrinks per step by at most `λ_{r+1}/λ_r`, checked while the
/// tangent is in `[floor, 1)`.
pub fn check_subspace_rate<R: Rng + ?Sized>(
    instances: usize,
    max_dim: usize,
    steps: usize,
    slack: f64,
    floor: f64,
    rng: &mut R,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("matrix subspace iteration rate");
    for _ in 0..instances {
        let d = rng.random_range(4..=max_dim);
        let r = rng.random_range(1..d);
        let v = haar_random_orthonormal(d, d, rng);
        let mut spectrum: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..10.0)).collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        let rho = spectrum[r] / spectrum[r - 1];
        let m = v.matrix() * Matrix::from_diagonal(&Vector::from_vec(spectrum)) * v.matrix().transpose();
        let target = v.leading(r);
        let mut q = haar_random_orthonormal(d, r, rng);
        let mut prev = principal_angles(&target, &q).tan;
        for _ in 0..steps {
            q = matrix_subspace_iteration(&m, r, 1, &q)?;
            let t = principal_angles(&target, &q).tan;
            if prev < 1.0 && prev >= floor {
                out.record(t / prev, rho, slack);
            }
            prev = t;
        }
        out.instances += 1;
    }
    Ok(out)
}

/// `‖M̂ − M‖_op ≤ 2‖λ‖‖Φ‖_op + d‖Φ‖²_op` for each asymmetric slice matrix,
/// with rank-one noise so that `‖Φ‖_op` is exact.
pub fn check_init_perturbation<R: Rng + ?Sized>(instances: usize, max_dim: usize, rng: &mut R) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("slice initialization perturbation");
    for _ in 0..instances {
        let d = rng.random_range(4..=max_dim);
        let rank = rng.random_range(1..=d);
        let model = random_cp_model(d, rank, &LambdaSpec::default(), false, rng)?;
        let sigma = rng.random_range(1e-3..1.0) * model.lambda()[0];
        let noise = make_noise(d, NoiseKind::Rank1, sigma, rng)?;
        let t = model.to_tensor();
        let clean = slice_matrices_asymmetric(&t)?;
        let noisy = slice_matrices_asymmetric(&(&t + &noise))?;
        let norm = model.lambda().iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = 2.0 * norm * sigma + d as f64 * sigma * sigma;
        for (a, b) in noisy.iter().zip(&clean) {
            out.record(spectral_norm(&(a - b)), bound, 1e-10 * bound);
        }
        out.instances += 1;
    }
    Ok(out)
}

/// `‖A_rᵀ Φ₍₁₎ (Q_C ⊙ Q_B)‖_op ≤ √r ‖Φ‖_op` for Haar `Q_B, Q_C`. Half the
/// instances use rank-one noise, the rest Gaussian noise whose norm comes
/// from [`op_norm_estimate`].
pub fn check_sweep_perturbation<R: Rng + ?Sized>(
    instances: usize,
    max_dim: usize,
    slack: f64,
    rng: &mut R,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("sweep perturbation");
    for i in 0..instances {
        let d = rng.random_range(4..=max_dim);
        let r = rng.random_range(1..=d);
        let a = haar_random_orthonormal(d, r, rng);
        let qb = haar_random_orthonormal(d, r, rng);
        let qc = haar_random_orthonormal(d, r, rng);
        let (noise, norm): (Tensor3, f64) = if i % 2 == 0 {
            let sigma = rng.random_range(0.01..1.0);
            (make_noise(d, NoiseKind::Rank1, sigma, rng)?, sigma)
        } else {
            let n = make_noise(d, NoiseKind::Gaussian, 1.0, rng)?;
            let est = op_norm_estimate(&n, 200, 10, rng);
            (n, est)
        };
        let prod = a.matrix().transpose() * noise.matricize(1)? * khatri_rao(qc.matrix(), qb.matrix())?;
        out.record(spectral_norm(&prod), (r as f64).sqrt() * norm, slack);
        out.instances += 1;
    }
    Ok(out)
}

/// Noiseless s-ASI runs checked against the tangent recursion and the
/// column bound. Returns both outcomes.
pub fn check_asi_convergence(
    d: usize,
    rank: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<(CheckOutcome, CheckOutcome)> {
    let mut rec = CheckOutcome::new("tangent recursion");
    let mut col = CheckOutcome::new("column bound");
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let model: CpModel = random_cp_model(d, rank, &LambdaSpec::default(), false, &mut rng)?;
        let rho = model.lambda().get(r).copied().unwrap_or(0.0) / model.lambda()[r - 1];
        let out = asi_decompose(&model.to_tensor(), r, &AsiOptions::default(), &mut rng, Some(&model))?;
        check_tangent_recursion(&mut rec, &out.trace, rho, 1e-10);
        check_column_bound(&mut col, &out.trace, 1e-10);
    }
    Ok((rec, col))
}

/// The full suite at a size that runs in seconds.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rec, col) = check_asi_convergence(20, 6, 3, 20, seed)?;
    Ok(vec![
        rec,
        col,
        check_slice_identities(50, 30, 1e-10, &mut rng)?,
        check_subspace_rate(50, 30, 200, 1e-8, 1e-6, &mut rng)?,
        check_init_perturbation(50, 30, &mut rng)?,
        check_sweep_perturbation(50, 30, 1e-8, &mut rng)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceRow;

    #[test]
    fn recorder_counts_violations() {
        let mut c = CheckOutcome::new("x");
        c.record(1.0, 2.0, 0.0);
        c.record(2.0, 1.0, 0.5);
        assert_eq!((c.comparisons, c.violations), (2, 1));
        assert_eq!(c.worst_margin, 1.0);
        assert!(!c.passed());
        let mut nan = CheckOutcome::new("nan");
        nan.record(f64::NAN, 1.0, 0.0);
        assert_eq!(nan.violations, 1);
    }

    #[test]
    fn recursion_check_reads_gauss_seidel_indices() {
        let row = |iter, tan: [f64; 3]| TraceRow {
            iter,
            tan: Some(tan),
            err: None,
            residual: 0.0,
            wall_ms: 0.0,
        };
        let trace = IterationTrace {
            rows: vec![row(0, [0.5, 0.5, 0.5]), row(1, [0.1, 0.02, 0.001])],
        };
        let mut c = CheckOutcome::new("t");
        // rhs: 0.5·0.25 = 0.125, 0.5·0.1·0.5 = 0.025, 0.5·0.1·0.02 = 0.001
        check_tangent_recursion(&mut c, &trace, 0.5, 0.0);
        assert_eq!((c.comparisons, c.violations), (3, 0));
    }

    #[test]
    fn quick_suite_passes() {
        for outcome in run_all(1).unwrap() {
            assert!(outcome.passed(), "{outcome:?}");
        }
    }
}
