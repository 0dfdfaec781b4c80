//! Ground-truth models, noise tensors, and the admissible noise level.

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{spectral_gap_warning, CpModel};
use crate::error::{Error, Result};
use crate::linalg::haar_random_orthonormal;
use crate::tensor::{op_norm_estimate, outer3, random_gaussian_tensor, random_unit, Tensor3, PERMUTATIONS};

/// How the weights of a synthetic model are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSpec {
    /// Given values, which must be positive and strictly descending.
    Explicit { values: Vec<f64> },
    /// `λ_i = scale · (R − i + 1)`.
    Linear {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `λ_i = scale · ratio^(i−1)` with `0 < ratio < 1`.
    Geometric {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Linear { scale: 1.0 }
    }
}

impl LambdaSpec {
    /// The `rank` weights, validated.
    pub fn weights(&self, rank: usize) -> Result<Vec<f64>> {
        let values = match self {
            LambdaSpec::Explicit { values } => {
                if values.len() != rank {
                    return Err(Error::DimensionMismatch(format!(
                        "{} explicit weights for rank {rank}",
                        values.len()
                    )));
                }
                values.clone()
            }
            LambdaSpec::Linear { scale } => (0..rank).map(|i| scale * (rank - i) as f64).collect(),
            LambdaSpec::Geometric { ratio, scale } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "geometric ratio must lie in (0, 1), got {ratio}"
                    )));
                }
                (0..rank).map(|i| scale * ratio.powi(i as i32)).collect()
            }
        };
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive: {values:?}")));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "weights must be strictly descending: {values:?}"
            )));
        }
        Ok(values)
    }
}

/// Random orthogonal CP model with Haar factors, drawn in the order A, B, C
/// (a single basis when `symmetric`).
pub fn random_cp_model<R: Rng + ?Sized>(
    d: usize,
    rank: usize,
    spec: &LambdaSpec,
    symmetric: bool,
    rng: &mut R,
) -> Result<CpModel> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={d}")));
    }
    let lambda = spec.weights(rank)?;
    for r in 1..rank {
        let _ = spectral_gap_warning(&lambda, r);
    }
    if symmetric {
        CpModel::symmetric(lambda, haar_random_orthonormal(d, rank, rng))
    } else {
        let a = haar_random_orthonormal(d, rank, rng);
        let b = haar_random_orthonormal(d, rank, rng);
        let c = haar_random_orthonormal(d, rank, rng);
        CpModel::new(lambda, a, b, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `σ x ⊗ y ⊗ z` with uniform unit vectors; operator norm exactly `σ`.
    #[default]
    Rank1,
    /// I.i.d. Gaussian entries rescaled to the estimated operator norm.
    Gaussian,
}

/// Noise tensor of shape `d × d × d` with operator norm `target`.
///
/// The Gaussian kind relies on [`op_norm_estimate`], so its norm is only as
/// accurate as that estimate.
pub fn make_noise<R: Rng + ?Sized>(d: usize, kind: NoiseKind, target: f64, rng: &mut R) -> Result<Tensor3> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(Tensor3::zeros([d, d, d]));
    }
    match kind {
        NoiseKind::Rank1 => {
            let x = random_unit(d, rng);
            let y = random_unit(d, rng);
            let z = random_unit(d, rng);
            Ok(outer3(x.as_slice(), y.as_slice(), z.as_slice()).scaled(target))
        }
        NoiseKind::Gaussian => {
            let raw = random_gaussian_tensor([d, d, d], rng);
            let est = op_norm_estimate(&raw, 200, 10, rng);
            info!("gaussian noise: raw operator norm estimate {est:e}, rescaling to {target:e}");
            Ok(raw.scaled(target / est))
        }
    }
}

/// Symmetric noise tensor with operator norm `target`: `σ x ⊗ x ⊗ x` for the
/// rank-one kind, or the permutation average of Gaussian entries rescaled to
/// the estimated norm.
pub fn make_symmetric_noise<R: Rng + ?Sized>(d: usize, kind: NoiseKind, target: f64, rng: &mut R) -> Result<Tensor3> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(Tensor3::zeros([d, d, d]));
    }
    match kind {
        NoiseKind::Rank1 => {
            let x = random_unit(d, rng);
            Ok(outer3(x.as_slice(), x.as_slice(), x.as_slice()).scaled(target))
        }
        NoiseKind::Gaussian => {
            let raw = random_gaussian_tensor([d, d, d], rng);
            let mut sym = Tensor3::zeros([d, d, d]);
            for perm in PERMUTATIONS {
                sym = &sym + &raw.permuted(perm);
            }
            let est = op_norm_estimate(&sym, 200, 10, rng);
            info!("symmetric gaussian noise: raw operator norm estimate {est:e}, rescaling to {target:e}");
            Ok(sym.scaled(target / est))
        }
    }
}

/// The three terms of the noise ceiling and their minimum, for target rank
/// `r`:
///
/// ```text
/// term_eps  = √2/8 · (λ_r − λ_{r+1}) · ε / √r
/// term_spec = δ₀ · (λ_r² − λ_{r+1}²) / (8‖λ‖)
/// term_dim  = δ₀ · (λ_r − λ_{r+1}) / (2√d)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub term_eps: f64,
    pub term_spec: f64,
    pub term_dim: f64,
    pub bound: f64,
    /// `term_eps` with `√R` in place of `√r`, for comparison.
    pub term_eps_full_rank: f64,
    /// Set when `r = R`, where `λ_{R+1}` is taken as 0.
    pub all_components: bool,
}

/// Ceiling for the asymmetric slice initialization.
pub fn noise_budget(lambda: &[f64], r: usize, eps: f64, delta0: f64, d: usize) -> Result<NoiseBudget> {
    budget(lambda, r, eps, delta0, d, 8.0, (d as f64).sqrt())
}

/// Ceiling for the symmetric slice initialization, whose initialization
/// terms are `δ₀ (λ_r² − λ_{r+1}²) / (4‖λ‖)` and `δ₀ (λ_r − λ_{r+1}) / (2 d^{3/4})`.
pub fn noise_budget_symmetric(lambda: &[f64], r: usize, eps: f64, delta0: f64, d: usize) -> Result<NoiseBudget> {
    budget(lambda, r, eps, delta0, d, 4.0, (d as f64).powf(0.75))
}

fn budget(
    lambda: &[f64],
    r: usize,
    eps: f64,
    delta0: f64,
    d: usize,
    spec_div: f64,
    dim_scale: f64,
) -> Result<NoiseBudget> {
    let rank = lambda.len();
    if r == 0 || r > rank {
        return Err(Error::InvalidArgument(format!("target rank {r} outside 1..={rank}")));
    }
    if !(eps > 0.0 && delta0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps and delta0 must be positive, got {eps} and {delta0}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let all_components = r == rank;
    if all_components {
        warn!("noise budget at r = R uses lambda_(R+1) = 0");
    }
    let lr = lambda[r - 1];
    let next = lambda.get(r).copied().unwrap_or(0.0);
    let gap = lr - next;
    let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eps_coeff = std::f64::consts::SQRT_2 / 8.0 * gap * eps;
    let term_eps = eps_coeff / (r as f64).sqrt();
    let term_spec = delta0 * (lr * lr - next * next) / (spec_div * norm);
    let term_dim = delta0 * gap / (2.0 * dim_scale);
    Ok(NoiseBudget {
        term_eps,
        term_spec,
        term_dim,
        bound: term_eps.min(term_spec).min(term_dim),
        term_eps_full_rank: eps_coeff / (rank as f64).sqrt(),
        all_components,
    })
}
