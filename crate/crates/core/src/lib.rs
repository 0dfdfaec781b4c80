//! Orthogonal CP decomposition of third-order tensors by slice-initialized
//! alternating subspace iteration.
//!
//! The entry point is [`decomposition::asi_decompose`], which recovers the
//! leading `r` components of a tensor close to
//! `Σ λ_i a_i ⊗ b_i ⊗ c_i` with orthonormal factors:
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use sasi::decomposition::{asi_decompose, AsiOptions};
//! use sasi::synthesis::{random_cp_model, LambdaSpec};
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(0);
//! let truth = random_cp_model(12, 5, &LambdaSpec::default(), false, &mut rng)?;
//! let out = asi_decompose(&truth.to_tensor(), 2, &AsiOptions::default(), &mut rng, Some(&truth))?;
//! assert!(out.trace.final_error().unwrap() < 1e-8);
//! # Ok::<(), sasi::Error>(())
//! ```
//!
//! Modules, bottom up:
//!
//! - [`tensor`]: dense tensors, contractions, unfoldings, operator norms.
//! - [`linalg`]: orthonormal bases, QR, principal angles, subspace iteration.
//! - [`precise`]: double-double arithmetic for ill-conditioned spectra.
//! - [`decomposition`]: CP models, slice initialization and the sweeps.
//! - [`baselines`]: random-start ALS, simultaneous power iteration, deflation
//!   and slice symmetrization.
//! - [`synthesis`]: random models, noise and the noise budget.
//! - [`trace`]: per-iteration diagnostics.
//! - [`harness`]: seeded multi-trial experiments and their CSV output.
//! - [`verify`]: numerical checks of the convergence and perturbation bounds.
//!
//! The guide in `book/` walks through each piece; its code blocks run as
//! doctests of this crate.

pub mod baselines;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod precise;
pub mod synthesis;
pub mod tensor;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/subspaces.md")]
    mod subspaces {}
    #[doc = include_str!("../../../book/src/slice-init.md")]
    mod slice_init {}
    #[doc = include_str!("../../../book/src/asi.md")]
    mod asi {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
