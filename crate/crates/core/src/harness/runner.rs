use std::collections::BTreeMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seed::{stream_rng, Stream};
use super::stats::{aggregate, AggregateStats, SuccessStats};
use crate::baselines::{
    orthogonalized_als_random, rank1_power_deflation, simultaneous_power_iteration, DeflationOptions, Method,
    SpiOptions,
};
use crate::decomposition::{asi_decompose, is_descending, AsiOptions, CpModel};
use crate::error::{Error, Result};
use crate::synthesis::{make_noise, make_symmetric_noise, random_cp_model};
use crate::tensor::Tensor3;
use crate::trace::IterationTrace;

/// What one method produced in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub trace: Option<IterationTrace>,
    /// Error message when the method failed.
    pub error: Option<String>,
    /// Final weights, in the method's output order.
    pub lambda: Option<Vec<f64>>,
    pub final_error: Option<f64>,
    pub success: bool,
}

impl MethodOutcome {
    /// Recovered weights descending in magnitude.
    pub fn descending(&self) -> Option<bool> {
        self.lambda.as_deref().map(is_descending)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub noise_norm: f64,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialResult {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn traces(&self) -> BTreeMap<Method, &IterationTrace> {
        self.outcomes
            .iter()
            .filter_map(|o| o.trace.as_ref().map(|t| (o.method, t)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Resolved configuration.
    pub config: ExperimentConfig,
    /// In trial order.
    pub trials: Vec<TrialResult>,
    pub stats: AggregateStats,
}

impl ExperimentResult {
    /// Number of (trial, method) pairs that returned an error.
    pub fn failures(&self) -> usize {
        self.trials
            .iter()
            .flat_map(|t| &t.outcomes)
            .filter(|o| o.error.is_some())
            .count()
    }
}

fn run_method(
    config: &ExperimentConfig,
    method: Method,
    trial: usize,
    observed: &Tensor3,
    truth: &CpModel,
) -> Result<(IterationTrace, Option<Vec<f64>>)> {
    let mut rng = stream_rng(config.base_seed, trial as u64, Stream::Method(method));
    let r = config.r;
    match method {
        Method::SAsi => {
            let opts = AsiOptions {
                iters: config.iters,
                slice: config.slice_kind(),
                init_policy: config.init_policy,
                early_stop: config.early_stop,
            };
            let out = asi_decompose(observed, r, &opts, &mut rng, Some(truth))?;
            Ok((out.trace, Some(out.model.lambda().to_vec())))
        }
        Method::RAls => {
            let rep = orthogonalized_als_random(observed, r, config.iters, &mut rng, Some(truth))?;
            Ok((rep.trace, rep.model.map(|m| m.lambda().to_vec())))
        }
        Method::Spi => {
            let opts = config.spi.unwrap_or_else(|| SpiOptions::for_dim(config.d));
            let rep = simultaneous_power_iteration(observed, r, &opts, &mut rng, Some(truth))?;
            Ok((rep.trace, rep.model.map(|m| m.lambda().to_vec())))
        }
        Method::Rank1Deflation => {
            let opts = DeflationOptions {
                components: r,
                inner_iters: config.deflation.inner_iters,
                restarts: config.deflation.restarts,
            };
            let rep = rank1_power_deflation(observed, &opts, &mut rng, Some(truth))?;
            let lambda = rep.components.iter().map(|c| c.weight).collect();
            Ok((rep.trace, Some(lambda)))
        }
    }
}

/// The trial's ground-truth model, the observed tensor (model plus noise)
/// and the noise operator norm.
pub fn draw_instance(config: &ExperimentConfig, trial: usize) -> Result<(CpModel, Tensor3, f64)> {
    config.validate()?;
    let mut model_rng = stream_rng(config.base_seed, trial as u64, Stream::Model);
    let truth = random_cp_model(config.d, config.rank, &config.lambda, config.symmetric, &mut model_rng)?;
    let noise_norm = config.noise_norm()?;
    let mut noise_rng = stream_rng(config.base_seed, trial as u64, Stream::Noise);
    let mut observed = truth.to_tensor();
    if noise_norm > 0.0 {
        let noise = if config.symmetric {
            make_symmetric_noise(config.d, config.noise.kind, noise_norm, &mut noise_rng)?
        } else {
            make_noise(config.d, config.noise.kind, noise_norm, &mut noise_rng)?
        };
        observed = &observed + &noise;
    }
    Ok((truth, observed, noise_norm))
}

/// Draws the trial's model and noise, then runs every configured method on
/// the same observed tensor. Method failures are recorded, not propagated.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let (truth, observed, noise_norm) = draw_instance(config, trial)?;
    let outcomes = config
        .methods
        .iter()
        .map(|&method| match run_method(config, method, trial, &observed, &truth) {
            Ok((trace, lambda)) => {
                let final_error = trace.final_error();
                let success = final_error.is_some_and(|e| e <= config.success_eps);
                debug!("trial {trial} {method}: final error {final_error:?}");
                MethodOutcome {
                    method,
                    trace: Some(trace),
                    error: None,
                    lambda,
                    final_error,
                    success,
                }
            }
            Err(e) => {
                warn!("trial {trial} {method} failed: {e}");
                MethodOutcome {
                    method,
                    trace: None,
                    error: Some(e.to_string()),
                    lambda: None,
                    final_error: None,
                    success: false,
                }
            }
        })
        .collect();
    Ok(TrialResult {
        trial,
        noise_norm,
        outcomes,
    })
}

/// Runs all trials on `jobs` threads and aggregates them in trial order.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    let config = config.resolved()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(&config, i))
            .collect::<Result<_>>()
    })?;

    let pairs: Vec<(Method, &IterationTrace)> = trials
        .iter()
        .flat_map(|t| {
            t.outcomes
                .iter()
                .filter_map(|o| o.trace.as_ref().map(|tr| (o.method, tr)))
        })
        .collect();
    let rows = aggregate(&config.methods, &pairs);
    let mut success = BTreeMap::new();
    for &method in &config.methods {
        let outs: Vec<&MethodOutcome> = trials.iter().filter_map(|t| t.outcome(method)).collect();
        let successes = outs.iter().filter(|o| o.success).count();
        let failures = outs.iter().filter(|o| o.error.is_some()).count();
        success.insert(
            method,
            SuccessStats {
                trials: outs.len(),
                successes,
                failures,
                fraction: successes as f64 / outs.len() as f64,
            },
        );
    }
    Ok(ExperimentResult {
        config,
        trials,
        stats: AggregateStats { rows, success },
    })
}
