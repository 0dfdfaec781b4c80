use std::path::Path;

use serde::{Deserialize, Serialize};

use super::output::ensure_parent;
use super::seed::{stream_rng, Stream};
use super::stats::percentile;
use crate::baselines::{condition_number_sweep, KappaSample};
use crate::decomposition::CpModel;
use crate::error::{Error, Result};
use crate::synthesis::{random_cp_model, LambdaSpec};
use crate::trace::format_cell;

pub const KAPPA_HEADER: &str = "sample,kappa,kappa_formula";

/// A slice condition-number sweep over random mixing vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondnumConfig {
    pub d: usize,
    pub rank: usize,
    pub lambda: LambdaSpec,
    pub samples: usize,
    pub base_seed: u64,
}

impl Default for CondnumConfig {
    fn default() -> Self {
        Self {
            d: 30,
            rank: 30,
            lambda: LambdaSpec::Geometric { ratio: 0.5, scale: 1.0 },
            samples: 1000,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CondnumResult {
    pub model: CpModel,
    pub samples: Vec<KappaSample>,
}

impl CondnumResult {
    /// Nearest-rank median of the computed condition numbers.
    pub fn median_kappa(&self) -> f64 {
        let mut k: Vec<f64> = self.samples.iter().map(|s| s.kappa).collect();
        k.sort_by(f64::total_cmp);
        percentile(&k, 50.0)
    }

    /// `|λ₁| / |λ_R|`, the condition number of the weights alone.
    pub fn weight_ratio(&self) -> f64 {
        let l = self.model.lambda();
        (l[0] / l[l.len() - 1]).abs()
    }
}

/// Draws an asymmetric model from the model stream of trial 0, then sweeps it
/// with [`sweep_model`].
pub fn run_condnum(config: &CondnumConfig) -> Result<CondnumResult> {
    let mut model_rng = stream_rng(config.base_seed, 0, Stream::Model);
    let model = random_cp_model(config.d, config.rank, &config.lambda, false, &mut model_rng)?;
    sweep_model(model, config.samples, config.base_seed)
}

/// Condition numbers of `model` for mixing vectors drawn from the noise
/// stream of trial 0.
pub fn sweep_model(model: CpModel, samples: usize, base_seed: u64) -> Result<CondnumResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let mut probe_rng = stream_rng(base_seed, 0, Stream::Noise);
    let samples = condition_number_sweep(&model, samples, &mut probe_rng)?;
    Ok(CondnumResult { model, samples })
}

pub fn write_kappa_csv(samples: &[KappaSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(KAPPA_HEADER.split(','))?;
    for s in samples {
        w.write_record([
            s.sample.to_string(),
            format_cell(Some(s.kappa)),
            format_cell(Some(s.kappa_formula)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
