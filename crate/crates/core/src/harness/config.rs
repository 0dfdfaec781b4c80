use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{Method, SpiOptions};
use crate::decomposition::SliceKind;
use crate::error::{Error, Result};
use crate::linalg::IterationPolicy;
use crate::synthesis::{noise_budget, noise_budget_symmetric, LambdaSpec, NoiseBudget, NoiseKind};

/// Noise operator norm, either absolute or relative to the noise budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLevel {
    Absolute {
        value: f64,
    },
    /// `fraction` times the budget bound at accuracy `eps` and confidence
    /// parameter `delta0`.
    BudgetFraction {
        fraction: f64,
        eps: f64,
        delta0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    pub level: NoiseLevel,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Rank1,
            level: NoiseLevel::Absolute { value: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeflationConfig {
    pub inner_iters: usize,
    pub restarts: usize,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self {
            inner_iters: 100,
            restarts: 5,
        }
    }
}

/// One experiment: a model family, a noise level, and the methods to run on
/// each of `trials` independent draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mode size.
    pub d: usize,
    /// True rank.
    #[serde(rename = "R")]
    pub rank: usize,
    /// Target rank.
    pub r: usize,
    pub symmetric: bool,
    pub lambda: LambdaSpec,
    pub noise: NoiseConfig,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    /// Sweeps `K` for s-ASI and r-ALS.
    pub iters: usize,
    pub init_policy: IterationPolicy,
    pub early_stop: Option<f64>,
    /// Use the asymmetric slice matrices even for symmetric models.
    pub force_asymmetric_init: bool,
    /// Filled from `d` by [`ExperimentConfig::resolved`] when absent.
    pub spi: Option<SpiOptions>,
    pub deflation: DeflationConfig,
    /// Final column error counted as a success.
    pub success_eps: f64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 50,
            rank: 10,
            r: 5,
            symmetric: false,
            lambda: LambdaSpec::default(),
            noise: NoiseConfig::default(),
            methods: vec![Method::SAsi, Method::RAls],
            trials: 100,
            base_seed: 0,
            iters: 10,
            init_policy: IterationPolicy::default(),
            early_stop: None,
            force_asymmetric_init: false,
            spi: None,
            deflation: DeflationConfig::default(),
            success_eps: 1e-6,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.r && self.r <= self.rank && self.rank <= self.d) {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r <= R <= d, got r = {}, R = {}, d = {}",
                self.r, self.rank, self.d
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods requested".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("method {m} listed twice")));
            }
        }
        if self.iters == 0 {
            return Err(Error::InvalidArgument("iters must be at least 1".into()));
        }
        if !(self.success_eps > 0.0) {
            return Err(Error::InvalidArgument("success_eps must be positive".into()));
        }
        self.lambda.weights(self.rank)?;
        Ok(())
    }

    /// Validated copy with every defaulted hyperparameter written out.
    pub fn resolved(&self) -> Result<Self> {
        self.validate()?;
        let mut out = self.clone();
        if out.spi.is_none() {
            out.spi = Some(SpiOptions::for_dim(out.d));
        }
        Ok(out)
    }

    pub fn slice_kind(&self) -> SliceKind {
        if self.symmetric && !self.force_asymmetric_init {
            SliceKind::Symmetric
        } else {
            SliceKind::Asymmetric
        }
    }

    /// Budget matching the slice initialization in use, if the noise level
    /// is expressed relative to it.
    pub fn budget(&self) -> Result<Option<NoiseBudget>> {
        let NoiseLevel::BudgetFraction { eps, delta0, .. } = self.noise.level else {
            return Ok(None);
        };
        let lambda = self.lambda.weights(self.rank)?;
        let b = match self.slice_kind() {
            SliceKind::Asymmetric => noise_budget(&lambda, self.r, eps, delta0, self.d)?,
            SliceKind::Symmetric => noise_budget_symmetric(&lambda, self.r, eps, delta0, self.d)?,
        };
        Ok(Some(b))
    }

    /// Operator norm of the noise tensor.
    pub fn noise_norm(&self) -> Result<f64> {
        match self.noise.level {
            NoiseLevel::Absolute { value } => Ok(value),
            NoiseLevel::BudgetFraction { fraction, .. } => {
                let b = self.budget()?.expect("budget level");
                Ok(fraction * b.bound)
            }
        }
    }
}
