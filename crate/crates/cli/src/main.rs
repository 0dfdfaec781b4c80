use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use sasi::baselines::{
    orthogonalized_als_random, rank1_power_deflation, simultaneous_power_iteration, DeflationOptions, Method,
    SpiOptions,
};
use sasi::decomposition::{asi_decompose, AsiOptions, CpModel, SliceKind};
use sasi::harness::{
    draw_instance, emit_outputs, run_condnum, run_experiment, stream_rng, sweep_model, write_kappa_csv, CondnumConfig,
    DeflationConfig, ExperimentConfig, NoiseConfig, NoiseLevel, OutputPaths, Stream,
};
use sasi::synthesis::{LambdaSpec, NoiseKind};
use sasi::tensor::Tensor3;
use sasi::trace::IterationTrace;
use sasi::verify;

#[derive(Parser)]
#[command(
    name = "sasi",
    version,
    about = "Orthogonal CP decomposition by slice-initialized alternating subspace iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random model and write it with its (optionally noisy) tensor.
    Generate(GenerateArgs),
    /// Decompose one tensor file with one method.
    Decompose(DecomposeArgs),
    /// Run a multi-trial experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Sweep slice condition numbers over random mixing vectors.
    Condnum(CondnumArgs),
    /// Run the numerical invariant checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaKind {
    Linear,
    Geometric,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Rank1,
    Gaussian,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Rank1 => NoiseKind::Rank1,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
        }
    }
}

#[derive(Args)]
struct WeightArgs {
    /// Weight profile.
    #[arg(long, value_enum, default_value = "linear")]
    lambda: LambdaKind,
    /// Decay ratio for geometric weights.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Explicit comma-separated weights; overrides --lambda.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

impl WeightArgs {
    fn spec(&self) -> LambdaSpec {
        match (&self.weights, self.lambda) {
            (Some(values), _) => LambdaSpec::Explicit { values: values.clone() },
            (None, LambdaKind::Linear) => LambdaSpec::Linear { scale: 1.0 },
            (None, LambdaKind::Geometric) => LambdaSpec::Geometric {
                ratio: self.ratio,
                scale: 1.0,
            },
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    dim: usize,
    /// Number of components.
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long)]
    symmetric: bool,
    /// Operator norm of the added noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "rank1")]
    noise_kind: NoiseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trial index; the same (seed, trial) reproduces that trial of an experiment.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Receives model.json and tensor.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Tensor in text format.
    #[arg(long)]
    tensor: PathBuf,
    /// Number of components to recover.
    #[arg(long)]
    target_rank: usize,
    #[arg(long, default_value = "s-asi")]
    method: Method,
    /// Sweeps for s-asi and r-als.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Use the symmetric slice initialization (s-asi).
    #[arg(long)]
    symmetric_init: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-truth model JSON; enables tangents and errors in the trace.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Output trace CSV.
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's out_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the config's base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "SASI_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CondnumArgs {
    /// Model JSON to sweep; otherwise a model is drawn from the flags below.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    dim: usize,
    #[arg(long, default_value_t = 30)]
    rank: usize,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "kappa.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Decompose(a) => decompose(a),
        Command::Experiment(a) => experiment(a),
        Command::Condnum(a) => condnum(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn generate(a: GenerateArgs) -> sasi::Result<ExitCode> {
    let config = ExperimentConfig {
        d: a.dim,
        rank: a.rank,
        r: 1,
        symmetric: a.symmetric,
        lambda: a.weights.spec(),
        noise: NoiseConfig {
            kind: a.noise_kind.into(),
            level: NoiseLevel::Absolute { value: a.noise },
        },
        base_seed: a.seed,
        trials: a.trial + 1,
        ..Default::default()
    };
    let (model, tensor, _) = draw_instance(&config, a.trial)?;
    fs::create_dir_all(&a.out_dir)?;
    model.save(a.out_dir.join("model.json"))?;
    tensor.write_file(a.out_dir.join("tensor.txt"))?;
    println!(
        "wrote {} and {}",
        a.out_dir.join("model.json").display(),
        a.out_dir.join("tensor.txt").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_trace(trace: &IterationTrace, path: &Path) -> sasi::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    trace.write_csv(fs::File::create(path)?)
}

fn decompose(a: DecomposeArgs) -> sasi::Result<ExitCode> {
    let t = Tensor3::read_file(&a.tensor)?;
    let truth = a.truth.as_ref().map(CpModel::load).transpose()?;
    let mut rng = stream_rng(a.seed, 0, Stream::Method(a.method));
    let (model, trace, extra) = match a.method {
        Method::SAsi => {
            let opts = AsiOptions {
                iters: a.iters,
                slice: if a.symmetric_init {
                    SliceKind::Symmetric
                } else {
                    SliceKind::Asymmetric
                },
                ..Default::default()
            };
            let out = asi_decompose(&t, a.target_rank, &opts, &mut rng, truth.as_ref())?;
            info!("initialization iterations {:?}", out.init.iterations);
            (Some(out.model), out.trace, None)
        }
        Method::RAls => {
            let rep = orthogonalized_als_random(&t, a.target_rank, a.iters, &mut rng, truth.as_ref())?;
            (rep.model, rep.trace, None)
        }
        Method::Spi => {
            let opts = SpiOptions::for_dim(t.cubical_dim()?);
            let rep = simultaneous_power_iteration(&t, a.target_rank, &opts, &mut rng, truth.as_ref())?;
            (rep.model, rep.trace, None)
        }
        Method::Rank1Deflation => {
            let defaults = DeflationConfig::default();
            let opts = DeflationOptions {
                components: a.target_rank,
                inner_iters: defaults.inner_iters,
                restarts: defaults.restarts,
            };
            let rep = rank1_power_deflation(&t, &opts, &mut rng, truth.as_ref())?;
            (None, rep.trace, Some(rep.components))
        }
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    match (model, extra) {
        (Some(m), _) => {
            println!("weights {:?}", m.lambda());
            m.save(&a.out)?;
        }
        (None, components) => {
            let doc = serde_json::json!({ "method": a.method, "components": components.unwrap_or_default() });
            fs::write(&a.out, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
    }
    write_trace(&trace, &a.trace)?;
    if let Some(e) = trace.final_error() {
        println!("final column error {e:.3e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> sasi::Result<ExitCode> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(dir) = a.out_dir {
        config.out_dir = Some(dir);
    }
    if let Some(seed) = a.seed {
        config.base_seed = seed;
    }
    if let Some(trials) = a.trials {
        config.trials = trials;
    }
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    info!("running {} trials on {jobs} threads", config.trials);
    let result = run_experiment(&config, jobs)?;
    emit_outputs(&result, &OutputPaths::in_dir(&dir))?;
    for (method, s) in &result.stats.success {
        println!(
            "{method}: {}/{} successes, {} errors",
            s.successes, s.trials, s.failures
        );
    }
    println!("outputs in {}", dir.display());
    Ok(if result.failures() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn condnum(a: CondnumArgs) -> sasi::Result<ExitCode> {
    let result = match &a.model {
        Some(path) => sweep_model(CpModel::load(path)?, a.samples, a.seed)?,
        None => run_condnum(&CondnumConfig {
            d: a.dim,
            rank: a.rank,
            lambda: a.weights.spec(),
            samples: a.samples,
            base_seed: a.seed,
        })?,
    };
    write_kappa_csv(&result.samples, &a.out)?;
    println!(
        "median kappa {:.4e}, weight ratio {:.4e}, {} samples in {}",
        result.median_kappa(),
        result.weight_ratio(),
        result.samples.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: VerifyArgs) -> sasi::Result<ExitCode> {
    let mut ok = true;
    for c in verify::run_all(a.seed)? {
        ok &= c.passed();
        println!(
            "{} {}: {} violations in {} comparisons, worst margin {:.3e}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.violations,
            c.comparisons,
            c.worst_margin
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
