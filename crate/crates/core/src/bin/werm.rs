use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use werm::analytic::{AnalyticModel, FIGURE_SHAPES};
use werm::biasgen::{
    power_law_distribution, subsample_to_distribution, BiasSpec, ExponentStyle, Permutation, SubsampleMethod,
};
use werm::bounds::{deviation_bound, evaluate_bound, BoundInputs, BoundKind, DeviationKind};
use werm::experiment::{emit_results, run_experiment, ExperimentSpec};
use werm::risk::classification_metrics;
use werm::train::{fit, predict, ModelKind, TrainConfig};
use werm::weights::{
    censoring_survival, class_shift_weights, group_shift_weights, ipcw_weights, pu_weights, stratum_shift_weights,
    TargetPrior,
};
use werm::{io, Dataset, Error, Result, WeightVector};

#[derive(Parser)]
#[command(name = "werm", version, about = "Weighted ERM with plug-in importance weights")]
struct Cli {
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (directory or file, depending on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON document with defaults for `experiment`, `train` or `bounds`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Risk and excess-error curves of the closed-form model.
    Analytic(AnalyticArgs),
    /// Power-law strata subsampling of a CSV dataset.
    Biasgen(BiasgenArgs),
    /// Importance weights for a CSV dataset.
    Weights(WeightsArgs),
    /// Fit a weighted softmax model and evaluate it.
    Train(TrainArgs),
    /// Evaluate a generalization or deviation bound.
    Bounds(BoundsArgs),
    /// Run an experiment spec.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct AnalyticArgs {
    /// Test positive rate.
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    #[arg(long, default_value_t = 99)]
    points: usize,
}

#[derive(Args)]
struct BiasgenArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    gamma: f64,
    /// Draw σ from this seed.
    #[arg(long, conflicts_with = "identity")]
    perm_seed: Option<u64>,
    /// Use σ = identity (the default).
    #[arg(long)]
    identity: bool,
    #[arg(long, value_enum, default_value_t = Style::Appendix)]
    exponent_style: Style,
    /// Unbiased strata distribution, comma separated (default uniform).
    #[arg(long, value_delimiter = ',')]
    target_pk: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Method::Sequential)]
    method: Method,
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    Appendix,
    MainText,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sequential,
    Proportional,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WeightKind {
    None,
    Class,
    Strata,
    Pu,
    Ipcw,
}

#[derive(Args)]
struct PriorArgs {
    /// Test positive rate.
    #[arg(long)]
    p: Option<f64>,
    /// Test strata (or class) distribution, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "pk_file")]
    pk: Option<Vec<f64>>,
    /// JSON array with the test strata (or class) distribution.
    #[arg(long)]
    pk_file: Option<PathBuf>,
}

impl PriorArgs {
    fn pk(&self) -> Result<Option<Vec<f64>>> {
        match (&self.pk, &self.pk_file) {
            (Some(v), _) => Ok(Some(v.clone())),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                Ok(Some(serde_json::from_str(&text)?))
            }
            (None, None) => Ok(None),
        }
    }
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: WeightKind,
    #[command(flatten)]
    prior: PriorArgs,
    /// Also write the censoring Kaplan-Meier curve here (ipcw only).
    #[arg(long)]
    km: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    #[arg(long, value_enum, default_value_t = WeightKind::None)]
    weights: WeightKind,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    /// lemma1, corollary1, theorem1, theorem2, approx1, approx2 or approx3.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    max_pk: Option<f64>,
    #[arg(long)]
    phi_sup: Option<f64>,
    #[arg(long)]
    rademacher: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    replicates: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("werm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Analytic(a) => {
            no_config(config, "analytic")?;
            analytic(&a, &out_or(&cli.out, "analytic"))
        }
        Command::Biasgen(a) => {
            no_config(config, "biasgen")?;
            biasgen(&a, cli.seed.unwrap_or(0), &out_or(&cli.out, "biased.csv"))
        }
        Command::Weights(a) => {
            no_config(config, "weights")?;
            weights(&a, &out_or(&cli.out, "weights.csv"))
        }
        Command::Train(a) => train(&a, config, cli.seed, &out_or(&cli.out, "train")),
        Command::Bounds(a) => bounds(&a, config),
        Command::Experiment(a) => {
            let path = config.ok_or_else(|| Error::Validation("experiment needs --config SPEC.json".into()))?;
            let mut spec = ExperimentSpec::from_file(path)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(o) = cli.out {
                spec.out_dir = o;
            }
            if let Some(r) = a.replicates {
                spec.replicates = r;
            }
            let bundle = run_experiment(&spec)?;
            emit_results(&bundle, &spec.out_dir)?;
            print_json(&bundle.summary)?;
            if !bundle.complete {
                eprintln!("werm: {} of {} replicates failed", bundle.failed_replicates, spec.replicates);
            }
            Ok(())
        }
    }
}

fn no_config(config: Option<&Path>, cmd: &str) -> Result<()> {
    match config {
        Some(_) => Err(Error::Validation(format!("{cmd} takes no --config"))),
        None => Ok(()),
    }
}

fn out_or(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn analytic(a: &AnalyticArgs, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (alpha, beta) in FIGURE_SHAPES {
        let m = AnalyticModel::new(alpha, beta, a.p)?;
        let tag = format!("a{alpha}_b{beta}");
        io::write_xy(dir.join(format!("risk_{tag}.csv")), ["theta", "risk"], &m.risk_curve(a.points + 2)?)?;
        io::write_xy(dir.join(format!("excess_{tag}.csv")), ["p_train", "excess"], &m.excess_curve(a.points)?)?;
    }
    println!("{}", dir.display());
    Ok(())
}

fn biasgen(a: &BiasgenArgs, seed: u64, out: &Path) -> Result<()> {
    let (data, _) = io::read_dataset(&a.input)?;
    let k = data.n_strata().ok_or_else(|| Error::Validation("biasgen needs a stratum column `s`".into()))?;
    let spec = BiasSpec {
        gamma: a.gamma,
        permutation: match a.perm_seed {
            Some(s) if !a.identity => Permutation::Random(s),
            _ => Permutation::Identity,
        },
        target_pk: a.target_pk.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]),
        exponent_style: match a.exponent_style {
            Style::Appendix => ExponentStyle::Appendix,
            Style::MainText => ExponentStyle::MainText,
        },
    };
    let p_prime = power_law_distribution(&spec, k)?;
    let method = match a.method {
        Method::Sequential => SubsampleMethod::Sequential,
        Method::Proportional => SubsampleMethod::ProportionalSizing,
    };
    let biased = subsample_to_distribution(&data, &p_prime, seed, method)?;
    io::write_dataset(out, &biased)?;
    let counts = biased.stratum_counts()?;
    let realized: Vec<f64> = counts.iter().map(|&c| c as f64 / biased.len() as f64).collect();
    let report = serde_json::json!({ "p_prime": p_prime, "realized": realized, "n": biased.len() });
    io::write_json(out.with_extension("p_prime.json"), &report)?;
    print_json(&report)
}

fn compute_weights(data: &Dataset, kind: WeightKind, prior: &PriorArgs) -> Result<WeightVector> {
    let target = TargetPrior { p: prior.p, pk: prior.pk()?, zeta: 0.0 };
    match kind {
        WeightKind::None => Ok(WeightVector::ones(data.len())),
        WeightKind::Class => match (&target.pk, data.n_classes()) {
            (Some(pk), Some(j)) if j > 2 || target.p.is_none() => group_shift_weights(&data.labels()?, pk),
            _ => class_shift_weights(data, &target),
        },
        WeightKind::Strata => stratum_shift_weights(data, &target),
        WeightKind::Pu => pu_weights(data, &target),
        WeightKind::Ipcw => ipcw_weights(data, &censoring_survival(data)?),
    }
}

fn weights(a: &WeightsArgs, out: &Path) -> Result<()> {
    let (data, _) = io::read_dataset(&a.input)?;
    let w = compute_weights(&data, a.kind, &a.prior)?;
    io::write_weights(out, &w)?;
    if let Some(km) = &a.km {
        if a.kind != WeightKind::Ipcw {
            return Err(Error::Validation("--km applies to --kind ipcw".into()));
        }
        io::write_km(km, &censoring_survival(&data)?)?;
    }
    println!("{} weights, mean {:.6}, max {:.6}", w.len(), w.mean(), w.max());
    Ok(())
}

fn train(a: &TrainArgs, config: Option<&Path>, seed: Option<u64>, dir: &Path) -> Result<()> {
    let mut cfg: TrainConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
            serde_json::from_str(&text)?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident = $flag:expr),*) => { $(if let Some(v) = $flag { cfg.$field = v; })* };
    }
    set!(
        lr = a.lr,
        momentum = a.momentum,
        weight_decay = a.wd,
        batch_size = a.batch,
        epochs = a.epochs,
        top_k = a.top_k,
        seed = seed
    );

    let (train, _) = io::read_dataset(&a.train)?;
    let (test, _) = io::read_dataset(&a.test)?;
    let w = compute_weights(&train, a.weights, &a.prior)?;
    let (params, log) = fit(&train, &w, a.model, &cfg)?;
    let j = test.n_classes().ok_or_else(|| Error::Schema("test set needs labels".into()))?;
    let m = classification_metrics(&test, &predict(&params, &test)?, cfg.top_k.min(j))?;
    create_dir(dir)?;
    io::write_learning_curve(dir.join("learning_curve.csv"), &log.epochs)?;
    let results = serde_json::json!({ "miss_rate": m.miss_rate, "top_k_error": m.top_k_error, "sce": m.mean_sce });
    io::write_json(dir.join("results.json"), &results)?;
    print_json(&results)
}

fn bounds(a: &BoundsArgs, config: Option<&Path>) -> Result<()> {
    let base: Option<BoundInputs> = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    let n = a.n.or(base.as_ref().map(|b| b.n)).ok_or_else(|| Error::Validation("--n is required".into()))?;
    let delta =
        a.delta.or(base.as_ref().map(|b| b.delta)).ok_or_else(|| Error::Validation("--delta is required".into()))?;
    let mut inputs = base.unwrap_or_else(|| BoundInputs::new(n, delta));
    inputs.n = n;
    inputs.delta = delta;
    inputs.epsilon = a.epsilon.or(inputs.epsilon);
    inputs.l = a.l.unwrap_or(inputs.l);
    inputs.p = a.p.or(inputs.p);
    inputs.k = a.k.or(inputs.k);
    inputs.max_pk = a.max_pk.or(inputs.max_pk);
    inputs.phi_sup = a.phi_sup.or(inputs.phi_sup);
    inputs.rademacher = a.rademacher.unwrap_or(inputs.rademacher);
    let result = match (a.kind.parse::<BoundKind>(), a.kind.parse::<DeviationKind>()) {
        (Ok(kind), _) => evaluate_bound(kind, &inputs)?,
        (_, Ok(kind)) => deviation_bound(kind, &inputs)?,
        _ => return Err(Error::Validation(format!("unknown bound kind {:?}", a.kind))),
    };
    print_json(&result)
}
