use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riql_lab::agents::{self, AgentConfig, Algorithm, TrainedAgent};
use riql_lab::corruption::{self, AttackOracle, CorruptionSpec, Element, Mode, PgdConfig};
use riql_lab::data::{load_dataset, save_dataset};
use riql_lab::envs::{corruption_level_report, generate_dataset, make_env, PolicyMixture};
use riql_lab::eval::{self, EvalResult, ReferenceScores};
use riql_lab::experiment::{run_suite, ExperimentConfig};
use riql_lab::robust::kurtosis;
use riql_lab::{Error, Result};
use serde_json::{json, Map, Value};

/// Offline RL under dataset corruption.
#[derive(Parser)]
#[command(name = "riql-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out behavior policies and write a dataset.
    GenData(GenData),
    /// Attack a dataset.
    Corrupt(Corrupt),
    /// Train an agent and write its checkpoint.
    Train(Box<Train>),
    /// Evaluate a checkpoint and append rows to a results table.
    Eval(Eval),
    /// Run a benchmark grid from a JSON config.
    Suite {
        #[arg(long)]
        config: PathBuf,
    },
    /// Diagnostic reports.
    #[command(subcommand)]
    Diag(Diag),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    env: String,
    #[arg(long, default_value = "medium-replay")]
    mix: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Corrupt {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    element: Element,
    #[arg(long, default_value = "random")]
    mode: Mode,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint directory whose critics guide adversarial attacks.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    pgd_steps: Option<usize>,
    #[arg(long)]
    pgd_step_size: Option<f64>,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON object of agent config overrides; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Comma-separated hidden widths, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// `deterministic` or `diagonal_gaussian`.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    huber: bool,
    #[arg(long, conflicts_with = "huber")]
    no_huber: bool,
    #[arg(long)]
    norm: bool,
    #[arg(long, conflicts_with = "norm")]
    no_norm: bool,
    #[arg(long)]
    quantile: bool,
    #[arg(long, conflicts_with = "quantile")]
    no_quantile: bool,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    agent: PathBuf,
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Results CSV; rows are merged into an existing table.
    #[arg(long)]
    out: PathBuf,
    /// Attack labels written to the rows.
    #[arg(long, default_value = "none")]
    attack_element: String,
    #[arg(long, default_value = "none")]
    attack_mode: String,
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    #[arg(long, default_value_t = 0.0)]
    scale: f64,
    #[arg(long, default_value_t = 100)]
    reference_episodes: usize,
    #[arg(long, default_value_t = 0)]
    reference_seed: u64,
    /// Also report the kurtosis of the agent's target values on this dataset.
    #[arg(long)]
    kurtosis_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Diag {
    /// Kurtosis of centered target values `r + γV(s′)` on a dataset.
    Kurtosis {
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-sample corruption level of a tabular dataset.
    Zeta {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        corrupted: PathBuf,
        #[arg(long, default_value = "gridworld")]
        env: String,
    },
    /// Ensemble penalty on attacked versus clean rows.
    Penalty {
        #[arg(long)]
        agent: PathBuf,
        /// Corrupted dataset carrying the attack record.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        element: Element,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn gen_data(a: GenData) -> Result<()> {
    let env = make_env(&a.env)?;
    let mix = PolicyMixture::by_name(&a.mix)?;
    let mut data = generate_dataset(env.as_ref(), &mix, a.n, a.seed)?;
    data.metadata.insert("generator.mixture".into(), a.mix.clone());
    save_dataset(&data, &a.out)?;
    println!("wrote {} transitions to {}", data.len(), a.out.display());
    Ok(())
}

fn corrupt(a: Corrupt) -> Result<()> {
    let data = load_dataset(&a.input)?;
    let spec = CorruptionSpec {
        element: a.element,
        mode: a.mode,
        rate: a.rate,
        scale: a.scale,
        seed: a.seed,
    };
    spec.validate()?;
    let mut pgd = PgdConfig::default();
    pgd.steps = a.pgd_steps.unwrap_or(pgd.steps);
    pgd.step_size = a.pgd_step_size.unwrap_or(pgd.step_size);
    let oracle = match (&a.oracle, a.mode) {
        (Some(dir), _) => Some(TrainedAgent::load(dir)?),
        (None, Mode::Adversarial) => {
            return Err(Error::InvalidArgument("adversarial attacks need --oracle".into()))
        }
        (None, Mode::Random) => None,
    };
    let out = corruption::corrupt(&data, &spec, oracle.as_ref().map(|o| o as &dyn AttackOracle), &pgd)?;
    save_dataset(&out, &a.out)?;
    let changed: usize = (0..data.len())
        .filter(|&i| data.transitions[i] != out.transitions[i])
        .count();
    println!("{changed} of {} rows changed, wrote {}", data.len(), a.out.display());
    Ok(())
}

fn train_config(a: &Train) -> Result<AgentConfig> {
    let mut map = match &a.config {
        Some(path) => match serde_json::from_str::<Value>(&fs::read_to_string(path)?)? {
            Value::Object(m) => m,
            _ => return Err(Error::InvalidArgument("--config must hold a JSON object".into())),
        },
        None => Map::new(),
    };
    map.insert("algorithm".into(), json!(a.algo));
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            map.insert(key.into(), v);
        }
    };
    set("train_steps", a.steps.map(|v| json!(v)));
    set("seed", a.seed.map(|v| json!(v)));
    set("k_ensemble", a.k.map(|v| json!(v)));
    set("alpha", a.alpha.map(|v| json!(v)));
    set("delta", a.delta.map(|v| json!(v)));
    set("beta", a.beta.map(|v| json!(v)));
    set("tau", a.tau.map(|v| json!(v)));
    set("learning_rate", a.lr.map(|v| json!(v)));
    set("batch_size", a.batch.map(|v| json!(v)));
    set("hidden", a.hidden.as_ref().map(|v| json!(v)));
    set("policy_kind", a.policy.as_ref().map(|v| json!(v)));
    let flag = |on: bool, off: bool| (on || off).then(|| json!(on));
    set("use_huber", flag(a.huber, a.no_huber));
    set("normalize_obs", flag(a.norm, a.no_norm));
    set("use_quantile", flag(a.quantile, a.no_quantile));
    AgentConfig::from_overrides(&Value::Object(map))
}

fn train(a: &Train) -> Result<()> {
    let config = train_config(a)?;
    let data = load_dataset(&a.data)?;
    let (agent, trace) = agents::train(&data, &config)?;
    agent.save(&a.out)?;
    fs::write(a.out.join("trace.json"), serde_json::to_string(&trace)?)?;
    println!(
        "trained {} for {} steps, checkpoint in {}",
        config.algorithm,
        trace.len(),
        a.out.display()
    );
    Ok(())
}

fn target_kurtosis(agent: &TrainedAgent, data: &Path, samples: usize, seed: u64) -> Result<Value> {
    let data = load_dataset(data)?;
    let k = kurtosis(&agent.q_target_samples(&data, samples, seed)?)?;
    Ok(json!({"kurtosis": k, "samples": samples, "seed": seed}))
}

fn evaluate(a: Eval) -> Result<()> {
    if a.seeds.is_empty() {
        return Err(Error::InvalidArgument("--seeds must not be empty".into()));
    }
    let agent = TrainedAgent::load(&a.agent)?;
    let env = make_env(&a.env)?;
    let kurt = match &a.kurtosis_data {
        Some(path) => Some(target_kurtosis(&agent, path, 2048, 0)?),
        None => None,
    };
    let refs = ReferenceScores::measure(env.as_ref(), a.reference_episodes, a.reference_seed)?;
    let mut rows = Vec::with_capacity(a.seeds.len());
    for &seed in &a.seeds {
        let stats = eval::evaluate(&agent, env.as_ref(), a.episodes, None, seed)?;
        rows.push(EvalResult {
            env: a.env.clone(),
            algorithm: agent.config.algorithm.to_string(),
            attack_element: a.attack_element.clone(),
            attack_mode: a.attack_mode.clone(),
            rate: a.rate,
            scale: a.scale,
            seed,
            mean_return: stats.mean,
            normalized_score: eval::normalized_score(stats.mean, &refs)?,
            episodes: stats.episodes,
        });
    }
    eval::append_results(&rows, &a.out)?;
    print_json(&json!({"references": refs, "rows": rows, "target_kurtosis": kurt}))
}

fn suite(config: &Path) -> Result<bool> {
    let config = ExperimentConfig::load(config)?;
    let summary = run_suite(&config)?;
    println!(
        "{} cells run, {} skipped, {} failed; results in {}",
        summary.executed,
        summary.skipped,
        summary.failed.len(),
        summary.results_path.display()
    );
    for (key, error) in &summary.failed {
        eprintln!("cell {key} failed: {error}");
    }
    Ok(summary.failed.is_empty())
}

fn diag(d: Diag) -> Result<()> {
    match d {
        Diag::Kurtosis { agent, data, samples, seed } => {
            print_json(&target_kurtosis(&TrainedAgent::load(agent)?, &data, samples, seed)?)
        }
        Diag::Zeta { clean, corrupted, env } => {
            let env = make_env(&env)?;
            let mdp = env
                .tabular()
                .ok_or_else(|| Error::NonTabular(format!("environment {} is not tabular", env.name())))?;
            let report = corruption_level_report(&load_dataset(clean)?, &load_dataset(corrupted)?, mdp)?;
            print_json(&report)
        }
        Diag::Penalty { agent, data, element, alpha } => {
            let agent = TrainedAgent::load(agent)?;
            let data = load_dataset(data)?;
            let attacked = corruption::recorded_indices(&data, element)?.ok_or_else(|| {
                Error::InvalidArgument(format!("dataset carries no {element} attack record"))
            })?;
            let alpha = alpha.unwrap_or(agent.config.alpha);
            print_json(&agent.penalty_report(&data, &attacked, alpha)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::GenData(a) => gen_data(a).map(|_| true),
        Command::Corrupt(a) => corrupt(a).map(|_| true),
        Command::Train(a) => train(&a).map(|_| true),
        Command::Eval(a) => evaluate(a).map(|_| true),
        Command::Suite { config } => suite(&config),
        Command::Diag(d) => diag(d).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
