//! The `hsw` command line: training, evaluation, single rollouts, config
//! validation and checkpoint inspection.
//!
//! Every flag can also be set through an `HSW_`-prefixed environment
//! variable (e.g. `HSW_SEED`, `HSW_THREADS`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ScenarioConfig};
use crate::env::trace::write_trace;
use crate::env::Environment;
use crate::eval::export::{summary_text, write_case, write_summaries};
use crate::eval::{
    case_scenario, eval_seed, run_case, run_episode, ExperimentCase, PnGains, PnGuidance, PolicySource, RunOptions,
};
use crate::guidance::NeuralGuidance;
use crate::net::checkpoint::Checkpoint;
use crate::ppo::{train, RunConfig, Trainer, UpdateMetrics};

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit code for failures while running.
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "hsw", version, about = "Hypersonic terminal guidance: train, evaluate and inspect policies")]
pub struct Cli {
    /// Worker threads for rollouts and evaluation (0 = all cores).
    #[arg(long, global = true, env = "HSW_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a recurrent policy with PPO.
    Train(TrainArgs),
    /// Monte Carlo evaluation of a checkpoint or the PN baseline.
    Eval(EvalArgs),
    /// Run one episode and write its full trajectory.
    Rollout(RolloutArgs),
    /// Parse and validate a config, then print it with all defaults.
    ValidateConfig(ValidateArgs),
    /// Print network shapes, scaler statistics and trainer state of a checkpoint.
    ExportCheckpointInfo(InfoArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (scenario sections plus `[training]`). Defaults if omitted.
    #[arg(long, env = "HSW_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "HSW_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "HSW_OUT")]
    pub out: PathBuf,
    /// Overrides `training.updates`.
    #[arg(long, env = "HSW_UPDATES")]
    pub updates: Option<u64>,
    /// Continue from a checkpoint written by a previous run.
    #[arg(long, env = "HSW_RESUME")]
    pub resume: Option<PathBuf>,
    /// Suppress the per-update progress line.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["checkpoint", "policy"])]
pub struct PolicyArgs {
    #[arg(long, env = "HSW_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Built-in policy; only `pn` is available.
    #[arg(long, value_parser = ["pn"])]
    pub policy: Option<String>,
    /// Sample actions instead of using the policy mean.
    #[arg(long)]
    pub stochastic: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: PolicyArgs,
    /// Base scenario config. Defaults if omitted.
    #[arg(long, env = "HSW_CONFIG")]
    pub config: Option<PathBuf>,
    /// Experiment case, e.g. Optim, PV=20, MV/SV=10%, Divert=10%, Evasion=5%, AF=0.5.
    /// Repeatable; `all` runs the standard matrix.
    #[arg(long = "case", default_value = "Optim")]
    pub cases: Vec<String>,
    #[arg(long, env = "HSW_EPISODES", default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, env = "HSW_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "HSW_OUT")]
    pub out: PathBuf,
    /// Write full trajectories for the first N episodes of each case.
    #[arg(long, default_value_t = 0)]
    pub traces: usize,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub source: PolicyArgs,
    #[arg(long, env = "HSW_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long = "case", default_value = "Optim")]
    pub case: String,
    #[arg(long, env = "HSW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Episode index within the seed's evaluation sequence.
    #[arg(long, default_value_t = 0)]
    pub episode: u64,
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, env = "HSW_CONFIG")]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long, env = "HSW_CHECKPOINT")]
    pub checkpoint: PathBuf,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_USAGE, error: error.into() }
    }

    fn run(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_FAILURE, error: error.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(e)
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build().map_err(Failure::run)?;
    pool.install(|| match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Rollout(a) => cmd_rollout(a),
        Command::ValidateConfig(a) => cmd_validate(a),
        Command::ExportCheckpointInfo(a) => cmd_info(a),
    })
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            // a run config is also accepted: its training table is ignored
            let run = RunConfig::load(p)?;
            Ok(run.scenario)
        }
    }
}

fn print_config(title: &str, toml: &str) {
    println!("# {title}");
    println!("{}", toml.trim_end());
    println!();
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    version: &'static str,
    seed: u64,
    artifacts: Vec<ManifestEntry>,
}

fn sha256_file(path: &Path) -> std::io::Result<(u64, String)> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok((bytes.len() as u64, digest.iter().map(|b| format!("{b:02x}")).collect()))
}

/// Writes `manifest.json` listing every file under `out` with its hash.
fn write_manifest(out: &Path, command: &str, seed: u64) -> Outcome {
    let mut files = Vec::new();
    collect_files(out, &mut files).map_err(Failure::run)?;
    files.sort();
    let mut artifacts = Vec::new();
    for f in files {
        let rel = f.strip_prefix(out).unwrap_or(&f);
        if rel == Path::new("manifest.json") {
            continue;
        }
        let (bytes, sha256) = sha256_file(&f).map_err(Failure::run)?;
        artifacts.push(ManifestEntry { path: rel.to_string_lossy().replace('\\', "/"), bytes, sha256 });
    }
    let m = Manifest { command: command.into(), version: env!("CARGO_PKG_VERSION"), seed, artifacts };
    let text = serde_json::to_string_pretty(&m).map_err(Failure::run)?;
    fs::write(out.join("manifest.json"), text).map_err(Failure::run)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn progress_line(m: &UpdateMetrics) -> String {
    format!(
        "update {:>5}  R {:>8.3} (min {:>8.3})  steps {:>6.1}  miss {:>9.1}  bonus {:>5.1}%  viol {:>5.1}%  kl {:.2e}  clip {:.3}  lr {:.2e}{}",
        m.update,
        m.mean_reward,
        m.min_reward,
        m.mean_steps,
        m.mean_miss,
        100.0 * m.terminal_reward_rate,
        100.0 * m.violation_rate,
        m.kl,
        m.clip,
        m.lr_policy,
        if m.skipped { "  (non-finite gradient skipped)" } else { "" }
    )
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let mut run = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(u) = a.updates {
        run.training.updates = u;
    }
    let updates = run.training.updates;
    let mut trainer = match &a.resume {
        Some(p) => {
            let ckpt = Checkpoint::load(p).map_err(Failure::usage)?;
            Trainer::from_checkpoint(run.clone(), ckpt, Some(a.seed)).map_err(Failure::usage)?
        }
        None => Trainer::new(run.clone(), a.seed),
    };
    print_config(&format!("effective config (seed {})", a.seed), &run.to_toml());
    fs::create_dir_all(&a.out).map_err(Failure::run)?;
    fs::write(a.out.join("config.toml"), run.to_toml()).map_err(Failure::run)?;
    let quiet = a.quiet;
    let (_, ckpts) = train(&mut trainer, updates, &a.out, |m| {
        if !quiet {
            println!("{}", progress_line(m));
        }
    })
    .map_err(Failure::run)?;
    if let Some(last) = ckpts.last() {
        println!("checkpoint: {}", last.display());
    }
    write_manifest(&a.out, "train", a.seed)
}

enum LoadedPolicy {
    Network(Checkpoint),
    Pn,
}

fn load_policy(src: &PolicyArgs) -> Result<LoadedPolicy, Failure> {
    match (&src.checkpoint, src.policy.as_deref()) {
        (Some(p), None) => {
            let ckpt = Checkpoint::load(p).map_err(Failure::usage)?;
            ckpt.expect_dims(crate::env::OBS_DIM, crate::env::ACT_DIM).map_err(Failure::usage)?;
            Ok(LoadedPolicy::Network(ckpt))
        }
        (None, Some("pn")) => Ok(LoadedPolicy::Pn),
        _ => Err(Failure::usage(anyhow::anyhow!("give exactly one of --checkpoint PATH or --policy pn"))),
    }
}

fn source<'a>(loaded: &'a LoadedPolicy, stochastic: bool, scenario: &ScenarioConfig) -> PolicySource<'a> {
    match loaded {
        LoadedPolicy::Network(c) => PolicySource::Network { checkpoint: c, stochastic },
        LoadedPolicy::Pn => PolicySource::Pn(PnGains::for_vehicle(&scenario.vehicle)),
    }
}

fn parse_cases(labels: &[String]) -> Result<Vec<ExperimentCase>, Failure> {
    let mut cases = Vec::new();
    for l in labels {
        if l.eq_ignore_ascii_case("all") {
            cases.extend(ExperimentCase::standard());
        } else {
            cases.push(l.parse().map_err(Failure::usage)?);
        }
    }
    Ok(cases)
}

/// Directory name for a case label.
pub fn case_dir_name(case: &ExperimentCase) -> String {
    case.to_string().replace('/', "-").replace('=', "_").replace('%', "pct")
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let cases = parse_cases(&a.cases)?;
    let base = load_scenario(a.config.as_deref())?;
    let loaded = load_policy(&a.source)?;
    let policy = source(&loaded, a.source.stochastic, &base);
    print_config(
        &format!("effective base scenario (seed {}, episodes {}, policy {})", a.seed, a.episodes, policy.name()),
        &base.to_toml(),
    );
    fs::create_dir_all(&a.out).map_err(Failure::run)?;
    fs::write(a.out.join("config.toml"), base.to_toml()).map_err(Failure::run)?;
    let opts = RunOptions { episodes: a.episodes, seed: a.seed, traces: a.traces };
    let mut summaries = Vec::new();
    for case in cases {
        let result = run_case(case, &base, &policy, opts).map_err(Failure::run)?;
        let dir = a.out.join(case_dir_name(&case));
        write_case(&dir, &result.records).map_err(Failure::run)?;
        fs::write(dir.join("scenario.toml"), result.scenario.to_toml()).map_err(Failure::run)?;
        summaries.push(result.summary);
    }
    write_summaries(&a.out, &summaries).map_err(Failure::run)?;
    print!("{}", summary_text(&summaries));
    write_manifest(&a.out, "eval", a.seed)
}

fn cmd_rollout(a: RolloutArgs) -> Outcome {
    let case: ExperimentCase = a.case.parse().map_err(Failure::usage)?;
    let base = load_scenario(a.config.as_deref())?;
    let loaded = load_policy(&a.source)?;
    let scenario = case_scenario(&base, case);
    let seed = eval_seed(a.seed, a.episode);
    print_config(&format!("effective scenario (case {case}, episode seed {seed})"), &scenario.to_toml());
    let mut env = Environment::new(scenario.clone()).with_trace();
    let record = match &loaded {
        LoadedPolicy::Network(c) => {
            let mut g = NeuralGuidance::new(&c.policy, &c.scaler, a.source.stochastic);
            run_episode(&mut env, &mut g, a.episode, seed)
        }
        LoadedPolicy::Pn => {
            let mut g = PnGuidance::new(PnGains::for_vehicle(&scenario.vehicle));
            run_episode(&mut env, &mut g, a.episode, seed)
        }
    }
    .map_err(Failure::run)?;
    if let Some(parent) = a.trace.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Failure::run)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(&a.trace).map_err(Failure::run)?);
    write_trace(&mut f, record.trace.as_deref().unwrap_or_default()).map_err(Failure::run)?;
    f.flush().map_err(Failure::run)?;
    println!(
        "{}: miss {:.3} m, speed {:.1} m/s, time {:.2} s, steps {}, reward {:.3}, diverts {}",
        record.reason,
        record.miss_distance,
        record.terminal_speed,
        record.time_of_flight,
        record.steps,
        record.total_reward,
        record.diverts
    );
    println!("trace: {}", a.trace.display());
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    let run = RunConfig::load(&a.config)?;
    print_config(&format!("{} is valid; effective config", a.config.display()), &run.to_toml());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckpointInfo {
    policy: crate::net::NetworkSpec,
    policy_params: usize,
    value: crate::net::NetworkSpec,
    value_params: usize,
    policy_std: Vec<f64>,
    scaler_count: u64,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
    trainer: Option<TrainerInfo>,
}

#[derive(Debug, Serialize)]
struct TrainerInfo {
    seed: u64,
    update: u64,
    lr_policy: f64,
    lr_value: f64,
    clip: f64,
    adam_steps: u64,
}

fn cmd_info(a: InfoArgs) -> Outcome {
    let c = Checkpoint::load(&a.checkpoint).map_err(Failure::usage)?;
    let info = CheckpointInfo {
        policy: *c.policy.0.spec(),
        policy_params: c.policy.0.params().len(),
        value: *c.value.0.spec(),
        value_params: c.value.0.params().len(),
        policy_std: c.policy.std(),
        scaler_count: c.scaler.count,
        scaler_mean: c.scaler.mean.clone(),
        scaler_std: c.scaler.variance().iter().map(|v| v.sqrt()).collect(),
        trainer: c.trainer.as_ref().map(|t| TrainerInfo {
            seed: t.seed,
            update: t.update,
            lr_policy: t.lr_policy,
            lr_value: t.lr_value,
            clip: t.clip,
            adam_steps: t.policy_adam.step,
        }),
    };
    let text = serde_json::to_string_pretty(&info).map_err(Failure::run)?;
    println!("{text}");
    if let Some(out) = &a.out {
        fs::write(out, &text).map_err(Failure::run)?;
    }
    Ok(())
}
