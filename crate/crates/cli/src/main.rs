use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use tabular_ac::harness::{CurveSet, Execution, Experiment, ExperimentConfig, DEFAULT_HORIZON, DEFAULT_RUNS};
use tabular_ac::mdp::{value_iteration, MdpSpec, VI_MAX_SWEEPS, VI_TOLERANCE};
use tabular_ac::{build_env, Arm, Error, Scenario, ScenarioId, Variant};

/// Tabular actor-critic experiments: AC, SAC, TAC and ESAC against value
/// iteration on the 18- and 364-state allocation environments.
#[derive(Debug, Parser)]
#[command(name = "tabular-ac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an environment with value iteration; print V and the optimal
    /// action per state.
    Vi(ViArgs),
    /// Run one architecture and emit its return curve as CSV.
    Run(RunArgs),
    /// Run several architectures with shared seeds and emit one combined CSV.
    Compare(CompareArgs),
    /// Write an environment in the MDP spec file format.
    EnvDump(EnvDumpArgs),
    /// Check a spec file's invariants.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
struct EnvArgs {
    /// Environment: small18 or large364 [default: small18]
    #[arg(long)]
    env: Option<Scenario>,
    /// Variant: standard or rare [default: standard]
    #[arg(long)]
    variant: Option<Variant>,
    /// Discount factor γ [default: 0.9]
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Independent runs per architecture [default: 500]
    #[arg(long)]
    runs: Option<usize>,
    /// Steps per run [default: 2000 for small18, 10000 for large364]
    #[arg(long)]
    steps: Option<usize>,
    /// Base seed; run i uses base_seed XOR i [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Critic learning rate α [default: 0.1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Actor step size β [default: 0.1]
    #[arg(long)]
    beta: Option<f64>,
    /// Return truncation window [default: 88]
    #[arg(long)]
    horizon: Option<usize>,
    /// CSV output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use true rewards in model-based backups instead of estimated ones
    /// [default: false]
    #[arg(long)]
    known_rewards: bool,
    /// Update every logit at the state with the full log-softmax gradient
    /// [default: false]
    #[arg(long)]
    full_softmax_grad: bool,
    /// TOML config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses all cores [default: 0]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Architecture: ac, sac, tac, esac or vi
    #[arg(long)]
    arch: Option<Arm>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated architectures [default: vi,ac,sac,tac,esac for
    /// small18; ac,sac,tac,esac for large364]
    #[arg(long, value_delimiter = ',')]
    arch: Vec<Arm>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
struct ViArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Solve an MDP spec file instead of a built-in environment
    #[arg(long, conflicts_with_all = ["env", "variant"])]
    spec: Option<PathBuf>,
    /// Sup-norm stopping tolerance [default: 1e-9]
    #[arg(long)]
    tolerance: Option<f64>,
    /// Sweep limit [default: 10000]
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Write `state,value,action` CSV here
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file; only env, variant and gamma are read
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnvDumpArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Spec file to check
    file: PathBuf,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    env: Option<Scenario>,
    variant: Option<Variant>,
    arch: Option<Vec<Arm>>,
    runs: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    horizon: Option<usize>,
    known_rewards: Option<bool>,
    full_softmax_grad: Option<bool>,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::Config)?;
        toml::from_str(&text)
            .map_err(|e| anyhow!("invalid config {}: {}", path.display(), e.message()))
            .map_err(Failure::Config)
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, config or input files (exit 1).
    Config(anyhow::Error),
    /// Failure while computing (exit 2).
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::Run { .. } => Failure::Runtime(e.into()),
            _ => Failure::Config(e.into()),
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

struct Resolved {
    config: ExperimentConfig,
    exec: Execution,
    out: Option<PathBuf>,
}

fn resolve_env(cli: &EnvArgs, file: &FileConfig) -> ScenarioId {
    ScenarioId::new(
        cli.env.or(file.env).unwrap_or(Scenario::Small18),
        cli.variant.or(file.variant).unwrap_or(Variant::Standard),
    )
}

fn execution(threads: usize) -> Execution {
    #[cfg(feature = "parallel")]
    {
        Execution::Parallel {
            threads: (threads > 0).then_some(threads),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Execution::Sequential
    }
}

fn resolve(args: &ExperimentArgs, arms: Option<Vec<Arm>>) -> Result<Resolved, Failure> {
    let file = FileConfig::load(args.config.as_deref())?;
    let env = resolve_env(&args.env, &file);
    let mut config = ExperimentConfig::new(env);
    config.gamma = args.env.gamma.or(file.gamma).unwrap_or(config.gamma);
    config.alpha = args.alpha.or(file.alpha).unwrap_or(config.alpha);
    config.beta = args.beta.or(file.beta).unwrap_or(config.beta);
    config.runs = args.runs.or(file.runs).unwrap_or(DEFAULT_RUNS);
    config.steps_per_run = args.steps.or(file.steps).unwrap_or(config.steps_per_run);
    config.horizon = args.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
    config.base_seed = args.seed.or(file.seed).unwrap_or(0);
    config.known_rewards = args.known_rewards || file.known_rewards.unwrap_or(false);
    config.full_softmax_grad = args.full_softmax_grad || file.full_softmax_grad.unwrap_or(false);
    if let Some(arms) = arms.or(file.arch) {
        config.arms = arms;
    }
    config.arms.sort_by_key(|a| a.label());
    config.arms.dedup();
    config.validate()?;
    Ok(Resolved {
        config,
        exec: execution(args.threads.or(file.threads).unwrap_or(0)),
        out: args.out.clone().or(file.out),
    })
}

/// Progress and summary go to stdout, unless the CSV itself does.
fn report(to_stdout: bool, line: &str) {
    if to_stdout {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn experiment(resolved: Resolved) -> Result<(), Failure> {
    let Resolved { config, exec, out } = resolved;
    let log = out.is_some();
    let exp = Experiment::prepare(&config)?;
    report(
        log,
        &format!(
            "{}: {} runs x {} steps, seed {}, gamma {}, alpha {}, beta {}",
            config.env, config.runs, config.steps_per_run, config.base_seed, config.gamma, config.alpha, config.beta
        ),
    );
    let len = config.curve_len();
    let tail = len.div_ceil(10);
    let mut curves = Vec::new();
    for &arm in &config.arms {
        let returns = exp.run_arm(arm, exec)?;
        if len > 0 {
            let last = returns.window(len - tail..len);
            report(
                log,
                &format!(
                    "{:>4}: mean G over last {tail} of {len} points = {:.4} ± {:.4}",
                    arm.label(),
                    last.mean,
                    last.stderr
                ),
            );
        }
        curves.push(returns.curve()?);
    }
    let curves = CurveSet::new(curves);
    match out {
        Some(path) => {
            write_file(&path, |w| curves.write_csv(w))?;
            println!("wrote {}", path.display());
        }
        None => write_stdout(&curves.to_csv_string())?,
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut lock = io::stdout().lock();
    match lock.write_all(text.as_bytes()).and_then(|_| lock.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let file = fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::Config)?;
    let mut w = io::BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let arms = args.arch.map(|a| vec![a]);
    let resolved = resolve(&args.experiment, arms)?;
    if resolved.config.arms.len() != 1 {
        return Err(Failure::Config(anyhow!(
            "run takes exactly one architecture (--arch); use compare for several"
        )));
    }
    experiment(resolved)
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let arms = (!args.arch.is_empty()).then_some(args.arch);
    experiment(resolve(&args.experiment, arms)?)
}

fn cmd_vi(args: ViArgs) -> Result<(), Failure> {
    let file = FileConfig::load(args.config.as_deref())?;
    let (label, mut spec) = match &args.spec {
        Some(path) => (
            path.display().to_string(),
            MdpSpec::load(path)
                .with_context(|| format!("cannot load {}", path.display()))
                .map_err(Failure::Config)?,
        ),
        None => {
            let id = resolve_env(&args.env, &file);
            (id.to_string(), build_env(id))
        }
    };
    if let Some(gamma) = args.env.gamma.or(file.gamma) {
        spec = spec.with_discount(gamma)?;
    }
    let tolerance = args.tolerance.unwrap_or(VI_TOLERANCE);
    let max_sweeps = args.max_sweeps.unwrap_or(VI_MAX_SWEEPS);
    let out = value_iteration(&spec, tolerance, max_sweeps)?;
    let mut table = format!(
        "{label}: {} states, gamma {}, converged in {} sweeps, residual {:e}\nstate value action\n",
        spec.num_states(),
        spec.discount(),
        out.sweeps,
        out.residual
    );
    for (s, (v, a)) in out.values.as_slice().iter().zip(&out.policy).enumerate() {
        table.push_str(&format!("{s} {v:.6} {a}\n"));
    }
    write_stdout(&table)?;
    if let Some(path) = &args.out {
        write_file(path, |w| {
            writeln!(w, "state,value,action")?;
            for (s, (v, a)) in out.values.as_slice().iter().zip(&out.policy).enumerate() {
                writeln!(w, "{s},{v},{a}")?;
            }
            Ok(())
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_env_dump(args: EnvDumpArgs) -> Result<(), Failure> {
    let id = resolve_env(&args.env, &FileConfig::default());
    let mut spec = build_env(id);
    if let Some(gamma) = args.env.gamma {
        spec = spec.with_discount(gamma)?;
    }
    let text = spec.to_spec_string();
    match &args.out {
        Some(path) => {
            write_file(path, |w| w.write_all(text.as_bytes()))?;
            println!("wrote {id} to {}", path.display());
        }
        None => write_stdout(&text)?,
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let spec = MdpSpec::load(&args.file)
        .with_context(|| format!("{} is not a valid MDP spec", args.file.display()))
        .map_err(Failure::Config)?;
    println!(
        "{}: ok, {} states, {} state-action pairs, gamma {}",
        args.file.display(),
        spec.num_states(),
        spec.actions().num_pairs(),
        spec.discount()
    );
    Ok(())
}

/// Joins an error chain into one line, skipping causes the outer message
/// already spells out.
fn one_line(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Vi(args) => cmd_vi(args),
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::EnvDump(args) => cmd_env_dump(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(2)
        }
    }
}
