//! Seeded multi-run experiments and discounted-return learning curves.
//!
//! Every run owns its agent, environment copy and RNG, seeded with
//! `base_seed ^ run_index`. Runs are independent, so they execute in
//! parallel when the `parallel` feature is on; aggregation always reduces in
//! run-index order, which keeps output byte-identical across thread counts.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentConfig, Arch};
use crate::envs::{build_env, Scenario, ScenarioId, Variant};
use crate::error::{Error, Result};
use crate::mdp::{discounted_return, truncation_horizon, value_iteration, MdpSpec, VI_MAX_SWEEPS, VI_TOLERANCE};

pub const DEFAULT_RUNS: usize = 500;
pub const DEFAULT_HORIZON: usize = 88;
pub const SMALL_STEPS: usize = 2_000;
pub const LARGE_STEPS: usize = 10_000;

/// One curve in a comparison: a learning architecture or the fixed optimal
/// policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Arm {
    Optimal,
    Learner(Arch),
}

impl Arm {
    pub const ALL: [Arm; 5] = [
        Arm::Optimal,
        Arm::Learner(Arch::Ac),
        Arm::Learner(Arch::Sac),
        Arm::Learner(Arch::Tac),
        Arm::Learner(Arch::Esac),
    ];

    pub const LEARNERS: [Arm; 4] = [
        Arm::Learner(Arch::Ac),
        Arm::Learner(Arch::Sac),
        Arm::Learner(Arch::Tac),
        Arm::Learner(Arch::Esac),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Optimal => "VI",
            Arm::Learner(arch) => arch.label(),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vi" | "optimal" | "vi-optimal" => Ok(Arm::Optimal),
            other => other.parse().map(Arm::Learner),
        }
    }
}

impl TryFrom<String> for Arm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Arm> for String {
    fn from(arm: Arm) -> String {
        arm.label().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub runs: usize,
    pub steps_per_run: usize,
    /// Return truncation window.
    pub horizon: usize,
    pub base_seed: u64,
    pub env: ScenarioId,
    pub arms: Vec<Arm>,
    pub known_rewards: bool,
    pub full_softmax_grad: bool,
}

impl ExperimentConfig {
    /// Default protocol for an environment: γ = 0.9, α = β = 0.1, 500 runs,
    /// every arm for the small scenario and the learners for the large one.
    pub fn new(env: ScenarioId) -> Self {
        let (steps_per_run, arms) = match env.scenario {
            Scenario::Small18 => (SMALL_STEPS, Arm::ALL.to_vec()),
            Scenario::Large364 => (LARGE_STEPS, Arm::LEARNERS.to_vec()),
        };
        Self {
            gamma: 0.9,
            alpha: 0.1,
            beta: 0.1,
            runs: DEFAULT_RUNS,
            steps_per_run,
            horizon: DEFAULT_HORIZON,
            base_seed: 0,
            env,
            arms,
            known_rewards: false,
            full_softmax_grad: false,
        }
    }

    pub fn default_steps(scenario: Scenario) -> usize {
        match scenario {
            Scenario::Small18 => SMALL_STEPS,
            Scenario::Large364 => LARGE_STEPS,
        }
    }

    /// Window `⌈ln(1e-4)/ln γ⌉` that bounds the truncation error by
    /// `1e-4 · max|R| / (1 − γ)`.
    pub fn default_horizon(gamma: f64) -> usize {
        truncation_horizon(gamma, 1e-4)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("no architectures selected".into()));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            beta: self.beta,
            known_rewards: self.known_rewards,
            full_softmax_grad: self.full_softmax_grad,
        }
    }

    /// Number of curve points: `t ∈ [0, steps_per_run − horizon]`.
    pub fn curve_len(&self) -> usize {
        (self.steps_per_run + 1).saturating_sub(self.horizon)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(ScenarioId::new(Scenario::Small18, Variant::Standard))
    }
}

pub fn run_seed(base_seed: u64, run_index: usize) -> u64 {
    base_seed ^ run_index as u64
}

/// How runs are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon data-parallel over runs; `threads: None` uses the global pool.
    #[cfg(feature = "parallel")]
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel { threads: None }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Maps `f` over `0..n`, results in index order.
    fn map_indexed<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { threads } => {
                use rayon::prelude::*;
                let job = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
                match threads {
                    None => job(),
                    Some(t) => rayon::ThreadPoolBuilder::new()
                        .num_threads(t)
                        .build()
                        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
                        .install(job),
                }
            }
        }
    }
}

/// Mean and standard error of a statistic across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub mean: f64,
    pub stderr: f64,
}

fn mean_stderr(values: impl ExactSizeIterator<Item = f64> + Clone) -> WindowStat {
    let n = values.len();
    if n == 0 {
        return WindowStat {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    WindowStat { mean, stderr }
}

/// One aggregated point of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub mean_g: f64,
    pub stderr_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnCurve {
    pub arm: Arm,
    pub points: Vec<CurvePoint>,
}

impl ReturnCurve {
    /// Unweighted mean of `mean_g` over `range`.
    pub fn mean_over(&self, range: Range<usize>) -> f64 {
        let slice = &self.points[range];
        slice.iter().map(|p| p.mean_g).sum::<f64>() / slice.len() as f64
    }
}

/// Truncated discounted returns `G_t` of one reward sequence for every `t`
/// with a full window.
pub fn return_series(rewards: &[f64], gamma: f64, horizon: usize) -> Vec<f64> {
    let points = (rewards.len() + 1).saturating_sub(horizon);
    (0..points)
        .map(|t| discounted_return(rewards, t, gamma, horizon).expect("t < len"))
        .collect()
}

/// Per-run return series of one arm.
#[derive(Debug, Clone)]
pub struct ArmReturns {
    pub arm: Arm,
    pub series: Vec<Vec<f64>>,
}

impl ArmReturns {
    pub fn curve(&self) -> Result<ReturnCurve> {
        curve_from_series(self.arm, &self.series)
    }

    /// Per-run average of `G_t` over `range`, then mean and standard error
    /// across runs.
    pub fn window(&self, range: Range<usize>) -> WindowStat {
        let width = range.len() as f64;
        let per_run: Vec<f64> = self
            .series
            .iter()
            .map(|s| s[range.clone()].iter().sum::<f64>() / width)
            .collect();
        mean_stderr(per_run.iter().copied())
    }
}

fn curve_from_series(arm: Arm, series: &[Vec<f64>]) -> Result<ReturnCurve> {
    let len = series.first().map_or(0, Vec::len);
    if let Some(bad) = series.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    let points = (0..len)
        .map(|t| {
            let stat = mean_stderr(series.iter().map(|s| s[t]));
            CurvePoint {
                t,
                mean_g: stat.mean,
                stderr_g: stat.stderr,
            }
        })
        .collect();
    Ok(ReturnCurve { arm, points })
}

/// Turns per-run reward sequences into a mean/stderr return curve.
pub fn aggregate(config: &ExperimentConfig, arm: Arm, rewards: &[Vec<f64>]) -> Result<ReturnCurve> {
    let len = rewards.first().map_or(0, Vec::len);
    if let Some(bad) = rewards.iter().find(|r| r.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    let series: Vec<Vec<f64>> = rewards
        .iter()
        .map(|r| return_series(r, config.gamma, config.horizon))
        .collect();
    curve_from_series(arm, &series)
}

/// Environment and optimal policy prepared once for all runs of a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    env: MdpSpec,
    optimal: Option<Vec<usize>>,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = build_env(config.env).with_discount(config.gamma)?;
        let optimal = if config.arms.contains(&Arm::Optimal) {
            Some(value_iteration(&env, VI_TOLERANCE, VI_MAX_SWEEPS)?.policy)
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            env,
            optimal,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn env(&self) -> &MdpSpec {
        &self.env
    }

    pub fn optimal_policy(&self) -> Option<&[usize]> {
        self.optimal.as_deref()
    }

    /// Reward sequence of one run: uniform start state, then
    /// `steps_per_run` steps of the arm.
    pub fn run_single(&self, arm: Arm, run_index: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(self.config.base_seed, run_index));
        let steps = self.config.steps_per_run;
        let mut rewards = Vec::with_capacity(steps);
        let mut s = rng.gen_range(0..self.env.num_states());
        let wrap = |step: usize, e: Error| Error::Run {
            arch: arm.label().to_string(),
            run: run_index,
            step,
            source: Box::new(e),
        };
        match arm {
            Arm::Optimal => {
                let policy = match &self.optimal {
                    Some(p) => p.clone(),
                    None => value_iteration(&self.env, VI_TOLERANCE, VI_MAX_SWEEPS)?.policy,
                };
                for step in 0..steps {
                    let a = policy[s];
                    rewards.push(self.env.reward(s, a).map_err(|e| wrap(step, e))?);
                    s = self.env.sample_next(s, a, &mut rng).map_err(|e| wrap(step, e))?;
                }
            }
            Arm::Learner(arch) => {
                let mut agent = Agent::new(arch, self.env.actions(), &self.config.agent_config());
                for step in 0..steps {
                    let rec = agent.step(&self.env, s, &mut rng).map_err(|e| wrap(step, e))?;
                    rewards.push(rec.reward);
                    s = rec.next_state;
                }
            }
        }
        Ok(rewards)
    }

    /// Return series of every run of `arm`.
    pub fn run_arm(&self, arm: Arm, exec: Execution) -> Result<ArmReturns> {
        let series = exec.map_indexed(self.config.runs, |run| {
            let rewards = self.run_single(arm, run)?;
            Ok(return_series(&rewards, self.config.gamma, self.config.horizon))
        })?;
        Ok(ArmReturns { arm, series })
    }

    pub fn curves(&self, exec: Execution) -> Result<CurveSet> {
        let curves = self
            .config
            .arms
            .iter()
            .map(|&arm| self.run_arm(arm, exec)?.curve())
            .collect::<Result<_>>()?;
        Ok(CurveSet::new(curves))
    }
}

/// Reward sequence of a single run, preparing the environment on the fly.
pub fn run_single(config: &ExperimentConfig, arm: Arm, run_index: usize) -> Result<Vec<f64>> {
    Experiment::prepare(config)?.run_single(arm, run_index)
}

/// Runs every `(arm, run)` pair, aggregates, and writes the CSV to `out`
/// when given.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<CurveSet> {
    let curves = Experiment::prepare(config)?.curves(exec)?;
    if let Some(path) = out {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        curves.write_csv(&mut file)?;
        file.flush()?;
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub curves: Vec<ReturnCurve>,
}

impl CurveSet {
    /// Sorts curves by arm label.
    pub fn new(mut curves: Vec<ReturnCurve>) -> Self {
        curves.sort_by(|a, b| a.arm.label().cmp(b.arm.label()));
        Self { curves }
    }

    pub fn get(&self, arm: Arm) -> Option<&ReturnCurve> {
        self.curves.iter().find(|c| c.arm == arm)
    }

    /// `arch,t,mean_G,stderr_G`, rows by (arch, t), 10 significant digits.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "arch,t,mean_G,stderr_G")?;
        for curve in &self.curves {
            for p in &curve.points {
                writeln!(
                    out,
                    "{},{},{},{}",
                    curve.arm.label(),
                    p.t,
                    format_significant(p.mean_g, 10),
                    format_significant(p.stderr_g, 10)
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// `printf("%.{digits}g")` formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
