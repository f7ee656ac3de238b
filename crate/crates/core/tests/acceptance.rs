//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its own PASS/FAIL line; exits nonzero if any fails.
//! Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabular_ac::agents::{estimate_action_values, sarsa_update, tuned_value};
use tabular_ac::envs::raw_transition_prob;
use tabular_ac::harness::{run_experiment, ArmReturns, Execution, Experiment, ExperimentConfig};
use tabular_ac::mdp::{value_iteration, VI_MAX_SWEEPS, VI_TOLERANCE};
use tabular_ac::{
    build_env, ActionSets, Agent, AgentConfig, Arch, Arm, MdpSpec, QTable, Scenario, ScenarioId, SoftmaxPolicy,
    TransitionModel, Variant,
};

const SMALL_STANDARD: ScenarioId = ScenarioId::new(Scenario::Small18, Variant::Standard);
const SMALL_RARE: ScenarioId = ScenarioId::new(Scenario::Small18, Variant::RareGood);
const LARGE_STANDARD: ScenarioId = ScenarioId::new(Scenario::Large364, Variant::Standard);
const LARGE_RARE: ScenarioId = ScenarioId::new(Scenario::Large364, Variant::RareGood);
const ALL_ENVS: [ScenarioId; 4] = [SMALL_STANDARD, SMALL_RARE, LARGE_STANDARD, LARGE_RARE];

const AC: Arm = Arm::Learner(Arch::Ac);
const SAC: Arm = Arm::Learner(Arch::Sac);
const TAC: Arm = Arm::Learner(Arch::Tac);
const ESAC: Arm = Arm::Learner(Arch::Esac);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within_budget(elapsed: Duration, limit_secs: u64, mut outcome: Outcome) -> Outcome {
    if elapsed > Duration::from_secs(limit_secs) {
        outcome.pass = false;
        outcome.detail.push_str(&format!("; exceeded {limit_secs}s budget"));
    }
    outcome
}

// 1 -----------------------------------------------------------------------

fn environment_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for id in ALL_ENVS {
        let env = build_env(id);
        for s in 0..env.num_states() {
            for a in 0..env.num_actions(s).unwrap() {
                let sum: f64 = env.successors(s, a).unwrap().iter().map(|&(_, p)| p).sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
    }
    let small = build_env(SMALL_STANDARD);
    let large = build_env(LARGE_STANDARD);
    let large_rare = build_env(LARGE_RARE);
    // (observed, printed value)
    let spots = [
        (raw_transition_prob(SMALL_STANDARD, 13, 0, 15).unwrap(), 0.1739),
        (small.reward(10, 1).unwrap(), 8.5067),
        (small.reward(16, 2).unwrap(), 9.5047),
        // s = 100: w^p = 12, z^p = 0; a = 1, w = 2, z = 3 lands on 11
        (
            raw_transition_prob(LARGE_STANDARD, 100, 1, 11).unwrap(),
            0.1174 * 0.1345,
        ),
        (large.reward(363, 6).unwrap(), 12.2652),
        (large_rare.reward(363, 6).unwrap(), 25.5526),
    ];
    let spot_err = spots.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let outcome = Outcome::new(
        worst <= 1e-12 && spot_err <= 1e-4,
        format!("max |row sum - 1| = {worst:.2e}, max spot-check error = {spot_err:.2e}, {elapsed:.2?}"),
    );
    within_budget(elapsed, 5, outcome)
}

// 2 -----------------------------------------------------------------------

fn random_mdp(rng: &mut impl Rng, states: usize, actions: usize, gamma: f64) -> MdpSpec {
    let p: Vec<Vec<Vec<f64>>> = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| {
                    // sparse-ish rows so deterministic transitions also occur
                    let raw: Vec<f64> = (0..states)
                        .map(|_| if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 })
                        .collect();
                    let total: f64 = raw.iter().sum();
                    if total == 0.0 {
                        let mut row = vec![0.0; states];
                        row[rng.gen_range(0..states)] = 1.0;
                        row
                    } else {
                        raw.iter().map(|x| x / total).collect()
                    }
                })
                .collect()
        })
        .collect();
    let rewards = (0..states)
        .map(|_| (0..actions).map(|_| rng.gen_range(-5.0..10.0)).collect())
        .collect();
    MdpSpec::from_dense(&p, rewards, gamma).unwrap()
}

/// Exact `V^π` of a deterministic policy via `(I − γP_π)V = r_π`.
fn evaluate_policy(spec: &MdpSpec, policy: &[usize]) -> DVector<f64> {
    let n = spec.num_states();
    let gamma = spec.discount();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        r[s] = spec.reward(s, policy[s]).unwrap();
        for next in 0..n {
            m[(s, next)] -= gamma * spec.prob(s, policy[s], next).unwrap();
        }
    }
    m.lu().solve(&r).expect("I - γP is nonsingular for γ < 1")
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (states, actions) = (4usize, 2usize);
    let mut max_value_err = 0.0f64;
    let mut policy_mismatches = 0;
    for _ in 0..200 {
        let gamma = rng.gen_range(0.5..0.95);
        let spec = random_mdp(&mut rng, states, actions, gamma);
        let vi = value_iteration(&spec, VI_TOLERANCE, VI_MAX_SWEEPS).unwrap();

        let mut best = DVector::from_element(states, f64::NEG_INFINITY);
        let mut values = Vec::new();
        for code in 0..actions.pow(states as u32) {
            let policy: Vec<usize> = (0..states).map(|s| (code >> s) & 1).collect();
            let v = evaluate_policy(&spec, &policy);
            best = best.sup(&v);
            values.push((policy, v));
        }
        for s in 0..states {
            max_value_err = max_value_err.max((vi.values.get(s).unwrap() - best[s]).abs());
        }
        // the returned policy must be one of the optimal deterministic policies
        let optimal: Vec<&Vec<usize>> = values
            .iter()
            .filter(|(_, v)| (v - &best).amax() <= 1e-6)
            .map(|(p, _)| p)
            .collect();
        if !optimal.contains(&&vi.policy) {
            policy_mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let outcome = Outcome::new(
        max_value_err <= 1e-6 && policy_mismatches == 0,
        format!(
            "200 MDPs, max |V_vi - V_brute| = {max_value_err:.2e}, policy mismatches = {policy_mismatches}, {elapsed:.2?}"
        ),
    );
    within_budget(elapsed, 30, outcome)
}

// 3 -----------------------------------------------------------------------

fn backup_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut max_err = 0.0f64;
    let mut checked = 0;
    for _ in 0..200 {
        let states = rng.gen_range(2..12);
        let counts: Vec<usize> = (0..states).map(|_| rng.gen_range(1..5)).collect();
        let p: Vec<Vec<Vec<f64>>> = counts
            .iter()
            .map(|&k| {
                (0..k)
                    .map(|_| {
                        let raw: Vec<f64> = (0..states).map(|_| rng.gen::<f64>()).collect();
                        let total: f64 = raw.iter().sum();
                        raw.iter().map(|x| x / total).collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = counts
            .iter()
            .map(|&k| (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let gamma = rng.gen_range(0.0..0.99);
        let model = MdpSpec::from_dense(&p, rewards, gamma).unwrap();
        let sets = ActionSets::new(&counts).unwrap();
        let mut policy = SoftmaxPolicy::uniform(&sets, 0.1);
        let mut q = QTable::zeros(&sets);
        for (s, &k) in counts.iter().enumerate() {
            for a in 0..k {
                policy.set_theta(s, a, rng.gen_range(-2.0..2.0)).unwrap();
                q.set(s, a, rng.gen_range(-10.0..10.0)).unwrap();
            }
        }
        let v: Vec<f64> = (0..states)
            .map(|s| {
                (0..counts[s])
                    .map(|b| policy.prob(s, b).unwrap() * q.get(s, b).unwrap())
                    .sum()
            })
            .collect();
        for (s, &k) in counts.iter().enumerate() {
            let estimates = estimate_action_values(&model, &policy, &q, s, gamma).unwrap();
            for a in 0..k {
                let r = model.reward(s, a).unwrap();
                let direct: f64 = (0..states).map(|n| p[s][a][n] * (r + gamma * v[n])).sum();
                let tuned = tuned_value(&model, &policy, &q, s, a, gamma).unwrap();
                max_err = max_err.max((tuned - direct).abs()).max((estimates[a] - direct).abs());
                checked += 1;
            }
        }
    }
    Outcome::new(
        max_err <= 1e-12,
        format!("{checked} pairs, max |backup - enumeration| = {max_err:.2e}"),
    )
}

// 4 -----------------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut max_err = 0.0f64;
    for _ in 0..1000 {
        let counts: Vec<usize> = (0..3).map(|_| rng.gen_range(1..8)).collect();
        let sets = ActionSets::new(&counts).unwrap();
        let mut policy = SoftmaxPolicy::uniform(&sets, 0.1);
        for (s, &k) in counts.iter().enumerate() {
            for a in 0..k {
                policy.set_theta(s, a, rng.gen_range(-4.0..4.0)).unwrap();
            }
        }
        let s = rng.gen_range(0..counts.len());
        let a = rng.gen_range(0..counts[s]);
        let theta = policy.theta(s, a).unwrap();
        let mut log_prob_at = |t: f64| {
            policy.set_theta(s, a, t).unwrap();
            policy.prob(s, a).unwrap().ln()
        };
        let fd = (log_prob_at(theta + h) - log_prob_at(theta - h)) / (2.0 * h);
        policy.set_theta(s, a, theta).unwrap();
        let analytic = policy.log_policy_gradient(s, a).unwrap();
        max_err = max_err.max((analytic - fd).abs());
    }
    Outcome::new(
        max_err <= 1e-6,
        format!("1000 draws, max |analytic - FD| = {max_err:.2e}"),
    )
}

// 5 -----------------------------------------------------------------------

fn optimal_flatness() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        arms: vec![Arm::Optimal],
        ..ExperimentConfig::new(SMALL_STANDARD)
    };
    let curves = run_experiment(&config, Execution::default(), None).unwrap();
    let curve = curves.get(Arm::Optimal).unwrap();
    let means = curve.points.iter().map(|p| p.mean_g);
    let range = means.clone().fold(f64::NEG_INFINITY, f64::max) - means.fold(f64::INFINITY, f64::min);
    let max_se = curve.points.iter().map(|p| p.stderr_g).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let outcome = Outcome::new(
        range <= 3.0 * max_se,
        format!(
            "mean_G range = {range:.4}, 3 x max stderr = {:.4} ({} points, 500 runs), {elapsed:.2?}",
            3.0 * max_se,
            curve.points.len()
        ),
    );
    within_budget(elapsed, 60, outcome)
}

// 6-8 ---------------------------------------------------------------------

struct Comparison {
    results: Vec<ArmReturns>,
    len: usize,
    steps: usize,
}

impl Comparison {
    fn run(env: ScenarioId, runs: usize) -> Self {
        let config = ExperimentConfig {
            runs,
            arms: Arm::LEARNERS.to_vec(),
            ..ExperimentConfig::new(env)
        };
        let exp = Experiment::prepare(&config).unwrap();
        let results = config
            .arms
            .iter()
            .map(|&arm| exp.run_arm(arm, Execution::default()).unwrap())
            .collect();
        Self {
            results,
            len: config.curve_len(),
            steps: config.steps_per_run,
        }
    }

    fn arm(&self, arm: Arm) -> &ArmReturns {
        self.results.iter().find(|r| r.arm == arm).unwrap()
    }

    fn final_window(&self, arm: Arm) -> (f64, f64) {
        let width = self.len.div_ceil(10);
        let stat = self.arm(arm).window(self.len - width..self.len);
        (stat.mean, stat.stderr)
    }

    fn early_window(&self, arm: Arm) -> (f64, f64) {
        let stat = self.arm(arm).window(0..self.steps / 10);
        (stat.mean, stat.stderr)
    }

    /// First `t` at which the mean curve reaches 90% of its final-window
    /// level.
    fn steps_to_ninety_percent(&self, arm: Arm) -> Option<usize> {
        let target = 0.9 * self.final_window(arm).0;
        let curve = self.arm(arm).curve().unwrap();
        curve.points.iter().position(|p| p.mean_g >= target)
    }
}

/// `a − b` beyond twice the combined standard error.
fn separated(a: (f64, f64), b: (f64, f64)) -> (bool, String) {
    let se = (a.1 * a.1 + b.1 * b.1).sqrt();
    (
        a.0 - b.0 > 2.0 * se,
        format!("{:.4} vs {:.4} (2se {:.4})", a.0, b.0, 2.0 * se),
    )
}

fn small_ordering() -> Outcome {
    let start = Instant::now();
    let c = Comparison::run(SMALL_STANDARD, 500);
    let [ac, sac, tac, esac] = [AC, SAC, TAC, ESAC].map(|a| c.final_window(a));
    let (esac_sac, d1) = separated(esac, sac);
    let (sac_ac, d2) = separated(sac, ac);
    let (esac_tac, d3) = separated(esac, tac);
    let t_esac = c.steps_to_ninety_percent(ESAC);
    let t_ac = c.steps_to_ninety_percent(AC);
    let faster = matches!((t_esac, t_ac), (Some(e), Some(a)) if e < a);
    let elapsed = start.elapsed();
    let outcome = Outcome::new(
        esac_sac && sac_ac && esac_tac && faster,
        format!(
            "ESAC>SAC [{d1}] {esac_sac}; SAC>=AC [{d2}] {sac_ac}; ESAC>TAC [{d3}] {esac_tac}; \
             90% reached at ESAC {t_esac:?} vs AC {t_ac:?}; {elapsed:.2?}"
        ),
    );
    within_budget(elapsed, 300, outcome)
}

fn large_findings() -> Outcome {
    let start = Instant::now();
    let c = Comparison::run(LARGE_STANDARD, 100);
    let (early, d1) = separated(c.early_window(TAC), c.early_window(AC));
    let finals = [AC, SAC, TAC, ESAC].map(|a| c.final_window(a));
    let (late, d2) = separated(finals[1], finals[0]);
    let esac_max = finals[..3].iter().all(|f| finals[3].0 > f.0);
    let elapsed = start.elapsed();
    let outcome = Outcome::new(
        early && late && esac_max,
        format!(
            "TAC>AC first 10% [{d1}] {early}; SAC>AC final [{d2}] {late}; ESAC max final \
             ({:.4} vs AC {:.4}, SAC {:.4}, TAC {:.4}) {esac_max}; {elapsed:.2?}",
            finals[3].0, finals[0].0, finals[1].0, finals[2].0
        ),
    );
    within_budget(elapsed, 1200, outcome)
}

fn rare_findings() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for env in [SMALL_RARE, LARGE_RARE] {
        let c = Comparison::run(env, 100);
        let [ac, sac, tac, esac] = [AC, SAC, TAC, ESAC].map(|a| c.final_window(a));
        let checks = [
            ("ESAC>SAC", separated(esac, sac)),
            ("ESAC>TAC", separated(esac, tac)),
            ("ESAC>AC", separated(esac, ac)),
            ("SAC>TAC", separated(sac, tac)),
            ("SAC>AC", separated(sac, ac)),
        ];
        let mut parts = Vec::new();
        for (name, (ok, d)) in checks {
            pass &= ok;
            parts.push(format!("{name} [{d}] {ok}"));
        }
        details.push(format!("{env}: {}", parts.join("; ")));
    }
    details.push(format!("{:.2?}", start.elapsed()));
    Outcome::new(pass, details.join(" | "))
}

// 9 -----------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (env, runs, steps) in [(SMALL_STANDARD, 40, 600), (LARGE_RARE, 12, 400)] {
        let config = ExperimentConfig {
            runs,
            steps_per_run: steps,
            base_seed: 7,
            arms: if env.scenario == Scenario::Small18 {
                Arm::ALL.to_vec()
            } else {
                Arm::LEARNERS.to_vec()
            },
            ..ExperimentConfig::new(env)
        };
        let mut schedules = vec![Execution::Sequential, Execution::Sequential];
        #[cfg(feature = "parallel")]
        schedules.extend([
            Execution::Parallel { threads: Some(1) },
            Execution::Parallel { threads: Some(3) },
            Execution::Parallel { threads: None },
        ]);
        let outputs: Vec<Vec<u8>> = schedules
            .iter()
            .enumerate()
            .map(|(i, &exec)| {
                let path = dir
                    .path()
                    .join(format!("{}-{i}.csv", env.to_string().replace('/', "-")));
                run_experiment(&config, exec, Some(&path)).unwrap();
                std::fs::read(&path).unwrap()
            })
            .collect();
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        pass &= same;
        detail.push(format!("{env}: {} schedules identical = {same}", outputs.len()));
    }
    Outcome::new(pass, detail.join("; "))
}

// 10 ----------------------------------------------------------------------

fn invariant_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let envs: Vec<MdpSpec> = ALL_ENVS.iter().map(|&id| build_env(id)).collect();
    let mut violations = Vec::new();
    let mut steps = 0;
    let config = AgentConfig::default();
    let mut note = |msg: String| {
        if violations.len() < 5 {
            violations.push(msg);
        }
    };
    let mut total_violations = 0usize;
    for arch in Arch::ALL {
        let mut done = 0;
        while done < 10_000 {
            let env = &envs[rng.gen_range(0..envs.len())];
            let mut agent = Agent::new(arch, env.actions(), &config);
            let mut s = rng.gen_range(0..env.num_states());
            for _ in 0..500 {
                let q_before = agent.q().clone();
                let theta_before = agent.policy().to_grid();
                let pending_before = agent.pending();
                let rec = agent.step(env, s, &mut rng).unwrap();
                let mut bad = |what: &str| {
                    total_violations += 1;
                    note(format!("{arch} step {done}: {what}"));
                };

                // softmax normalization at every state the step touched
                for state in [rec.state, rec.next_state] {
                    let probs = agent.policy().action_probabilities(state).unwrap();
                    let sum: f64 = probs.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        bad("softmax not normalized");
                    }
                }

                // model rows of the observed pair stay stochastic
                if let Some(model) = agent.model() {
                    let mut sum = 0.0;
                    model
                        .for_each_successor(rec.state, rec.action, &mut |_, p| sum += p)
                        .unwrap();
                    if (sum - 1.0).abs() > 1e-12 {
                        bad("model row not stochastic");
                    }
                }

                // Q changes only at the entries the architecture names
                let allowed_q = |qs: usize, qa: usize| {
                    (qs, qa) == (rec.state, rec.action)
                        || (arch == Arch::Esac && qs == rec.state)
                        || (arch == Arch::Tac && rec.tuned.map(|(ts, ta, _)| (ts, ta)) == Some((qs, qa)))
                };
                for qs in 0..env.num_states() {
                    for qa in 0..env.num_actions(qs).unwrap() {
                        if q_before.get(qs, qa).unwrap() != agent.q().get(qs, qa).unwrap() && !allowed_q(qs, qa) {
                            bad("Q changed outside named entries");
                        }
                    }
                }

                // θ changes only at the actor's named pair
                let actor_pair = match arch {
                    Arch::Ac => Some((rec.state, rec.action)),
                    Arch::Sac | Arch::Esac => rec.greedy.map(|g| (rec.state, g)),
                    Arch::Tac => pending_before,
                };
                let theta_after = agent.policy().to_grid();
                for ts in 0..env.num_states() {
                    for ta in 0..env.num_actions(ts).unwrap() {
                        if theta_before.get(ts, ta) != theta_after.get(ts, ta) && Some((ts, ta)) != actor_pair {
                            bad("theta changed outside named pair");
                        }
                    }
                }

                // ESAC: the row equals the estimator output except for the
                // SARSA-updated entry, which is the SARSA step applied to it
                if let Some(est) = &rec.estimates {
                    let row = agent.q().row(rec.state).unwrap();
                    for (b, (&q, &e)) in row.iter().zip(est).enumerate() {
                        if b != rec.action && q != e {
                            bad("ESAC overwrite not preserved");
                        }
                    }
                    let next_q = if rec.next_state == rec.state {
                        est[rec.next_action]
                    } else {
                        agent.q().get(rec.next_state, rec.next_action).unwrap()
                    };
                    let mut replay = QTable::zeros(env.actions());
                    replay.set(rec.state, rec.action, est[rec.action]).unwrap();
                    if (rec.next_state, rec.next_action) != (rec.state, rec.action) {
                        replay.set(rec.next_state, rec.next_action, next_q).unwrap();
                    }
                    sarsa_update(
                        &mut replay,
                        rec.state,
                        rec.action,
                        rec.reward,
                        rec.next_state,
                        rec.next_action,
                        config.alpha,
                        config.gamma,
                    )
                    .unwrap();
                    if replay.get(rec.state, rec.action).unwrap() != row[rec.action] {
                        bad("ESAC critic entry differs from overwrite + SARSA");
                    }
                }

                // direct single-entry contract of the SARSA update
                let mut q = agent.q().clone();
                let before = q.clone();
                let (ss, sa) = (rng.gen_range(0..env.num_states()), 0);
                let (ns, na) = (rng.gen_range(0..env.num_states()), 0);
                sarsa_update(&mut q, ss, sa, rng.gen_range(-1.0..1.0), ns, na, 0.3, 0.9).unwrap();
                let changed = before
                    .as_slice()
                    .iter()
                    .zip(q.as_slice())
                    .enumerate()
                    .filter(|(_, (x, y))| x != y)
                    .map(|(i, _)| i)
                    .collect::<Vec<_>>();
                let target = env.actions().index(ss, sa).unwrap();
                if changed.iter().any(|&i| i != target) {
                    bad("sarsa_update touched another entry");
                }

                s = rec.next_state;
                done += 1;
                steps += 1;
                if done == 10_000 {
                    break;
                }
            }
        }
    }
    Outcome::new(
        total_violations == 0,
        format!("{steps} steps across 4 architectures, violations = {total_violations} {violations:?}"),
    )
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("environment fidelity", environment_fidelity),
        ("value iteration vs brute-force policy enumeration", oracle_equivalence),
        ("model-based backups vs direct enumeration", backup_equivalence),
        ("log-policy gradient vs finite differences", gradient_correctness),
        ("optimal-policy return curve is flat", optimal_flatness),
        ("18-state standard ordering", small_ordering),
        ("364-state standard findings", large_findings),
        ("rarely-visited-state findings", rare_findings),
        ("CSV determinism across schedules", determinism),
        ("randomized step invariants", invariant_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == (i + 1).to_string()) {
            continue;
        }
        let outcome = check();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{status} {id}: {name}: {}", outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
