//! The four learning architectures as per-step algorithms.
//!
//! * **AC**: actor-critic. SARSA critic, actor step on the executed action
//!   weighted by its updated value.
//! * **SAC**: selector-actor-critic. Before acting, the actor is pushed
//!   towards the greedy action of the critic at the current state.
//! * **TAC**: tuner-actor-critic. The previous pair's value is replaced by a
//!   one-step Bellman backup under the learned model, and the actor steps on
//!   that tuned value.
//! * **ESAC**: estimator-selector-actor-critic. Before acting, every action
//!   at the current state is valued by a model backup, the critic row is
//!   overwritten with those estimates and the actor is pushed towards the
//!   most promising one.
//!
//! All backups value successors with `V(s) = Σ_a π(a|s) Q(s,a)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{KnownRewards, ModelEstimate};
use crate::mdp::{bellman_backup_with, state_value, ActionSets, MdpSpec, QTable, TransitionModel};
use crate::policy::{GradientRule, SoftmaxPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Ac,
    Sac,
    Tac,
    Esac,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Ac, Arch::Sac, Arch::Tac, Arch::Esac];

    pub fn label(self) -> &'static str {
        match self {
            Arch::Ac => "AC",
            Arch::Sac => "SAC",
            Arch::Tac => "TAC",
            Arch::Esac => "ESAC",
        }
    }

    pub fn uses_model(self) -> bool {
        matches!(self, Arch::Tac | Arch::Esac)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(Arch::Ac),
            "sac" => Ok(Arch::Sac),
            "tac" => Ok(Arch::Tac),
            "esac" => Ok(Arch::Esac),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Critic learning rate α.
    pub alpha: f64,
    pub gamma: f64,
    /// Actor step size β.
    pub beta: f64,
    /// Model backups read the true `r(s,a)` instead of the estimate.
    pub known_rewards: bool,
    pub full_softmax_grad: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            beta: 0.1,
            known_rewards: false,
            full_softmax_grad: false,
        }
    }
}

/// What happened during one agent step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// Action sampled at `next_state` as the SARSA target.
    pub next_action: usize,
    /// Greedy action chosen by the selector (SAC, ESAC).
    pub greedy: Option<usize>,
    /// Pair re-valued by the tuner and its tuned value (TAC).
    pub tuned: Option<(usize, usize, f64)>,
    /// Model estimates for every action at `state` (ESAC).
    pub estimates: Option<Vec<f64>>,
}

/// `Q(s,a) ← Q(s,a) + α[r + γQ(s',a') − Q(s,a)]`.
#[allow(clippy::too_many_arguments)]
pub fn sarsa_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    next: usize,
    next_action: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    let target = reward + gamma * q.get(next, next_action)?;
    let current = q.get(s, a)?;
    q.set(s, a, current + alpha * (target - current))
}

/// Index of a maximal entry, uniformly random among exact ties.
pub fn argmax_random_tie<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
    values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v == best)
        .nth(pick)
        .map(|(a, _)| a)
        .expect("at least one maximizer")
}

/// `argmax_b Q(s,b)` with random tie-breaking.
pub fn greedy_action<R: Rng + ?Sized>(q: &QTable, s: usize, rng: &mut R) -> Result<usize> {
    Ok(argmax_random_tie(q.row(s)?, rng))
}

/// Tuner value `Q_DP(s,a) = Σ_{s'} p̂(s'|s,a)[r(s,a) + γV(s')]`.
pub fn tuned_value<M: TransitionModel + ?Sized>(
    model: &M,
    policy: &SoftmaxPolicy,
    q: &QTable,
    s: usize,
    a: usize,
    gamma: f64,
) -> Result<f64> {
    bellman_backup_with(model, s, a, gamma, |next| state_value(policy, q, next))
}

/// Estimator values `Q_DP(s,b)` for every action `b` at `s`, all computed
/// from the same `Q` and `π`.
pub fn estimate_action_values<M: TransitionModel + ?Sized>(
    model: &M,
    policy: &SoftmaxPolicy,
    q: &QTable,
    s: usize,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = q.actions().num_actions(s)?;
    (0..n).map(|b| tuned_value(model, policy, q, s, b, gamma)).collect()
}

#[derive(Debug, Clone)]
pub struct Agent {
    arch: Arch,
    q: QTable,
    policy: SoftmaxPolicy,
    model: Option<ModelEstimate>,
    alpha: f64,
    gamma: f64,
    known_rewards: bool,
    /// Most recent executed pair; the TAC tuner re-values it next step.
    pending: Option<(usize, usize)>,
    /// SARSA target action drawn at the state the agent moved to.
    carried: Option<(usize, usize)>,
}

impl Agent {
    /// Fresh agent: `Q ≡ 0`, `θ ≡ 0` and, for TAC/ESAC, an empty model.
    pub fn new(arch: Arch, actions: &ActionSets, config: &AgentConfig) -> Self {
        let rule = if config.full_softmax_grad {
            GradientRule::FullSoftmax
        } else {
            GradientRule::NamedAction
        };
        Self {
            arch,
            q: QTable::zeros(actions),
            policy: SoftmaxPolicy::uniform(actions, config.beta).with_rule(rule),
            model: arch.uses_model().then(|| ModelEstimate::new(actions)),
            alpha: config.alpha,
            gamma: config.gamma,
            known_rewards: config.known_rewards,
            pending: None,
            carried: None,
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QTable {
        &mut self.q
    }

    pub fn policy(&self) -> &SoftmaxPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut SoftmaxPolicy {
        &mut self.policy
    }

    pub fn model(&self) -> Option<&ModelEstimate> {
        self.model.as_ref()
    }

    pub fn pending(&self) -> Option<(usize, usize)> {
        self.pending
    }

    /// One interaction step from state `s` with the architecture's update
    /// sequence.
    pub fn step<R: Rng + ?Sized>(&mut self, env: &MdpSpec, s: usize, rng: &mut R) -> Result<StepRecord> {
        if env.actions() != self.q.actions() {
            return Err(Error::InvalidMdp(
                "agent and environment have different action sets".into(),
            ));
        }
        match self.arch {
            Arch::Ac => self.ac_step(env, s, rng),
            Arch::Sac => self.sac_step(env, s, rng),
            Arch::Tac => self.tac_step(env, s, rng),
            Arch::Esac => self.esac_step(env, s, rng),
        }
    }

    fn executed_action<R: Rng + ?Sized>(&mut self, s: usize, rng: &mut R) -> Result<usize> {
        match self.carried.take() {
            Some((state, a)) if state == s => Ok(a),
            _ => self.policy.sample_action(s, rng),
        }
    }

    /// Environment transition, SARSA target sampling and critic update.
    fn interact<R: Rng + ?Sized>(
        &mut self,
        env: &MdpSpec,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<(f64, usize, usize)> {
        let reward = env.reward(s, a)?;
        let next = env.sample_next(s, a, rng)?;
        if let Some(model) = self.model.as_mut() {
            model.observe(s, a, reward, next)?;
        }
        let next_action = self.policy.sample_action(next, rng)?;
        sarsa_update(&mut self.q, s, a, reward, next, next_action, self.alpha, self.gamma)?;
        Ok((reward, next, next_action))
    }

    fn backup_model<'a>(&'a self, env: &'a MdpSpec) -> Result<BackupModel<'a>> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::InvalidMdp(format!("{} agent has no learned model", self.arch)))?;
        Ok(if self.known_rewards {
            BackupModel::Known(KnownRewards::new(model, env)?)
        } else {
            BackupModel::Estimated(model)
        })
    }

    fn require(&self, arch: Arch) -> Result<()> {
        if self.arch == arch {
            Ok(())
        } else {
            Err(Error::Config(format!("{arch} step called on a {} agent", self.arch)))
        }
    }

    pub fn ac_step<R: Rng + ?Sized>(&mut self, env: &MdpSpec, s: usize, rng: &mut R) -> Result<StepRecord> {
        self.require(Arch::Ac)?;
        let a = self.executed_action(s, rng)?;
        let (reward, next, next_action) = self.interact(env, s, a, rng)?;
        let value = self.q.get(s, a)?;
        self.policy.actor_update(s, a, value)?;
        self.carried = Some((next, next_action));
        self.pending = Some((s, a));
        Ok(StepRecord {
            state: s,
            action: a,
            reward,
            next_state: next,
            next_action,
            greedy: None,
            tuned: None,
            estimates: None,
        })
    }

    pub fn sac_step<R: Rng + ?Sized>(&mut self, env: &MdpSpec, s: usize, rng: &mut R) -> Result<StepRecord> {
        self.require(Arch::Sac)?;
        let greedy = greedy_action(&self.q, s, rng)?;
        let value = self.q.get(s, greedy)?;
        self.policy.actor_update(s, greedy, value)?;
        // the action comes from the policy just optimized at s
        self.carried = None;
        let a = self.policy.sample_action(s, rng)?;
        let (reward, next, next_action) = self.interact(env, s, a, rng)?;
        self.pending = Some((s, a));
        Ok(StepRecord {
            state: s,
            action: a,
            reward,
            next_state: next,
            next_action,
            greedy: Some(greedy),
            tuned: None,
            estimates: None,
        })
    }

    pub fn tac_step<R: Rng + ?Sized>(&mut self, env: &MdpSpec, s: usize, rng: &mut R) -> Result<StepRecord> {
        self.require(Arch::Tac)?;
        let tuned = match self.pending {
            Some((sp, ap)) => {
                let value = {
                    let model = self.backup_model(env)?;
                    tuned_value(&model, &self.policy, &self.q, sp, ap, self.gamma)?
                };
                self.q.set(sp, ap, value)?;
                self.policy.actor_update(sp, ap, value)?;
                Some((sp, ap, value))
            }
            None => None,
        };
        let a = self.executed_action(s, rng)?;
        let (reward, next, next_action) = self.interact(env, s, a, rng)?;
        self.carried = Some((next, next_action));
        self.pending = Some((s, a));
        Ok(StepRecord {
            state: s,
            action: a,
            reward,
            next_state: next,
            next_action,
            greedy: None,
            tuned,
            estimates: None,
        })
    }

    pub fn esac_step<R: Rng + ?Sized>(&mut self, env: &MdpSpec, s: usize, rng: &mut R) -> Result<StepRecord> {
        self.require(Arch::Esac)?;
        let estimates = {
            let model = self.backup_model(env)?;
            estimate_action_values(&model, &self.policy, &self.q, s, self.gamma)?
        };
        let greedy = argmax_random_tie(&estimates, rng);
        self.q.row_mut(s)?.copy_from_slice(&estimates);
        self.policy.actor_update(s, greedy, estimates[greedy])?;
        self.carried = None;
        let a = self.policy.sample_action(s, rng)?;
        let (reward, next, next_action) = self.interact(env, s, a, rng)?;
        self.pending = Some((s, a));
        Ok(StepRecord {
            state: s,
            action: a,
            reward,
            next_state: next,
            next_action,
            greedy: Some(greedy),
            tuned: None,
            estimates: Some(estimates),
        })
    }
}

enum BackupModel<'a> {
    Estimated(&'a ModelEstimate),
    Known(KnownRewards<'a, ModelEstimate>),
}

impl TransitionModel for BackupModel<'_> {
    fn action_sets(&self) -> &ActionSets {
        match self {
            BackupModel::Estimated(m) => m.action_sets(),
            BackupModel::Known(m) => m.action_sets(),
        }
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) -> Result<()> {
        match self {
            BackupModel::Estimated(m) => m.for_each_successor(s, a, f),
            BackupModel::Known(m) => m.for_each_successor(s, a, f),
        }
    }

    fn reward(&self, s: usize, a: usize) -> Result<f64> {
        match self {
            BackupModel::Estimated(m) => TransitionModel::reward(*m, s, a),
            BackupModel::Known(m) => m.reward(s, a),
        }
    }
}
