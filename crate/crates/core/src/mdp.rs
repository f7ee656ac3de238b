//! Finite MDP data model, exact Bellman computations and the value-iteration
//! oracle used as the optimal benchmark.

use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::SoftmaxPolicy;

/// Tolerance on transition row sums for an in-memory [`MdpSpec`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Looser row-sum tolerance accepted when loading a spec file; rows inside it
/// are renormalized.
pub const FILE_ROW_SUM_TOLERANCE: f64 = 1e-6;

pub const VI_TOLERANCE: f64 = 1e-9;
pub const VI_MAX_SWEEPS: usize = 10_000;

/// Per-state action counts, flattened so that every valid `(s, a)` pair has a
/// dense index in `0..num_pairs()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSets {
    offsets: Vec<usize>,
}

impl ActionSets {
    pub fn new(actions_per_state: &[usize]) -> Result<Self> {
        if actions_per_state.is_empty() {
            return Err(Error::InvalidMdp("MDP has no states".into()));
        }
        let mut offsets = Vec::with_capacity(actions_per_state.len() + 1);
        offsets.push(0);
        for (s, &n) in actions_per_state.iter().enumerate() {
            if n == 0 {
                return Err(Error::InvalidMdp(format!("state {s} has no actions")));
            }
            offsets.push(offsets[s] + n);
        }
        Ok(Self { offsets })
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_pairs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState {
                state: s,
                num_states: self.num_states(),
            })
        }
    }

    pub fn num_actions(&self, s: usize) -> Result<usize> {
        self.check_state(s)?;
        Ok(self.offsets[s + 1] - self.offsets[s])
    }

    /// Flat index range of the pairs belonging to state `s`.
    pub fn range(&self, s: usize) -> Result<Range<usize>> {
        self.check_state(s)?;
        Ok(self.offsets[s]..self.offsets[s + 1])
    }

    pub fn index(&self, s: usize, a: usize) -> Result<usize> {
        let available = self.num_actions(s)?;
        if a < available {
            Ok(self.offsets[s] + a)
        } else {
            Err(Error::InvalidAction {
                state: s,
                action: a,
                available,
            })
        }
    }

    pub fn actions_per_state(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_actions(&self) -> usize {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

/// Anything that can supply `p(s'|s,a)` and `r(s,a)` for a Bellman backup:
/// the true MDP, a learned model, or an adapter mixing the two.
pub trait TransitionModel {
    fn action_sets(&self) -> &ActionSets;

    /// Calls `f(s', p)` for every successor with nonzero probability.
    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) -> Result<()>;

    fn reward(&self, s: usize, a: usize) -> Result<f64>;
}

/// A complete finite MDP with per-state action sets and rewards `r(s,a)`.
#[derive(Debug, Clone)]
pub struct MdpSpec {
    actions: ActionSets,
    // sparse rows per flat pair index, sorted by successor, zeros dropped
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
    discount: f64,
}

impl MdpSpec {
    /// `rows[s][a]` lists `(s', p)` entries; omitted successors have
    /// probability zero. `rewards[s][a]` is `r(s,a)`.
    pub fn new(
        actions_per_state: &[usize],
        rows: Vec<Vec<Vec<(usize, f64)>>>,
        rewards: Vec<Vec<f64>>,
        discount: f64,
    ) -> Result<Self> {
        let actions = ActionSets::new(actions_per_state)?;
        let n = actions.num_states();
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!("discount {discount} not in [0, 1)")));
        }
        if rows.len() != n || rewards.len() != n {
            return Err(Error::InvalidMdp(format!(
                "expected {n} transition and reward rows, got {} and {}",
                rows.len(),
                rewards.len()
            )));
        }
        let mut transitions = Vec::with_capacity(actions.num_pairs());
        let mut flat_rewards = Vec::with_capacity(actions.num_pairs());
        for (s, (state_rows, state_rewards)) in rows.into_iter().zip(rewards).enumerate() {
            let na = actions.num_actions(s)?;
            if state_rows.len() != na || state_rewards.len() != na {
                return Err(Error::InvalidMdp(format!(
                    "state {s}: expected {na} actions, got {} transition rows and {} rewards",
                    state_rows.len(),
                    state_rewards.len()
                )));
            }
            for (a, (mut row, r)) in state_rows.into_iter().zip(state_rewards).enumerate() {
                if !r.is_finite() {
                    return Err(Error::InvalidMdp(format!("r({s},{a}) is not finite")));
                }
                row.retain(|&(_, p)| p != 0.0);
                row.sort_by_key(|&(next, _)| next);
                let mut sum = 0.0;
                for (i, &(next, p)) in row.iter().enumerate() {
                    if next >= n {
                        return Err(Error::InvalidMdp(format!("p({next}|{s},{a}): successor out of range")));
                    }
                    if i > 0 && row[i - 1].0 == next {
                        return Err(Error::InvalidMdp(format!("p({next}|{s},{a}) given more than once")));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidMdp(format!("p({next}|{s},{a}) = {p} outside [0, 1]")));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidMdp(format!("transition row ({s},{a}) sums to {sum}")));
                }
                transitions.push(row);
                flat_rewards.push(r);
            }
        }
        Ok(Self {
            actions,
            transitions,
            rewards: flat_rewards,
            discount,
        })
    }

    /// Builds from a dense tensor `p[s][a][s']`.
    pub fn from_dense(p: &[Vec<Vec<f64>>], rewards: Vec<Vec<f64>>, discount: f64) -> Result<Self> {
        let actions_per_state: Vec<usize> = p.iter().map(Vec::len).collect();
        let rows = p
            .iter()
            .map(|per_action| {
                per_action
                    .iter()
                    .map(|dense| dense.iter().copied().enumerate().collect())
                    .collect()
            })
            .collect();
        Self::new(&actions_per_state, rows, rewards, discount)
    }

    pub fn num_states(&self) -> usize {
        self.actions.num_states()
    }

    pub fn actions(&self) -> &ActionSets {
        &self.actions
    }

    pub fn num_actions(&self, s: usize) -> Result<usize> {
        self.actions.num_actions(s)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same dynamics and rewards under a different discount factor.
    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!("discount {discount} not in [0, 1)")));
        }
        self.discount = discount;
        Ok(self)
    }

    /// Nonzero successors of `(s, a)`, sorted by successor index.
    pub fn successors(&self, s: usize, a: usize) -> Result<&[(usize, f64)]> {
        let i = self.actions.index(s, a)?;
        Ok(&self.transitions[i])
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> Result<f64> {
        self.actions.check_state(next)?;
        let row = self.successors(s, a)?;
        Ok(row
            .binary_search_by_key(&next, |&(j, _)| j)
            .map(|k| row[k].1)
            .unwrap_or(0.0))
    }

    pub fn reward(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.rewards[self.actions.index(s, a)?])
    }

    /// Draws `s'` from `p(·|s,a)` by inverse CDF over successor order.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        let row = self.successors(s, a)?;
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for &(next, p) in row {
            cum += p;
            if u < cum {
                return Ok(next);
            }
        }
        Ok(row.last().expect("rows are never empty").0)
    }

    /// Parses the structured-text (TOML) spec format. Rows must sum to
    /// 1 ± 1e-6 and are renormalized.
    pub fn from_spec_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::SpecFormat(e.to_string()))?;
        file.into_spec()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::SpecFormat(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_spec_str(&text)
    }

    pub fn to_spec_string(&self) -> String {
        let n = self.num_states();
        let mut rewards = Vec::with_capacity(n);
        let mut transitions = Vec::new();
        for s in 0..n {
            let range = self.actions.range(s).expect("valid state");
            rewards.push(self.rewards[range.clone()].to_vec());
            for (a, i) in range.enumerate() {
                for &(next, p) in &self.transitions[i] {
                    transitions.push((s, a, next, p));
                }
            }
        }
        let file = SpecFile {
            num_states: n,
            gamma: self.discount,
            actions_per_state: self.actions.actions_per_state(),
            rewards,
            transitions,
        };
        toml::to_string(&file).expect("spec file serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_spec_string())?;
        Ok(())
    }
}

impl TransitionModel for MdpSpec {
    fn action_sets(&self) -> &ActionSets {
        &self.actions
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) -> Result<()> {
        for &(next, p) in self.successors(s, a)? {
            f(next, p);
        }
        Ok(())
    }

    fn reward(&self, s: usize, a: usize) -> Result<f64> {
        MdpSpec::reward(self, s, a)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    num_states: usize,
    gamma: f64,
    actions_per_state: Vec<usize>,
    rewards: Vec<Vec<f64>>,
    transitions: Vec<(usize, usize, usize, f64)>,
}

impl SpecFile {
    fn into_spec(self) -> Result<MdpSpec> {
        let n = self.num_states;
        if self.actions_per_state.len() != n {
            return Err(Error::SpecFormat(format!(
                "actions_per_state has {} entries for {n} states",
                self.actions_per_state.len()
            )));
        }
        let mut rows: Vec<Vec<Vec<(usize, f64)>>> =
            self.actions_per_state.iter().map(|&na| vec![Vec::new(); na]).collect();
        for (s, a, next, p) in self.transitions {
            let row = rows
                .get_mut(s)
                .and_then(|r| r.get_mut(a))
                .ok_or_else(|| Error::SpecFormat(format!("transition ({s},{a},{next}): invalid pair")))?;
            if next >= n {
                return Err(Error::SpecFormat(format!(
                    "transition ({s},{a},{next}): invalid successor"
                )));
            }
            row.push((next, p));
        }
        for (s, state_rows) in rows.iter_mut().enumerate() {
            for (a, row) in state_rows.iter_mut().enumerate() {
                if let Some(&(_, p)) = row.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
                    return Err(Error::SpecFormat(format!("p = {p} at ({s},{a}) outside [0, 1]")));
                }
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > FILE_ROW_SUM_TOLERANCE {
                    return Err(Error::SpecFormat(format!("row ({s},{a}) sums to {sum}")));
                }
                for entry in row.iter_mut() {
                    entry.1 /= sum;
                }
            }
        }
        MdpSpec::new(&self.actions_per_state, rows, self.rewards, self.gamma)
            .map_err(|e| Error::SpecFormat(e.to_string()))
    }
}

/// Action values `Q(s,a)` over the valid pairs of an MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: ActionSets,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(actions: &ActionSets) -> Self {
        Self {
            actions: actions.clone(),
            values: vec![0.0; actions.num_pairs()],
        }
    }

    pub fn actions(&self) -> &ActionSets {
        &self.actions
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.values[self.actions.index(s, a)?])
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) -> Result<()> {
        let i = self.actions.index(s, a)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn row(&self, s: usize) -> Result<&[f64]> {
        Ok(&self.values[self.actions.range(s)?])
    }

    pub fn row_mut(&mut self, s: usize) -> Result<&mut [f64]> {
        let range = self.actions.range(s)?;
        Ok(&mut self.values[range])
    }

    /// All values in flat pair order.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// State values `V(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(num_states: usize) -> Self {
        Self {
            values: vec![0.0; num_states],
        }
    }

    pub fn get(&self, s: usize) -> Result<f64> {
        self.values.get(s).copied().ok_or(Error::InvalidState {
            state: s,
            num_states: self.values.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl From<Vec<f64>> for ValueFunction {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// `V(s) = Σ_a π(a|s) Q(s,a)`.
pub fn state_value(policy: &SoftmaxPolicy, q: &QTable, s: usize) -> Result<f64> {
    let probs = policy.action_probabilities(s)?;
    let row = q.row(s)?;
    if probs.len() != row.len() {
        return Err(Error::InvalidMdp(format!(
            "policy and Q disagree on the action count at state {s}"
        )));
    }
    Ok(probs.iter().zip(row).map(|(p, v)| p * v).sum())
}

/// `Σ_{s'} p(s'|s,a) [r(s,a) + γ V(s')]` over the model's nonzero support.
pub fn bellman_backup<M: TransitionModel + ?Sized>(
    model: &M,
    v: &ValueFunction,
    s: usize,
    a: usize,
    discount: f64,
) -> Result<f64> {
    if v.len() != model.action_sets().num_states() {
        return Err(Error::LengthMismatch {
            expected: model.action_sets().num_states(),
            found: v.len(),
        });
    }
    bellman_backup_with(model, s, a, discount, |next| Ok(v.as_slice()[next]))
}

/// Like [`bellman_backup`], with successor values supplied lazily.
pub fn bellman_backup_with<M, F>(model: &M, s: usize, a: usize, discount: f64, mut value_of: F) -> Result<f64>
where
    M: TransitionModel + ?Sized,
    F: FnMut(usize) -> Result<f64>,
{
    let r = model.reward(s, a)?;
    let mut total = 0.0;
    let mut failure = None;
    model.for_each_successor(s, a, &mut |next, p| {
        if failure.is_some() {
            return;
        }
        match value_of(next) {
            Ok(v) => total += p * (r + discount * v),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

#[derive(Debug, Clone)]
pub struct ValueIterationOutput {
    pub values: ValueFunction,
    /// Greedy action per state, lowest index on ties.
    pub policy: Vec<usize>,
    pub sweeps: usize,
    /// Sup-norm Bellman optimality residual of `values`.
    pub residual: f64,
}

fn best_backup(spec: &MdpSpec, v: &ValueFunction, s: usize) -> Result<(usize, f64)> {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..spec.num_actions(s)? {
        let q = bellman_backup(spec, v, s, a, spec.discount())?;
        if q > best.1 {
            best = (a, q);
        }
    }
    Ok(best)
}

/// Sup-norm distance between `v` and one optimality sweep of it.
pub fn bellman_residual(spec: &MdpSpec, v: &ValueFunction) -> Result<f64> {
    let mut residual: f64 = 0.0;
    for s in 0..spec.num_states() {
        let (_, best) = best_backup(spec, v, s)?;
        residual = residual.max((best - v.as_slice()[s]).abs());
    }
    Ok(residual)
}

/// Greedy deterministic policy with respect to `v`, ties to the lowest action.
pub fn greedy_policy(spec: &MdpSpec, v: &ValueFunction) -> Result<Vec<usize>> {
    (0..spec.num_states())
        .map(|s| best_backup(spec, v, s).map(|(a, _)| a))
        .collect()
}

/// Jacobi value iteration from `V ≡ 0` until the residual drops below
/// `tolerance`.
pub fn value_iteration(spec: &MdpSpec, tolerance: f64, max_iters: usize) -> Result<ValueIterationOutput> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let n = spec.num_states();
    let mut v = ValueFunction::zeros(n);
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_iters {
        let next: Vec<f64> = (0..n)
            .map(|s| best_backup(spec, &v, s).map(|(_, q)| q))
            .collect::<Result<_>>()?;
        let delta = next
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = ValueFunction::from(next);
        // ||T v' - v'|| <= γ ||v' - v||
        residual = spec.discount() * delta;
        if residual < tolerance {
            let residual = bellman_residual(spec, &v)?;
            let policy = greedy_policy(spec, &v)?;
            return Ok(ValueIterationOutput {
                values: v,
                policy,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

/// Truncated discounted return `Σ_{i=t}^{min(t+H,len)-1} γ^{i-t} rewards[i]`,
/// where `rewards[i]` is the reward received after the action at time `i`.
pub fn discounted_return(rewards: &[f64], t: usize, discount: f64, horizon: usize) -> Result<f64> {
    if t >= rewards.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            len: rewards.len(),
        });
    }
    let end = rewards.len().min(t.saturating_add(horizon));
    let mut g = 0.0;
    let mut weight = 1.0;
    for &r in &rewards[t..end] {
        g += weight * r;
        weight *= discount;
    }
    Ok(g)
}

/// Smallest `H` with `γ^H <= eps`.
pub fn truncation_horizon(discount: f64, eps: f64) -> usize {
    if discount <= 0.0 {
        return 1;
    }
    (eps.ln() / discount.ln()).ceil() as usize
}
