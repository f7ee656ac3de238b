//! Online maximum-likelihood estimate of the transition model and rewards.

use crate::error::{Error, Result};
use crate::mdp::{ActionSets, MdpSpec, TransitionModel};

/// Visit counts `N(s,a,s')`, `N(s,a)` and accumulated rewards. Starts empty,
/// i.e. with all estimated transition probabilities zero.
#[derive(Debug, Clone)]
pub struct ModelEstimate {
    actions: ActionSets,
    // per flat pair, sorted by successor
    transition_counts: Vec<Vec<(usize, u64)>>,
    pair_counts: Vec<u64>,
    reward_sums: Vec<f64>,
}

impl ModelEstimate {
    pub fn new(actions: &ActionSets) -> Self {
        let pairs = actions.num_pairs();
        Self {
            actions: actions.clone(),
            transition_counts: vec![Vec::new(); pairs],
            pair_counts: vec![0; pairs],
            reward_sums: vec![0.0; pairs],
        }
    }

    pub fn actions(&self) -> &ActionSets {
        &self.actions
    }

    pub fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) -> Result<()> {
        let i = self.actions.index(s, a)?;
        self.actions.check_state(next)?;
        let row = &mut self.transition_counts[i];
        match row.binary_search_by_key(&next, |&(j, _)| j) {
            Ok(k) => row[k].1 += 1,
            Err(k) => row.insert(k, (next, 1)),
        }
        self.pair_counts[i] += 1;
        self.reward_sums[i] += reward;
        Ok(())
    }

    pub fn pair_count(&self, s: usize, a: usize) -> Result<u64> {
        Ok(self.pair_counts[self.actions.index(s, a)?])
    }

    pub fn transition_count(&self, s: usize, a: usize, next: usize) -> Result<u64> {
        self.actions.check_state(next)?;
        let row = &self.transition_counts[self.actions.index(s, a)?];
        Ok(row.binary_search_by_key(&next, |&(j, _)| j).map_or(0, |k| row[k].1))
    }

    /// `N(s,a,s') / N(s,a)`, zero for an unvisited pair.
    pub fn estimated_prob(&self, s: usize, a: usize, next: usize) -> Result<f64> {
        let n = self.pair_count(s, a)?;
        if n == 0 {
            self.actions.check_state(next)?;
            return Ok(0.0);
        }
        Ok(self.transition_count(s, a, next)? as f64 / n as f64)
    }

    /// Mean observed reward, zero for an unvisited pair.
    pub fn estimated_reward(&self, s: usize, a: usize) -> Result<f64> {
        let i = self.actions.index(s, a)?;
        Ok(match self.pair_counts[i] {
            0 => 0.0,
            n => self.reward_sums[i] / n as f64,
        })
    }
}

impl TransitionModel for ModelEstimate {
    fn action_sets(&self) -> &ActionSets {
        &self.actions
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) -> Result<()> {
        let i = self.actions.index(s, a)?;
        let n = self.pair_counts[i];
        if n == 0 {
            return Ok(());
        }
        let total = n as f64;
        for &(next, count) in &self.transition_counts[i] {
            f(next, count as f64 / total);
        }
        Ok(())
    }

    fn reward(&self, s: usize, a: usize) -> Result<f64> {
        self.estimated_reward(s, a)
    }
}

/// A transition model whose rewards are read from the true MDP instead of
/// being estimated.
#[derive(Debug, Clone, Copy)]
pub struct KnownRewards<'a, M> {
    pub model: &'a M,
    pub rewards: &'a MdpSpec,
}

impl<'a, M: TransitionModel> KnownRewards<'a, M> {
    pub fn new(model: &'a M, rewards: &'a MdpSpec) -> Result<Self> {
        if model.action_sets() != rewards.actions() {
            return Err(Error::InvalidMdp(
                "model and reward source have different action sets".into(),
            ));
        }
        Ok(Self { model, rewards })
    }
}

impl<M: TransitionModel> TransitionModel for KnownRewards<'_, M> {
    fn action_sets(&self) -> &ActionSets {
        self.model.action_sets()
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) -> Result<()> {
        self.model.for_each_successor(s, a, f)
    }

    fn reward(&self, s: usize, a: usize) -> Result<f64> {
        self.rewards.reward(s, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_env, Scenario, ScenarioId, Variant};

    fn model(n: &[usize]) -> ModelEstimate {
        ModelEstimate::new(&ActionSets::new(n).unwrap())
    }

    #[test]
    fn single_observation() {
        let mut m = model(&[1, 1, 1, 1]);
        m.observe(0, 0, 1.0, 3).unwrap();
        assert_eq!(m.estimated_prob(0, 0, 3).unwrap(), 1.0);
        assert_eq!(m.estimated_prob(0, 0, 2).unwrap(), 0.0);
        assert_eq!(m.estimated_reward(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn frequency_ratio() {
        let mut m = model(&[2; 6]);
        for _ in 0..3 {
            m.observe(1, 1, 0.0, 2).unwrap();
        }
        for _ in 0..7 {
            m.observe(1, 1, 0.0, 5).unwrap();
        }
        assert!((m.estimated_prob(1, 1, 2).unwrap() - 0.3).abs() < 1e-15);
        assert!((m.estimated_prob(1, 1, 5).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(m.pair_count(1, 1).unwrap(), 10);
        assert_eq!(m.transition_count(1, 1, 5).unwrap(), 7);
    }

    #[test]
    fn unvisited_pairs_are_all_zero() {
        let m = model(&[2, 2]);
        assert_eq!(m.estimated_prob(0, 1, 0).unwrap(), 0.0);
        assert_eq!(m.estimated_prob(0, 1, 1).unwrap(), 0.0);
        assert_eq!(m.estimated_reward(0, 1).unwrap(), 0.0);
        let mut visited = 0;
        m.for_each_successor(0, 1, &mut |_, _| visited += 1).unwrap();
        assert_eq!(visited, 0);
    }

    #[test]
    fn reward_mean_and_errors() {
        let mut m = model(&[1, 1]);
        m.observe(0, 0, 2.0, 1).unwrap();
        m.observe(0, 0, 4.0, 0).unwrap();
        assert_eq!(m.estimated_reward(0, 0).unwrap(), 3.0);
        assert!(m.observe(0, 1, 0.0, 0).is_err());
        assert!(m.observe(0, 0, 0.0, 2).is_err());
        assert!(m.estimated_prob(2, 0, 0).is_err());
        assert!(m.estimated_reward(1, 1).is_err());
    }

    #[test]
    fn one_visit_recovers_true_reward() {
        let env = build_env(ScenarioId::new(Scenario::Small18, Variant::Standard));
        let mut m = ModelEstimate::new(env.actions());
        m.observe(10, 1, env.reward(10, 1).unwrap(), 4).unwrap();
        assert_eq!(m.estimated_reward(10, 1).unwrap(), 8.5067);
    }

    #[test]
    fn known_rewards_adapter() {
        let env = build_env(ScenarioId::new(Scenario::Small18, Variant::Standard));
        let m = ModelEstimate::new(env.actions());
        let known = KnownRewards::new(&m, &env).unwrap();
        assert_eq!(known.reward(16, 2).unwrap(), 9.5047);
        assert_eq!(TransitionModel::reward(&m, 16, 2).unwrap(), 0.0);
        let other = ModelEstimate::new(&ActionSets::new(&[1]).unwrap());
        assert!(KnownRewards::new(&other, &env).is_err());
    }
}
