//! Tabular softmax policy with one preference parameter per feasible
//! state-action pair.
//!
//! Each feasible pair carries a binary feature `φ(s,a) = 1`, so the
//! preference `h(s,a) = θ(s,a)·φ(s,a)` reduces to `θ(s,a)`. Infeasible pairs
//! are not represented at all.

use rand::Rng;

use crate::error::Result;
use crate::grid::Grid;
use crate::mdp::ActionSets;

/// Which parameters an actor step touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientRule {
    /// Only `θ(s,a)` of the named action, scaled by `(1 - π(a|s))φ(s,a)`.
    #[default]
    NamedAction,
    /// The complete log-softmax gradient, including the `-π(b|s)φ(s,b)`
    /// terms on every other action at the state.
    FullSoftmax,
}

#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    actions: ActionSets,
    theta: Vec<f64>,
    // cached π(·|s), refreshed whenever θ at s changes
    probs: Vec<f64>,
    step_size: f64,
    rule: GradientRule,
}

impl SoftmaxPolicy {
    /// `θ ≡ 0`, i.e. uniform over each state's actions.
    pub fn uniform(actions: &ActionSets, step_size: f64) -> Self {
        let probs = (0..actions.num_states())
            .flat_map(|s| {
                let n = actions.num_actions(s).expect("valid state");
                std::iter::repeat_n(1.0 / n as f64, n)
            })
            .collect();
        Self {
            actions: actions.clone(),
            theta: vec![0.0; actions.num_pairs()],
            probs,
            step_size,
            rule: GradientRule::default(),
        }
    }

    pub fn with_rule(mut self, rule: GradientRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn rule(&self) -> GradientRule {
        self.rule
    }

    pub fn actions(&self) -> &ActionSets {
        &self.actions
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// `φ(s,a)`: one for every feasible pair.
    pub fn feature(&self, s: usize, a: usize) -> Result<f64> {
        self.actions.index(s, a).map(|_| 1.0)
    }

    pub fn theta(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.theta[self.actions.index(s, a)?])
    }

    pub fn set_theta(&mut self, s: usize, a: usize, value: f64) -> Result<()> {
        let i = self.actions.index(s, a)?;
        self.theta[i] = value;
        self.refresh(s)
    }

    fn refresh(&mut self, s: usize) -> Result<()> {
        let range = self.actions.range(s)?;
        let theta = &self.theta[range.clone()];
        let probs = &mut self.probs[range];
        // φ ≡ 1 on feasible pairs
        let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, &h) in probs.iter_mut().zip(theta) {
            *p = (h - max).exp();
            total += *p;
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        Ok(())
    }

    /// `π(·|s)` over the actions available at `s`.
    pub fn action_probabilities(&self, s: usize) -> Result<&[f64]> {
        Ok(&self.probs[self.actions.range(s)?])
    }

    pub fn prob(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.probs[self.actions.index(s, a)?])
    }

    /// Inverse-CDF draw over action index order.
    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<usize> {
        let probs = self.action_probabilities(s)?;
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (a, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return Ok(a);
            }
        }
        Ok(probs.len() - 1)
    }

    /// `∂ ln π(a|s) / ∂θ(s,a) = (1 - π(a|s)) φ(s,a)`.
    pub fn log_policy_gradient(&self, s: usize, a: usize) -> Result<f64> {
        let phi = self.feature(s, a)?;
        Ok(phi - self.prob(s, a)? * phi)
    }

    /// One policy-gradient step `θ ← θ + β ∇ln π(a|s) · value`.
    pub fn actor_update(&mut self, s: usize, a: usize, value: f64) -> Result<()> {
        let i = self.actions.index(s, a)?;
        match self.rule {
            GradientRule::NamedAction => {
                let grad = self.log_policy_gradient(s, a)?;
                self.theta[i] += self.step_size * grad * value;
            }
            GradientRule::FullSoftmax => {
                let range = self.actions.range(s)?;
                let scale = self.step_size * value;
                for j in range {
                    let indicator = if j == i { 1.0 } else { 0.0 };
                    self.theta[j] += scale * (indicator - self.probs[j]);
                }
            }
        }
        self.refresh(s)
    }

    /// `θ` snapshot: one row per state, absent cells for infeasible actions.
    pub fn to_grid(&self) -> Grid {
        let width = self.actions.max_actions();
        let rows = (0..self.actions.num_states())
            .map(|s| {
                let range = self.actions.range(s).expect("valid state");
                let mut row: Vec<Option<f64>> = self.theta[range].iter().copied().map(Some).collect();
                row.resize(width, None);
                row
            })
            .collect();
        Grid::from_rows(rows).expect("rows share one width")
    }
}
