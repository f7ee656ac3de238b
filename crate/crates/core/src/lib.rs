//! Tabular actor-critic learners on finite MDPs with exogenous disturbances.
//!
//! The crate provides a finite MDP container with value iteration, the two
//! disturbance-driven allocation environments (18 and 364 states), a
//! softmax policy, an online transition-model estimate, four actor-critic
//! variants that differ in how the actor's value signal is produced, and a
//! seeded multi-run harness that turns reward streams into return curves.

pub mod agents;
pub mod envs;
pub mod error;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod policy;

pub use agents::{Agent, AgentConfig, Arch, StepRecord};
pub use envs::{build_env, Scenario, ScenarioId, Variant};
pub use error::{Error, Result};
pub use grid::Grid;
pub use harness::{run_experiment, Arm, CurveSet, Execution, Experiment, ExperimentConfig};
pub use learner::{KnownRewards, ModelEstimate};
pub use mdp::{value_iteration, ActionSets, MdpSpec, QTable, TransitionModel, ValueFunction};
pub use policy::{GradientRule, SoftmaxPolicy};
