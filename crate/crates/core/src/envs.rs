//! The two benchmark environments (18 and 364 states), each with a
//! "standard" random-dynamics variant and a "rarely visited good states"
//! variant.
//!
//! States encode a storage level in their high part and the current
//! disturbance value(s) in their low part. The disturbances follow
//! independent Markov chains, so `p(s'|s,a)` is the chain probability of the
//! disturbance change that the deterministic state evolution requires.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::MdpSpec;

pub const DEFAULT_DISCOUNT: f64 = 0.9;

/// Tolerance on the printed (4-decimal) disturbance matrices.
pub const CHAIN_ROW_TOLERANCE: f64 = 1e-3;

pub const SMALL_STATES: usize = 18;
pub const SMALL_BLOCK: usize = 6;
pub const LARGE_STATES: usize = 364;
pub const LARGE_BLOCK: usize = 52;
pub const W_SMALL: usize = 6;
pub const W_LARGE: usize = 13;
pub const Z_LARGE: usize = 4;

mod data {
    pub const P_SMALL_STANDARD: &str = include_str!("../data/p_small_standard.txt");
    pub const P_SMALL_RARE: &str = include_str!("../data/p_small_rare.txt");
    pub const R_SMALL: &str = include_str!("../data/r_small.txt");
    pub const PW_LARGE_STANDARD: &str = include_str!("../data/pw_large_standard.txt");
    pub const PZ_LARGE_STANDARD: &str = include_str!("../data/pz_large_standard.txt");
    pub const PW_LARGE_RARE: &str = include_str!("../data/pw_large_rare.txt");
    pub const PZ_LARGE_RARE: &str = include_str!("../data/pz_large_rare.txt");
    pub const X_LARGE: &str = include_str!("../data/x_large_standard.txt");
    pub const Y_LARGE: &str = include_str!("../data/y_large_rare.txt");
}

/// Row-stochastic transition matrix of a disturbance process.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceChain {
    matrix: Vec<Vec<f64>>,
}

impl DisturbanceChain {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidMdp("empty disturbance matrix".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMdp(format!("disturbance row {i} is not length {n}")));
            }
            if row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return Err(Error::InvalidMdp(format!("disturbance row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > CHAIN_ROW_TOLERANCE {
                return Err(Error::InvalidMdp(format!("disturbance row {i} sums to {sum}")));
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_grid(grid: &Grid) -> Result<Self> {
        let rows = (0..grid.rows()).map(|r| grid.dense_row(r)).collect::<Result<_>>()?;
        Self::new(rows)
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    /// Entry as printed, before renormalization.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.matrix[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.matrix[from]
    }

    /// Each row divided by its sum.
    pub fn normalized(&self) -> Self {
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                let sum: f64 = row.iter().sum();
                row.iter().map(|p| p / sum).collect()
            })
            .collect();
        Self { matrix }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Small18,
    Large364,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "standard")]
    Standard,
    #[serde(rename = "rare")]
    RareGood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioId {
    pub scenario: Scenario,
    pub variant: Variant,
}

impl ScenarioId {
    pub const fn new(scenario: Scenario, variant: Variant) -> Self {
        Self { scenario, variant }
    }

    pub fn num_states(&self) -> usize {
        match self.scenario {
            Scenario::Small18 => SMALL_STATES,
            Scenario::Large364 => LARGE_STATES,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Small18 => "small18",
            Scenario::Large364 => "large364",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small18" => Ok(Scenario::Small18),
            "large364" => Ok(Scenario::Large364),
            other => Err(Error::Config(format!(
                "unknown env {other:?} (expected small18 or large364)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::RareGood => "rare",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "rare" => Ok(Variant::RareGood),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected standard or rare)"
            ))),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scenario, self.variant)
    }
}

fn check_disturbance(value: usize, size: usize) -> Result<()> {
    if value < size {
        Ok(())
    } else {
        Err(Error::InvalidDisturbance { value, size })
    }
}

fn check_pair(s: usize, a: usize, num_states: usize, block: usize) -> Result<()> {
    if s >= num_states {
        return Err(Error::InvalidState { state: s, num_states });
    }
    let available = s / block + 1;
    if a >= available {
        return Err(Error::InvalidAction {
            state: s,
            action: a,
            available,
        });
    }
    Ok(())
}

/// Storage-block evolution shared by both scenarios; returns the successor
/// block base (a multiple of `block`).
fn next_block_base(s: usize, a: usize, block: usize, top_odd_threshold: usize) -> usize {
    if s.is_multiple_of(2) {
        block * (s / block) - block * a
    } else if s > top_odd_threshold && a == 0 {
        block * (s / block)
    } else {
        block * s.div_ceil(block) - block * a
    }
}

/// Successor of `s` under action `a` when the disturbance moves to `w`
/// (18-state scenario).
pub fn next_state_small(s: usize, a: usize, w: usize) -> Result<usize> {
    check_pair(s, a, SMALL_STATES, SMALL_BLOCK)?;
    check_disturbance(w, W_SMALL)?;
    Ok(next_block_base(s, a, SMALL_BLOCK, 12) + w)
}

/// Successor of `s` under action `a` when the disturbances move to `(w, z)`
/// (364-state scenario).
pub fn next_state_large(s: usize, a: usize, w: usize, z: usize) -> Result<usize> {
    check_pair(s, a, LARGE_STATES, LARGE_BLOCK)?;
    check_disturbance(w, W_LARGE)?;
    check_disturbance(z, Z_LARGE)?;
    Ok(next_block_base(s, a, LARGE_BLOCK, 312) + 4 * w + z)
}

fn grid(text: &str) -> Grid {
    text.parse().expect("bundled matrix data is well formed")
}

fn chain(text: &str) -> DisturbanceChain {
    DisturbanceChain::from_grid(&grid(text)).expect("bundled disturbance matrix is row-stochastic")
}

/// The disturbance chains of an environment exactly as printed: `[P]` for the
/// small scenario, `[P_w, P_z]` for the large one.
pub fn disturbance_chains(id: ScenarioId) -> Vec<DisturbanceChain> {
    match (id.scenario, id.variant) {
        (Scenario::Small18, Variant::Standard) => vec![chain(data::P_SMALL_STANDARD)],
        (Scenario::Small18, Variant::RareGood) => vec![chain(data::P_SMALL_RARE)],
        (Scenario::Large364, Variant::Standard) => {
            vec![chain(data::PW_LARGE_STANDARD), chain(data::PZ_LARGE_STANDARD)]
        }
        (Scenario::Large364, Variant::RareGood) => {
            vec![chain(data::PW_LARGE_RARE), chain(data::PZ_LARGE_RARE)]
        }
    }
}

/// Reward table as a grid: 18×3 for the small scenario (both variants share
/// it), the 52×7 block matrix for the large one.
pub fn reward_grid(id: ScenarioId) -> Grid {
    match (id.scenario, id.variant) {
        (Scenario::Small18, _) => grid(data::R_SMALL),
        (Scenario::Large364, Variant::Standard) => grid(data::X_LARGE),
        (Scenario::Large364, Variant::RareGood) => grid(data::Y_LARGE),
    }
}

/// Current disturbance values encoded in a state index.
pub fn decode_disturbance(id: ScenarioId, s: usize) -> (usize, Option<usize>) {
    match id.scenario {
        Scenario::Small18 => (s % SMALL_BLOCK, None),
        Scenario::Large364 => ((s % LARGE_BLOCK) / 4, Some(s % 4)),
    }
}

/// `p(s'|s,a)` from the printed (un-normalized) matrices.
pub fn raw_transition_prob(id: ScenarioId, s: usize, a: usize, next: usize) -> Result<f64> {
    transition_prob_with(id, &disturbance_chains(id), s, a, next)
}

fn transition_prob_with(id: ScenarioId, chains: &[DisturbanceChain], s: usize, a: usize, next: usize) -> Result<f64> {
    if next >= id.num_states() {
        return Err(Error::InvalidState {
            state: next,
            num_states: id.num_states(),
        });
    }
    let (wp, zp) = decode_disturbance(id, s);
    let (w, z) = decode_disturbance(id, next);
    let expected = match id.scenario {
        Scenario::Small18 => next_state_small(s, a, w)?,
        Scenario::Large364 => next_state_large(s, a, w, z.unwrap())?,
    };
    if expected != next {
        return Ok(0.0);
    }
    Ok(match (zp, z) {
        (Some(zp), Some(z)) => chains[0].prob(wp, w) * chains[1].prob(zp, z),
        _ => chains[0].prob(wp, w),
    })
}

/// Builds the environment with renormalized disturbance rows and the
/// default discount.
pub fn build_env(id: ScenarioId) -> MdpSpec {
    let chains: Vec<DisturbanceChain> = disturbance_chains(id)
        .iter()
        .map(DisturbanceChain::normalized)
        .collect();
    let rewards = reward_grid(id);
    let n = id.num_states();
    let block = match id.scenario {
        Scenario::Small18 => SMALL_BLOCK,
        Scenario::Large364 => LARGE_BLOCK,
    };
    let actions_per_state: Vec<usize> = (0..n).map(|s| s / block + 1).collect();

    let mut rows = Vec::with_capacity(n);
    let mut reward_rows = Vec::with_capacity(n);
    for (s, &na) in actions_per_state.iter().enumerate() {
        let (wp, zp) = decode_disturbance(id, s);
        let reward_row = match id.scenario {
            Scenario::Small18 => s,
            Scenario::Large364 => s % LARGE_BLOCK,
        };
        let mut state_rows = Vec::with_capacity(na);
        let mut state_rewards = Vec::with_capacity(na);
        for a in 0..na {
            let row: Vec<(usize, f64)> = match (id.scenario, zp) {
                (Scenario::Small18, _) => (0..W_SMALL)
                    .map(|w| (next_state_small(s, a, w).expect("feasible pair"), chains[0].prob(wp, w)))
                    .collect(),
                (Scenario::Large364, Some(zp)) => (0..W_LARGE)
                    .flat_map(|w| (0..Z_LARGE).map(move |z| (w, z)))
                    .map(|(w, z)| {
                        (
                            next_state_large(s, a, w, z).expect("feasible pair"),
                            chains[0].prob(wp, w) * chains[1].prob(zp, z),
                        )
                    })
                    .collect(),
                (Scenario::Large364, None) => unreachable!("large states always carry z"),
            };
            state_rows.push(row);
            state_rewards.push(
                rewards
                    .get(reward_row, a)
                    .expect("reward table covers every feasible pair"),
            );
        }
        rows.push(state_rows);
        reward_rows.push(state_rewards);
    }
    MdpSpec::new(&actions_per_state, rows, reward_rows, DEFAULT_DISCOUNT).expect("built-in environment is valid")
}
