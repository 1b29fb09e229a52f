//! Forest-fire agent-based model.
//!
//! Each cell of a square lattice holds one agent (or nothing). Burning agents
//! push heat into the tree agents of their Moore neighbourhood; a tree whose
//! accumulated heat exceeds the ignition threshold catches fire, turns into an
//! ember on the following step and then loses a fixed amount of heat per step
//! until it is burned out.
//!
//! Updates are synchronous: every rule reads the pre-step state and writes a
//! fresh one, so the result never depends on the scan order.

mod grid;

pub use grid::Grid;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("cannot place {seeds} fire seeds in a forest with {trees} trees")]
    NotEnoughTrees { trees: usize, seeds: usize },
}

/// State of a single agent location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Empty = 0,
    Tree = 1,
    Fire = 2,
    Ember = 3,
    BurnedOut = 4,
}

impl CellState {
    pub const ALL: [CellState; 5] = [
        CellState::Empty,
        CellState::Tree,
        CellState::Fire,
        CellState::Ember,
        CellState::BurnedOut,
    ];

    /// Fire and Ember count as burning; everything else does not.
    #[inline]
    pub fn is_burning(self) -> bool {
        matches!(self, CellState::Fire | CellState::Ember)
    }

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        CellState::ALL.get(code as usize).copied()
    }
}

/// Parameters of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub width: usize,
    pub height: usize,
    /// Percentage of cells occupied by trees, in `[0, 100]`.
    pub density: f64,
    /// Seed heat is `i_seed * q_th`.
    pub i_seed: f64,
    /// Ignition threshold; a tree ignites when its heat strictly exceeds it.
    pub q_th: f64,
    /// Heat transfer efficiency.
    pub lambda: f64,
    /// Heat an ember loses per step.
    pub q_die: f64,
    /// Chebyshev radius of the heating neighbourhood.
    pub radius_r: usize,
    pub n_seeds: usize,
    pub max_steps: usize,
    pub rng_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            width: 251,
            height: 251,
            density: 76.0,
            i_seed: 2.0,
            q_th: 100.0,
            lambda: 0.3,
            q_die: 40.0,
            radius_r: 1,
            n_seeds: 1,
            max_steps: 200,
            rng_seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::InvalidParam {
                field,
                reason: reason.to_string(),
            })
        };
        if self.width == 0 || self.height == 0 {
            return bad("width", "grid must be at least 1x1");
        }
        if !(0.0..=100.0).contains(&self.density) {
            return bad("density", "must lie in [0, 100]");
        }
        if !(self.q_th > 0.0) {
            return bad("q_th", "must be positive");
        }
        if !(self.q_die > 0.0) {
            return bad("q_die", "must be positive");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda", "must be positive");
        }
        if !(self.i_seed.is_finite() && self.i_seed >= 0.0) {
            return bad("i_seed", "must be finite and non-negative");
        }
        if self.radius_r < 1 {
            return bad("radius_r", "must be at least 1");
        }
        if self.n_seeds < 1 {
            return bad("n_seeds", "must be at least 1");
        }
        Ok(())
    }
}

/// The simulated world at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub states: Grid<CellState>,
    pub heat: Grid<f64>,
    pub step_index: usize,
}

impl SimState {
    pub fn width(&self) -> usize {
        self.states.width()
    }

    pub fn height(&self) -> usize {
        self.states.height()
    }

    pub fn count(&self, state: CellState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn burning_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_burning()).count()
    }

    pub fn has_burning(&self) -> bool {
        self.states.iter().any(|s| s.is_burning())
    }

    /// Advances the world by one synchronous update.
    pub fn step(&self, params: &SimParams) -> SimState {
        step(self, params)
    }
}

/// Places trees and fire seeds on a fresh grid.
pub fn init_forest<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<SimState, SimError> {
    params.validate()?;
    let (w, h) = (params.width, params.height);
    let p_tree = params.density / 100.0;
    let mut states = Grid::new(w, h, CellState::Empty);
    for cell in states.iter_mut() {
        if rng.gen_bool(p_tree) {
            *cell = CellState::Tree;
        }
    }
    let trees: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == CellState::Tree)
        .map(|(i, _)| i)
        .collect();
    if trees.len() < params.n_seeds {
        return Err(SimError::NotEnoughTrees {
            trees: trees.len(),
            seeds: params.n_seeds,
        });
    }
    let mut heat = Grid::new(w, h, 0.0);
    let seed_heat = params.i_seed * params.q_th;
    for pick in index::sample(rng, trees.len(), params.n_seeds) {
        let i = trees[pick];
        states.as_mut_slice()[i] = CellState::Fire;
        heat.as_mut_slice()[i] = seed_heat;
    }
    Ok(SimState {
        states,
        heat,
        step_index: 0,
    })
}

/// One synchronous update of the whole grid.
///
/// Phases, all reading the pre-step state:
/// 1. trees accumulate `lambda * sum(Q)` over burning cells within `radius_r`;
/// 2. trees whose heat now exceeds `q_th` become fire;
/// 3. fire becomes ember;
/// 4. every ember (including those converted in phase 3) loses `q_die`, and
///    burns out with zero heat once its heat reaches zero.
pub fn step(state: &SimState, params: &SimParams) -> SimState {
    let (w, h) = (state.width(), state.height());
    let r = params.radius_r;
    let states = state.states.as_slice();
    let heat = state.heat.as_slice();

    let mut incoming = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !states[i].is_burning() {
                continue;
            }
            let q = heat[i];
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            for ny in y0..=y1 {
                let row = ny * w;
                for nx in x0..=x1 {
                    let j = row + nx;
                    if states[j] == CellState::Tree {
                        incoming[j] += q;
                    }
                }
            }
        }
    }

    let mut next_states = state.states.clone();
    let mut next_heat = state.heat.clone();
    let ns = next_states.as_mut_slice();
    let nh = next_heat.as_mut_slice();
    for i in 0..w * h {
        match states[i] {
            CellState::Tree => {
                if incoming[i] != 0.0 {
                    nh[i] = heat[i] + params.lambda * incoming[i];
                }
                if nh[i] > params.q_th {
                    ns[i] = CellState::Fire;
                }
            }
            CellState::Fire | CellState::Ember => {
                let q = heat[i] - params.q_die;
                if q <= 0.0 {
                    ns[i] = CellState::BurnedOut;
                    nh[i] = 0.0;
                } else {
                    ns[i] = CellState::Ember;
                    nh[i] = q;
                }
            }
            CellState::Empty | CellState::BurnedOut => {}
        }
    }

    SimState {
        states: next_states,
        heat: next_heat,
        step_index: state.step_index + 1,
    }
}

/// Runs a full simulation, recording every state including the initial one.
///
/// Stops after the first state without burning cells, or after `max_steps`.
pub fn run(params: &SimParams) -> Result<Vec<SimState>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let initial = init_forest(params, &mut rng)?;
    Ok(run_from(initial, params))
}

/// Like [`run`], starting from an explicit state.
pub fn run_from(initial: SimState, params: &SimParams) -> Vec<SimState> {
    let mut state = initial;
    let mut trajectory = Vec::with_capacity(params.max_steps.min(1024) + 1);
    while state.step_index < params.max_steps && state.has_burning() {
        let next = step(&state, params);
        trajectory.push(state);
        state = next;
    }
    trajectory.push(state);
    trajectory
}

/// 1 where the cell is Fire or Ember, 0 elsewhere.
pub fn burning_mask(state: &SimState) -> Grid<u8> {
    state.states.map(|s| s.is_burning() as u8)
}

/// Summary statistics of a finished trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub extinguished: bool,
    pub trees: usize,
    pub burned: usize,
    /// Burned-out cells over initially occupied cells.
    pub burned_fraction: f64,
}

impl RunSummary {
    pub fn of(trajectory: &[SimState]) -> Self {
        let first = trajectory.first().expect("trajectory is never empty");
        let last = trajectory.last().expect("trajectory is never empty");
        let trees = first.count(CellState::Tree) + first.burning_count();
        let burned = last
            .states
            .iter()
            .filter(|s| matches!(s, CellState::Fire | CellState::Ember | CellState::BurnedOut))
            .count();
        Self {
            steps: last.step_index,
            extinguished: !last.has_burning(),
            trees,
            burned,
            burned_fraction: if trees == 0 {
                0.0
            } else {
                burned as f64 / trees as f64
            },
        }
    }
}

#[cfg(test)]
mod tests;
