//! The assembly MDP as a step/reset environment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, ActionSpace, Orientation};
use crate::mask::{mask_audit, ActionBitmap, Check, Constraint, MaskConfig, MaskContext};
use crate::state::AssemblyState;

/// How actions are restricted during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvMode {
    /// Sample only among actions the mask admits.
    Masked,
    /// Sample over the whole action space; an invalid action ends the episode
    /// with the failure penalty.
    Vanilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeEnd {
    Completed,
    DeadEnd,
    Violation(Constraint),
    StepLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub end: Option<EpisodeEnd>,
}

/// Observation layout: `obs[c][x][y][z]`, row-major, with channel 0 the
/// target, channel 1 the current shape and channels `2..2+N` the remaining
/// fraction of each brick type's initial count broadcast over the grid.
pub fn encode_observation(state: &AssemblyState) -> Vec<f64> {
    let d = state.dims();
    let cells = d.cell_count();
    let n = state.catalog().len();
    let mut obs = vec![0.0; (2 + n) * cells];
    let at = |x: usize, y: usize, z: usize| (x * d.w + y) * d.d + z;
    for c in state.target().cells() {
        obs[at(c.x, c.y, c.z)] = 1.0;
    }
    for c in state.current().cells() {
        obs[cells + at(c.x, c.y, c.z)] = 1.0;
    }
    for b in 0..n {
        let init = state.initial_inventory().get(b);
        let frac = if init == 0 { 0.0 } else { state.inventory().get(b) as f64 / init as f64 };
        obs[(2 + b) * cells..(3 + b) * cells].iter_mut().for_each(|v| *v = frac);
    }
    obs
}

pub struct AssemblyEnv {
    initial: AssemblyState,
    state: AssemblyState,
    mask: MaskConfig,
    mode: EnvMode,
    r_fail: f64,
    max_steps: usize,
    valid: ActionBitmap,
}

impl AssemblyEnv {
    pub fn new(initial: AssemblyState, mask: MaskConfig, mode: EnvMode, r_fail: f64, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidConfig("max_episode_steps must be positive".into()));
        }
        let valid = ActionBitmap::new(0);
        let mut env = AssemblyEnv { state: initial.clone(), initial, mask, mode, r_fail, max_steps, valid };
        env.refresh();
        if env.state.is_complete() {
            return Err(Error::InvalidConfig("target is already complete in the initial state".into()));
        }
        if env.mode == EnvMode::Masked && env.valid.none() {
            return Err(Error::AllMasked);
        }
        Ok(env)
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::new(self.state.dims(), self.state.catalog().len())
    }

    pub fn state(&self) -> &AssemblyState {
        &self.state
    }

    pub fn mode(&self) -> EnvMode {
        self.mode
    }

    pub fn reset(&mut self) {
        self.state = self.initial.clone();
        self.refresh();
    }

    fn refresh(&mut self) {
        self.valid = match self.mode {
            EnvMode::Masked => MaskContext::new(&self.state, &self.mask).enumerate(),
            EnvMode::Vanilla => {
                let mut all = ActionBitmap::new(self.space().size());
                (0..all.len()).for_each(|i| all.set(i));
                all
            }
        };
    }

    /// Actions the policy may sample from in the current state.
    pub fn sampling_mask(&self) -> &ActionBitmap {
        &self.valid
    }

    pub fn observation(&self) -> Vec<f64> {
        encode_observation(&self.state)
    }

    /// Apply the action with flat index `index`; the episode state resets
    /// automatically on the next call after `done`.
    pub fn step(&mut self, index: usize) -> Result<StepResult> {
        let space = self.space();
        if index >= space.size() {
            return Err(Error::InvalidConfig(format!("action index {index} outside the action space")));
        }
        let mut action = space.action(index);
        let fail = |end| StepResult { reward: self.r_fail, done: true, end: Some(end) };
        match self.mode {
            EnvMode::Masked => {
                if !self.valid.get(index) {
                    return Err(Error::InvalidConfig(format!("action {index} is masked out")));
                }
            }
            EnvMode::Vanilla => {
                if action.is_redundant(self.state.catalog()) {
                    action.orient = Orientation::Landscape;
                }
                if let Some(c) = vanilla_violation(&self.state, &action, &self.mask) {
                    return Ok(fail(EpisodeEnd::Violation(c)));
                }
            }
        }
        let reward = self.state.instant_reward(&action)?;
        self.state.apply_in_place(&action)?;
        if self.state.is_complete() {
            return Ok(StepResult { reward, done: true, end: Some(EpisodeEnd::Completed) });
        }
        if self.state.step() >= self.max_steps {
            return Ok(StepResult { reward: reward + self.r_fail, done: true, end: Some(EpisodeEnd::StepLimit) });
        }
        self.refresh();
        if self.valid.none() {
            return Ok(StepResult { reward: reward + self.r_fail, done: true, end: Some(EpisodeEnd::DeadEnd) });
        }
        Ok(StepResult { reward, done: false, end: None })
    }
}

/// Violations that end a vanilla episode. Leaving the target is not one of
/// them; it merely earns no reward.
fn vanilla_violation(state: &AssemblyState, action: &Action, cfg: &MaskConfig) -> Option<Constraint> {
    let v = mask_audit(state, action, cfg);
    if !v.in_bounds {
        return Some(Constraint::Bounds);
    }
    [(v.c, Constraint::C), (v.i, Constraint::I), (v.o, Constraint::O), (v.s, Constraint::S), (v.u, Constraint::U)]
        .into_iter()
        .find(|(c, _)| *c == Check::Fail)
        .map(|(_, k)| k)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{BrickCatalog, Dims, VoxelGrid};
    use crate::mask::MaskVariant;
    use crate::state::Inventory;

    fn state(target: &[[usize; 3]], dims: Dims, inv: Vec<u32>) -> AssemblyState {
        let cells: Vec<_> = target.iter().map(|&[x, y, z]| crate::geometry::Cell::new(x, y, z)).collect();
        AssemblyState::new(VoxelGrid::from_cells(dims, cells).unwrap(), Inventory::new(inv), Arc::new(BrickCatalog::default()))
            .unwrap()
    }

    #[test]
    fn observation_channels() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let s = state(&[[0, 0, 0], [1, 0, 0]], dims, vec![4, 2, 0, 0, 0, 0, 0, 0]);
        let obs = encode_observation(&s);
        let cells = 8;
        assert_eq!(obs.len(), 10 * cells);
        assert_eq!(obs[..cells].iter().sum::<f64>(), 2.0);
        assert_eq!(obs[cells..2 * cells].iter().sum::<f64>(), 0.0);
        let s = s.apply(&Action::new(0, 1, 0, 0, Orientation::Landscape)).unwrap();
        let s = s.apply(&Action::new(0, 0, 0, 0, Orientation::Landscape)).unwrap();
        let obs = encode_observation(&s);
        assert_eq!(obs[cells..2 * cells].iter().sum::<f64>(), 2.0);
        // (1,0,0) sits at (x*W + y)*D + z = 4
        assert_eq!(obs[cells + 4], 1.0);
        assert!(obs[2 * cells..3 * cells].iter().all(|&v| v == 0.5));
        assert!(obs[3 * cells..4 * cells].iter().all(|&v| v == 1.0));
        assert!(obs[4 * cells..5 * cells].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_target_completes_in_masked_mode() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state(&[[1, 1, 0]], dims, vec![1, 1, 1, 1, 1, 1, 1, 1]);
        let mut env = AssemblyEnv::new(s, MaskConfig::new(MaskVariant::Full), EnvMode::Masked, -10.0, 60).unwrap();
        let ones: Vec<usize> = env.sampling_mask().ones().collect();
        assert_eq!(ones.len(), 1);
        let r = env.step(ones[0]).unwrap();
        assert_eq!((r.reward, r.done, r.end), (1.0, true, Some(EpisodeEnd::Completed)));
    }

    #[test]
    fn vanilla_violation_terminates_with_penalty() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let s = state(&[[0, 0, 0], [0, 0, 1]], dims, vec![2, 0, 0, 0, 0, 0, 0, 0]);
        let mut env = AssemblyEnv::new(s, MaskConfig::new(MaskVariant::Full), EnvMode::Vanilla, -10.0, 60).unwrap();
        let space = env.space();
        // floating brick at z = 1
        let r = env.step(space.index(&Action::new(0, 0, 0, 1, Orientation::Landscape))).unwrap();
        assert_eq!((r.reward, r.done, r.end), (-10.0, true, Some(EpisodeEnd::Violation(Constraint::S))));
        env.reset();
        // out of inventory for 1x2
        let r = env.step(space.index(&Action::new(1, 0, 0, 0, Orientation::Landscape))).unwrap();
        assert_eq!(r.end, Some(EpisodeEnd::Violation(Constraint::I)));
        env.reset();
        // outside the target is allowed but worthless
        let r = env.step(space.index(&Action::new(0, 1, 1, 0, Orientation::Portrait))).unwrap();
        assert_eq!((r.reward, r.done), (0.0, false));
    }

    #[test]
    fn dead_end_adds_penalty() {
        // two-cell column target with a single 1x1: after the first brick
        // nothing remains to place
        let dims = Dims::new(1, 1, 2).unwrap();
        let s = state(&[[0, 0, 0], [0, 0, 1]], dims, vec![1, 0, 0, 0, 0, 0, 0, 0]);
        let mut env = AssemblyEnv::new(s, MaskConfig::new(MaskVariant::Full), EnvMode::Masked, -10.0, 60).unwrap();
        let a = env.sampling_mask().ones().next().unwrap();
        let r = env.step(a).unwrap();
        assert_eq!((r.reward, r.end), (0.5 - 10.0, Some(EpisodeEnd::DeadEnd)));
    }

    #[test]
    fn step_limit_counts_as_failure() {
        let dims = Dims::new(2, 1, 1).unwrap();
        let s = state(&[[0, 0, 0], [1, 0, 0]], dims, vec![2, 0, 0, 0, 0, 0, 0, 0]);
        let mut env = AssemblyEnv::new(s, MaskConfig::new(MaskVariant::Full), EnvMode::Masked, -10.0, 1).unwrap();
        let a = env.sampling_mask().ones().next().unwrap();
        let r = env.step(a).unwrap();
        assert_eq!((r.reward, r.end), (0.5 - 10.0, Some(EpisodeEnd::StepLimit)));
    }
}
