//! UCT tree search whose branching is restricted to mask-valid actions.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, ActionSpace};
use crate::mask::{MaskConfig, MaskContext, MaskTimers};
use crate::plan::{Plan, PlanOutcome};
use crate::state::{AssemblyState, DEFAULT_R_FAIL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MctsConfig {
    pub simulations_per_move: usize,
    pub lookahead_depth: usize,
    pub max_episode_steps: usize,
    pub exploration_c: f64,
    pub r_fail: f64,
    pub mask: MaskConfig,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            simulations_per_move: 200,
            lookahead_depth: 100,
            max_episode_steps: 60,
            exploration_c: std::f64::consts::SQRT_2,
            r_fail: DEFAULT_R_FAIL,
            mask: MaskConfig::default(),
            seed: 0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations_per_move == 0 || self.lookahead_depth == 0 || self.max_episode_steps == 0 {
            return Err(Error::InvalidConfig("simulations, lookahead depth and step cap must be positive".into()));
        }
        if !(self.exploration_c > 0.0) {
            return Err(Error::InvalidConfig("exploration_c must be positive".into()));
        }
        if !self.r_fail.is_finite() || self.r_fail >= 0.0 {
            return Err(Error::InvalidConfig("r_fail must be a finite negative number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub valid_actions: usize,
    pub simulations: usize,
    pub chosen_visits: u32,
    pub chosen_value: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDecision {
    Act(Action, StepStats),
    DeadEnd,
}

struct Node {
    state: AssemblyState,
    /// Reward for the transition into this node.
    reward: f64,
    visits: u32,
    total: f64,
    children: Vec<(usize, usize)>,
    untried: Vec<usize>,
    terminal: Option<f64>,
}

struct Tree<'a> {
    nodes: Vec<Node>,
    cfg: &'a MctsConfig,
    space: ActionSpace,
    timers: Option<&'a MaskTimers>,
}

impl<'a> Tree<'a> {
    fn make_node(&mut self, state: AssemblyState, reward: f64, root: bool, rng: &mut impl Rng) -> usize {
        let (untried, terminal) = if state.is_complete() {
            (Vec::new(), Some(0.0))
        } else if !root && state.step() >= self.cfg.max_episode_steps {
            (Vec::new(), Some(self.cfg.r_fail))
        } else {
            let mut valid: Vec<usize> = MaskContext::with_timers(&state, &self.cfg.mask, self.timers).enumerate().ones().collect();
            valid.shuffle(rng);
            let dead = valid.is_empty().then_some(self.cfg.r_fail);
            (valid, dead)
        };
        self.nodes.push(Node { state, reward, visits: 0, total: 0.0, children: Vec::new(), untried, terminal });
        self.nodes.len() - 1
    }

    fn select_child(&self, id: usize) -> usize {
        let n = &self.nodes[id];
        let ln = (n.visits.max(1) as f64).ln();
        let mut best: Option<(f64, usize, usize)> = None;
        for &(a, c) in &n.children {
            let ch = &self.nodes[c];
            let score = ch.total / ch.visits as f64 + self.cfg.exploration_c * (ln / ch.visits as f64).sqrt();
            let better = match best {
                None => true,
                Some((s, ba, _)) => score > s || (score == s && a < ba),
            };
            if better {
                best = Some((score, a, c));
            }
        }
        best.expect("selection on a node with children").2
    }

    /// Uniform random masked rollout; returns the accumulated reward.
    fn rollout(&self, state: &AssemblyState, rng: &mut impl Rng) -> Result<f64> {
        let mut s = state.clone();
        let mut ret = 0.0;
        let mut order: Vec<usize> = (0..self.space.size()).collect();
        for _ in 0..self.cfg.lookahead_depth {
            if s.is_complete() {
                return Ok(ret);
            }
            if s.step() >= self.cfg.max_episode_steps {
                return Ok(ret + self.cfg.r_fail);
            }
            order.shuffle(rng);
            let ctx = MaskContext::with_timers(&s, &self.cfg.mask, self.timers);
            let Some(i) = ctx.first_valid(order.iter().copied()) else {
                return Ok(ret + self.cfg.r_fail);
            };
            let a = self.space.action(i);
            ret += s.instant_reward(&a)?;
            s.apply_in_place(&a)?;
        }
        Ok(ret)
    }

    fn simulate(&mut self, root: usize, rng: &mut impl Rng) -> Result<()> {
        let mut path = vec![root];
        let mut id = root;
        let value;
        loop {
            if let Some(t) = self.nodes[id].terminal {
                value = t;
                break;
            }
            if let Some(a) = self.nodes[id].untried.pop() {
                let action = self.space.action(a);
                let parent = &self.nodes[id].state;
                let reward = parent.instant_reward(&action)?;
                let next = parent.apply(&action)?;
                let child = self.make_node(next, reward, false, rng);
                self.nodes[id].children.push((a, child));
                path.push(child);
                value = match self.nodes[child].terminal {
                    Some(t) => t,
                    None => self.rollout(&self.nodes[child].state, rng)?,
                };
                break;
            }
            id = self.select_child(id);
            path.push(id);
        }
        let prefix: f64 = path[1..].iter().map(|&n| self.nodes[n].reward).sum();
        let ret = prefix + value;
        for &n in &path {
            self.nodes[n].visits += 1;
            self.nodes[n].total += ret;
        }
        Ok(())
    }
}

/// One search from `state`; the max-visit child wins, lowest index on ties.
pub fn plan_step(state: &AssemblyState, cfg: &MctsConfig, rng: &mut ChaCha8Rng, timers: Option<&MaskTimers>) -> Result<StepDecision> {
    cfg.validate()?;
    let start = Instant::now();
    let space = ActionSpace::new(state.dims(), state.catalog().len());
    let mut tree = Tree { nodes: Vec::new(), cfg, space, timers };
    let root = tree.make_node(state.clone(), 0.0, true, rng);
    if tree.nodes[root].untried.is_empty() {
        return Ok(StepDecision::DeadEnd);
    }
    let valid_actions = tree.nodes[root].untried.len();
    for _ in 0..cfg.simulations_per_move {
        tree.simulate(root, rng)?;
    }
    let (a, c) = tree.nodes[root]
        .children
        .iter()
        .copied()
        .max_by(|x, y| tree.nodes[x.1].visits.cmp(&tree.nodes[y.1].visits).then(y.0.cmp(&x.0)))
        .expect("at least one expansion");
    let ch = &tree.nodes[c];
    let stats = StepStats {
        step: state.step(),
        valid_actions,
        simulations: cfg.simulations_per_move,
        chosen_visits: ch.visits,
        chosen_value: ch.total / ch.visits as f64,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(StepDecision::Act(space.action(a), stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctsPlan {
    pub plan: Plan,
    pub stats: Vec<StepStats>,
}

/// Repeated search-and-apply until completion, dead end or the step cap.
pub fn plan_sequence(initial: &AssemblyState, cfg: &MctsConfig, timers: Option<&MaskTimers>) -> Result<MctsPlan> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial.clone();
    let mut actions = Vec::new();
    let mut stats = Vec::new();
    let outcome = loop {
        if state.is_complete() {
            break PlanOutcome::Completed;
        }
        if actions.len() >= cfg.max_episode_steps {
            break PlanOutcome::StepLimit;
        }
        match plan_step(&state, cfg, &mut rng, timers)? {
            StepDecision::DeadEnd => break PlanOutcome::DeadEnd { step: actions.len() },
            StepDecision::Act(a, st) => {
                log::debug!("step {}: {:?} ({} visits)", actions.len(), a, st.chosen_visits);
                state.apply_in_place(&a)?;
                actions.push(a);
                stats.push(st);
            }
        }
    };
    Ok(MctsPlan { plan: Plan { actions, outcome }, stats })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{BrickCatalog, Cell, Dims, Orientation, VoxelGrid};
    use crate::mask::{mask, MaskVariant};
    use crate::state::Inventory;

    fn state(dims: Dims, cells: Vec<Cell>, inv: Vec<u32>) -> AssemblyState {
        AssemblyState::new_allow_empty(VoxelGrid::from_cells(dims, cells).unwrap(), Inventory::new(inv), Arc::new(BrickCatalog::default()))
            .unwrap()
    }

    fn quick() -> MctsConfig {
        MctsConfig { simulations_per_move: 30, ..Default::default() }
    }

    #[test]
    fn forced_move() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state(dims, vec![Cell::new(1, 0, 0)], vec![1, 0, 0, 0, 0, 0, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match plan_step(&s, &quick(), &mut rng, None).unwrap() {
            StepDecision::Act(a, st) => {
                assert_eq!(a, Action::new(0, 1, 0, 0, Orientation::Landscape));
                assert_eq!(st.valid_actions, 1);
            }
            StepDecision::DeadEnd => panic!("expected a move"),
        }
    }

    #[test]
    fn all_masked_is_dead_end() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state(dims, vec![Cell::new(1, 0, 0)], vec![0; 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(plan_step(&s, &quick(), &mut rng, None).unwrap(), StepDecision::DeadEnd);
        let p = plan_sequence(&s, &quick(), None).unwrap();
        assert_eq!(p.plan.outcome, PlanOutcome::DeadEnd { step: 0 });
    }

    #[test]
    fn full_layer_of_singles() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state(dims, VoxelGrid::full(dims).cells().collect(), vec![4, 0, 0, 0, 0, 0, 0, 0]);
        let cfg = quick();
        let p = plan_sequence(&s, &cfg, None).unwrap();
        assert_eq!(p.plan.outcome, PlanOutcome::Completed);
        assert_eq!(p.plan.actions.len(), 4);
        let mut cur = s.clone();
        for a in &p.plan.actions {
            assert!(mask(&cur, a, &cfg.mask).overall);
            cur = cur.apply(a).unwrap();
        }
    }

    #[test]
    fn flat_two_by_four_completes() {
        let dims = Dims::new(2, 4, 1).unwrap();
        let s = state(dims, VoxelGrid::full(dims).cells().collect(), vec![8, 4, 2, 0, 0, 2, 1, 0]);
        let p = plan_sequence(&s, &quick(), None).unwrap();
        assert_eq!(p.plan.outcome, PlanOutcome::Completed);
        assert!(p.plan.actions.len() <= 8);
        assert!(p.stats.iter().all(|st| (-10.0..=1.0).contains(&st.chosen_value)));
    }

    #[test]
    fn empty_target_completes_immediately() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state(dims, vec![], vec![1; 8]);
        let p = plan_sequence(&s, &quick(), None).unwrap();
        assert_eq!(p.plan, Plan { actions: vec![], outcome: PlanOutcome::Completed });
    }

    #[test]
    fn seeded_runs_repeat() {
        let dims = Dims::new(2, 3, 2).unwrap();
        let s = state(dims, VoxelGrid::full(dims).cells().collect(), vec![12, 6, 0, 0, 0, 0, 0, 0]);
        let cfg = MctsConfig { mask: MaskConfig::new(MaskVariant::Full), seed: 5, ..quick() };
        let a = plan_sequence(&s, &cfg, None).unwrap();
        let b = plan_sequence(&s, &cfg, None).unwrap();
        assert_eq!(a.plan, b.plan);
    }
}
