//! Replay validation of assembly sequences and the benchmark harness that
//! scores planners with full-mask replay as the arbiter.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Action, VoxelGrid};
use crate::mask::{mask_audit, Constraint, MaskConfig, MaskContext, MaskTimers, MaskVariant, MaskVerdict, TimerSnapshot};
use crate::mcts::{plan_sequence, MctsConfig};
use crate::plan::{Plan, PlanOutcome};
use crate::rl::{greedy_plan, train, TrainConfig};
use crate::shapegen::{complexity, SupportRule};
use crate::state::{AssemblyState, Inventory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReplayOutcome {
    ValidComplete,
    ValidIncomplete,
    Violation { step: usize, constraint: Constraint },
    /// The sequence was reported as ending in a dead end, yet the mask still
    /// admits an action (or the target is already complete).
    DeadEndClaimMismatch,
}

impl ReplayOutcome {
    pub fn is_success(self) -> bool {
        self == ReplayOutcome::ValidComplete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub outcome: ReplayOutcome,
    pub verdicts: Vec<MaskVerdict>,
    /// Fraction of target cells covered after the accepted prefix.
    pub coverage: f64,
}

/// Replay `actions` from `initial`, auditing every mask component at every
/// step and stopping at the first violation.
pub fn replay_validate(initial: &AssemblyState, actions: &[Action], config: &MaskConfig, claims_dead_end: bool) -> Result<ReplayReport> {
    let mut state = initial.clone();
    let mut verdicts = Vec::with_capacity(actions.len());
    let coverage = |s: &AssemblyState| {
        let t = s.target().count();
        if t == 0 {
            1.0
        } else {
            (t - s.remaining()) as f64 / t as f64
        }
    };
    for (step, a) in actions.iter().enumerate() {
        let v = mask_audit(&state, a, config);
        let failure = v.first_failure();
        verdicts.push(v);
        if let Some(constraint) = failure {
            return Ok(ReplayReport { outcome: ReplayOutcome::Violation { step, constraint }, verdicts, coverage: coverage(&state) });
        }
        state.apply_in_place(a)?;
    }
    let complete = state.is_complete();
    let outcome = if claims_dead_end {
        if complete || !MaskContext::new(&state, config).enumerate().none() {
            ReplayOutcome::DeadEndClaimMismatch
        } else {
            ReplayOutcome::ValidIncomplete
        }
    } else if complete {
        ReplayOutcome::ValidComplete
    } else {
        ReplayOutcome::ValidIncomplete
    };
    Ok(ReplayReport { outcome, verdicts, coverage: coverage(&state) })
}

/// A planner under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum PlannerSpec {
    Mcts(MctsConfig),
    /// Train one policy per shape, then deploy it greedily under the same mask.
    Rl(TrainConfig),
}

impl PlannerSpec {
    pub fn mask(&self) -> &MaskConfig {
        match self {
            PlannerSpec::Mcts(c) => &c.mask,
            PlannerSpec::Rl(c) => &c.mask,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            PlannerSpec::Mcts(c) => c.seed = seed,
            PlannerSpec::Rl(c) => c.seed = seed,
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct BenchShape {
    pub name: String,
    pub target: VoxelGrid,
    pub inventory: Inventory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeResult {
    pub name: String,
    pub seed: u64,
    pub c_v: usize,
    pub c_s: f64,
    pub planner_outcome: PlanOutcome,
    pub replay: ReplayOutcome,
    pub steps: usize,
    pub train_secs: f64,
    pub plan_secs: f64,
    pub mask_secs: f64,
    pub stability_secs: f64,
    /// The emitted sequence also replays cleanly under the planner's own mask.
    pub own_mask_valid: bool,
    #[serde(skip)]
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub planner: String,
    pub runs: Vec<ShapeResult>,
    /// `None` when no shape was run.
    pub success_rate: Option<f64>,
    pub violations: usize,
    pub c_v: Option<MeanStd>,
    pub c_s: Option<MeanStd>,
    pub mean_step_secs: Option<f64>,
    pub plan_secs: f64,
    pub mask_secs: f64,
    pub stability_secs: f64,
    /// Stability evaluation time over planning time. Mask work fans out over
    /// threads, so on several cores this can exceed 1.
    pub stability_share: Option<f64>,
    pub mask_share: Option<f64>,
}

impl BenchmarkResult {
    pub fn success_rate_label(&self) -> String {
        self.success_rate.map_or_else(|| "N/A".to_string(), |r| format!("{:.1}%", 100.0 * r))
    }
}

fn plan_one(planner: &PlannerSpec, state: &AssemblyState, timers: &MaskTimers) -> Result<(Plan, f64, f64)> {
    match planner {
        PlannerSpec::Mcts(cfg) => {
            let t0 = Instant::now();
            let p = plan_sequence(state, cfg, Some(timers))?;
            Ok((p.plan, 0.0, t0.elapsed().as_secs_f64()))
        }
        PlannerSpec::Rl(cfg) => {
            if state.is_complete() {
                return Ok((Plan { actions: vec![], outcome: PlanOutcome::Completed }, 0.0, 0.0));
            }
            let t0 = Instant::now();
            let net = match train(state, cfg, |_| {}) {
                Ok(r) => r.net,
                // nothing can be placed at all
                Err(crate::Error::AllMasked) => return Ok((Plan { actions: vec![], outcome: PlanOutcome::DeadEnd { step: 0 } }, 0.0, 0.0)),
                Err(e) => return Err(e),
            };
            let train_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let p = greedy_plan(state, &net, &cfg.mask, cfg.ppo.max_episode_steps, Some(timers))?;
            Ok((p, train_secs, t1.elapsed().as_secs_f64()))
        }
    }
}

/// Plan every shape under each seed, then replay-validate under the full
/// mask regardless of the planner's own mask.
pub fn run_benchmark(planner: &PlannerSpec, shapes: &[BenchShape], seeds: &[u64], label: &str) -> Result<BenchmarkResult> {
    let arbiter = MaskConfig { variant: MaskVariant::Full, ..planner.mask().clone() };
    let mut runs = Vec::new();
    for shape in shapes {
        for &seed in seeds {
            let spec = planner.with_seed(seed);
            let state = AssemblyState::new_allow_empty(shape.target.clone(), shape.inventory.clone(), Default::default())?;
            let timers = MaskTimers::default();
            let (plan, train_secs, plan_secs) = plan_one(&spec, &state, &timers)?;
            let dead = matches!(plan.outcome, PlanOutcome::DeadEnd { .. });
            let replay = replay_validate(&state, &plan.actions, &arbiter, dead)?.outcome;
            let own = replay_validate(&state, &plan.actions, spec.mask(), dead)?.outcome;
            let t = timers.snapshot();
            let c = complexity(&shape.target, SupportRule::default()).ok();
            log::info!("{} seed {seed}: {:?} -> {:?} in {} steps", shape.name, plan.outcome, replay, plan.actions.len());
            runs.push(ShapeResult {
                name: shape.name.clone(),
                seed,
                c_v: c.map_or(0, |c| c.c_v),
                c_s: c.map_or(0.0, |c| c.c_s),
                planner_outcome: plan.outcome,
                replay,
                steps: plan.actions.len(),
                train_secs,
                plan_secs,
                mask_secs: t.mask_secs,
                stability_secs: t.stability_secs,
                own_mask_valid: !matches!(own, ReplayOutcome::Violation { .. }),
                actions: plan.actions,
            });
        }
    }
    Ok(summarize(label, runs))
}

pub fn summarize(label: &str, runs: Vec<ShapeResult>) -> BenchmarkResult {
    let n = runs.len();
    let ok = runs.iter().filter(|r| r.replay.is_success()).count();
    let violations = runs.iter().filter(|r| matches!(r.replay, ReplayOutcome::Violation { .. })).count();
    let cv: Vec<f64> = runs.iter().map(|r| r.c_v as f64).collect();
    let cs: Vec<f64> = runs.iter().map(|r| r.c_s).collect();
    let plan_secs: f64 = runs.iter().map(|r| r.plan_secs).sum();
    let mask_secs: f64 = runs.iter().map(|r| r.mask_secs).sum();
    let stability_secs: f64 = runs.iter().map(|r| r.stability_secs).sum();
    let steps: usize = runs.iter().map(|r| r.steps).sum();
    let share = |x: f64| (plan_secs > 0.0).then(|| x / plan_secs);
    BenchmarkResult {
        planner: label.to_string(),
        success_rate: (n > 0).then(|| ok as f64 / n as f64),
        violations,
        c_v: mean_std(&cv),
        c_s: mean_std(&cs),
        mean_step_secs: (steps > 0).then(|| plan_secs / steps as f64),
        plan_secs,
        mask_secs,
        stability_secs,
        stability_share: share(stability_secs),
        mask_share: share(mask_secs),
        runs,
    }
}

/// Wall time of one full-space enumeration, for comparing mask variants on
/// identical states.
pub fn time_enumeration(state: &AssemblyState, config: &MaskConfig) -> (f64, TimerSnapshot) {
    let timers = MaskTimers::default();
    let t0 = Instant::now();
    MaskContext::with_timers(state, config, Some(&timers)).enumerate();
    (t0.elapsed().as_secs_f64(), timers.snapshot())
}
