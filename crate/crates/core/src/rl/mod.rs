//! Masked policy-gradient training and greedy deployment.

pub mod env;
pub mod nn;
pub mod ppo;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use env::{encode_observation, AssemblyEnv, EnvMode, EpisodeEnd, StepResult};
pub use nn::{Architecture, PolicyNet};
pub use ppo::{gae, masked_distribution, masked_log_softmax, ppo_loss, ppo_loss_grad, LossStats, PpoConfig, Sample};

use crate::error::{Error, Result};
use crate::geometry::{Action, ActionSpace};
use crate::mask::{MaskConfig, MaskContext, MaskTimers};
use crate::plan::{Plan, PlanOutcome};
use crate::state::AssemblyState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    #[default]
    Mlp,
    Conv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub mode: EnvMode,
    pub mask: MaskConfig,
    pub net: NetKind,
    pub total_steps: usize,
    pub seed: u64,
    /// Stop once the rolling mean return reaches this value.
    pub target_return: Option<f64>,
    /// Episodes in the rolling mean.
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ppo: PpoConfig::default(),
            mode: EnvMode::Masked,
            mask: MaskConfig::default(),
            net: NetKind::Mlp,
            total_steps: 200_000,
            seed: 0,
            target_return: None,
            window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: usize,
    pub env_steps: usize,
    pub episodes: usize,
    /// Mean return of the episodes that ended during this update, if any.
    pub mean_return: Option<f64>,
    /// Mean return over the last `window` finished episodes.
    pub rolling_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub net: PolicyNet,
    pub curve: Vec<CurvePoint>,
    pub env_steps: usize,
    pub episodes: usize,
    /// Environment steps after which the rolling mean first reached the target.
    pub reached_at: Option<usize>,
    pub best_rolling: Option<f64>,
}

pub fn build_net(state: &AssemblyState, kind: NetKind, rng: &mut ChaCha8Rng) -> Result<PolicyNet> {
    let d = state.dims();
    let channels = 2 + state.catalog().len();
    let grid = [d.h, d.w, d.d];
    let n = ActionSpace::new(d, state.catalog().len()).size();
    let arch = match kind {
        NetKind::Mlp => Architecture::mlp(channels, grid, n),
        NetKind::Conv => Architecture::conv(channels, grid, n),
    };
    PolicyNet::new(arch, rng)
}

/// Train one policy for a single target, alternating collection and updates.
pub fn train(initial: &AssemblyState, cfg: &TrainConfig, mut progress: impl FnMut(&CurvePoint)) -> Result<TrainResult> {
    cfg.ppo.validate()?;
    if cfg.window == 0 {
        return Err(Error::InvalidConfig("window must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = build_net(initial, cfg.net, &mut rng)?;
    let mut opt = ppo::Adam::new(net.n_params(), cfg.ppo.adam_beta1, cfg.ppo.adam_beta2, cfg.ppo.adam_eps);
    let mut env = AssemblyEnv::new(initial.clone(), cfg.mask.clone(), cfg.mode, cfg.ppo.r_fail, cfg.ppo.max_episode_steps)?;
    let mut tracker = ppo::EpisodeTracker::default();
    let mut recent: VecDeque<(f64, bool)> = VecDeque::with_capacity(cfg.window);
    let mut res = TrainResult { net: net.clone(), curve: Vec::new(), env_steps: 0, episodes: 0, reached_at: None, best_rolling: None };
    let mut update = 0;
    while res.env_steps < cfg.total_steps {
        let steps = cfg.ppo.steps_per_update.min(cfg.total_steps - res.env_steps);
        let rollout = ppo::collect_rollouts(&net, &mut env, steps, &mut tracker, &mut rng)?;
        res.env_steps += rollout.len();
        let stats = ppo::ppo_update(&mut net, &mut opt, &rollout, &cfg.ppo, update, &mut rng)?;
        for &(ret, end) in &rollout.episodes {
            if recent.len() == cfg.window {
                recent.pop_front();
            }
            recent.push_back((ret, end == EpisodeEnd::Completed));
        }
        res.episodes += rollout.episodes.len();
        let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| if n == 0 { None } else { Some(xs.sum::<f64>() / n as f64) };
        let full = recent.len() == cfg.window;
        let point = CurvePoint {
            update,
            env_steps: res.env_steps,
            episodes: res.episodes,
            mean_return: mean(&mut rollout.episodes.iter().map(|e| e.0), rollout.episodes.len()),
            rolling_return: if full { mean(&mut recent.iter().map(|e| e.0), recent.len()) } else { None },
            success_rate: if full { mean(&mut recent.iter().map(|e| e.1 as u8 as f64), recent.len()) } else { None },
            policy_loss: stats.policy,
            value_loss: stats.value,
            entropy: stats.entropy,
        };
        if let Some(r) = point.rolling_return {
            res.best_rolling = Some(res.best_rolling.map_or(r, |b: f64| b.max(r)));
        }
        progress(&point);
        let reached = matches!((cfg.target_return, point.rolling_return), (Some(t), Some(r)) if r >= t);
        res.curve.push(point);
        update += 1;
        if reached {
            res.reached_at = Some(res.env_steps);
            break;
        }
    }
    res.net = net;
    Ok(res)
}

/// Most likely valid action under the masked policy; ties go to the lowest
/// action index. `None` when every action is masked.
pub fn act_greedy(state: &AssemblyState, net: &PolicyNet, mask: &MaskConfig) -> Result<Option<Action>> {
    act_greedy_timed(state, net, mask, None)
}

pub fn act_greedy_timed(state: &AssemblyState, net: &PolicyNet, mask: &MaskConfig, timers: Option<&MaskTimers>) -> Result<Option<Action>> {
    let valid = MaskContext::with_timers(state, mask, timers).enumerate();
    if valid.none() {
        return Ok(None);
    }
    let (out, _) = net.forward(&encode_observation(state), 1);
    if out.logits.len() != valid.len() {
        return Err(Error::InvalidConfig(format!(
            "policy has {} outputs but the action space has {}",
            out.logits.len(),
            valid.len()
        )));
    }
    let probs = masked_distribution(&out.logits, &valid)?;
    let mut best = None::<(usize, f64)>;
    for i in valid.ones() {
        if best.is_none_or(|(_, p)| probs[i] > p) {
            best = Some((i, probs[i]));
        }
    }
    let space = ActionSpace::new(state.dims(), state.catalog().len());
    Ok(best.map(|(i, _)| space.action(i)))
}

/// Greedy deployment from `initial` until completion, dead end or step limit.
pub fn greedy_plan(
    initial: &AssemblyState,
    net: &PolicyNet,
    mask: &MaskConfig,
    max_steps: usize,
    timers: Option<&MaskTimers>,
) -> Result<Plan> {
    let mut state = initial.clone();
    let mut actions = Vec::new();
    loop {
        if state.is_complete() {
            return Ok(Plan { actions, outcome: PlanOutcome::Completed });
        }
        if actions.len() >= max_steps {
            return Ok(Plan { actions, outcome: PlanOutcome::StepLimit });
        }
        match act_greedy_timed(&state, net, mask, timers)? {
            Some(a) => {
                state.apply_in_place(&a)?;
                actions.push(a);
            }
            None => return Ok(Plan { outcome: PlanOutcome::DeadEnd { step: actions.len() }, actions }),
        }
    }
}

/// Serialized policy with a format version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub version: u32,
    pub net: PolicyNet,
}

pub const POLICY_FILE_VERSION: u32 = 1;

impl PolicyFile {
    pub fn new(net: PolicyNet) -> Self {
        PolicyFile { version: POLICY_FILE_VERSION, net }
    }

    pub fn into_net(self) -> Result<PolicyNet> {
        if self.version != POLICY_FILE_VERSION {
            return Err(Error::Malformed(format!("unsupported policy file version {}", self.version)));
        }
        self.net.rebuild()
    }
}
