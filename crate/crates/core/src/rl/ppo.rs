//! Clipped-surrogate PPO with generalized advantage estimation over a masked
//! categorical policy.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{AssemblyEnv, EpisodeEnd};
use super::nn::PolicyNet;
use crate::error::{Error, Result};
use crate::mask::ActionBitmap;
use crate::state::DEFAULT_R_FAIL;

/// Stand-in for minus infinity on masked logits.
pub const MASKED_LOGIT: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub steps_per_update: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub clip_range: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub max_episode_steps: usize,
    pub max_grad_norm: f64,
    pub r_fail: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            steps_per_update: 256,
            batch_size: 32,
            epochs: 4,
            entropy_coef: 0.1,
            gae_lambda: 0.95,
            gamma: 0.95,
            clip_range: 0.5,
            value_coef: 1.0,
            learning_rate: 3e-4,
            max_episode_steps: 60,
            max_grad_norm: 0.5,
            r_fail: DEFAULT_R_FAIL,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.steps_per_update == 0 || self.batch_size == 0 || self.epochs == 0 || self.max_episode_steps == 0 {
            return bad("step, batch, epoch and episode counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_range > 0.0) || !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("clip_range, learning_rate and max_grad_norm must be positive");
        }
        if !(self.entropy_coef >= 0.0) || !(self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if !self.r_fail.is_finite() || self.r_fail >= 0.0 {
            return bad("r_fail must be a finite negative number");
        }
        Ok(())
    }
}

/// Log-probabilities of the masked categorical; masked entries are `-inf`.
pub fn masked_log_softmax(logits: &[f64], mask: &ActionBitmap) -> Result<Vec<f64>> {
    if mask.none() {
        return Err(Error::AllMasked);
    }
    let z = |i: usize| if mask.get(i) { logits[i] } else { MASKED_LOGIT };
    let max = (0..logits.len()).map(z).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = mask.ones().map(|i| (logits[i] - max).exp()).sum();
    let lse = max + sum.ln();
    Ok((0..logits.len()).map(|i| if mask.get(i) { logits[i] - lse } else { f64::NEG_INFINITY }).collect())
}

/// Softmax restricted to the valid actions; masked probabilities are exactly 0.
pub fn masked_distribution(logits: &[f64], mask: &ActionBitmap) -> Result<Vec<f64>> {
    Ok(masked_log_softmax(logits, mask)?.into_iter().map(f64::exp).collect())
}

/// Generalized advantage estimates and value targets; `dones[t]` marks that
/// transition `t` ended its episode. `last_value` bootstraps the tail.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in xs.iter_mut() {
        *x = (*x - mean) / (std + 1e-8);
    }
}

/// One collection iteration.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub obs: Vec<f64>,
    pub obs_len: usize,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub masks: Vec<ActionBitmap>,
    pub last_value: f64,
    /// Returns and end causes of the episodes finished during collection.
    pub episodes: Vec<(f64, EpisodeEnd)>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Running episode return carried across collection iterations.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTracker {
    pub ret: f64,
}

pub fn collect_rollouts(
    net: &PolicyNet,
    env: &mut AssemblyEnv,
    steps: usize,
    tracker: &mut EpisodeTracker,
    rng: &mut impl Rng,
) -> Result<Rollout> {
    let mut r = Rollout { obs_len: net.arch().input_len(), ..Default::default() };
    for _ in 0..steps {
        let obs = env.observation();
        let (out, _) = net.forward(&obs, 1);
        let mask = env.sampling_mask().clone();
        let logp = masked_log_softmax(&out.logits, &mask)?;
        let valid: Vec<usize> = mask.ones().collect();
        let dist = WeightedIndex::new(valid.iter().map(|&i| logp[i].exp()))
            .map_err(|e| Error::NonFiniteLoss { update: 0, detail: format!("sampling weights: {e}") })?;
        let a = valid[dist.sample(rng)];
        let step = env.step(a)?;
        tracker.ret += step.reward;
        r.obs.extend_from_slice(&obs);
        r.actions.push(a);
        r.log_probs.push(logp[a]);
        r.rewards.push(step.reward);
        r.values.push(out.values[0]);
        r.dones.push(step.done);
        r.masks.push(mask);
        if step.done {
            r.episodes.push((tracker.ret, step.end.expect("terminal step carries its cause")));
            tracker.ret = 0.0;
            env.reset();
        }
    }
    r.last_value = if r.dones.last().copied().unwrap_or(true) {
        0.0
    } else {
        net.forward(&env.observation(), 1).0.values[0]
    };
    Ok(r)
}

/// One training sample as seen by the loss.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
    pub mask: &'a ActionBitmap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

fn loss_impl(net: &PolicyNet, samples: &[Sample<'_>], cfg: &PpoConfig, want_grad: bool) -> Result<(LossStats, Option<Vec<f64>>)> {
    let b = samples.len();
    let n_act = net.arch().n_actions;
    let mut obs = Vec::with_capacity(b * net.arch().input_len());
    for s in samples {
        obs.extend_from_slice(s.obs);
    }
    let (out, cache) = net.forward(&obs, b);
    let mut dlogits = vec![0.0; b * n_act];
    let mut dvalues = vec![0.0; b];
    let mut st = LossStats::default();
    let inv_b = 1.0 / b as f64;
    for (k, s) in samples.iter().enumerate() {
        let logits = &out.logits[k * n_act..(k + 1) * n_act];
        let logp = masked_log_softmax(logits, s.mask)?;
        let entropy: f64 = s.mask.ones().map(|i| -logp[i].exp() * logp[i]).sum();
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
        let surr = (ratio * s.advantage).min(clipped * s.advantage);
        let active = !((s.advantage > 0.0 && ratio > 1.0 + cfg.clip_range) || (s.advantage < 0.0 && ratio < 1.0 - cfg.clip_range));
        let v = out.values[k];
        st.policy -= surr * inv_b;
        st.value += (v - s.ret).powi(2) * inv_b;
        st.entropy += entropy * inv_b;
        st.clip_fraction += if active { 0.0 } else { inv_b };
        st.approx_kl += (s.old_log_prob - logp[s.action]) * inv_b;
        if want_grad {
            // d(-surr)/d logp(a)
            let g_logp = if active { -ratio * s.advantage } else { 0.0 };
            let row = &mut dlogits[k * n_act..(k + 1) * n_act];
            for i in s.mask.ones() {
                let p = logp[i].exp();
                let onehot = if i == s.action { 1.0 } else { 0.0 };
                let d_ent = -p * (logp[i] + entropy);
                row[i] = inv_b * (g_logp * (onehot - p) - cfg.entropy_coef * d_ent);
            }
            dvalues[k] = inv_b * 2.0 * cfg.value_coef * (v - s.ret);
        }
    }
    st.total = st.policy + cfg.value_coef * st.value - cfg.entropy_coef * st.entropy;
    if !st.total.is_finite() {
        return Err(Error::NonFiniteLoss { update: 0, detail: format!("{st:?}") });
    }
    let grad = want_grad.then(|| net.backward(&cache, &dlogits, &dvalues));
    Ok((st, grad))
}

/// Minibatch loss: clipped surrogate, value error and entropy bonus.
pub fn ppo_loss(net: &PolicyNet, samples: &[Sample<'_>], cfg: &PpoConfig) -> Result<LossStats> {
    Ok(loss_impl(net, samples, cfg, false)?.0)
}

/// Loss and its gradient with respect to every network parameter.
pub fn ppo_loss_grad(net: &PolicyNet, samples: &[Sample<'_>], cfg: &PpoConfig) -> Result<(LossStats, Vec<f64>)> {
    let (st, g) = loss_impl(net, samples, cfg, true)?;
    Ok((st, g.expect("gradient requested")))
}

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1, beta2, eps }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Rescale `grad` so its Euclidean norm does not exceed `max_norm`.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Several epochs of minibatch updates over one rollout.
pub fn ppo_update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    rollout: &Rollout,
    cfg: &PpoConfig,
    update: usize,
    rng: &mut impl Rng,
) -> Result<LossStats> {
    let (mut adv, returns) = gae(&rollout.rewards, &rollout.values, &rollout.dones, rollout.last_value, cfg.gamma, cfg.gae_lambda);
    normalize(&mut adv);
    let n = rollout.len();
    let ol = rollout.obs_len;
    let mut order: Vec<usize> = (0..n).collect();
    let mut sum = LossStats::default();
    let mut batches = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let samples: Vec<Sample<'_>> = chunk
                .iter()
                .map(|&i| Sample {
                    obs: &rollout.obs[i * ol..(i + 1) * ol],
                    action: rollout.actions[i],
                    old_log_prob: rollout.log_probs[i],
                    advantage: adv[i],
                    ret: returns[i],
                    mask: &rollout.masks[i],
                })
                .collect();
            let (st, mut grad) = ppo_loss_grad(net, &samples, cfg).map_err(|e| match e {
                Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss { update, detail },
                e => e,
            })?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { update, detail: "non-finite gradient".into() });
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(net.params_mut(), &grad, cfg.learning_rate);
            sum.policy += st.policy;
            sum.value += st.value;
            sum.entropy += st.entropy;
            sum.total += st.total;
            sum.clip_fraction += st.clip_fraction;
            sum.approx_kl += st.approx_kl;
            batches += 1;
        }
    }
    let k = batches.max(1) as f64;
    Ok(LossStats {
        policy: sum.policy / k,
        value: sum.value / k,
        entropy: sum.entropy / k,
        total: sum.total / k,
        clip_fraction: sum.clip_fraction / k,
        approx_kl: sum.approx_kl / k,
    })
}
