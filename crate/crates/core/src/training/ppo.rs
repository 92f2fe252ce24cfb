//! The clipped-surrogate PPO objective, its analytic gradient, and the update loop.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::heads::{backward, forward, Distributions, HeadGrads};
use crate::policy::PolicyParams;
use crate::training::optim::Adam;
use crate::training::rollouts::{BatchStep, RolloutBatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gae_lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs_per_iter: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub kl_beta: f64,
    pub normalize_advantages: bool,
    pub sampling_budget: usize,
    /// Independent rollout streams per iteration; fixed so results do not depend on thread count.
    pub rollout_shards: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_eps: 0.2,
            gae_lambda: 0.95,
            lr: 0.01,
            batch_size: 32,
            epochs_per_iter: 1,
            value_coef: 0.5,
            entropy_coef: 0.01,
            kl_beta: 0.0,
            normalize_advantages: true,
            sampling_budget: 5120,
            rollout_shards: 8,
        }
    }
}

impl PpoConfig {
    /// The settings used for billion-parameter models.
    pub fn large_model_preset() -> Self {
        PpoConfig { lr: 2e-6, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0) {
            return Err(Error::Config("ppo.clip_eps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("ppo.gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("ppo.lr must be a non-negative real".into()));
        }
        if self.batch_size == 0 || self.sampling_budget == 0 || self.rollout_shards == 0 {
            return Err(Error::Config(
                "ppo.batch_size, ppo.sampling_budget and ppo.rollout_shards must be positive".into(),
            ));
        }
        if self.kl_beta < 0.0 || self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Config("ppo coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// Loss components averaged over a mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub mean_reward: f64,
}

/// Per-iteration aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub iteration_reward: f64,
    pub kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Surrogate loss over `steps` (advantages already filled) and its gradient.
pub fn ppo_loss_and_grad(params: &PolicyParams, steps: &[&BatchStep], cfg: &PpoConfig) -> (f64, LossStats, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let n = steps.len().max(1) as f64;
    let mut st = LossStats::default();
    for s in steps {
        let allowed = s.enc.allowed;
        let fwd = forward(params, &s.enc);
        let d = Distributions::new(&fwd, allowed);
        let logp = d.log_prob(allowed, s.choice);
        let ratio = (logp - s.old_log_prob).exp();
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
        let entropy = d.entropy(allowed);
        let verr = fwd.value - s.ret;

        st.policy_loss -= unclipped.min(clipped);
        st.value_loss += verr * verr;
        st.entropy += entropy;
        st.approx_kl += s.old_log_prob - logp;
        st.mean_reward += s.reward;

        let mut up = HeadGrads::zeros(s.enc.candidates.len());
        if unclipped <= clipped {
            up.add_log_prob(&d, allowed, s.choice, -unclipped / n);
        }
        up.add_entropy(&d, allowed, -cfg.entropy_coef / n);
        up.value = 2.0 * cfg.value_coef * verr / n;
        backward(params, &s.enc, &fwd, &up, &mut grad);
    }
    st.policy_loss /= n;
    st.value_loss /= n;
    st.entropy /= n;
    st.approx_kl /= n;
    st.mean_reward /= n;
    let loss = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
    (loss, st, grad)
}

/// Shuffled mini-batch descent for `cfg.epochs_per_iter` epochs; the last short batch is kept.
pub fn ppo_update(
    params: &PolicyParams,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    opt: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<(PolicyParams, PpoStats)> {
    cfg.validate()?;
    let mut out = params.clone();
    let mut order: Vec<usize> = (0..batch.steps.len()).collect();
    let mut acc = PpoStats { iteration_reward: batch.mean_episode_reward(), ..Default::default() };
    let mut seen = 0.0;
    for _ in 0..cfg.epochs_per_iter {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let steps: Vec<&BatchStep> = chunk.iter().map(|i| &batch.steps[*i]).collect();
            let (loss, st, grad) = ppo_loss_and_grad(&out, &steps, cfg);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "PPO loss became {loss} (policy {}, value {}, entropy {}, kl {})",
                    st.policy_loss, st.value_loss, st.entropy, st.approx_kl
                )));
            }
            let w = steps.len() as f64;
            acc.kl += st.approx_kl * w;
            acc.policy_loss += st.policy_loss * w;
            acc.value_loss += st.value_loss * w;
            acc.entropy += st.entropy * w;
            seen += w;
            opt.step(&mut out.values, &grad);
        }
    }
    if seen > 0.0 {
        acc.kl /= seen;
        acc.policy_loss /= seen;
        acc.value_loss /= seen;
        acc.entropy /= seen;
    }
    if !out.is_finite() {
        return Err(Error::Numeric("PPO update produced non-finite weights".into()));
    }
    Ok((out, acc))
}
