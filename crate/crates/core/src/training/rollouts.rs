//! On-policy rollout collection and generalized advantage estimation.

use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{rollout_traced, EnvConfig, Question, Trajectory};
use crate::error::{Error, Result};
use crate::policy::heads::{forward, Choice, Distributions, Encoded};
use crate::policy::{Memory, ParametricPolicy, PolicyParams, SampleMode};
use crate::retriever::RetrieverHandle;
use crate::text::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStep {
    pub enc: Encoded,
    pub choice: Choice,
    pub state_digest: u64,
    pub old_log_prob: f64,
    pub value: f64,
    /// Environment reward, minus the KL penalty when one is configured.
    pub reward: f64,
    pub advantage: f64,
    pub ret: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBatch {
    pub steps: Vec<BatchStep>,
    /// Step ranges of each episode, in order.
    pub episodes: Vec<Range<usize>>,
    pub trajectories: Vec<Trajectory>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Mean undiscounted environment reward per episode.
    pub fn mean_episode_reward(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        let total: f64 = self.trajectories.iter().map(|t| t.rewards().iter().sum::<f64>()).sum();
        total / self.trajectories.len() as f64
    }

    fn push_episode(&mut self, traj: Trajectory, encs: Vec<crate::policy::StepTrace>) {
        let start = self.steps.len();
        let n = traj.steps.len();
        for (i, (s, tr)) in traj.steps.iter().zip(encs).enumerate() {
            self.steps.push(BatchStep {
                enc: tr.encoded,
                choice: tr.choice,
                state_digest: s.state_digest,
                old_log_prob: s.log_prob,
                value: s.value,
                reward: s.reward,
                advantage: 0.0,
                ret: 0.0,
                terminal: i + 1 == n,
            });
        }
        self.episodes.push(start..start + n);
        self.trajectories.push(traj);
    }

    fn append(&mut self, other: RolloutBatch) {
        let offset = self.steps.len();
        self.steps.extend(other.steps);
        self.episodes
            .extend(other.episodes.into_iter().map(|r| r.start + offset..r.end + offset));
        self.trajectories.extend(other.trajectories);
    }
}

/// What rollout collection needs besides the parameters.
pub struct RolloutSource<'a, R: ?Sized> {
    pub questions: &'a [Arc<Question>],
    pub retriever: &'a R,
    pub memory: &'a Memory,
    pub env: &'a EnvConfig,
}

/// Samples questions uniformly with replacement and runs sampled rollouts until
/// at least `budget` steps are collected.
///
/// Work is split into `shards` independent streams seeded from one draw of
/// `rng`; shards run in parallel and are merged in shard order, so the batch
/// does not depend on the number of threads.
pub fn collect_rollouts<R: RetrieverHandle + ?Sized>(
    params: &PolicyParams,
    src: &RolloutSource<'_, R>,
    budget: usize,
    shards: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBatch> {
    if budget == 0 {
        return Err(Error::Contract("rollout budget must be at least 1".into()));
    }
    if src.questions.is_empty() {
        return Err(Error::Contract("rollout collection needs at least one question".into()));
    }
    let shards = shards.max(1);
    let base: u64 = rng.gen();
    let per_shard = budget.div_ceil(shards);
    let policy = ParametricPolicy::new(params, src.memory);
    let parts: Vec<Result<RolloutBatch>> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, &format!("shard{i}")));
            let mut part = RolloutBatch::default();
            while part.steps.len() < per_shard {
                let q = &src.questions[rng.gen_range(0..src.questions.len())];
                let (traj, traces) =
                    rollout_traced(Arc::clone(q), &policy, src.retriever, src.env, &mut rng, SampleMode::Sample)?;
                part.push_episode(traj, traces);
            }
            Ok(part)
        })
        .collect();
    let mut batch = RolloutBatch::default();
    for p in parts {
        batch.append(p?);
    }
    Ok(batch)
}

/// Subtracts `beta * (log pi - log pi_ref)` from every step's reward.
pub fn apply_kl_penalty(batch: &mut RolloutBatch, reference: &PolicyParams, beta: f64) {
    if beta == 0.0 {
        return;
    }
    for s in &mut batch.steps {
        let d = Distributions::new(&forward(reference, &s.enc), s.enc.allowed);
        let ref_lp = d.log_prob(s.enc.allowed, s.choice);
        s.reward -= beta * (s.old_log_prob - ref_lp);
    }
}

/// GAE over one episode whose last step is terminal.
///
/// Returns `(advantages, returns)` with `return_t = A_t + V(s_t)`.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Fills advantages and returns episode by episode.
pub fn compute_gae(batch: &mut RolloutBatch, gamma: f64, lambda: f64) {
    for ep in &batch.episodes {
        let steps = &batch.steps[ep.clone()];
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.value).collect();
        let (adv, ret) = gae(&rewards, &values, gamma, lambda);
        for (i, s) in batch.steps[ep.clone()].iter_mut().enumerate() {
            s.advantage = adv[i];
            s.ret = ret[i];
        }
    }
}

/// Shifts and scales advantages to zero mean and unit variance.
pub fn normalize_advantages(batch: &mut RolloutBatch) {
    let n = batch.steps.len();
    if n < 2 {
        return;
    }
    let mean = batch.steps.iter().map(|s| s.advantage).sum::<f64>() / n as f64;
    let var = batch.steps.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for s in &mut batch.steps {
        s.advantage -= mean;
        if std > 1e-8 {
            s.advantage /= std;
        }
    }
}
