//! Warm-up behavior cloning followed by PPO, with per-iteration evaluation.

pub mod bc;
pub mod optim;
pub mod ppo;
pub mod rollouts;
pub mod warmup;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, EvalReport};
use crate::policy::{PolicyConfig, PolicyParams, SampleMode};
use crate::retriever::CachedRetriever;
use crate::text::derive_seed;
use crate::worldgen::World;

pub use bc::{bc_loss, bc_loss_and_grad, behavior_clone, encode_examples, BcConfig, EncodedExample};
pub use optim::Adam;
pub use ppo::{ppo_loss_and_grad, ppo_update, LossStats, PpoConfig, PpoStats};
pub use rollouts::{
    apply_kl_penalty, collect_rollouts, compute_gae, gae, normalize_advantages, BatchStep, RolloutBatch, RolloutSource,
};
pub use warmup::{build_warmup_dataset, ExampleType, RewriteOracle, SftExample, SftRecord, WarmupVariant, KNOWN_F1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmupConfig {
    pub variant: WarmupVariant,
    /// Probability that the rewrite oracle returns the world's best template.
    pub rewrite_oracle_q: f64,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        WarmupConfig { variant: WarmupVariant::Pi0, rewrite_oracle_q: 0.7 }
    }
}

impl WarmupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rewrite_oracle_q) {
            return Err(Error::Config("warmup.rewrite_oracle_q must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything `train` needs besides the world.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub seed: u64,
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub warmup: WarmupConfig,
    pub bc: BcConfig,
    pub ppo: PpoConfig,
    pub iters: usize,
    pub eval: EvalOptions,
}

impl TrainSettings {
    pub fn new(seed: u64) -> Self {
        TrainSettings {
            seed,
            env: EnvConfig::default(),
            policy: PolicyConfig::default(),
            warmup: WarmupConfig::default(),
            bc: BcConfig::default(),
            ppo: PpoConfig::default(),
            iters: 20,
            eval: EvalOptions { seed, ..Default::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.policy.validate()?;
        self.warmup.validate()?;
        self.bc.validate()?;
        self.ppo.validate()
    }
}

/// One row of the metrics log. Training columns are empty for the warm-up row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub mean_reward: Option<f64>,
    pub kl: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub eval_em: f64,
    pub eval_f1: f64,
    pub eval_hit: Option<f64>,
    pub retrieval_pct: f64,
}

impl IterRecord {
    fn new(iter: usize, stats: Option<&PpoStats>, report: &EvalReport) -> Self {
        IterRecord {
            iter,
            mean_reward: stats.map(|s| s.iteration_reward),
            kl: stats.map(|s| s.kl),
            policy_loss: stats.map(|s| s.policy_loss),
            value_loss: stats.map(|s| s.value_loss),
            entropy: stats.map(|s| s.entropy),
            eval_em: report.em,
            eval_f1: report.f1,
            eval_hit: report.hit,
            retrieval_pct: report.retrieval_pct,
        }
    }
}

/// Writes the metrics log as comma-separated rows.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[IterRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrainOutcome {
    pub warmup: PolicyParams,
    pub final_params: PolicyParams,
    pub history: Vec<IterRecord>,
}

/// Builds the warm-up dataset for `world` and behavior-clones a fresh policy on it.
pub fn warm_start(world: &World, s: &TrainSettings) -> Result<PolicyParams> {
    s.validate()?;
    let oracle = RewriteOracle::new(world.oracle_map.clone(), s.warmup.rewrite_oracle_q, derive_seed(s.seed, "warmup/oracle"));
    let data = build_warmup_dataset(&world.questions, &*world.index, &oracle, &world.memory, s.warmup.variant, &s.env)?;
    let init = PolicyParams::init(s.policy);
    let encoded = encode_examples(&init, &world.memory, &data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, "warmup/bc"));
    behavior_clone(&init, &encoded, &s.bc, &mut rng)
}

/// Runs `s.iters` PPO iterations starting from `warm`, evaluating greedily
/// after the start and after every iteration. `on_iter` sees each record with
/// the parameters it was measured on.
pub fn train_from(
    world: &World,
    warm: &PolicyParams,
    s: &TrainSettings,
    mut on_iter: impl FnMut(&IterRecord, &PolicyParams) -> Result<()>,
) -> Result<TrainOutcome> {
    s.validate()?;
    let retriever = CachedRetriever::new(&*world.index);
    let src = RolloutSource { questions: &world.questions, retriever: &retriever, memory: &world.memory, env: &s.env };
    let eval_once = |p: &PolicyParams| evaluate(p, world, &s.env, SampleMode::Greedy, &s.eval).map(|(r, _)| r);

    let mut history = Vec::with_capacity(s.iters + 1);
    let first = IterRecord::new(0, None, &eval_once(warm)?);
    on_iter(&first, warm)?;
    history.push(first);

    let mut params = warm.clone();
    let mut opt = Adam::new(params.len(), s.ppo.lr);
    for i in 1..=s.iters {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, &format!("ppo/iter{i}")));
        let mut batch = collect_rollouts(&params, &src, s.ppo.sampling_budget, s.ppo.rollout_shards, &mut rng)?;
        apply_kl_penalty(&mut batch, warm, s.ppo.kl_beta);
        compute_gae(&mut batch, s.env.gamma, s.ppo.gae_lambda);
        if s.ppo.normalize_advantages {
            normalize_advantages(&mut batch);
        }
        let (next, stats) = ppo_update(&params, &batch, &s.ppo, &mut opt, &mut rng)?;
        params = next;
        let rec = IterRecord::new(i, Some(&stats), &eval_once(&params)?);
        log::info!(
            "iter {i}: reward {:.4} kl {:.5} em {:.2} f1 {:.2} retrieval {:.1}%",
            stats.iteration_reward,
            stats.kl,
            rec.eval_em,
            rec.eval_f1,
            rec.retrieval_pct
        );
        on_iter(&rec, &params)?;
        history.push(rec);
    }
    Ok(TrainOutcome { warmup: warm.clone(), final_params: params, history })
}

/// Warm-up followed by PPO.
pub fn train(world: &World, s: &TrainSettings) -> Result<TrainOutcome> {
    let warm = warm_start(world, s)?;
    train_from(world, &warm, s, |_, _| Ok(()))
}
