//! Behavior cloning: mini-batch descent on the negative log-likelihood of warm-up targets.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::ActionKind;
use crate::error::{Error, Result};
use crate::metrics::exact_match;
use crate::policy::heads::{backward, forward, Choice, Distributions, Encoded, HeadGrads};
use crate::policy::{encode, Memory, PolicyParams};
use crate::training::optim::Adam;
use crate::training::warmup::SftExample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig { lr: 0.05, batch_size: 8, epochs: 5 }
    }
}

impl BcConfig {
    /// The settings used for billion-parameter models.
    pub fn large_model_preset() -> Self {
        BcConfig { lr: 3e-4, batch_size: 8, epochs: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("bc.lr must be a non-negative real".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("bc.batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// A warm-up example with its features computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub enc: Encoded,
    pub target_kind: ActionKind,
    /// Template or candidate index; `None` when no candidate carries the target answer.
    pub target_sub: Option<usize>,
}

pub fn encode_examples(params: &PolicyParams, memory: &Memory, examples: &[SftExample]) -> Result<Vec<EncodedExample>> {
    examples
        .iter()
        .map(|e| {
            let enc = encode(&e.state, memory, &params.config, e.allowed);
            let target_sub = match e.target_kind {
                ActionKind::Query => e.target_template.map(|t| t.id()),
                ActionKind::Answer => {
                    let target = vec![e.target_candidate_text.clone().unwrap_or_default()];
                    let mut found = None;
                    for (i, c) in enc.candidates.iter().enumerate() {
                        if exact_match(&c.text, &target)? == 1.0 {
                            found = Some(i);
                            break;
                        }
                    }
                    found
                }
            };
            Ok(EncodedExample { enc, target_kind: e.target_kind, target_sub })
        })
        .collect()
}

/// Mean negative log-likelihood over `batch` and its gradient.
pub fn bc_loss_and_grad(params: &PolicyParams, batch: &[&EncodedExample]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    for ex in batch {
        let fwd = forward(params, &ex.enc);
        let d = Distributions::new(&fwd, ex.enc.allowed);
        let mut up = HeadGrads::zeros(ex.enc.candidates.len());
        if !ex.enc.allowed.is_forced() {
            loss -= d.kind[crate::policy::heads::kind_index(ex.target_kind)].ln();
            up.add_kind_log_prob(&d, ex.enc.allowed, ex.target_kind, -scale);
        }
        if let Some(sub) = ex.target_sub {
            let choice = Choice { kind: ex.target_kind, sub };
            loss -= d.sub(ex.target_kind)[sub].ln();
            up.add_sub_log_prob(&d, choice, -scale);
        }
        backward(params, &ex.enc, &fwd, &up, &mut grad);
    }
    (loss * scale, grad)
}

/// Mean NLL over a whole dataset.
pub fn bc_loss(params: &PolicyParams, data: &[EncodedExample]) -> f64 {
    let refs: Vec<&EncodedExample> = data.iter().collect();
    bc_loss_and_grad(params, &refs).0
}

/// Trains on `data` for `cfg.epochs` shuffled passes; the last short mini-batch is kept.
pub fn behavior_clone(
    params: &PolicyParams,
    data: &[EncodedExample],
    cfg: &BcConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyParams> {
    if data.is_empty() {
        return Err(Error::Contract("behavior cloning needs a non-empty dataset".into()));
    }
    cfg.validate()?;
    let mut out = params.clone();
    let mut opt = Adam::new(out.len(), cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|i| &data[*i]).collect();
            let (loss, grad) = bc_loss_and_grad(&out, &batch);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("behavior-cloning loss became {loss}")));
            }
            opt.step(&mut out.values, &grad);
        }
    }
    if !out.is_finite() {
        return Err(Error::Numeric("behavior cloning produced non-finite weights".into()));
    }
    Ok(out)
}
