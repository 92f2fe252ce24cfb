//! Answer scoring, the per-step reward and the discounted return.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionKind};
use crate::error::{Error, Result};
use crate::text::contains_run;

pub use crate::text::normalize_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Penalty charged for every query step.
    pub alpha: f64,
    pub gamma: f64,
    /// Per-step KL penalty coefficient applied by the trainer.
    pub kl_beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.2,
            gamma: 0.99,
            kl_beta: 0.0,
        }
    }
}

fn require_golds(golds: &[String]) -> Result<()> {
    if golds.is_empty() {
        Err(Error::Contract("gold answer list is empty".into()))
    } else {
        Ok(())
    }
}

/// 1.0 when the normalized prediction equals any normalized gold.
pub fn exact_match(prediction: &str, golds: &[String]) -> Result<f64> {
    require_golds(golds)?;
    let p = normalize_tokens(prediction);
    Ok(if golds.iter().any(|g| normalize_tokens(g) == p) {
        1.0
    } else {
        0.0
    })
}

fn f1_tokens(pred: &[String], gold: &[String]) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in gold {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0i64;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-level F1 against the best-matching gold (multiset overlap).
pub fn token_f1(prediction: &str, golds: &[String]) -> Result<f64> {
    require_golds(golds)?;
    let p = normalize_tokens(prediction);
    Ok(golds
        .iter()
        .map(|g| f1_tokens(&p, &normalize_tokens(g)))
        .fold(0.0, f64::max))
}

/// 1.0 when some gold occurs as a contiguous normalized-token run of the observation.
pub fn hit(observation_text: &str, golds: &[String]) -> f64 {
    let obs = normalize_tokens(observation_text);
    if golds
        .iter()
        .any(|g| contains_run(&obs, &normalize_tokens(g)))
    {
        1.0
    } else {
        0.0
    }
}

/// `-alpha` for a query, `EM + F1` for an answer.
pub fn step_reward(action: &Action, golds: &[String], cfg: &RewardConfig) -> Result<f64> {
    match action.kind {
        ActionKind::Query => Ok(-cfg.alpha),
        ActionKind::Answer => Ok(exact_match(&action.text, golds)? + token_f1(&action.text, golds)?),
    }
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    // Horner form from the back.
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}
