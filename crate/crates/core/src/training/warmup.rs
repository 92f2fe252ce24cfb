//! Warm-up supervision: the three example types and the two initial-policy variants.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{allowed_action_kinds, apply_action, new_state, Action, ActionKind, EnvConfig, KindSet, Question, State, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::token_f1;
use crate::policy::{apply_template, Memory, RewriteTemplate};
use crate::retriever::RetrieverHandle;
use crate::text::derive_seed;

/// Memory answers at or above this F1 count as "the base model already knows".
pub const KNOWN_F1: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupVariant {
    /// All three example types for every question.
    Pi0,
    /// Direct-answer examples only where memory is right; retrieval examples elsewhere.
    Pi0Star,
}

impl WarmupVariant {
    pub fn name(self) -> &'static str {
        match self {
            WarmupVariant::Pi0 => "pi0",
            WarmupVariant::Pi0Star => "pi0_star",
        }
    }
}

/// Returns the oracle template with probability `q`, otherwise a uniformly chosen other one.
#[derive(Debug, Clone)]
pub struct RewriteOracle {
    pub map: BTreeMap<String, RewriteTemplate>,
    pub q: f64,
    pub seed: u64,
}

impl RewriteOracle {
    pub fn new(map: BTreeMap<String, RewriteTemplate>, q: f64, seed: u64) -> Self {
        RewriteOracle { map, q, seed }
    }

    /// Deterministic per question id.
    pub fn template_for(&self, question_id: &str) -> Result<RewriteTemplate> {
        let best = *self.map.get(question_id).ok_or_else(|| {
            Error::Config(format!("rewrite oracle has no template for question {question_id}"))
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, question_id));
        if rng.gen::<f64>() < self.q {
            return Ok(best);
        }
        let others: Vec<RewriteTemplate> = RewriteTemplate::ALL.into_iter().filter(|t| *t != best).collect();
        Ok(others[rng.gen_range(0..others.len())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleType {
    DirectAnswer,
    Retrieve,
    AnswerWithObservation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftExample {
    pub kind_of_example: ExampleType,
    pub state: State,
    pub allowed: KindSet,
    pub target_kind: ActionKind,
    /// Present iff `target_kind` is Query.
    pub target_template: Option<RewriteTemplate>,
    /// Present iff `target_kind` is Answer.
    pub target_candidate_text: Option<String>,
}

/// One line of the exported warm-up dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub question_id: String,
    pub example_type: ExampleType,
    pub observations: Vec<String>,
    pub target_kind: ActionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_template: Option<RewriteTemplate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_answer: Option<String>,
}

impl SftExample {
    pub fn record(&self) -> SftRecord {
        SftRecord {
            question_id: self.state.question.id.clone(),
            example_type: self.kind_of_example,
            observations: self.state.observations.iter().map(|o| o.concatenated_text.clone()).collect(),
            target_kind: self.target_kind,
            target_template: self.target_template,
            target_answer: self.target_candidate_text.clone(),
        }
    }
}

/// True when memory holds an answer with F1 at least [`KNOWN_F1`].
pub fn memory_is_correct(question: &Question, memory: &Memory) -> Result<bool> {
    match memory.get(&question.id) {
        Some(a) => Ok(token_f1(a, &question.gold_answers)? >= KNOWN_F1),
        None => Ok(false),
    }
}

/// Builds the warm-up dataset. Answer targets are the first gold answer.
pub fn build_warmup_dataset<R: RetrieverHandle + ?Sized>(
    questions: &[Arc<Question>],
    retriever: &R,
    oracle: &RewriteOracle,
    memory: &Memory,
    variant: WarmupVariant,
    env: &EnvConfig,
) -> Result<Vec<SftExample>> {
    let mut out = Vec::new();
    for q in questions {
        let template = oracle.template_for(&q.id)?;
        let s0 = new_state(Arc::clone(q));
        let allowed0 = allowed_action_kinds(&s0, env)?;
        let gold = q.gold_answers[0].clone();
        let (direct, retrieve) = match variant {
            WarmupVariant::Pi0 => (true, true),
            WarmupVariant::Pi0Star => {
                let known = memory_is_correct(q, memory)?;
                (known, !known)
            }
        };
        if direct {
            out.push(SftExample {
                kind_of_example: ExampleType::DirectAnswer,
                state: s0.clone(),
                allowed: allowed0,
                target_kind: ActionKind::Answer,
                target_template: None,
                target_candidate_text: Some(gold.clone()),
            });
        }
        if retrieve && allowed0.query {
            let query = Action::query(apply_template(template, &q.text));
            out.push(SftExample {
                kind_of_example: ExampleType::Retrieve,
                state: s0.clone(),
                allowed: allowed0,
                target_kind: ActionKind::Query,
                target_template: Some(template),
                target_candidate_text: None,
            });
            let StepOutcome::Continue { next, .. } = apply_action(&s0, &query, retriever, env)? else {
                return Err(Error::Invariant("query action terminated the episode".into()));
            };
            let allowed1 = allowed_action_kinds(&next, env)?;
            out.push(SftExample {
                kind_of_example: ExampleType::AnswerWithObservation,
                state: next,
                allowed: allowed1,
                target_kind: ActionKind::Answer,
                target_template: None,
                target_candidate_text: Some(gold),
            });
        }
    }
    Ok(out)
}
