//! The trainable policy: hashed features, a decision head over
//! {Answer, Query}, a rewrite head over query templates, an answer head over
//! extracted candidates, and a value head.

pub mod candidates;
pub mod features;
pub mod heads;
pub mod params;
pub mod templates;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionKind, Decision, KindSet, Policy, State};
use crate::error::{Error, Result};

pub use candidates::{enumerate_candidates, AnswerCandidate, CandidateSource, Memory};
pub use features::featurize;
pub use heads::{encode, forward, Choice, Distributions, Encoded, Forward};
pub use params::{PolicyConfig, PolicyParams};
pub use templates::{apply_template, RewriteTemplate, TEMPLATE_COUNT};

/// How the policy turns distributions into an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum SampleMode {
    Sample,
    Greedy,
    /// Answer iff the raw Answer logit exceeds the threshold; sub-choices greedy.
    Threshold(f64),
    /// Answer iff the unmasked Answer probability exceeds the threshold; sub-choices greedy.
    ProbThreshold(f64),
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn draw(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total mass
    p.iter().rposition(|v| *v > 0.0).unwrap_or(0)
}

/// Picks a composite action for an encoded state.
pub fn choose(
    fwd: &Forward,
    dists: &Distributions,
    allowed: KindSet,
    rng: &mut ChaCha8Rng,
    mode: SampleMode,
) -> Choice {
    let kind = if allowed.is_forced() {
        if allowed.answer {
            ActionKind::Answer
        } else {
            ActionKind::Query
        }
    } else {
        match mode {
            SampleMode::Sample => heads::kind_from_index(draw(&dists.kind, rng)),
            SampleMode::Greedy => heads::kind_from_index(argmax(&dists.kind)),
            SampleMode::Threshold(tau) => {
                if fwd.decision_logits[0] > tau {
                    ActionKind::Answer
                } else {
                    ActionKind::Query
                }
            }
            SampleMode::ProbThreshold(p) => {
                let unmasked = heads::softmax(&fwd.decision_logits);
                if unmasked[0] > p {
                    ActionKind::Answer
                } else {
                    ActionKind::Query
                }
            }
        }
    };
    let sub_dist = match kind {
        ActionKind::Answer => &dists.answer,
        ActionKind::Query => &dists.rewrite,
    };
    let sub = match mode {
        SampleMode::Sample => draw(sub_dist, rng),
        _ => argmax(sub_dist),
    };
    Choice { kind, sub }
}

/// What the parametric policy keeps per step for training.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub encoded: Encoded,
    pub choice: Choice,
}

/// The parametric policy bound to a memory table.
///
/// `answerer` supplies the answer head (normally the same parameters);
/// `force_template` pins every query to one template.
#[derive(Debug, Clone, Copy)]
pub struct ParametricPolicy<'a> {
    pub params: &'a PolicyParams,
    pub answerer: &'a PolicyParams,
    pub memory: &'a Memory,
    pub force_template: Option<RewriteTemplate>,
}

impl<'a> ParametricPolicy<'a> {
    pub fn new(params: &'a PolicyParams, memory: &'a Memory) -> Self {
        ParametricPolicy { params, answerer: params, memory, force_template: None }
    }

    /// Decision and rewrite heads from `params`, answer head from `answerer`.
    pub fn split(params: &'a PolicyParams, answerer: &'a PolicyParams, memory: &'a Memory) -> Result<Self> {
        if params.config != answerer.config {
            return Err(Error::Config("checkpoints do not share a configuration".into()));
        }
        Ok(ParametricPolicy { params, answerer, memory, force_template: None })
    }

    pub fn with_forced_template(mut self, t: RewriteTemplate) -> Self {
        self.force_template = Some(t);
        self
    }

    pub fn encode(&self, state: &State, allowed: KindSet) -> Encoded {
        encode(state, self.memory, &self.params.config, allowed)
    }

    pub fn forward(&self, enc: &Encoded) -> Forward {
        let mut fwd = forward(self.params, enc);
        if !std::ptr::eq(self.params, self.answerer) {
            fwd.answer_scores = forward(self.answerer, enc).answer_scores;
        }
        fwd
    }
}

impl Policy for ParametricPolicy<'_> {
    type Trace = StepTrace;

    fn act(
        &self,
        state: &State,
        allowed: KindSet,
        rng: &mut ChaCha8Rng,
        mode: SampleMode,
    ) -> Result<Decision<StepTrace>> {
        if allowed.is_empty() {
            return Err(Error::Contract("empty action mask".into()));
        }
        let encoded = self.encode(state, allowed);
        let fwd = self.forward(&encoded);
        let dists = Distributions::new(&fwd, allowed);
        let mut choice = choose(&fwd, &dists, allowed, rng, mode);
        let mut log_prob = dists.log_prob(allowed, choice);
        let action = match choice.kind {
            ActionKind::Answer => Action::answer(encoded.candidates[choice.sub].text.clone()),
            ActionKind::Query => {
                if let Some(t) = self.force_template {
                    log_prob -= dists.rewrite[choice.sub].ln();
                    choice.sub = t.id();
                }
                let t = RewriteTemplate::from_id(choice.sub).expect("template index in range");
                Action::query(apply_template(t, &state.question.text))
            }
        };
        Ok(Decision {
            action,
            log_prob,
            value: fwd.value,
            trace: StepTrace { encoded, choice },
        })
    }
}
