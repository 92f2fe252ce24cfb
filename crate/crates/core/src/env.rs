//! The retrieve-or-answer episode: state construction, quota enforcement,
//! action application and full rollouts.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{discounted_return, step_reward, RewardConfig};
use crate::policy::SampleMode;
use crate::retriever::RetrieverHandle;
use crate::text::fnv1a64;

/// Separator placed between snippet texts in an observation.
pub const SNIPPET_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub gold_answers: Vec<String>,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>, golds: Vec<String>) -> Result<Self> {
        let q = Question {
            id: id.into(),
            text: text.into(),
            gold_answers: golds,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Contract(format!("question {} has empty text", self.id)));
        }
        if self.gold_answers.is_empty() {
            return Err(Error::Contract(format!("question {} has no gold answers", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub score: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_span: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub query: String,
    pub snippets: Vec<Snippet>,
    pub concatenated_text: String,
}

impl Observation {
    /// Sorts snippets by descending score then ascending id and joins their texts.
    pub fn from_snippets(query: impl Into<String>, mut snippets: Vec<Snippet>) -> Self {
        snippets.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        let concatenated_text = snippets
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(SNIPPET_SEPARATOR);
        Observation {
            query: query.into(),
            snippets,
            concatenated_text,
        }
    }

    pub fn empty(query: impl Into<String>) -> Self {
        Self::from_snippets(query, Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub question: Arc<Question>,
    pub observations: Vec<Observation>,
    pub retrieve_count: usize,
}

impl State {
    /// Stable digest of the policy-visible content of the state.
    pub fn digest(&self) -> u64 {
        let mut h = fnv1a64(0, self.question.id.as_bytes());
        h = fnv1a64(h, self.question.text.as_bytes());
        for o in &self.observations {
            h = fnv1a64(h, o.query.as_bytes());
            h = fnv1a64(h, o.concatenated_text.as_bytes());
        }
        h
    }
}

pub fn new_state(question: Arc<Question>) -> State {
    State {
        question,
        observations: Vec::new(),
        retrieve_count: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Answer,
    Query,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Answer => f.write_str("answer"),
            ActionKind::Query => f.write_str("query"),
        }
    }
}

/// Which action kinds the policy may emit in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindSet {
    pub answer: bool,
    pub query: bool,
}

impl KindSet {
    pub const BOTH: KindSet = KindSet { answer: true, query: true };
    pub const ANSWER_ONLY: KindSet = KindSet { answer: true, query: false };

    pub fn contains(&self, kind: ActionKind) -> bool {
        match kind {
            ActionKind::Answer => self.answer,
            ActionKind::Query => self.query,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.answer && !self.query
    }

    /// Exactly one kind is allowed.
    pub fn is_forced(&self) -> bool {
        self.answer != self.query
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub text: String,
}

impl Action {
    pub fn answer(text: impl Into<String>) -> Self {
        Action { kind: ActionKind::Answer, text: text.into() }
    }

    pub fn query(text: impl Into<String>) -> Self {
        Action { kind: ActionKind::Query, text: text.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub quota_n: usize,
    pub top_k: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            quota_n: 1,
            top_k: 4,
            alpha: 0.2,
            gamma: 0.99,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("env.top_k must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("env.alpha must be a non-negative real".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("env.gamma must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn reward(&self) -> RewardConfig {
        RewardConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            kl_beta: 0.0,
        }
    }
}

pub fn allowed_action_kinds(state: &State, cfg: &EnvConfig) -> Result<KindSet> {
    use std::cmp::Ordering::*;
    match state.retrieve_count.cmp(&cfg.quota_n) {
        Less => Ok(KindSet::BOTH),
        Equal => Ok(KindSet::ANSWER_ONLY),
        Greater => Err(Error::Invariant(format!(
            "retrieve count {} exceeds quota {}",
            state.retrieve_count, cfg.quota_n
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Continue { next: State, observation: Observation },
    Done { final_answer: String },
}

pub fn apply_action<R: RetrieverHandle + ?Sized>(
    state: &State,
    action: &Action,
    retriever: &R,
    cfg: &EnvConfig,
) -> Result<StepOutcome> {
    let allowed = allowed_action_kinds(state, cfg)?;
    if !allowed.contains(action.kind) {
        return Err(Error::QuotaViolation(format!(
            "{} not allowed after {} of {} retrievals",
            action.kind, state.retrieve_count, cfg.quota_n
        )));
    }
    match action.kind {
        ActionKind::Answer => Ok(StepOutcome::Done {
            final_answer: action.text.clone(),
        }),
        ActionKind::Query => {
            if action.text.is_empty() {
                return Err(Error::Contract("query action with empty text".into()));
            }
            let observation = retriever.search(&action.text, cfg.top_k)?;
            let mut observations = state.observations.clone();
            observations.push(observation.clone());
            Ok(StepOutcome::Continue {
                next: State {
                    question: Arc::clone(&state.question),
                    observations,
                    retrieve_count: state.retrieve_count + 1,
                },
                observation,
            })
        }
    }
}

/// What a policy returns for one state.
#[derive(Debug, Clone)]
pub struct Decision<T> {
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
    pub trace: T,
}

/// Anything that maps a state to an action.
///
/// `Trace` carries whatever the policy wants to keep per step (the trainer
/// keeps encoded features; lookup policies keep nothing).
pub trait Policy {
    type Trace;

    fn act(
        &self,
        state: &State,
        allowed: KindSet,
        rng: &mut ChaCha8Rng,
        mode: SampleMode,
    ) -> Result<Decision<Self::Trace>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state_digest: u64,
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    /// Observation produced by a query step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub question_id: String,
    pub steps: Vec<Step>,
    pub final_answer: String,
    pub terminal: bool,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn query_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.action.kind == ActionKind::Query)
            .count()
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.steps.iter().filter_map(|s| s.observation.as_ref())
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        discounted_return(&self.rewards(), gamma)
    }

    /// Checks the episode invariants for quota `quota_n`.
    pub fn check(&self, quota_n: usize) -> Result<()> {
        let answers = self
            .steps
            .iter()
            .filter(|s| s.action.kind == ActionKind::Answer)
            .count();
        let last_is_answer = self
            .steps
            .last()
            .is_some_and(|s| s.action.kind == ActionKind::Answer);
        if answers != 1 || !last_is_answer || !self.terminal {
            return Err(Error::Invariant(format!(
                "trajectory for {} must end with its only answer",
                self.question_id
            )));
        }
        if self.query_count() > quota_n {
            return Err(Error::Invariant(format!(
                "trajectory for {} queried {} times with quota {}",
                self.question_id,
                self.query_count(),
                quota_n
            )));
        }
        Ok(())
    }
}

/// Runs one episode and returns the trajectory.
pub fn rollout<P, R>(
    question: Arc<Question>,
    policy: &P,
    retriever: &R,
    cfg: &EnvConfig,
    rng: &mut ChaCha8Rng,
    mode: SampleMode,
) -> Result<Trajectory>
where
    P: Policy + ?Sized,
    R: RetrieverHandle + ?Sized,
{
    rollout_traced(question, policy, retriever, cfg, rng, mode).map(|(t, _)| t)
}

/// Like [`rollout`] but also returns the policy's per-step traces.
pub fn rollout_traced<P, R>(
    question: Arc<Question>,
    policy: &P,
    retriever: &R,
    cfg: &EnvConfig,
    rng: &mut ChaCha8Rng,
    mode: SampleMode,
) -> Result<(Trajectory, Vec<P::Trace>)>
where
    P: Policy + ?Sized,
    R: RetrieverHandle + ?Sized,
{
    let reward_cfg = cfg.reward();
    let question_id = question.id.clone();
    let mut state = new_state(question);
    let mut steps = Vec::new();
    let mut traces = Vec::new();
    loop {
        let allowed = allowed_action_kinds(&state, cfg)?;
        let decision = policy.act(&state, allowed, rng, mode)?;
        let reward = step_reward(&decision.action, &state.question.gold_answers, &reward_cfg)?;
        let digest = state.digest();
        match apply_action(&state, &decision.action, retriever, cfg)? {
            StepOutcome::Continue { next, observation } => {
                steps.push(Step {
                    state_digest: digest,
                    action: decision.action,
                    log_prob: decision.log_prob,
                    value: decision.value,
                    reward,
                    observation: Some(observation),
                });
                traces.push(decision.trace);
                state = next;
            }
            StepOutcome::Done { final_answer } => {
                steps.push(Step {
                    state_digest: digest,
                    action: decision.action,
                    log_prob: decision.log_prob,
                    value: decision.value,
                    reward,
                    observation: None,
                });
                traces.push(decision.trace);
                return Ok((
                    Trajectory {
                        question_id,
                        steps,
                        final_answer,
                        terminal: true,
                    },
                    traces,
                ));
            }
        }
    }
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub question_id: String,
    pub steps: Vec<StepRecord>,
    pub final_answer: String,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub kind: ActionKind,
    pub text: String,
    pub logprob: f64,
    pub value: f64,
    pub reward: f64,
}

impl TrajectoryRecord {
    pub fn from_trajectory(t: &Trajectory, gamma: f64) -> Self {
        TrajectoryRecord {
            question_id: t.question_id.clone(),
            steps: t
                .steps
                .iter()
                .map(|s| StepRecord {
                    kind: s.action.kind,
                    text: s.action.text.clone(),
                    logprob: s.log_prob,
                    value: s.value,
                    reward: s.reward,
                })
                .collect(),
            final_answer: t.final_answer.clone(),
            ret: t.discounted_return(gamma),
        }
    }
}

/// Writes one JSON object per trajectory.
pub fn write_trajectory_log<W: std::io::Write>(
    mut out: W,
    trajectories: &[Trajectory],
    gamma: f64,
) -> Result<()> {
    for t in trajectories {
        serde_json::to_writer(&mut out, &TrajectoryRecord::from_trajectory(t, gamma))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
