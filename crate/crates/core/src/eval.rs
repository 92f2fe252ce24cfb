//! Evaluation surfaces: aggregate metrics, threshold sweeps, transfer ratios,
//! the two ablations, and a brute-force optimal planner.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    allowed_action_kinds, apply_action, new_state, rollout, Action, ActionKind, Decision, EnvConfig, KindSet, Policy,
    Question, State, StepOutcome, Trajectory,
};
use crate::error::{Error, Result};
use crate::metrics::{discounted_return, exact_match, hit, step_reward, token_f1};
use crate::policy::heads::forward;
use crate::policy::{apply_template, enumerate_candidates, Memory, ParametricPolicy, PolicyParams, RewriteTemplate, SampleMode};
use crate::retriever::{CachedRetriever, RetrieverHandle};
use crate::text::derive_seed;
use crate::worldgen::{Category, World};

/// Number of evenly spaced logit thresholds in a default sweep.
pub const SWEEP_POINTS: usize = 41;

/// Most plans the brute-force planner will enumerate for one question.
pub const MAX_PLANS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    /// Count every episode in the hit denominator, not only those that retrieved.
    pub hit_all_episodes: bool,
    /// Seed for per-question random streams (only sampled modes consume them).
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { hit_all_episodes: false, seed: 0 }
    }
}

/// Aggregate metrics; em, f1, hit and retrieval_pct are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub em: f64,
    pub f1: f64,
    /// Share of retrieved observations containing a gold answer; absent when nothing was retrieved.
    pub hit: Option<f64>,
    pub retrieval_pct: f64,
    pub mean_reward: f64,
}

/// Runs one rollout per question and aggregates.
pub fn evaluate_policy<P, R>(
    policy: &P,
    questions: &[Arc<Question>],
    retriever: &R,
    env: &EnvConfig,
    mode: SampleMode,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<Trajectory>)>
where
    P: Policy + Sync + ?Sized,
    R: RetrieverHandle + ?Sized,
{
    let trajectories: Vec<Trajectory> = questions
        .par_iter()
        .map(|q| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &q.id));
            rollout(Arc::clone(q), policy, retriever, env, &mut rng, mode)
        })
        .collect::<Result<_>>()?;
    let report = summarize(questions, &trajectories, opts)?;
    Ok((report, trajectories))
}

/// Aggregates finished trajectories (in question order).
pub fn summarize(questions: &[Arc<Question>], trajectories: &[Trajectory], opts: &EvalOptions) -> Result<EvalReport> {
    let n = trajectories.len();
    let (mut em, mut f1, mut reward, mut retrieved) = (0.0, 0.0, 0.0, 0usize);
    let (mut hits, mut hit_den) = (0.0, 0usize);
    for (q, t) in questions.iter().zip(trajectories) {
        em += exact_match(&t.final_answer, &q.gold_answers)?;
        f1 += token_f1(&t.final_answer, &q.gold_answers)?;
        reward += t.rewards().iter().sum::<f64>();
        let mut any = false;
        for o in t.observations() {
            hits += hit(&o.concatenated_text, &q.gold_answers);
            hit_den += 1;
            any = true;
        }
        if any {
            retrieved += 1;
        } else if opts.hit_all_episodes {
            hit_den += 1;
        }
    }
    let pct = |x: f64| if n == 0 { 0.0 } else { 100.0 * x / n as f64 };
    Ok(EvalReport {
        n,
        em: pct(em),
        f1: pct(f1),
        hit: (hit_den > 0).then(|| 100.0 * hits / hit_den as f64),
        retrieval_pct: pct(retrieved as f64),
        mean_reward: if n == 0 { 0.0 } else { reward / n as f64 },
    })
}

/// Greedy (or thresholded) evaluation of a parameter set on a world.
pub fn evaluate(
    params: &PolicyParams,
    world: &World,
    env: &EnvConfig,
    mode: SampleMode,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<Trajectory>)> {
    let policy = ParametricPolicy::new(params, &world.memory);
    evaluate_policy(&policy, &world.questions, &*world.index, env, mode, opts)
}

/// Mode for an optional logit threshold: thresholded when given, greedy otherwise.
pub fn mode_for(tau: Option<f64>) -> SampleMode {
    tau.map_or(SampleMode::Greedy, SampleMode::Threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub retrieval_pct: f64,
    pub em: f64,
    pub f1: f64,
    pub hit: Option<f64>,
}

/// Answer logits of the empty-history state of every question.
pub fn initial_answer_logits(params: &PolicyParams, world: &World) -> Vec<f64> {
    world
        .questions
        .iter()
        .map(|q| {
            let s = new_state(Arc::clone(q));
            let enc = crate::policy::encode(&s, &world.memory, &params.config, KindSet::BOTH);
            forward(params, &enc).decision_logits[0]
        })
        .collect()
}

/// `points` evenly spaced thresholds over the observed initial Answer logits, plus both infinities.
pub fn default_taus(params: &PolicyParams, world: &World, points: usize) -> Vec<f64> {
    let logits = initial_answer_logits(params, world);
    let lo = logits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut taus = vec![f64::NEG_INFINITY, f64::INFINITY];
    if lo.is_finite() && hi.is_finite() {
        if points <= 1 || hi == lo {
            taus.push(lo);
        } else {
            for i in 0..points {
                taus.push(lo + (hi - lo) * i as f64 / (points - 1) as f64);
            }
        }
    }
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus
}

/// One evaluation per threshold, rows sorted by threshold.
pub fn threshold_sweep(
    params: &PolicyParams,
    world: &World,
    env: &EnvConfig,
    taus: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    if taus.is_empty() {
        return Err(Error::Contract("threshold sweep needs at least one threshold".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cached = CachedRetriever::new(&*world.index);
    let policy = ParametricPolicy::new(params, &world.memory);
    sorted
        .into_iter()
        .map(|tau| {
            let (r, _) = evaluate_policy(&policy, &world.questions, &cached, env, SampleMode::Threshold(tau), opts)?;
            Ok(SweepRow { tau, retrieval_pct: r.retrieval_pct, em: r.em, f1: r.f1, hit: r.hit })
        })
        .collect()
}

/// F1 of a sweep curve at retrieval percentage `pct`, interpolating linearly
/// between the nearest points on either side. Where several points share a
/// retrieval percentage the best F1 among them is used.
pub fn f1_at_retrieval(curve: &[SweepRow], pct: f64) -> Option<f64> {
    let mut pts: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for r in curve {
        let key = r.retrieval_pct.to_bits();
        let e = pts.entry(key).or_insert((r.retrieval_pct, r.f1));
        e.1 = e.1.max(r.f1);
    }
    let mut pts: Vec<(f64, f64)> = pts.into_values().collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(p) = pts.iter().find(|p| p.0 == pct) {
        return Some(p.1);
    }
    let below = pts.iter().rev().find(|p| p.0 < pct)?;
    let above = pts.iter().find(|p| p.0 > pct)?;
    let w = (pct - below.0) / (above.0 - below.0);
    Some(below.1 + w * (above.1 - below.1))
}

/// Retrieval ratio (percent) per category at the probability-0.5 threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub ratios: BTreeMap<Category, Option<f64>>,
    pub counts: BTreeMap<Category, usize>,
    pub overall: EvalReport,
}

impl TransferReport {
    pub fn ratio(&self, c: Category) -> Option<f64> {
        self.ratios.get(&c).copied().flatten()
    }
}

pub fn transfer_report(params: &PolicyParams, world: &World, env: &EnvConfig, opts: &EvalOptions) -> Result<TransferReport> {
    transfer_report_with(params, world, env, SampleMode::ProbThreshold(0.5), opts)
}

/// Per-category retrieval ratios under any decoding mode.
pub fn transfer_report_with(
    params: &PolicyParams,
    world: &World,
    env: &EnvConfig,
    mode: SampleMode,
    opts: &EvalOptions,
) -> Result<TransferReport> {
    let (overall, trajectories) = evaluate(params, world, env, mode, opts)?;
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    let mut retrieved: BTreeMap<Category, usize> = counts.clone();
    for (q, t) in world.questions.iter().zip(&trajectories) {
        let c = world
            .category(&q.id)
            .ok_or_else(|| Error::Contract(format!("question {} has no category", q.id)))?;
        *counts.get_mut(&c).expect("all categories present") += 1;
        if t.query_count() > 0 {
            *retrieved.get_mut(&c).expect("all categories present") += 1;
        }
    }
    let ratios = Category::ALL
        .iter()
        .map(|c| {
            let n = counts[c];
            (*c, (n > 0).then(|| 100.0 * retrieved[c] as f64 / n as f64))
        })
        .collect();
    Ok(TransferReport { ratios, counts, overall })
}

/// Evaluation with every query forced to the identity template.
pub fn ablation_replace_query(
    params: &PolicyParams,
    world: &World,
    env: &EnvConfig,
    mode: SampleMode,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<Trajectory>)> {
    let policy = ParametricPolicy::new(params, &world.memory).with_forced_template(RewriteTemplate::Identity);
    evaluate_policy(&policy, &world.questions, &*world.index, env, mode, opts)
}

/// Evaluation with the answer head taken from `answerer` (normally the warm-up checkpoint).
pub fn ablation_replace_generator(
    trained: &PolicyParams,
    answerer: &PolicyParams,
    world: &World,
    env: &EnvConfig,
    mode: SampleMode,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<Trajectory>)> {
    let policy = ParametricPolicy::split(trained, answerer, &world.memory)?;
    evaluate_policy(&policy, &world.questions, &*world.index, env, mode, opts)
}

/// A fixed action sequence: some queries, then one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub queries: Vec<RewriteTemplate>,
    pub answer: String,
    /// Index of the answer among the candidates of the final state.
    pub answer_index: usize,
}

impl Plan {
    pub fn kinds(&self) -> Vec<ActionKind> {
        let mut k = vec![ActionKind::Query; self.queries.len()];
        k.push(ActionKind::Answer);
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePlan {
    pub question_id: String,
    pub plan: Plan,
    /// Discounted return of the plan.
    pub value: f64,
    pub em: f64,
    pub f1: f64,
    pub plans_considered: usize,
}

struct Best {
    key_value: f64,
    queries: Vec<usize>,
    answer_index: usize,
    plan: Plan,
    rewards: Vec<f64>,
}

fn better(value: f64, queries: &[usize], answer_index: usize, best: &Option<Best>) -> bool {
    let Some(b) = best else { return true };
    match value.total_cmp(&b.key_value) {
        std::cmp::Ordering::Greater => return true,
        std::cmp::Ordering::Less => return false,
        std::cmp::Ordering::Equal => {}
    }
    if queries.len() != b.queries.len() {
        return queries.len() < b.queries.len();
    }
    (queries, answer_index) < (b.queries.as_slice(), b.answer_index)
}

#[allow(clippy::too_many_arguments)]
fn search_plans<R: RetrieverHandle + ?Sized>(
    state: &State,
    rewards: &mut Vec<f64>,
    templates: &mut Vec<usize>,
    memory: &Memory,
    retriever: &R,
    env: &EnvConfig,
    count: &mut usize,
    best: &mut Option<Best>,
) -> Result<()> {
    let reward_cfg = env.reward();
    let allowed = allowed_action_kinds(state, env)?;
    for (i, c) in enumerate_candidates(state, memory).iter().enumerate() {
        *count += 1;
        if *count > MAX_PLANS {
            return Err(Error::Contract(format!(
                "question {} needs more than {MAX_PLANS} plans",
                state.question.id
            )));
        }
        let action = Action::answer(c.text.clone());
        rewards.push(step_reward(&action, &state.question.gold_answers, &reward_cfg)?);
        let value = discounted_return(rewards, env.gamma);
        if better(value, templates, i, best) {
            *best = Some(Best {
                key_value: value,
                queries: templates.clone(),
                answer_index: i,
                plan: Plan {
                    queries: templates.iter().map(|t| RewriteTemplate::from_id(*t).expect("valid id")).collect(),
                    answer: c.text.clone(),
                    answer_index: i,
                },
                rewards: rewards.clone(),
            });
        }
        rewards.pop();
    }
    if allowed.query {
        for t in RewriteTemplate::ALL {
            let action = Action::query(apply_template(t, &state.question.text));
            let StepOutcome::Continue { next, .. } = apply_action(state, &action, retriever, env)? else {
                return Err(Error::Invariant("query action terminated the episode".into()));
            };
            rewards.push(step_reward(&action, &state.question.gold_answers, &reward_cfg)?);
            templates.push(t.id());
            search_plans(&next, rewards, templates, memory, retriever, env, count, best)?;
            templates.pop();
            rewards.pop();
        }
    }
    Ok(())
}

/// Best plan for one question under deterministic retrieval.
///
/// Ties go to fewer queries, then to lower template and candidate indices.
pub fn optimal_plan<R: RetrieverHandle + ?Sized>(
    question: &Arc<Question>,
    memory: &Memory,
    retriever: &R,
    env: &EnvConfig,
) -> Result<OraclePlan> {
    let mut best = None;
    let mut count = 0;
    search_plans(
        &new_state(Arc::clone(question)),
        &mut Vec::new(),
        &mut Vec::new(),
        memory,
        retriever,
        env,
        &mut count,
        &mut best,
    )?;
    let b = best.ok_or_else(|| Error::Invariant("no plan found".into()))?;
    Ok(OraclePlan {
        question_id: question.id.clone(),
        em: exact_match(&b.plan.answer, &question.gold_answers)?,
        f1: token_f1(&b.plan.answer, &question.gold_answers)?,
        value: discounted_return(&b.rewards, env.gamma),
        plan: b.plan,
        plans_considered: count,
    })
}

pub fn brute_force_optimal(world: &World, env: &EnvConfig) -> Result<Vec<OraclePlan>> {
    let cached = CachedRetriever::new(&*world.index);
    world
        .questions
        .par_iter()
        .map(|q| optimal_plan(q, &world.memory, &cached, env))
        .collect()
}

/// Replays stored plans.
#[derive(Debug, Clone, Default)]
pub struct PlanPolicy {
    pub plans: BTreeMap<String, Plan>,
}

impl PlanPolicy {
    pub fn new(plans: &[OraclePlan]) -> Self {
        PlanPolicy { plans: plans.iter().map(|p| (p.question_id.clone(), p.plan.clone())).collect() }
    }
}

impl Policy for PlanPolicy {
    type Trace = ();

    fn act(&self, state: &State, allowed: KindSet, _: &mut ChaCha8Rng, _: SampleMode) -> Result<Decision<()>> {
        let plan = self
            .plans
            .get(&state.question.id)
            .ok_or_else(|| Error::Contract(format!("no plan for question {}", state.question.id)))?;
        let action = match plan.queries.get(state.retrieve_count) {
            Some(t) if allowed.query => Action::query(apply_template(*t, &state.question.text)),
            _ => Action::answer(plan.answer.clone()),
        };
        Ok(Decision { action, log_prob: 0.0, value: 0.0, trace: () })
    }
}

/// Share (percent) of questions whose trajectory has the oracle's action-kind sequence.
pub fn plan_agreement(plans: &[OraclePlan], trajectories: &[Trajectory]) -> f64 {
    let by_id: BTreeMap<&str, &OraclePlan> = plans.iter().map(|p| (p.question_id.as_str(), p)).collect();
    let agree = trajectories
        .iter()
        .filter(|t| {
            let kinds: Vec<ActionKind> = t.steps.iter().map(|s| s.action.kind).collect();
            by_id.get(t.question_id.as_str()).is_some_and(|p| p.plan.kinds() == kinds)
        })
        .count();
    if trajectories.is_empty() {
        0.0
    } else {
        100.0 * agree as f64 / trajectories.len() as f64
    }
}
