//! Forward pass of the four heads and analytic gradients.

use crate::env::{ActionKind, KindSet, State};
use crate::policy::candidates::{enumerate_candidates, AnswerCandidate, Memory, CANDIDATE_FEATURES};
use crate::policy::features::featurize;
use crate::policy::params::{PolicyConfig, PolicyParams};
use crate::policy::templates::TEMPLATE_COUNT;

/// Index of a kind in the decision head's outputs.
pub fn kind_index(kind: ActionKind) -> usize {
    match kind {
        ActionKind::Answer => 0,
        ActionKind::Query => 1,
    }
}

pub fn kind_from_index(i: usize) -> ActionKind {
    if i == 0 {
        ActionKind::Answer
    } else {
        ActionKind::Query
    }
}

/// Everything a head needs to score one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub features: Vec<f64>,
    pub candidates: Vec<AnswerCandidate>,
    pub allowed: KindSet,
}

pub fn encode(state: &State, memory: &Memory, cfg: &PolicyConfig, allowed: KindSet) -> Encoded {
    let candidates = enumerate_candidates(state, memory);
    let features = featurize(state, &candidates, cfg.dim, cfg.hash_seed);
    Encoded { features, candidates, allowed }
}

/// A composite action: a kind plus a template (Query) or candidate (Answer) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Choice {
    pub kind: ActionKind,
    pub sub: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub rep: Vec<f64>,
    pub decision_logits: [f64; 2],
    pub rewrite_logits: [f64; TEMPLATE_COUNT],
    pub answer_scores: Vec<f64>,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn representation(params: &PolicyParams, features: &[f64]) -> Vec<f64> {
    let l = &params.layout;
    if l.hidden == 0 {
        return features.to_vec();
    }
    (0..l.hidden)
        .map(|h| {
            let row = &params.values[l.trunk_w + h * l.dim..l.trunk_w + (h + 1) * l.dim];
            (dot(row, features) + params.values[l.trunk_b + h]).tanh()
        })
        .collect()
}

fn candidate_score(params: &PolicyParams, rep: &[f64], cand: &AnswerCandidate) -> f64 {
    let w = params.answer_weights();
    let mut s = dot(&w[..CANDIDATE_FEATURES], &cand.features);
    let memory_flag = cand.features[0];
    if memory_flag != 0.0 {
        s += memory_flag * dot(&w[CANDIDATE_FEATURES..], rep);
    }
    s
}

pub fn forward(params: &PolicyParams, enc: &Encoded) -> Forward {
    let rep = representation(params, &enc.features);
    let decision_logits = [dot(params.decision_row(0), &rep), dot(params.decision_row(1), &rep)];
    let mut rewrite_logits = [0.0; TEMPLATE_COUNT];
    for (t, l) in rewrite_logits.iter_mut().enumerate() {
        *l = dot(params.rewrite_row(t), &rep);
    }
    let answer_scores = enc
        .candidates
        .iter()
        .map(|c| candidate_score(params, &rep, c))
        .collect();
    let value = dot(params.value_weights(), &rep);
    Forward { rep, decision_logits, rewrite_logits, answer_scores, value }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Softmax over the allowed kinds; disallowed kinds get exactly zero.
pub fn decision_distribution(logits: [f64; 2], allowed: KindSet) -> [f64; 2] {
    match (allowed.answer, allowed.query) {
        (true, true) => {
            let p = softmax(&logits);
            [p[0], p[1]]
        }
        (true, false) => [1.0, 0.0],
        (false, true) => [0.0, 1.0],
        (false, false) => panic!("decision mask must allow at least one kind"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distributions {
    pub kind: [f64; 2],
    pub rewrite: Vec<f64>,
    pub answer: Vec<f64>,
}

impl Distributions {
    pub fn new(fwd: &Forward, allowed: KindSet) -> Self {
        Distributions {
            kind: decision_distribution(fwd.decision_logits, allowed),
            rewrite: softmax(&fwd.rewrite_logits),
            answer: softmax(&fwd.answer_scores),
        }
    }

    pub fn sub(&self, kind: ActionKind) -> &[f64] {
        match kind {
            ActionKind::Answer => &self.answer,
            ActionKind::Query => &self.rewrite,
        }
    }

    /// log P(kind) + log P(sub | kind); a forced kind contributes nothing.
    pub fn log_prob(&self, allowed: KindSet, choice: Choice) -> f64 {
        let kind_term = if allowed.is_forced() {
            0.0
        } else {
            self.kind[kind_index(choice.kind)].ln()
        };
        kind_term + self.sub(choice.kind)[choice.sub].ln()
    }

    /// Entropy of the composite distribution.
    pub fn entropy(&self, allowed: KindSet) -> f64 {
        let mut h = entropy_of(&self.kind);
        for k in [ActionKind::Answer, ActionKind::Query] {
            let pk = self.kind[kind_index(k)];
            if allowed.contains(k) && pk > 0.0 {
                h += pk * entropy_of(self.sub(k));
            }
        }
        h
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().copied().map(plogp).sum::<f64>()
}

/// d entropy(softmax(l)) / d l.
fn entropy_grad(p: &[f64], out: &mut [f64], scale: f64) {
    let h = entropy_of(p);
    for (o, &pi) in out.iter_mut().zip(p) {
        let lp = if pi > 0.0 { pi.ln() } else { 0.0 };
        *o += scale * -pi * (lp + h);
    }
}

/// Upstream gradients w.r.t. head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub decision: [f64; 2],
    pub rewrite: [f64; TEMPLATE_COUNT],
    pub answer: Vec<f64>,
    pub value: f64,
}

impl HeadGrads {
    pub fn zeros(candidates: usize) -> Self {
        HeadGrads {
            decision: [0.0; 2],
            rewrite: [0.0; TEMPLATE_COUNT],
            answer: vec![0.0; candidates],
            value: 0.0,
        }
    }

    fn sub_mut(&mut self, kind: ActionKind) -> &mut [f64] {
        match kind {
            ActionKind::Answer => &mut self.answer,
            ActionKind::Query => &mut self.rewrite,
        }
    }

    /// Adds `scale * d log_prob(choice) / d outputs`.
    pub fn add_log_prob(&mut self, d: &Distributions, allowed: KindSet, choice: Choice, scale: f64) {
        self.add_kind_log_prob(d, allowed, choice.kind, scale);
        self.add_sub_log_prob(d, choice, scale);
    }

    /// The decision-head part of [`HeadGrads::add_log_prob`]; nothing when the kind is forced.
    pub fn add_kind_log_prob(&mut self, d: &Distributions, allowed: KindSet, kind: ActionKind, scale: f64) {
        if allowed.is_forced() {
            return;
        }
        let k = kind_index(kind);
        for i in 0..2 {
            let onehot = if i == k { 1.0 } else { 0.0 };
            self.decision[i] += scale * (onehot - d.kind[i]);
        }
    }

    /// The sub-choice part of [`HeadGrads::add_log_prob`].
    pub fn add_sub_log_prob(&mut self, d: &Distributions, choice: Choice, scale: f64) {
        let p = d.sub(choice.kind);
        for (i, g) in self.sub_mut(choice.kind).iter_mut().enumerate() {
            let onehot = if i == choice.sub { 1.0 } else { 0.0 };
            *g += scale * (onehot - p[i]);
        }
    }

    /// Adds `scale * d entropy / d outputs`.
    pub fn add_entropy(&mut self, d: &Distributions, allowed: KindSet, scale: f64) {
        let h_sub = [entropy_of(&d.answer), entropy_of(&d.rewrite)];
        if !allowed.is_forced() {
            entropy_grad(&d.kind, &mut self.decision, scale);
            let mean_sub: f64 = (0..2).map(|i| d.kind[i] * h_sub[i]).sum();
            for i in 0..2 {
                self.decision[i] += scale * d.kind[i] * (h_sub[i] - mean_sub);
            }
        }
        for kind in [ActionKind::Answer, ActionKind::Query] {
            let pk = d.kind[kind_index(kind)];
            if allowed.contains(kind) && pk > 0.0 {
                let p = d.sub(kind).to_vec();
                entropy_grad(&p, self.sub_mut(kind), scale * pk);
            }
        }
    }
}

/// Accumulates `d loss / d params` into `grad` given upstream head gradients.
pub fn backward(params: &PolicyParams, enc: &Encoded, fwd: &Forward, up: &HeadGrads, grad: &mut [f64]) {
    let l = &params.layout;
    let rep = &fwd.rep;
    let mut d_rep = vec![0.0; l.rep];

    let mut axpy = |offset: usize, g: f64, d_rep: &mut [f64]| {
        if g == 0.0 {
            return;
        }
        for j in 0..l.rep {
            grad[offset + j] += g * rep[j];
            d_rep[j] += g * params.values[offset + j];
        }
    };
    for (i, &g) in up.decision.iter().enumerate() {
        axpy(l.decision + i * l.rep, g, &mut d_rep);
    }
    for (t, &g) in up.rewrite.iter().enumerate() {
        axpy(l.rewrite + t * l.rep, g, &mut d_rep);
    }
    axpy(l.value, up.value, &mut d_rep);

    let mem_off = l.answer + CANDIDATE_FEATURES;
    for (cand, &g) in enc.candidates.iter().zip(&up.answer) {
        if g == 0.0 {
            continue;
        }
        for (k, f) in cand.features.iter().enumerate() {
            grad[l.answer + k] += g * f;
        }
        let m = cand.features[0];
        if m != 0.0 {
            for j in 0..l.rep {
                grad[mem_off + j] += g * m * rep[j];
                d_rep[j] += g * m * params.values[mem_off + j];
            }
        }
    }

    if l.hidden > 0 {
        for h in 0..l.hidden {
            let da = d_rep[h] * (1.0 - rep[h] * rep[h]);
            if da == 0.0 {
                continue;
            }
            let row = l.trunk_w + h * l.dim;
            for (d, f) in enc.features.iter().enumerate() {
                if *f != 0.0 {
                    grad[row + d] += da * f;
                }
            }
            grad[l.trunk_b + h] += da;
        }
    }
}
