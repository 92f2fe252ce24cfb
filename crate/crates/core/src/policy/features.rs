//! Hashed bag-of-words state features.
//!
//! Layout of a `dim`-sized vector: three equal hashed segments (question
//! tokens, observation tokens, wh-word x question-token crosses) followed by
//! five scalars. Each hashed segment is L2-normalized.

use std::collections::BTreeSet;

use crate::env::State;
use crate::policy::candidates::{AnswerCandidate, CandidateSource};
use crate::text::{fnv1a64, normalize_tokens, wh_word};

pub const SCALAR_FEATURES: usize = 5;
pub const MIN_DIM: usize = SCALAR_FEATURES + 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub dim: usize,
    pub segment: usize,
}

impl FeatureLayout {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= MIN_DIM, "feature dimension must be at least {MIN_DIM}");
        FeatureLayout {
            dim,
            segment: (dim - SCALAR_FEATURES) / 3,
        }
    }

    pub fn question(&self) -> std::ops::Range<usize> {
        0..self.segment
    }

    pub fn observation(&self) -> std::ops::Range<usize> {
        self.segment..2 * self.segment
    }

    pub fn cross(&self) -> std::ops::Range<usize> {
        2 * self.segment..self.dim - SCALAR_FEATURES
    }

    pub fn scalars(&self) -> std::ops::Range<usize> {
        self.dim - SCALAR_FEATURES..self.dim
    }
}

fn fill_hashed<'a>(
    out: &mut [f64],
    seed: u64,
    prefix: &str,
    tokens: impl IntoIterator<Item = &'a str>,
) {
    if out.is_empty() {
        return;
    }
    let uniq: BTreeSet<&str> = tokens.into_iter().collect();
    for t in &uniq {
        let h = fnv1a64(seed, format!("{prefix}{t}").as_bytes());
        out[(h % out.len() as u64) as usize] += 1.0;
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
}

/// State features. `candidates` are the answer candidates of the same state.
pub fn featurize(state: &State, candidates: &[AnswerCandidate], dim: usize, seed: u64) -> Vec<f64> {
    let layout = FeatureLayout::new(dim);
    let mut f = vec![0.0; dim];
    let q_tokens = normalize_tokens(&state.question.text);
    fill_hashed(&mut f[layout.question()], seed, "q:", q_tokens.iter().map(String::as_str));

    let obs_tokens: Vec<String> = state
        .observations
        .iter()
        .flat_map(|o| normalize_tokens(&o.concatenated_text))
        .collect();
    fill_hashed(&mut f[layout.observation()], seed, "o:", obs_tokens.iter().map(String::as_str));

    let wh = wh_word(&q_tokens).unwrap_or("none");
    let crosses: Vec<String> = q_tokens.iter().map(|t| format!("{wh}|{t}")).collect();
    fill_hashed(&mut f[layout.cross()], seed, "x:", crosses.iter().map(String::as_str));

    let max_score = state
        .observations
        .iter()
        .flat_map(|o| o.snippets.iter().map(|s| s.score))
        .fold(0.0, f64::max);
    let real_candidates = candidates
        .iter()
        .filter(|c| c.source != CandidateSource::Fallback)
        .count();
    let s = layout.scalars().start;
    f[s] = state.retrieve_count as f64;
    f[s + 1] = obs_tokens.len() as f64 / 100.0;
    f[s + 2] = max_score / 10.0;
    f[s + 3] = real_candidates as f64 / 10.0;
    f[s + 4] = 1.0;
    f
}
