//! Answer candidates: what the answer head chooses between.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::env::State;
use crate::text::{content_tokens, is_stopword, normalize_tokens};

/// Question id to the answer the base model "believes". May be wrong.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Memory(BTreeMap<String, String>);

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, question_id: impl Into<String>, answer: impl Into<String>) {
        self.0.insert(question_id.into(), answer.into());
    }

    pub fn get(&self, question_id: &str) -> Option<&str> {
        self.0.get(question_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.0.iter()
    }
}

impl FromIterator<(String, String)> for Memory {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Memory(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    Memory,
    Observation,
    /// The empty answer emitted when nothing else is available.
    Fallback,
}

/// Number of per-candidate features fed to the answer head.
pub const CANDIDATE_FEATURES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub text: String,
    pub source: CandidateSource,
    /// BM25 score of the source snippet (0 for memory).
    pub snippet_score: f64,
    /// Rank of the source snippet within its observation.
    pub snippet_rank: usize,
    /// Fraction of the question's content tokens found in the source snippet.
    pub overlap: f64,
    pub features: [f64; CANDIDATE_FEATURES],
}

const MAX_NGRAM: usize = 4;
const NGRAMS_PER_SNIPPET: usize = 8;

fn snippet_overlap(question_content: &[String], snippet_text: &str) -> f64 {
    if question_content.is_empty() {
        return 0.0;
    }
    let snippet: HashSet<String> = normalize_tokens(snippet_text).into_iter().collect();
    let unique: HashSet<&String> = question_content.iter().collect();
    let found = unique.iter().filter(|t| snippet.contains(**t)).count();
    found as f64 / unique.len() as f64
}

/// n-grams (n in 1..=4) of a snippet that share a content word with the question.
fn overlapping_ngrams(snippet_text: &str, question_content: &HashSet<String>) -> Vec<String> {
    let words: Vec<&str> = snippet_text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|w| !w.is_empty())
        .collect();
    let lowered: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let mut out = Vec::new();
    'outer: for start in 0..words.len() {
        for n in 1..=MAX_NGRAM {
            if start + n > words.len() {
                break;
            }
            let span = &lowered[start..start + n];
            if span
                .iter()
                .any(|t| !is_stopword(t) && question_content.contains(t))
            {
                out.push(words[start..start + n].join(" "));
                if out.len() == NGRAMS_PER_SNIPPET {
                    break 'outer;
                }
            }
        }
    }
    out
}

/// Memory answer first, then observation candidates in snippet order,
/// deduplicated by normalized text. Never returns an empty list.
pub fn enumerate_candidates(state: &State, memory: &Memory) -> Vec<AnswerCandidate> {
    let question_content = content_tokens(&state.question.text);
    let content_set: HashSet<String> = question_content.iter().cloned().collect();
    let max_score = state
        .observations
        .iter()
        .flat_map(|o| o.snippets.iter().map(|s| s.score))
        .fold(0.0, f64::max);

    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |text: String, source, score: f64, rank: usize, overlap: f64| {
        let key = normalize_tokens(&text);
        if key.is_empty() || !seen.insert(key.clone()) {
            return;
        }
        let is = |s| if source == s { 1.0 } else { 0.0 };
        let norm_score = if max_score > 0.0 { score / max_score } else { 0.0 };
        let recip_rank = if source == CandidateSource::Observation {
            1.0 / (1.0 + rank as f64)
        } else {
            0.0
        };
        let features = [
            is(CandidateSource::Memory),
            is(CandidateSource::Observation),
            is(CandidateSource::Fallback),
            norm_score,
            recip_rank,
            overlap,
            if overlap >= 1.0 { 1.0 } else { 0.0 },
            key.len() as f64 / 4.0,
        ];
        out.push(AnswerCandidate {
            text,
            source,
            snippet_score: score,
            snippet_rank: rank,
            overlap,
            features,
        });
    };

    if let Some(answer) = memory.get(&state.question.id) {
        push(answer.to_owned(), CandidateSource::Memory, 0.0, 0, 0.0);
    }
    for obs in &state.observations {
        for (rank, snip) in obs.snippets.iter().enumerate() {
            let overlap = snippet_overlap(&question_content, &snip.text);
            match &snip.answer_span {
                Some(span) => push(span.clone(), CandidateSource::Observation, snip.score, rank, overlap),
                None => {
                    for g in overlapping_ngrams(&snip.text, &content_set) {
                        push(g, CandidateSource::Observation, snip.score, rank, overlap);
                    }
                }
            }
        }
    }
    if out.is_empty() {
        let mut features = [0.0; CANDIDATE_FEATURES];
        features[2] = 1.0;
        out.push(AnswerCandidate {
            text: String::new(),
            source: CandidateSource::Fallback,
            snippet_score: 0.0,
            snippet_rank: 0,
            overlap: 0.0,
            features,
        });
    }
    out
}
