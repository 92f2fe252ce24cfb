use serde::{Deserialize, Serialize};

use crate::text::{is_stopword, normalize_tokens, wh_word};

/// Deterministic question-to-query transformations the rewrite head chooses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteTemplate {
    Identity,
    KeywordsOnly,
    TypeHint,
    QuoteFocus,
}

impl RewriteTemplate {
    pub const ALL: [RewriteTemplate; 4] = [
        RewriteTemplate::Identity,
        RewriteTemplate::KeywordsOnly,
        RewriteTemplate::TypeHint,
        RewriteTemplate::QuoteFocus,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RewriteTemplate::Identity => "identity",
            RewriteTemplate::KeywordsOnly => "keywords_only",
            RewriteTemplate::TypeHint => "type_hint",
            RewriteTemplate::QuoteFocus => "quote_focus",
        }
    }
}

pub const TEMPLATE_COUNT: usize = RewriteTemplate::ALL.len();

fn trim_punct(word: &str) -> &str {
    word.trim_matches(|c: char| c.is_ascii_punctuation())
}

fn keywords(question: &str) -> Vec<&str> {
    question
        .split_whitespace()
        .map(trim_punct)
        .filter(|w| !w.is_empty() && !is_stopword(&w.to_lowercase()))
        .collect()
}

/// Answer-type token implied by the question's wh-word.
pub fn type_token(question: &str) -> Option<&'static str> {
    match wh_word(&normalize_tokens(question))? {
        "who" => Some("person"),
        "when" => Some("date"),
        "where" => Some("place"),
        _ => None,
    }
}

/// Longest run of capitalized words; the first one wins ties.
fn longest_capitalized_run(question: &str) -> Option<String> {
    let words: Vec<&str> = question.split_whitespace().map(trim_punct).collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < words.len() {
        if words[i].chars().next().is_some_and(char::is_uppercase) {
            let start = i;
            while i < words.len() && words[i].chars().next().is_some_and(char::is_uppercase) {
                i += 1;
            }
            if best.is_none_or(|(s, e)| i - start > e - s) {
                best = Some((start, i));
            }
        } else {
            i += 1;
        }
    }
    best.map(|(s, e)| words[s..e].join(" "))
}

/// Applies a template. Rewrites that would leave nothing fall back to the question itself.
pub fn apply_template(t: RewriteTemplate, question: &str) -> String {
    let out = match t {
        RewriteTemplate::Identity => return question.to_owned(),
        RewriteTemplate::KeywordsOnly => keywords(question).join(" "),
        RewriteTemplate::TypeHint => {
            let mut words = keywords(question);
            if let Some(tok) = type_token(question) {
                words.push(tok);
            }
            words.join(" ")
        }
        RewriteTemplate::QuoteFocus => longest_capitalized_run(question).unwrap_or_default(),
    };
    if out.trim().is_empty() {
        question.to_owned()
    } else {
        out
    }
}
