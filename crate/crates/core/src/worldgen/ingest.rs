//! Loading questions and documents from line-delimited JSON files.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::Question;
use crate::error::{Error, Result};
use crate::metrics::hit;
use crate::policy::{Memory, RewriteTemplate};
use crate::retriever::{Document, Index};
use crate::worldgen::{Category, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestOptions {
    /// Documents are cut to this many whitespace tokens.
    pub snippet_token_budget: usize,
    /// Skip malformed lines instead of failing.
    pub permissive: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { snippet_token_budget: 64, permissive: false }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QaRecord {
    id: String,
    question: String,
    answers: Vec<String>,
}

#[derive(Debug, Serialize)]
pub(crate) struct QaRecordOut<'a> {
    pub id: &'a str,
    pub question: &'a str,
    pub answers: &'a [String],
}

fn truncate(text: &str, budget: usize) -> String {
    text.split_whitespace().take(budget).collect::<Vec<_>>().join(" ")
}

/// Parses every non-blank line with `parse`; malformed lines are fatal unless `permissive`.
fn read_lines<T>(
    path: &Path,
    permissive: bool,
    skipped: &mut Vec<Error>,
    mut parse: impl FnMut(&str) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse(line) {
            Ok(v) => out.push(v),
            Err(message) => {
                let e = Error::Parse { path: path.display().to_string(), line: i + 1, message };
                if !permissive {
                    return Err(e);
                }
                log::warn!("skipping {e}");
                skipped.push(e);
            }
        }
    }
    Ok(out)
}

pub(crate) fn read_questions(path: &Path, permissive: bool, skipped: &mut Vec<Error>) -> Result<Vec<Question>> {
    read_lines(path, permissive, skipped, |line| {
        let r: QaRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let q = Question { id: r.id, text: r.question, gold_answers: r.answers };
        q.validate().map_err(|e| e.to_string())?;
        Ok(q)
    })
}

pub(crate) fn read_corpus(
    path: &Path,
    budget: Option<usize>,
    permissive: bool,
    skipped: &mut Vec<Error>,
) -> Result<Vec<Document>> {
    read_lines(path, permissive, skipped, |line| {
        let mut d: Document = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if d.text.trim().is_empty() {
            return Err(format!("document {} has empty text", d.id));
        }
        if let Some(b) = budget {
            d.text = truncate(&d.text, b);
        }
        Ok(d)
    })
}

pub(crate) fn check_unique_questions(questions: &[Question]) -> Result<()> {
    let mut seen = HashSet::new();
    for q in questions {
        if !seen.insert(q.id.as_str()) {
            return Err(Error::Corpus(format!("duplicate question id {}", q.id)));
        }
    }
    Ok(())
}

/// Loads external QA and corpus files into a world with an empty memory.
///
/// Every question maps to the identity template; its category is
/// NeedsRetrieval when some document contains a gold answer and Unanswerable
/// otherwise. Returns the world and the lines that were skipped.
pub fn ingest(qa_path: &Path, corpus_path: &Path, opts: IngestOptions) -> Result<(World, Vec<Error>)> {
    if opts.snippet_token_budget == 0 {
        return Err(Error::Config("snippet_token_budget must be positive".into()));
    }
    let mut skipped = Vec::new();
    let questions = read_questions(qa_path, opts.permissive, &mut skipped)?;
    check_unique_questions(&questions)?;
    let docs = read_corpus(corpus_path, Some(opts.snippet_token_budget), opts.permissive, &mut skipped)?;
    let index = Index::build(docs)?;

    let mut oracle_map = BTreeMap::new();
    let mut categories = BTreeMap::new();
    for q in &questions {
        oracle_map.insert(q.id.clone(), RewriteTemplate::Identity);
        let covered = index.documents().iter().any(|d| hit(&d.text, &q.gold_answers) > 0.0);
        categories.insert(q.id.clone(), Category::classify(false, covered));
    }
    let world = World {
        spec: None,
        questions: questions.into_iter().map(Arc::new).collect(),
        index: Arc::new(index),
        memory: Memory::new(),
        oracle_map,
        categories,
        info: BTreeMap::new(),
    };
    Ok((world, skipped))
}
