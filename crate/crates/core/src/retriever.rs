//! In-memory BM25 index over a document corpus.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::env::{Observation, Snippet};
use crate::error::{Error, Result};
use crate::text::normalize_tokens;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
    /// Answer-bearing phrase; only worldgen and candidate extraction look at it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_span: Option<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        text: impl Into<String>,
        answer_span: Option<&str>,
    ) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            text: text.into(),
            answer_span: answer_span.map(str::to_owned),
        }
    }

    /// Tokens the index sees: title followed by body.
    pub fn index_tokens(&self) -> Vec<String> {
        normalize_tokens(&format!("{} {}", self.title, self.text))
    }
}

/// Anything that can answer `search(query, k)` with an observation.
pub trait RetrieverHandle: Send + Sync {
    fn search(&self, query: &str, k: usize) -> Result<Observation>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
}

impl Index {
    pub fn build(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate document id {}", d.id)));
            }
            let tokens = d.index_tokens();
            doc_lengths.push(tokens.len() as u32);
            let mut tf: Vec<(String, u32)> = Vec::new();
            for t in tokens {
                match tf.iter_mut().find(|(s, _)| *s == t) {
                    Some((_, c)) => *c += 1,
                    None => tf.push((t, 1)),
                }
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((i as u32, c));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        Ok(Index {
            docs,
            by_id,
            postings,
            doc_lengths,
            avg_doc_length,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, Vec::len)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, token: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq(token) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_score(&self, idf: f64, tf: u32, doc: usize) -> f64 {
        let tf = f64::from(tf);
        let norm = 1.0 - BM25_B + BM25_B * f64::from(self.doc_lengths[doc]) / self.avg_doc_length;
        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
    }

    /// BM25 score of one document for already-normalized query tokens.
    pub fn score(&self, query_tokens: &[String], doc_id: &str) -> Result<f64> {
        let doc = *self
            .by_id
            .get(doc_id)
            .ok_or_else(|| Error::Corpus(format!("unknown document {doc_id}")))?;
        let mut total = 0.0;
        for t in unique(query_tokens) {
            if let Some(list) = self.postings.get(t) {
                if let Some(&(_, tf)) = list.iter().find(|(d, _)| *d as usize == doc) {
                    total += self.term_score(self.idf(t), tf, doc);
                }
            }
        }
        Ok(total)
    }

    /// Top-`k` positively scoring documents, by score then ascending id.
    pub fn search_top(&self, query: &str, k: usize) -> Observation {
        let tokens = normalize_tokens(query);
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for t in unique(&tokens) {
            if let Some(list) = self.postings.get(t) {
                let idf = self.idf(t);
                for &(d, tf) in list {
                    *acc.entry(d).or_insert(0.0) += self.term_score(idf, tf, d as usize);
                }
            }
        }
        let mut ranked: Vec<(u32, f64)> = acc.into_iter().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0 as usize].id.cmp(&self.docs[b.0 as usize].id))
        });
        ranked.truncate(k);
        let snippets = ranked
            .into_iter()
            .map(|(d, score)| {
                let doc = &self.docs[d as usize];
                Snippet {
                    doc_id: doc.id.clone(),
                    score,
                    text: doc.text.clone(),
                    answer_span: doc.answer_span.clone(),
                }
            })
            .collect();
        Observation::from_snippets(query, snippets)
    }

    /// Rank (0-based) of `doc_id` in the top-`k` results for `query`.
    pub fn rank_of(&self, query: &str, k: usize, doc_id: &str) -> Option<usize> {
        self.search_top(query, k)
            .snippets
            .iter()
            .position(|s| s.doc_id == doc_id)
    }
}

fn unique(tokens: &[String]) -> impl Iterator<Item = &String> {
    tokens
        .iter()
        .enumerate()
        .filter(move |(i, t)| !tokens[..*i].contains(t))
        .map(|(_, t)| t)
}

impl RetrieverHandle for Index {
    fn search(&self, query: &str, k: usize) -> Result<Observation> {
        if k == 0 {
            return Err(Error::Contract("search requires k >= 1".into()));
        }
        Ok(self.search_top(query, k))
    }
}

/// Memoizes another retriever's results by `(query, k)`.
pub struct CachedRetriever<R> {
    inner: R,
    cache: RwLock<HashMap<(String, usize), Observation>>,
}

impl<R: RetrieverHandle> CachedRetriever<R> {
    pub fn new(inner: R) -> Self {
        CachedRetriever {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &R {
        &self.inner
    }
}

impl<R: RetrieverHandle> RetrieverHandle for CachedRetriever<R> {
    fn search(&self, query: &str, k: usize) -> Result<Observation> {
        let key = (query.to_owned(), k);
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let obs = self.inner.search(query, k)?;
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, obs.clone());
        Ok(obs)
    }
}

impl<R: RetrieverHandle + ?Sized> RetrieverHandle for &R {
    fn search(&self, query: &str, k: usize) -> Result<Observation> {
        (**self).search(query, k)
    }
}
