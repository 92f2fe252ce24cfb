//! Synthetic QA worlds with a controllable knowledge structure, plus file
//! ingestion and on-disk bundles.
//!
//! Every question asks about a two-word entity of some domain. Covered
//! questions get a gold document; every question gets distractors that share
//! the entity but state a wrong relation. Ambiguous questions additionally get
//! bait documents that push the gold document out of the top-K for every
//! query template except the designated one.

mod bundle;
mod ingest;
mod names;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Question;
use crate::error::{Error, Result};
use crate::metrics::hit;
use crate::policy::{apply_template, Memory, RewriteTemplate};
use crate::retriever::{Document, Index};
use crate::text::{derive_seed, STOPWORDS};

pub use bundle::{load_bundle, save_bundle, Manifest, BUNDLE_FORMAT};
pub use ingest::{ingest, IngestOptions};

/// Domains and how likely a question about each is to be covered by the corpus.
pub const DOMAINS: [(&str, f64); 8] = [
    ("film", 0.95),
    ("album", 0.9),
    ("novel", 0.85),
    ("company", 0.8),
    ("festival", 0.3),
    ("painting", 0.2),
    ("ship", 0.15),
    ("bridge", 0.1),
];

const WHO_RELATIONS: [&str; 6] = ["producer", "director", "author", "founder", "composer", "architect"];
const WHEN_VERBS: [&str; 6] = ["built", "founded", "released", "opened", "completed", "launched"];
const WHERE_VERBS: [&str; 6] = ["located", "filmed", "recorded", "printed", "held", "headquartered"];

const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhType {
    Who,
    When,
    Where,
}

impl WhType {
    const ALL: [WhType; 3] = [WhType::Who, WhType::When, WhType::Where];

    fn relations(self) -> &'static [&'static str; 6] {
        match self {
            WhType::Who => &WHO_RELATIONS,
            WhType::When => &WHEN_VERBS,
            WhType::Where => &WHERE_VERBS,
        }
    }

    fn type_token(self) -> &'static str {
        match self {
            WhType::Who => "person",
            WhType::When => "date",
            WhType::Where => "place",
        }
    }

    /// The template whose query reaches the gold document of an ambiguous question.
    pub fn designated_template(self) -> RewriteTemplate {
        match self {
            WhType::Who | WhType::Where => RewriteTemplate::TypeHint,
            WhType::When => RewriteTemplate::KeywordsOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DirectAnswerable,
    NeedsRetrieval,
    Unanswerable,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::DirectAnswerable,
        Category::NeedsRetrieval,
        Category::Unanswerable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::DirectAnswerable => "direct_answerable",
            Category::NeedsRetrieval => "needs_retrieval",
            Category::Unanswerable => "unanswerable",
        }
    }

    pub fn classify(correct_memory: bool, covered: bool) -> Category {
        if correct_memory {
            Category::DirectAnswerable
        } else if covered {
            Category::NeedsRetrieval
        } else {
            Category::Unanswerable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub n_questions: usize,
    pub p_known: f64,
    pub p_known_wrong: f64,
    pub p_covered: f64,
    pub p_ambiguous: f64,
    /// Fraction of uncovered questions whose corpus asserts a wrong answer in the gold document's wording.
    pub p_misleading: f64,
    pub distractors_per_question: usize,
    /// Size of each entity-name pool; entities are unique first/last pairs.
    pub vocab_size: usize,
    pub seed: u64,
    /// K used when verifying ambiguous questions.
    pub top_k: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            n_questions: 200,
            p_known: 0.3,
            p_known_wrong: 0.1,
            p_covered: 0.7,
            p_ambiguous: 0.25,
            p_misleading: 0.5,
            distractors_per_question: 3,
            vocab_size: 40,
            seed: 0,
            top_k: 4,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_known", self.p_known),
            ("p_known_wrong", self.p_known_wrong),
            ("p_covered", self.p_covered),
            ("p_ambiguous", self.p_ambiguous),
            ("p_misleading", self.p_misleading),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("world.{name} must lie in [0, 1]")));
            }
        }
        if self.p_known + self.p_known_wrong > 1.0 + 1e-12 {
            return Err(Error::Config("world.p_known + world.p_known_wrong must not exceed 1".into()));
        }
        if self.n_questions == 0 {
            return Err(Error::Config("world.n_questions must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("world.top_k must be positive".into()));
        }
        if self.vocab_size < 2 || self.vocab_size * self.vocab_size < self.n_questions {
            return Err(Error::Config(
                "world.vocab_size squared must cover world.n_questions distinct entities".into(),
            ));
        }
        Ok(())
    }
}

/// Construction facts about one question, kept for tests and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionInfo {
    pub wh: WhType,
    pub domain: String,
    pub covered: bool,
    pub ambiguous: bool,
    pub misleading: bool,
    pub gold_doc: Option<String>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub spec: Option<WorldSpec>,
    pub questions: Vec<Arc<Question>>,
    pub index: Arc<Index>,
    pub memory: Memory,
    pub oracle_map: BTreeMap<String, RewriteTemplate>,
    pub categories: BTreeMap<String, Category>,
    pub info: BTreeMap<String, QuestionInfo>,
}

impl World {
    pub fn corpus(&self) -> &[Document] {
        self.index.documents()
    }

    pub fn question(&self, id: &str) -> Option<&Arc<Question>> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn category(&self, id: &str) -> Option<Category> {
        self.categories.get(id).copied()
    }

    /// Questions per category.
    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut m = BTreeMap::new();
        for c in self.categories.values() {
            *m.entry(*c).or_insert(0) += 1;
        }
        m
    }

    /// Fraction of `template` queries over `ids` whose top-`k` contains a gold answer.
    pub fn template_hit_rate(&self, ids: &[&str], template: RewriteTemplate, k: usize) -> f64 {
        if ids.is_empty() {
            return 0.0;
        }
        let hits: f64 = ids
            .iter()
            .filter_map(|id| self.question(id))
            .map(|q| {
                let obs = self.index.search_top(&apply_template(template, &q.text), k);
                hit(&obs.concatenated_text, &q.gold_answers)
            })
            .sum();
        hits / ids.len() as f64
    }
}

struct Draft {
    id: String,
    wh: WhType,
    domain: &'static str,
    relation: &'static str,
    entity: (String, String),
    gold: String,
    text: String,
    covered: bool,
    ambiguous: bool,
    entity_heavy: bool,
    misleading: bool,
}

impl Draft {
    fn entity(&self) -> String {
        format!("{} {}", self.entity.0, self.entity.1)
    }
}

fn question_text(wh: WhType, domain: &str, relation: &str, entity: &str) -> String {
    match wh {
        WhType::Who => format!("Who was the {relation} of the {domain} {entity}?"),
        WhType::When => format!("When was the {domain} {entity} {relation}?"),
        WhType::Where => format!("Where was the {domain} {entity} {relation}?"),
    }
}

/// Picks `m` of `weights.len()` indices without replacement, favouring large weights.
fn weighted_choice(rng: &mut ChaCha8Rng, weights: &[f64], m: usize) -> BTreeSet<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keys.into_iter().take(m).map(|(_, i)| i).collect()
}

fn count(p: f64, n: usize) -> usize {
    ((p * n as f64).round() as usize).min(n)
}

/// Document generator for one question; ids are `{qid}-{tag}{n}`.
struct DocWriter<'a> {
    draft: &'a Draft,
    words: &'a mut names::WordSource,
    out: Vec<Document>,
}

impl DocWriter<'_> {
    fn push(&mut self, tag: &str, span: &str, body: &str) {
        let id = format!("{}-{}{}", self.draft.id, tag, self.out.len());
        self.out.push(Document::new(id, span, body, Some(span)));
    }

    fn decoy(&mut self) -> String {
        self.words.fresh(3)
    }

    fn gold(&mut self) {
        let d = self.draft;
        let body = match d.wh {
            WhType::When => format!("{} {} {} {}", d.entity(), d.domain, d.relation, d.gold),
            _ => format!(
                "{} {} {} {} {}",
                d.entity(),
                d.domain,
                d.relation,
                d.gold,
                d.wh.type_token()
            ),
        };
        let span = d.gold.clone();
        self.push("g", &span, &body);
    }

    /// Gold wording with a wrong answer.
    fn misleading(&mut self) {
        let d = self.draft;
        let decoy = self.decoy();
        let body = match d.wh {
            WhType::When => format!("{} {} {} {decoy}", d.entity(), d.domain, d.relation),
            _ => format!("{} {} {} {decoy} {}", d.entity(), d.domain, d.relation, d.wh.type_token()),
        };
        self.push("m", &decoy, &body);
    }

    fn distractor(&mut self, rng: &mut ChaCha8Rng) {
        let d = self.draft;
        let wrong: Vec<&str> = d
            .wh
            .relations()
            .iter()
            .copied()
            .filter(|r| *r != d.relation)
            .collect();
        let r = wrong.choose(rng).expect("more than one relation");
        let decoy = self.decoy();
        let body = format!("{} {} {} {}", d.entity(), d.domain, r, decoy);
        self.push("d", &decoy, &body);
    }

    /// Repeats the entity so the document outranks a gold one on entity-only evidence.
    fn entity_heavy(&mut self) {
        let d = self.draft;
        let decoy = self.decoy();
        let e = d.entity();
        let body = format!("{e} {e} {e} {} {} {decoy}", d.domain, d.wh.type_token());
        self.push("e", &decoy, &body);
    }

    /// Bait documents that beat the gold document for every non-designated template.
    fn baits(&mut self, n: usize, strength: usize) {
        let d = self.draft;
        let e = d.entity();
        let when_was = "when was ".repeat(1 + strength / 4);
        let date = "date ".repeat(1 + strength / 2);
        for _ in 0..n {
            match d.wh {
                WhType::Who | WhType::Where => {
                    let decoy = self.decoy();
                    self.push("b", &decoy, &format!("{e} {} {} {decoy}", d.domain, d.relation));
                }
                WhType::When => {
                    let decoy = self.decoy();
                    self.push("b", &decoy, &format!("{when_was}{e} {e} {} {decoy}", d.relation));
                    let decoy = self.decoy();
                    self.push("b", &decoy, &format!("{date}{e} {e} {} {decoy}", d.relation));
                }
            }
        }
    }
}

fn question_docs(
    draft: &Draft,
    spec: &WorldSpec,
    strength: usize,
    words: &mut names::WordSource,
    rng: &mut ChaCha8Rng,
) -> Vec<Document> {
    let mut w = DocWriter { draft, words, out: Vec::new() };
    if draft.covered {
        w.gold();
    }
    if draft.misleading {
        w.misleading();
    }
    for _ in 0..spec.distractors_per_question {
        w.distractor(rng);
    }
    if draft.entity_heavy {
        w.entity_heavy();
    }
    if draft.ambiguous {
        w.baits(spec.top_k + strength.min(4), strength);
    }
    w.out
}

/// Why an ambiguous question fails verification, if it does.
fn ambiguity_failure(index: &Index, draft: &Draft, gold_doc: &str, k: usize) -> Option<RewriteTemplate> {
    let designated = draft.wh.designated_template();
    for t in RewriteTemplate::ALL {
        let rank = index.rank_of(&apply_template(t, &draft.text), k, gold_doc);
        let ok = if t == designated { rank == Some(0) } else { rank.is_none() };
        if !ok {
            return Some(t);
        }
    }
    None
}

/// Generates a world. Deterministic in `spec`.
pub fn gen_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let n = spec.n_questions;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "worldgen/questions"));
    let reserved = STOPWORDS
        .iter()
        .chain(DOMAINS.iter().map(|(d, _)| d))
        .chain(WHO_RELATIONS.iter())
        .chain(WHEN_VERBS.iter())
        .chain(WHERE_VERBS.iter())
        .chain(["person", "date", "place"].iter())
        .copied();
    let mut words = names::WordSource::new(derive_seed(spec.seed, "worldgen/words"), reserved);
    let firsts = words.pool(spec.vocab_size, 2);
    let lasts = words.pool(spec.vocab_size, 2);

    let mut pairs: Vec<(usize, usize)> = (0..spec.vocab_size)
        .flat_map(|a| (0..spec.vocab_size).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(&mut rng);

    let width = n.to_string().len().max(3);
    let mut drafts: Vec<Draft> = (0..n)
        .map(|i| {
            let wh = *WhType::ALL.choose(&mut rng).expect("non-empty");
            let domain = DOMAINS[rng.gen_range(0..DOMAINS.len())].0;
            let relation = *wh.relations().choose(&mut rng).expect("non-empty");
            let (a, b) = pairs[i];
            let entity = (firsts[a].clone(), lasts[b].clone());
            let text = question_text(wh, domain, relation, &format!("{} {}", entity.0, entity.1));
            Draft {
                id: format!("q{i:0width$}"),
                wh,
                domain,
                relation,
                entity,
                gold: words.fresh(3),
                text,
                covered: false,
                ambiguous: false,
                entity_heavy: false,
                misleading: false,
            }
        })
        .collect();

    let weights: Vec<f64> = drafts
        .iter()
        .map(|d| DOMAINS.iter().find(|(name, _)| *name == d.domain).expect("known domain").1)
        .collect();
    let covered = weighted_choice(&mut rng, &weights, count(spec.p_covered, n));
    for i in &covered {
        drafts[*i].covered = true;
    }
    let mut covered_ids: Vec<usize> = covered.iter().copied().collect();
    covered_ids.shuffle(&mut rng);
    let n_amb = count(spec.p_ambiguous, covered_ids.len());
    for i in &covered_ids[..n_amb] {
        drafts[*i].ambiguous = true;
    }
    for i in &covered_ids[n_amb..] {
        drafts[*i].entity_heavy = rng.gen_bool(0.5);
    }
    let mut uncovered: Vec<usize> = (0..n).filter(|i| !drafts[*i].covered).collect();
    uncovered.shuffle(&mut rng);
    let n_misleading = count(spec.p_misleading, uncovered.len());
    for i in &uncovered[..n_misleading] {
        drafts[*i].misleading = true;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_known = count(spec.p_known, n);
    let n_wrong = count(spec.p_known_wrong, n).min(n - n_known);
    let mut memory = Memory::new();
    let mut correct = BTreeSet::new();
    for &i in &order[..n_known] {
        memory.insert(drafts[i].id.clone(), drafts[i].gold.clone());
        correct.insert(i);
    }
    for &i in &order[n_known..n_known + n_wrong] {
        let answer = if n > 1 {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            drafts[j].gold.clone()
        } else {
            words.fresh(3)
        };
        memory.insert(drafts[i].id.clone(), answer);
    }

    // Documents, then verification rounds for ambiguous questions.
    let mut doc_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "worldgen/documents"));
    let mut strength = vec![0usize; n];
    let mut per_question: Vec<Vec<Document>> = drafts
        .iter()
        .map(|d| question_docs(d, spec, 0, &mut words, &mut doc_rng))
        .collect();
    let mut pending: BTreeSet<usize> = (0..n).filter(|i| drafts[*i].ambiguous).collect();
    let mut index = Index::build(per_question.iter().flatten().cloned().collect())?;
    let mut last_failure: BTreeMap<usize, RewriteTemplate> = BTreeMap::new();
    for _round in 0..MAX_ROUNDS {
        last_failure.clear();
        for &i in &pending {
            let gold_doc = &per_question[i][0].id;
            if let Some(t) = ambiguity_failure(&index, &drafts[i], gold_doc, spec.top_k) {
                last_failure.insert(i, t);
            }
        }
        if last_failure.is_empty() {
            break;
        }
        for &i in last_failure.keys() {
            strength[i] += 1;
            per_question[i] = question_docs(&drafts[i], spec, strength[i], &mut words, &mut doc_rng);
        }
        pending = last_failure.keys().copied().collect();
        index = Index::build(per_question.iter().flatten().cloned().collect())?;
    }
    for (&i, t) in &last_failure {
        log::warn!(
            "question {} could not be made ambiguous ({} still misbehaves); flagged non-ambiguous",
            drafts[i].id,
            t.name()
        );
        drafts[i].ambiguous = false;
    }
    if n_amb > 0 && last_failure.len() == n_amb {
        return Err(Error::Generation(format!(
            "p_ambiguous={}: no question could be made ambiguous within {MAX_ROUNDS} rounds",
            spec.p_ambiguous
        )));
    }

    let mut questions = Vec::with_capacity(n);
    let mut oracle_map = BTreeMap::new();
    let mut categories = BTreeMap::new();
    let mut info = BTreeMap::new();
    for (i, d) in drafts.iter().enumerate() {
        questions.push(Arc::new(Question::new(d.id.clone(), d.text.clone(), vec![d.gold.clone()])?));
        oracle_map.insert(d.id.clone(), d.wh.designated_template());
        categories.insert(d.id.clone(), Category::classify(correct.contains(&i), d.covered));
        info.insert(
            d.id.clone(),
            QuestionInfo {
                wh: d.wh,
                domain: d.domain.to_owned(),
                covered: d.covered,
                ambiguous: d.ambiguous,
                misleading: d.misleading,
                gold_doc: d.covered.then(|| per_question[i][0].id.clone()),
            },
        );
    }
    Ok(World {
        spec: Some(*spec),
        questions,
        index: Arc::new(index),
        memory,
        oracle_map,
        categories,
        info,
    })
}
