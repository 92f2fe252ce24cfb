//! World bundles: a directory of line-delimited and JSON files plus a manifest.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Memory, RewriteTemplate};
use crate::retriever::Index;
use crate::worldgen::ingest::{check_unique_questions, read_corpus, read_questions, QaRecordOut};
use crate::worldgen::{Category, QuestionInfo, World, WorldSpec};

pub const BUNDLE_FORMAT: &str = "raglab-world/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: Option<u64>,
    pub spec: Option<WorldSpec>,
    pub n_questions: usize,
    pub n_documents: usize,
    pub files: Vec<String>,
}

const FILES: [&str; 6] = [
    "qa.jsonl",
    "corpus.jsonl",
    "memory.json",
    "oracle_map.json",
    "categories.json",
    "info.json",
];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Writes `world` into `dir`, creating it if needed.
pub fn save_bundle(world: &World, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut qa = BufWriter::new(std::fs::File::create(dir.join(FILES[0]))?);
    for q in &world.questions {
        let rec = QaRecordOut { id: &q.id, question: &q.text, answers: &q.gold_answers };
        serde_json::to_writer(&mut qa, &rec)?;
        qa.write_all(b"\n")?;
    }
    qa.flush()?;
    let mut corpus = BufWriter::new(std::fs::File::create(dir.join(FILES[1]))?);
    for d in world.corpus() {
        serde_json::to_writer(&mut corpus, d)?;
        corpus.write_all(b"\n")?;
    }
    corpus.flush()?;
    write_json(&dir.join(FILES[2]), &world.memory)?;
    write_json(&dir.join(FILES[3]), &world.oracle_map)?;
    write_json(&dir.join(FILES[4]), &world.categories)?;
    write_json(&dir.join(FILES[5]), &world.info)?;
    let manifest = Manifest {
        format: BUNDLE_FORMAT.to_owned(),
        seed: world.spec.map(|s| s.seed),
        spec: world.spec,
        n_questions: world.questions.len(),
        n_documents: world.corpus().len(),
        files: FILES.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Reads a bundle written by [`save_bundle`].
pub fn load_bundle(dir: &Path) -> Result<World> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Config(format!("unsupported world bundle format {}", manifest.format)));
    }
    let mut skipped = Vec::new();
    let questions = read_questions(&dir.join(FILES[0]), false, &mut skipped)?;
    check_unique_questions(&questions)?;
    let docs = read_corpus(&dir.join(FILES[1]), None, false, &mut skipped)?;
    let memory: Memory = read_json(&dir.join(FILES[2]))?;
    let oracle_map: BTreeMap<String, RewriteTemplate> = read_json(&dir.join(FILES[3]))?;
    let categories: BTreeMap<String, Category> = read_json(&dir.join(FILES[4]))?;
    let info_path = dir.join(FILES[5]);
    let info: BTreeMap<String, QuestionInfo> = if info_path.exists() {
        read_json(&info_path)?
    } else {
        BTreeMap::new()
    };
    for q in &questions {
        if !oracle_map.contains_key(&q.id) || !categories.contains_key(&q.id) {
            return Err(Error::Config(format!(
                "bundle {} lacks oracle or category for question {}",
                dir.display(),
                q.id
            )));
        }
    }
    Ok(World {
        spec: manifest.spec,
        questions: questions.into_iter().map(Arc::new).collect(),
        index: Arc::new(Index::build(docs)?),
        memory,
        oracle_map,
        categories,
        info,
    })
}
