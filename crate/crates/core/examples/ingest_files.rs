//! Load questions and documents from line-delimited JSON, then warm up and evaluate on them.

use std::fs;

use raglab::eval::evaluate;
use raglab::policy::SampleMode;
use raglab::training::{warm_start, TrainSettings};
use raglab::worldgen::{ingest, IngestOptions};

const QA: &str = r#"{"id":"q1","question":"Who produced the film Nine?","answers":["Tim Burton"]}
{"id":"q2","question":"Who directed the film Nine?","answers":["Shane Acker"]}
{"id":"q3","question":"Where was Coraline animated?","answers":["Portland"]}
"#;

const CORPUS: &str = r#"{"id":"d1","title":"Nine","text":"Nine is a 2009 film produced by Tim Burton"}
{"id":"d2","title":"Nine","text":"Shane Acker directed the animated film Nine"}
{"id":"d3","title":"Coraline","text":"Coraline is a stop-motion film"}
"#;

fn main() -> raglab::Result<()> {
    let dir = std::env::temp_dir().join("raglab-example-ingest");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("qa.jsonl"), QA)?;
    fs::write(dir.join("corpus.jsonl"), CORPUS)?;
    let (world, skipped) = ingest(&dir.join("qa.jsonl"), &dir.join("corpus.jsonl"), IngestOptions::default())?;
    println!("{} questions, {} documents, {} skipped lines", world.questions.len(), world.corpus().len(), skipped.len());
    for q in &world.questions {
        println!("  {} -> {}", q.id, world.category(&q.id).expect("categorized").name());
    }
    let s = TrainSettings::new(1);
    let params = warm_start(&world, &s)?;
    let (r, trajs) = evaluate(&params, &world, &s.env, SampleMode::Greedy, &s.eval)?;
    for t in &trajs {
        println!("  {}: {} queries, answered {:?}", t.question_id, t.query_count(), t.final_answer);
    }
    println!("em={:.1} f1={:.1} retrieval={:.1}%", r.em, r.f1, r.retrieval_pct);
    Ok(())
}
