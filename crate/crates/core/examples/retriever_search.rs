//! BM25 search over a handful of documents.

use raglab::retriever::{Document, Index, RetrieverHandle};

fn main() -> raglab::Result<()> {
    let index = Index::build(vec![
        Document::new("d1", "Nine", "Nine is a 2009 film produced by Tim Burton", Some("Tim Burton")),
        Document::new("d2", "Nine", "Shane Acker directed the animated film Nine", Some("Shane Acker")),
        Document::new("d3", "Coraline", "Coraline was produced by Laika", Some("Laika")),
    ])?;
    println!("{} documents, mean length {:.2}", index.len(), index.avg_doc_length());
    for query in ["who produced the film Nine", "Coraline producer", "unrelated words"] {
        let obs = index.search(query, 2)?;
        println!("{query:?}");
        for s in &obs.snippets {
            println!("  {} score={:.3} span={:?}", s.doc_id, s.score, s.answer_span);
        }
    }
    Ok(())
}
