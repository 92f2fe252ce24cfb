//! Replace the rewritten queries with the raw question, or the answer head with the warm-up one.

use raglab::eval::{ablation_replace_generator, ablation_replace_query, evaluate, EvalReport};
use raglab::policy::SampleMode;
use raglab::training::{train, TrainSettings};
use raglab::worldgen::{gen_world, WorldSpec};

fn show(name: &str, r: &EvalReport) {
    let hit = r.hit.map_or("-".to_owned(), |h| format!("{h:.1}"));
    println!("{name:>18}: em={:.1} f1={:.1} hit={hit} retrieval={:.1}%", r.em, r.f1, r.retrieval_pct);
}

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 150, p_ambiguous: 0.8, seed: 7, ..WorldSpec::default() })?;
    let mut s = TrainSettings::new(7);
    s.iters = 8;
    let out = train(&world, &s)?;
    let (full, _) = evaluate(&out.final_params, &world, &s.env, SampleMode::Greedy, &s.eval)?;
    let (rq, _) = ablation_replace_query(&out.final_params, &world, &s.env, SampleMode::Greedy, &s.eval)?;
    let (rg, _) = ablation_replace_generator(&out.final_params, &out.warmup, &world, &s.env, SampleMode::Greedy, &s.eval)?;
    show("trained", &full);
    show("replace_query", &rq);
    show("replace_generator", &rg);
    Ok(())
}
