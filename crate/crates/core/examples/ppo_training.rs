//! Warm-up followed by PPO, printing the per-iteration metrics log.

use raglab::training::{train, write_metrics_csv, TrainSettings};
use raglab::worldgen::{gen_world, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 150, seed: 5, ..WorldSpec::default() })?;
    let mut s = TrainSettings::new(5);
    s.iters = 8;
    s.ppo.sampling_budget = 2048;
    let out = train(&world, &s)?;
    write_metrics_csv(std::io::stdout().lock(), &out.history)?;
    let first = out.history.first().expect("warm-up row");
    let last = out.history.last().expect("final row");
    println!("f1 {:.1} -> {:.1}, retrieval {:.1}% -> {:.1}%", first.eval_f1, last.eval_f1, first.retrieval_pct, last.retrieval_pct);
    Ok(())
}
