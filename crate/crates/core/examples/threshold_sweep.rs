//! F1 against retrieval percentage for the warm-up and PPO policies.

use raglab::eval::{default_taus, f1_at_retrieval, threshold_sweep};
use raglab::eval::evaluate;
use raglab::policy::SampleMode;
use raglab::training::{train, TrainSettings};
use raglab::worldgen::{gen_world, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 150, seed: 6, ..WorldSpec::default() })?;
    let mut s = TrainSettings::new(6);
    s.iters = 8;
    s.ppo.sampling_budget = 2048;
    let out = train(&world, &s)?;
    let taus = default_taus(&out.warmup, &world, 11);
    let curve = threshold_sweep(&out.warmup, &world, &s.env, &taus, &s.eval)?;
    println!("{:>10} {:>10} {:>8} {:>8}", "tau", "retrieval", "em", "f1");
    for r in &curve {
        println!("{:>10.3} {:>10.1} {:>8.1} {:>8.1}", r.tau, r.retrieval_pct, r.em, r.f1);
    }
    let (trained, _) = evaluate(&out.final_params, &world, &s.env, SampleMode::Greedy, &s.eval)?;
    match f1_at_retrieval(&curve, trained.retrieval_pct) {
        Some(w) => println!("trained f1 {:.1} vs warm-up {:.1} at {:.1}% retrieval", trained.f1, w, trained.retrieval_pct),
        None => println!("trained retrieval {:.1}% lies outside the warm-up curve", trained.retrieval_pct),
    }
    Ok(())
}
