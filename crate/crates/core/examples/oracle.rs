//! Brute-force optimal plans, and how often a trained policy follows them.

use raglab::env::EnvConfig;
use raglab::eval::{brute_force_optimal, evaluate, plan_agreement};
use raglab::policy::SampleMode;
use raglab::training::{train, TrainSettings};
use raglab::worldgen::{gen_world, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 40, seed: 9, ..WorldSpec::default() })?;
    let env = EnvConfig::default();
    let plans = brute_force_optimal(&world, &env)?;
    for p in plans.iter().take(5) {
        let queries: Vec<&str> = p.plan.queries.iter().map(|t| t.name()).collect();
        println!("{}: queries={queries:?} answer={:?} value={:.3} ({} plans)", p.question_id, p.plan.answer, p.value, p.plans_considered);
    }
    let mut s = TrainSettings::new(9);
    s.iters = 10;
    let out = train(&world, &s)?;
    for (label, params) in [("warm-up", &out.warmup), ("trained", &out.final_params)] {
        let (_, trajs) = evaluate(params, &world, &env, SampleMode::Greedy, &s.eval)?;
        println!("{label}: agreement with optimal action kinds {:.1}%", plan_agreement(&plans, &trajs));
    }
    Ok(())
}
