//! One retrieve-or-answer episode with an untrained policy, step by step.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use raglab::env::{rollout, EnvConfig};
use raglab::policy::{ParametricPolicy, PolicyConfig, PolicyParams, SampleMode};
use raglab::worldgen::{gen_world, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 10, seed: 1, ..WorldSpec::default() })?;
    let env = EnvConfig { quota_n: 2, ..EnvConfig::default() };
    let params = PolicyParams::init(PolicyConfig::default());
    let policy = ParametricPolicy::new(&params, &world.memory);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for q in world.questions.iter().take(3) {
        let t = rollout(Arc::clone(q), &policy, &*world.index, &env, &mut rng, SampleMode::Sample)?;
        t.check(env.quota_n)?;
        println!("{} {:?} (gold {:?})", q.id, q.text, q.gold_answers[0]);
        for s in &t.steps {
            println!("  {} {:?} reward={:.2} log_prob={:.3}", s.action.kind, s.action.text, s.reward, s.log_prob);
        }
        println!("  return {:.4}", t.discounted_return(env.gamma));
    }
    Ok(())
}
