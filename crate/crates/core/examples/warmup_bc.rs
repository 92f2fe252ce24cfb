//! Warm-up datasets for both variants, behavior cloning, and greedy evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use raglab::eval::evaluate;
use raglab::policy::{PolicyParams, SampleMode};
use raglab::training::{
    bc_loss, behavior_clone, build_warmup_dataset, encode_examples, RewriteOracle, TrainSettings, WarmupVariant,
};
use raglab::worldgen::{gen_world, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 150, seed: 2, ..WorldSpec::default() })?;
    let s = TrainSettings::new(2);
    for variant in [WarmupVariant::Pi0, WarmupVariant::Pi0Star] {
        let oracle = RewriteOracle::new(world.oracle_map.clone(), s.warmup.rewrite_oracle_q, 7);
        let data = build_warmup_dataset(&world.questions, &*world.index, &oracle, &world.memory, variant, &s.env)?;
        let init = PolicyParams::init(s.policy);
        let encoded = encode_examples(&init, &world.memory, &data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let before = bc_loss(&init, &encoded);
        let params = behavior_clone(&init, &encoded, &s.bc, &mut rng)?;
        let (r, _) = evaluate(&params, &world, &s.env, SampleMode::Greedy, &s.eval)?;
        println!(
            "{}: {} examples, loss {:.3} -> {:.3}, em={:.1} f1={:.1} retrieval={:.1}%",
            variant.name(),
            data.len(),
            before,
            bc_loss(&params, &encoded),
            r.em,
            r.f1,
            r.retrieval_pct
        );
    }
    Ok(())
}
