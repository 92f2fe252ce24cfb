//! Episode invariants under arbitrary policies, and isolation of gold answers from the policy.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_params, small_world};
use raglab::env::{new_state, rollout, EnvConfig, KindSet, Policy, Question};
use raglab::eval::{evaluate, EvalOptions};
use raglab::policy::{encode, ParametricPolicy, PolicyConfig, SampleMode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampled_episodes_respect_the_quota(seed in any::<u64>(), quota in 0usize..=3, top_k in 1usize..=5, hidden in 0usize..=3) {
        let w = small_world(10, seed);
        let env = EnvConfig { quota_n: quota, top_k, ..EnvConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, 32, hidden);
        let opts = EvalOptions { seed, ..EvalOptions::default() };
        let (report, trajs) = evaluate(&p, &w, &env, SampleMode::Sample, &opts).unwrap();
        prop_assert_eq!(trajs.len(), 10);
        for t in &trajs {
            prop_assert!(t.check(quota).is_ok());
            prop_assert!(t.steps.len() == t.query_count() + 1);
            for o in t.observations() {
                prop_assert!(o.snippets.len() <= top_k);
            }
            let naive: f64 = t.rewards().iter().enumerate().map(|(i, r)| env.gamma.powi(i as i32) * r).sum();
            prop_assert!((naive - t.discounted_return(env.gamma)).abs() < 1e-12);
        }
        if quota == 0 {
            prop_assert_eq!(report.retrieval_pct, 0.0);
            prop_assert_eq!(report.hit, None);
        }
        let again = evaluate(&p, &w, &env, SampleMode::Sample, &opts).unwrap().1;
        prop_assert_eq!(trajs, again);
    }
}

#[test]
fn gold_answers_never_reach_the_policy() {
    let w = small_world(12, 3);
    let env = EnvConfig { quota_n: 2, ..EnvConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_params(&mut rng, 48, 2);
    let policy = ParametricPolicy::new(&p, &w.memory);
    let cfg = PolicyConfig { dim: 48, hidden: 2, ..PolicyConfig::default() };
    for q in &w.questions {
        let swapped = Arc::new(Question::new(q.id.clone(), q.text.clone(), vec!["zzq unrelated".into()]).unwrap());
        let a = encode(&new_state(Arc::clone(q)), &w.memory, &cfg, KindSet::BOTH);
        let b = encode(&new_state(Arc::clone(&swapped)), &w.memory, &cfg, KindSet::BOTH);
        assert_eq!(a, b);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let t1 = rollout(Arc::clone(q), &policy, &*w.index, &env, &mut r1, SampleMode::Sample).unwrap();
        let t2 = rollout(swapped, &policy, &*w.index, &env, &mut r2, SampleMode::Sample).unwrap();
        let acts = |t: &raglab::env::Trajectory| t.steps.iter().map(|s| s.action.clone()).collect::<Vec<_>>();
        assert_eq!(acts(&t1), acts(&t2));
        let d1 = policy.act(&new_state(Arc::clone(q)), KindSet::BOTH, &mut r1, SampleMode::Greedy).unwrap();
        let d2 = policy.act(&new_state(Arc::clone(q)), KindSet::BOTH, &mut r2, SampleMode::Greedy).unwrap();
        assert_eq!(d1.action, d2.action);
    }
}
