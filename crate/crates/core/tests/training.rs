//! End-to-end training: determinism, improvement, and agreement with optimal plans.

use raglab::eval::{ablation_replace_query, brute_force_optimal, evaluate, plan_agreement};
use raglab::policy::SampleMode;
use raglab::training::{train, TrainSettings};
use raglab::worldgen::{gen_world, World, WorldSpec};

fn quick(seed: u64, iters: usize) -> TrainSettings {
    let mut s = TrainSettings::new(seed);
    s.iters = iters;
    s.ppo.sampling_budget = 1024;
    s
}

fn world(n: usize, seed: u64) -> World {
    gen_world(&WorldSpec { n_questions: n, seed, ..WorldSpec::default() }).unwrap()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let w = world(60, 2);
    let s = quick(2, 3);
    let one = pool(1).install(|| train(&w, &s).unwrap());
    let four = pool(4).install(|| train(&w, &s).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.final_params.values), bits(&four.final_params.values));
    assert_eq!(bits(&one.warmup.values), bits(&four.warmup.values));
    assert_eq!(one.history, four.history);
}

#[test]
fn zero_iterations_report_the_warm_start() {
    let w = world(60, 3);
    let s = quick(3, 0);
    let out = train(&w, &s).unwrap();
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.final_params, out.warmup);
    let (r, _) = evaluate(&out.warmup, &w, &s.env, SampleMode::Greedy, &s.eval).unwrap();
    let row = out.history[0];
    assert_eq!((row.eval_em, row.eval_f1, row.retrieval_pct), (r.em, r.f1, r.retrieval_pct));
    assert!(row.mean_reward.is_none() && row.kl.is_none());
}

#[test]
fn training_raises_reward() {
    let w = world(120, 4);
    let out = train(&w, &quick(4, 12)).unwrap();
    let rewards: Vec<f64> = out.history.iter().filter_map(|r| r.mean_reward).collect();
    let head = rewards[..3].iter().sum::<f64>() / 3.0;
    let tail = rewards[rewards.len() - 3..].iter().sum::<f64>() / 3.0;
    assert!(tail > head, "{rewards:?}");
    assert!(out.history.last().unwrap().eval_f1 >= out.history[0].eval_f1);
    for r in &out.history[1..] {
        assert!(r.kl.unwrap().is_finite() && r.entropy.unwrap() >= 0.0);
    }
}

#[test]
fn two_question_worlds_learn_the_optimal_action_kinds() {
    let mut matched = 0;
    for seed in 1..=3 {
        let w = gen_world(&WorldSpec { n_questions: 2, p_known: 0.5, p_known_wrong: 0.0, p_covered: 0.5, p_ambiguous: 0.0, seed, ..WorldSpec::default() })
            .unwrap();
        let s = quick(seed, 15);
        let out = train(&w, &s).unwrap();
        let plans = brute_force_optimal(&w, &s.env).unwrap();
        let (_, trajs) = evaluate(&out.final_params, &w, &s.env, SampleMode::Greedy, &s.eval).unwrap();
        if plan_agreement(&plans, &trajs) == 100.0 {
            matched += 1;
        }
    }
    assert_eq!(matched, 3);
}

#[test]
fn forcing_identity_queries_keeps_hit_without_ambiguity() {
    let w = gen_world(&WorldSpec { n_questions: 120, p_ambiguous: 0.0, seed: 5, ..WorldSpec::default() }).unwrap();
    let s = TrainSettings::new(5);
    let out = train(&w, &s).unwrap();
    let (r, _) = evaluate(&out.final_params, &w, &s.env, SampleMode::Greedy, &s.eval).unwrap();
    let (a, _) = ablation_replace_query(&out.final_params, &w, &s.env, SampleMode::Greedy, &s.eval).unwrap();
    assert!(r.hit.is_some());
    assert_eq!(r.hit, a.hit);
}
