//! Analytic gradients against central differences, and PPO surrogate properties.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{encoded_states, numeric_grad, random_choice, random_params, rel_error, small_world};
use raglab::env::{ActionKind, EnvConfig};
use raglab::policy::heads::{Distributions, Encoded};
use raglab::policy::{forward, PolicyConfig, PolicyParams};
use raglab::retriever::CachedRetriever;
use raglab::training::{
    bc_loss_and_grad, collect_rollouts, compute_gae, ppo_loss_and_grad, ppo_update, Adam, BatchStep, EncodedExample,
    PpoConfig, RolloutSource,
};

const FD_STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn log_prob(params: &PolicyParams, s: &BatchStep) -> f64 {
    let fwd = forward(params, &s.enc);
    Distributions::new(&fwd, s.enc.allowed).log_prob(s.enc.allowed, s.choice)
}

fn step(params: &PolicyParams, enc: &Encoded, rng: &mut ChaCha8Rng, log_ratio: f64, advantage: f64) -> BatchStep {
    let choice = random_choice(enc, rng);
    let mut s = BatchStep {
        enc: enc.clone(),
        choice,
        state_digest: 0,
        old_log_prob: 0.0,
        value: 0.0,
        reward: 0.0,
        advantage,
        ret: rng.gen_range(-1.0..2.0),
        terminal: true,
    };
    s.old_log_prob = log_prob(params, &s) - log_ratio;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bc_gradient_matches_finite_differences(seed in any::<u64>(), dim in 12usize..=32, hidden in 0usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = small_world(6, seed);
        let states = encoded_states(&world, dim, seed);
        let params = random_params(&mut rng, dim, hidden);
        let examples: Vec<EncodedExample> = (0..4)
            .map(|_| {
                let enc = &states[rng.gen_range(0..states.len())];
                let c = random_choice(enc, &mut rng);
                let keep = c.kind == ActionKind::Query || rng.gen_bool(0.8);
                EncodedExample { enc: enc.clone(), target_kind: c.kind, target_sub: keep.then_some(c.sub) }
            })
            .collect();
        let refs: Vec<&EncodedExample> = examples.iter().collect();
        let (_, g) = bc_loss_and_grad(&params, &refs);
        let fd = numeric_grad(&params, FD_STEP, |p| bc_loss_and_grad(p, &refs).0);
        prop_assert!(rel_error(&g, &fd) < TOL, "relative error {}", rel_error(&g, &fd));
    }

    #[test]
    fn ppo_gradient_matches_finite_differences(seed in any::<u64>(), dim in 12usize..=32, hidden in 0usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = small_world(6, seed);
        let states = encoded_states(&world, dim, seed);
        let params = random_params(&mut rng, dim, hidden);
        let cfg = PpoConfig { entropy_coef: 0.05, ..PpoConfig::default() };
        let steps: Vec<BatchStep> = (0..4)
            .map(|_| {
                let enc = &states[rng.gen_range(0..states.len())];
                // Ratios stay well inside or well outside the clip band so the loss is smooth at the point.
                let log_ratio = if rng.gen_bool(0.5) { rng.gen_range(-0.1..0.1) } else { rng.gen_range(0.4..0.8) };
                let adv = rng.gen_range(-2.0..2.0);
                step(&params, enc, &mut rng, log_ratio, adv)
            })
            .collect();
        let refs: Vec<&BatchStep> = steps.iter().collect();
        let (_, _, g) = ppo_loss_and_grad(&params, &refs, &cfg);
        let fd = numeric_grad(&params, FD_STEP, |p| ppo_loss_and_grad(p, &refs, &cfg).0);
        prop_assert!(rel_error(&g, &fd) < TOL, "relative error {}", rel_error(&g, &fd));
    }

    #[test]
    fn clipped_objective_never_exceeds_unclipped(seed in any::<u64>(), log_ratio in -1.0f64..1.0, adv in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = small_world(4, seed);
        let states = encoded_states(&world, 16, seed);
        let params = random_params(&mut rng, 16, 0);
        let s = step(&params, &states[0], &mut rng, log_ratio, adv);
        let cfg = PpoConfig::default();
        let (_, st, _) = ppo_loss_and_grad(&params, &[&s], &cfg);
        let unclipped = log_ratio.exp() * adv;
        prop_assert!(-st.policy_loss <= unclipped + 1e-12);
        let bound = (1.0 + cfg.clip_eps) * adv.abs();
        prop_assert!(st.policy_loss.abs() <= bound.max(unclipped.abs()) + 1e-12);
    }
}

fn only_policy_term() -> PpoConfig {
    PpoConfig { value_coef: 0.0, entropy_coef: 0.0, ..PpoConfig::default() }
}

#[test]
fn ratio_one_gives_minus_mean_advantage() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let world = small_world(6, 5);
    let states = encoded_states(&world, 24, 5);
    let params = random_params(&mut rng, 24, 2);
    let steps: Vec<BatchStep> =
        states.iter().take(6).map(|e| {
            let adv = rng.gen_range(-2.0..2.0);
            step(&params, e, &mut rng, 0.0, adv)
        }).collect();
    let refs: Vec<&BatchStep> = steps.iter().collect();
    let (_, st, _) = ppo_loss_and_grad(&params, &refs, &only_policy_term());
    let mean_adv = steps.iter().map(|s| s.advantage).sum::<f64>() / steps.len() as f64;
    assert!((st.policy_loss + mean_adv).abs() < 1e-12);
    assert!(st.approx_kl.abs() < 1e-12);
}

#[test]
fn saturated_clip_has_zero_policy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let world = small_world(6, 6);
    let states = encoded_states(&world, 24, 6);
    let params = random_params(&mut rng, 24, 3);
    let cfg = only_policy_term();
    let up = step(&params, &states[0], &mut rng, 0.5, 1.0);
    let down = step(&params, &states[1], &mut rng, -0.5, -1.0);
    let (_, _, g) = ppo_loss_and_grad(&params, &[&up, &down], &cfg);
    assert!(g.iter().all(|x| *x == 0.0));
    let inside = step(&params, &states[2], &mut rng, 0.0, 1.0);
    let (_, _, g) = ppo_loss_and_grad(&params, &[&inside], &cfg);
    assert!(g.iter().any(|x| *x != 0.0));
}

#[test]
fn descent_raises_probability_of_advantaged_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let world = small_world(6, 7);
    let states = encoded_states(&world, 24, 7);
    let params = random_params(&mut rng, 24, 0);
    let cfg = only_policy_term();
    for (i, enc) in states.iter().take(8).enumerate() {
        let adv = if i % 2 == 0 { 1.0 } else { -1.0 };
        let s = step(&params, enc, &mut rng, 0.0, adv);
        let (_, _, g) = ppo_loss_and_grad(&params, &[&s], &cfg);
        let mut next = params.clone();
        for (v, d) in next.values.iter_mut().zip(&g) {
            *v -= 1e-3 * d;
        }
        let change = log_prob(&next, &s) - log_prob(&params, &s);
        assert!(change * adv > 0.0, "step {i}: log-prob change {change} with advantage {adv}");
    }
}

#[test]
fn zero_learning_rate_update_is_bit_identical() {
    let world = small_world(12, 8);
    let env = EnvConfig::default();
    let params = PolicyParams::init(PolicyConfig::default());
    let retriever = CachedRetriever::new(&*world.index);
    let src = RolloutSource { questions: &world.questions, retriever: &retriever, memory: &world.memory, env: &env };
    let cfg = PpoConfig { lr: 0.0, sampling_budget: 64, ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut batch = collect_rollouts(&params, &src, cfg.sampling_budget, cfg.rollout_shards, &mut rng).unwrap();
    compute_gae(&mut batch, env.gamma, cfg.gae_lambda);
    let mut opt = Adam::new(params.len(), cfg.lr);
    let (next, stats) = ppo_update(&params, &batch, &cfg, &mut opt, &mut rng).unwrap();
    assert_eq!(
        next.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        params.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    for v in [stats.iteration_reward, stats.kl, stats.policy_loss, stats.value_loss, stats.entropy] {
        assert!(v.is_finite());
    }
    assert!(stats.kl.abs() < 1e-12);
}
