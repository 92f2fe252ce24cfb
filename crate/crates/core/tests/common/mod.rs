//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raglab::env::{allowed_action_kinds, apply_action, new_state, Action, ActionKind, EnvConfig, StepOutcome};
use raglab::policy::heads::{Choice, Encoded};
use raglab::policy::{apply_template, encode, PolicyConfig, PolicyParams, RewriteTemplate};
use raglab::worldgen::{gen_world, World, WorldSpec};

pub fn small_world(n: usize, seed: u64) -> World {
    gen_world(&WorldSpec { n_questions: n, vocab_size: 8, p_ambiguous: 0.0, seed, ..WorldSpec::default() }).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, dim: usize, hidden: usize) -> PolicyParams {
    let mut p = PolicyParams::init(PolicyConfig { dim, hidden, ..PolicyConfig::default() });
    for v in &mut p.values {
        *v = rng.gen_range(-0.5..0.5);
    }
    p
}

/// Encoded initial states and one-retrieval states of every question.
pub fn encoded_states(world: &World, dim: usize, seed: u64) -> Vec<Encoded> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = PolicyConfig { dim, ..PolicyConfig::default() };
    let env = EnvConfig::default();
    let mut out = Vec::new();
    for q in &world.questions {
        let s0 = new_state(Arc::clone(q));
        out.push(encode(&s0, &world.memory, &cfg, allowed_action_kinds(&s0, &env).unwrap()));
        let t = RewriteTemplate::ALL[rng.gen_range(0..RewriteTemplate::ALL.len())];
        if let StepOutcome::Continue { next, .. } =
            apply_action(&s0, &Action::query(apply_template(t, &q.text)), &*world.index, &env).unwrap()
        {
            out.push(encode(&next, &world.memory, &cfg, allowed_action_kinds(&next, &env).unwrap()));
        }
    }
    out
}

pub fn random_choice(enc: &Encoded, rng: &mut ChaCha8Rng) -> Choice {
    let kinds: Vec<ActionKind> =
        [ActionKind::Answer, ActionKind::Query].into_iter().filter(|k| enc.allowed.contains(*k)).collect();
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let sub = match kind {
        ActionKind::Query => rng.gen_range(0..RewriteTemplate::ALL.len()),
        ActionKind::Answer => rng.gen_range(0..enc.candidates.len()),
    };
    Choice { kind, sub }
}

pub fn numeric_grad(params: &PolicyParams, step: f64, f: impl Fn(&PolicyParams) -> f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x = p.values[i];
            p.values[i] = x + step;
            let up = f(&p);
            p.values[i] = x - step;
            let down = f(&p);
            p.values[i] = x;
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-8)
}
