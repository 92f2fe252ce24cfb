//! Per-category retrieval ratios of a trained policy on a held-out world.

use raglab::config::default_transfer_spec;
use raglab::eval::transfer_report;
use raglab::training::{train, TrainSettings};
use raglab::worldgen::{gen_world, Category, WorldSpec};

fn main() -> raglab::Result<()> {
    let world = gen_world(&WorldSpec { n_questions: 150, seed: 8, ..WorldSpec::default() })?;
    let held_out = gen_world(&WorldSpec { n_questions: 150, seed: 808, ..default_transfer_spec() })?;
    let mut s = TrainSettings::new(8);
    s.iters = 8;
    let out = train(&world, &s)?;
    for (label, params) in [("warm-up", &out.warmup), ("trained", &out.final_params)] {
        let rep = transfer_report(params, &held_out, &s.env, &s.eval)?;
        println!("{label}");
        for c in Category::ALL {
            let ratio = rep.ratio(c).map_or("absent".to_owned(), |r| format!("{r:.1}%"));
            println!("  {:>18} n={:<4} retrieval {ratio}", c.name(), rep.counts[&c]);
        }
    }
    Ok(())
}
