//! Generate a synthetic world, inspect it, and write it as a bundle.

use raglab::worldgen::{gen_world, load_bundle, save_bundle, WorldSpec};

fn main() -> raglab::Result<()> {
    let spec = WorldSpec { n_questions: 30, p_ambiguous: 0.5, seed: 4, ..WorldSpec::default() };
    let world = gen_world(&spec)?;
    println!("{} questions, {} documents", world.questions.len(), world.corpus().len());
    for (c, n) in world.category_counts() {
        println!("  {}: {n}", c.name());
    }
    for q in world.questions.iter().take(3) {
        let info = &world.info[&q.id];
        println!(
            "{} {:?} gold={:?} memory={:?} covered={} ambiguous={} best template={}",
            q.id,
            q.text,
            q.gold_answers[0],
            world.memory.get(&q.id),
            info.covered,
            info.ambiguous,
            world.oracle_map[&q.id].name()
        );
    }
    let dir = std::env::temp_dir().join("raglab-example-world");
    let manifest = save_bundle(&world, &dir)?;
    let back = load_bundle(&dir)?;
    println!("bundle at {} with files {:?}; reloaded {} questions", dir.display(), manifest.files, back.questions.len());
    Ok(())
}
