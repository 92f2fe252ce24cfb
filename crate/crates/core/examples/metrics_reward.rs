//! Answer metrics, step rewards and discounted returns.

use raglab::env::{Action, EnvConfig};
use raglab::metrics::{discounted_return, exact_match, hit, step_reward, token_f1};

fn main() -> raglab::Result<()> {
    let golds = vec!["cat sat down".to_owned()];
    let reward = EnvConfig::default().reward();
    for prediction in ["Cat sat down.", "the cat sat", "dog"] {
        println!(
            "{prediction:>14}: em={} f1={:.3} reward={:.3}",
            exact_match(prediction, &golds)?,
            token_f1(prediction, &golds)?,
            step_reward(&Action::answer(prediction), &golds, &reward)?
        );
    }
    println!("query reward: {}", step_reward(&Action::query("where did the cat sit"), &golds, &reward)?);
    println!("hit: {}", hit("the cat sat down on the mat", &golds));
    for rewards in [vec![2.0], vec![0.0], vec![-0.2, 2.0]] {
        println!("return of {rewards:?} at gamma 0.99: {:.4}", discounted_return(&rewards, 0.99));
    }
    Ok(())
}
