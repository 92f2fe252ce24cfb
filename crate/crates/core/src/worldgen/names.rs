//! Pronounceable pseudo-words for entities and answers.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "th", "qu"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ae"];
const CODAS: [&str; 6] = ["", "", "n", "r", "l", "k"];

/// Hands out capitalized pseudo-words, never the same one twice.
pub struct WordSource {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl WordSource {
    /// `reserved` words (lowercase) are never produced.
    pub fn new<'a>(seed: u64, reserved: impl IntoIterator<Item = &'a str>) -> Self {
        WordSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: reserved.into_iter().map(str::to_owned).collect(),
        }
    }

    fn syllable(&mut self) -> String {
        let o = ONSETS[self.rng.gen_range(0..ONSETS.len())];
        let v = VOWELS[self.rng.gen_range(0..VOWELS.len())];
        let c = CODAS[self.rng.gen_range(0..CODAS.len())];
        format!("{o}{v}{c}")
    }

    pub fn fresh(&mut self, syllables: usize) -> String {
        loop {
            let w: String = (0..syllables).map(|_| self.syllable()).collect();
            if self.used.insert(w.clone()) {
                let mut chars = w.chars();
                let first = chars.next().expect("non-empty word").to_ascii_uppercase();
                return std::iter::once(first).chain(chars).collect();
            }
        }
    }

    pub fn pool(&mut self, n: usize, syllables: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh(syllables)).collect()
    }
}
