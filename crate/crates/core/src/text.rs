//! Token normalization shared by the metrics, the index and the featurizer.

/// English articles dropped during normalization.
pub const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Words removed by the keyword rewrite and ignored when measuring question overlap.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "who", "whom", "whose", "what", "when", "where", "which", "why", "how",
    "was", "were", "is", "are", "be", "been", "did", "does", "do", "of", "in", "on", "at", "to",
    "for", "by", "with", "from", "and", "or", "as", "it", "its", "that", "this",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Lowercases, deletes punctuation, drops articles and splits on whitespace.
pub fn normalize_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .map(str::to_owned)
        .collect()
}

/// Normalized tokens with stopwords removed.
pub fn content_tokens(s: &str) -> Vec<String> {
    normalize_tokens(s)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

/// The interrogative word that opens a question, if any.
pub fn wh_word(tokens: &[String]) -> Option<&'static str> {
    const WH: [&str; 7] = ["who", "when", "where", "what", "which", "how", "why"];
    tokens
        .iter()
        .find_map(|t| WH.iter().find(|w| **w == t.as_str()).copied())
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Seeded 64-bit FNV-1a. Stable across platforms and releases, which `DefaultHasher` is not.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stage seed from a master seed and a label: `mix64(master ^ fnv1a64(0, label))`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    mix64(master ^ fnv1a64(0, label.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_punctuation_and_articles() {
        assert_eq!(normalize_tokens("The Cat, sat."), vec!["cat", "sat"]);
        assert!(normalize_tokens("").is_empty());
        assert_eq!(normalize_tokens("2004"), vec!["2004"]);
        assert_eq!(normalize_tokens("Who was the producer of 9?"), vec!["who", "was", "producer", "of", "9"]);
    }

    #[test]
    fn normalization_is_idempotent_on_joined_output() {
        for s in ["The  Quick, brown fox!", "an apple a day", "  ", "A-B c.d"] {
            let once = normalize_tokens(s);
            assert_eq!(normalize_tokens(&once.join(" ")), once);
        }
    }

    #[test]
    fn contiguous_runs() {
        let h = normalize_tokens("a b c");
        assert!(contains_run(&h, &normalize_tokens("b c")));
        assert!(!contains_run(&h, &normalize_tokens("c b")));
        assert!(!contains_run(&h, &[]));
    }

    #[test]
    fn wh_detection() {
        assert_eq!(wh_word(&normalize_tokens("When was X built?")), Some("when"));
        assert_eq!(wh_word(&normalize_tokens("Name the city")), None);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(7, "worldgen"), derive_seed(7, "warmup"));
        assert_eq!(derive_seed(7, "worldgen"), derive_seed(7, "worldgen"));
    }
}
