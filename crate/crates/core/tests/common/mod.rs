//! Shared generators and oracles for the integration suites.

use duotrace::trace::{HybridTrace, ReasoningMode, ReasoningUnit};
use rand::Rng;

/// Words that never collide with the default reflection keywords.
pub const SAFE_WORDS: &[&str] = &[
    "sum", "x", "carry", "12", "area", "check", "base", "step", "verify", "value", "so", "then",
];

pub const KEYWORDS: &[&str] = &["Wait", "However", "Alternatively"];

/// A random structurally valid trace whose hard units each contain a
/// reflection keyword and whose easy units contain none.
pub fn random_valid_trace(rng: &mut impl Rng) -> HybridTrace {
    let unit_count = rng.gen_range(1..=5);
    let units = (0..unit_count)
        .map(|index| {
            let hard = rng.gen_bool(0.5);
            let word_count = rng.gen_range(1..=6);
            let mut words: Vec<&str> = (0..word_count)
                .map(|_| SAFE_WORDS[rng.gen_range(0..SAFE_WORDS.len())])
                .collect();
            if hard {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, KEYWORDS[rng.gen_range(0..KEYWORDS.len())]);
            }
            ReasoningUnit {
                mode: if hard {
                    ReasoningMode::Hard
                } else {
                    ReasoningMode::Easy
                },
                text: words.join(" "),
                index,
            }
        })
        .collect();
    HybridTrace {
        units,
        answer: rng.gen_range(0..1000).to_string(),
        raw_length_tokens: None,
    }
}

/// Concatenation pieces for parser fuzzing: tag literals, tag fragments,
/// plain words, and multibyte text.
pub const FUZZ_PIECES: &[&str] = &[
    "<think>", "</think>", "<easy>", "</easy>", "<hard>", "</hard>", "a", " ", "\n", "x y", "<",
    ">", "</", "think", "easy>", "42", "<e", "asy>", "Wait", "µ∞", "</th", "ink>",
];

pub fn random_fuzz_string(rng: &mut impl Rng) -> String {
    let piece_count = rng.gen_range(0..=12);
    (0..piece_count)
        .map(|_| FUZZ_PIECES[rng.gen_range(0..FUZZ_PIECES.len())])
        .collect()
}

/// Independent re-check of unit/keyword consistency: walks characters and
/// collects alphanumeric runs, never using the library's split helpers.
pub fn brute_force_consistent(trace: &HybridTrace, keywords: &[&str]) -> bool {
    trace.units.iter().all(|unit| {
        let mut found = false;
        let mut word = String::new();
        for c in unit.text.chars().chain(std::iter::once(' ')) {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if keywords.contains(&word.as_str()) {
                    found = true;
                }
                word.clear();
            }
        }
        match unit.mode {
            ReasoningMode::Easy => !found,
            ReasoningMode::Hard => found,
        }
    })
}

/// Path of a data file bundled at the repository root.
pub fn asset_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join("assets")
        .join(name)
}
