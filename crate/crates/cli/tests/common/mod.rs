//! Synthetic corpora for end-to-end tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sstsearch_core::corpus::CodeQueryPair;

const WORDS: &[&str] = &[
    "alpha", "bravo", "cedar", "delta", "ember", "flint", "gamma", "hotel", "india", "juror",
    "kilo", "lima", "metro", "nova", "oscar", "polar", "quest", "radar", "sigma", "tango",
    "umber", "vista", "watt", "xenon", "yield", "zulu", "amber", "birch", "coral", "dune",
    "eagle", "fjord", "grove", "heron", "islet", "jade", "krill", "lotus", "mango", "nectar",
    "onyx", "pearl", "quartz", "reef", "stone", "tulip", "umbra", "violet", "willow", "yarrow",
    "azure", "basil", "clove", "dusk", "ocean", "petal", "raven", "sage", "tidal", "wheat",
];

/// Pairs whose query is a shuffled bag of the snippet's identifiers. Words
/// are drawn from a shared pool so each appears in several pairs and
/// clears the vocabulary threshold; the combination is what identifies a
/// pair.
pub fn shuffled_identifier_corpus(n: usize, seed: u64) -> Vec<CodeQueryPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let count = rng.random_range(4..=6);
            let mut picked: Vec<&str> = Vec::with_capacity(count);
            while picked.len() < count {
                let w = WORDS[rng.random_range(0..WORDS.len())];
                if !picked.contains(&w) {
                    picked.push(w);
                }
            }
            let code = format!(
                "def fn{i}({}): {{ {} = {}({}) return {} }}",
                picked.join(", "),
                picked[1],
                picked[2],
                picked[0],
                picked[1],
            );
            let mut bag = picked.clone();
            bag.shuffle(&mut rng);
            CodeQueryPair {
                id: format!("p{i}"),
                lang: "minilang".into(),
                code,
                query: bag.join(" "),
                ast: None,
                split: None,
            }
        })
        .collect()
}

/// Pairs whose queries name only structural concepts, which exist as SST
/// labels but never as code tokens.
///
/// Four statement forms (assignment, call, attribute access, binary
/// operation) produce identical code-token multisets over the same two
/// identifiers, so only the tree can separate them; loops randomize
/// between `for` and `while`, and queries use the SST tags `loop`,
/// `conditional`, `assignment`, `call`, `attribute`, and `operation`.
pub fn structural_corpus(n: usize, seed: u64) -> Vec<CodeQueryPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idents: Vec<&str> = WORDS.iter().take(40).copied().collect();
    (0..n)
        .map(|i| {
            let a = idents[rng.random_range(0..idents.len())];
            let b = loop {
                let w = idents[rng.random_range(0..idents.len())];
                if w != a {
                    break w;
                }
            };
            let loops = rng.random_range(0..=2);
            let conditionals = rng.random_range(0..=1);
            let assigns = rng.random_range(0..=2);
            let calls = rng.random_range(0..=2);
            let attrs = rng.random_range(0..=2);
            let binops = rng.random_range(0..=2);

            let mut statements: Vec<String> = Vec::new();
            let mut query_words: Vec<String> = Vec::new();
            for _ in 0..loops {
                let keyword = if rng.random_bool(0.5) {
                    format!("for {a} in {b}: {{ {a} }}")
                } else {
                    format!("while {a}: {{ {b} }}")
                };
                statements.push(keyword);
                query_words.push("loop".into());
            }
            for _ in 0..conditionals {
                statements.push(format!("if {a}: {{ {b} }}"));
                query_words.push("conditional".into());
            }
            for _ in 0..assigns {
                statements.push(format!("{a} = {b}"));
                query_words.push("assignment".into());
            }
            for _ in 0..calls {
                statements.push(format!("{a}({b})"));
                query_words.push("call".into());
            }
            for _ in 0..attrs {
                statements.push(format!("{a}.{b}"));
                query_words.push("attribute".into());
            }
            for _ in 0..binops {
                statements.push(format!("{a} + {b}"));
                query_words.push("operation".into());
            }
            if statements.is_empty() {
                statements.push(format!("{a} = {b}"));
                query_words.push("assignment".into());
            }
            statements.shuffle(&mut rng);
            query_words.shuffle(&mut rng);

            CodeQueryPair {
                id: format!("s{i}"),
                lang: "minilang".into(),
                code: format!("def fn{i}({a}, {b}): {{ {} }}", statements.join(" ")),
                query: query_words.join(" "),
                ast: None,
                split: None,
            }
        })
        .collect()
}
