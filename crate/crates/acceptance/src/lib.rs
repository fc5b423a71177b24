//! Inputs for the acceptance suite: the corpus, seeded random loop nests and
//! random formula trees.

use std::path::PathBuf;

use loopdmd_core::FormulaExpr;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus")
}

/// `(name, source)` of every corpus program, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "dsl")
                .then(|| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        })
        .collect();
    out.sort();
    out
}

const ITERS: [&str; 4] = ["i", "j", "k", "l"];

/// A random affine nest of depth at most 4 over `params N, M` with guards,
/// steps, triangular bounds and offset subscripts.
pub fn random_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::new();
    let blocks = rng.random_range(1..=2);
    for _ in 0..blocks {
        body.push_str(&nest(&mut rng, 0));
        body.push('\n');
    }
    format!("params N, M;\narray A[N + 4, M + 4];\narray B[N + 4];\n{body}")
}

fn subscript(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.2) {
        return rng.random_range(0..3).to_string();
    }
    let v = ITERS[rng.random_range(0..depth)];
    match rng.random_range(-1..=1) {
        0 => v.to_string(),
        1 => format!("{v} + 1"),
        _ => format!("{v} + 1 - 2"),
    }
}

fn access(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let kind = ["read", "write", "update"].choose(rng).unwrap();
    if rng.random_bool(0.6) {
        format!("{kind} A[{}, {}];", subscript(rng, depth), subscript(rng, depth))
    } else {
        format!("{kind} B[{}];", subscript(rng, depth))
    }
}

fn nest(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == ITERS.len() || (depth > 0 && rng.random_bool(0.3)) {
        let n = rng.random_range(1..=3);
        return (0..n).map(|_| access(rng, depth)).collect::<Vec<_>>().join(" ");
    }
    let it = ITERS[depth];
    let (lower, upper) = match depth {
        0 => ("0".to_string(), ["N", "M"].choose(rng).unwrap().to_string()),
        _ => {
            let p = ITERS[depth - 1];
            let lower = if rng.random_bool(0.3) { p.to_string() } else { "0".to_string() };
            let upper = match rng.random_range(0..3) {
                0 => "N".to_string(),
                1 => "M".to_string(),
                _ => format!("{p} + 2"),
            };
            (lower, upper)
        }
    };
    let step = if rng.random_bool(0.25) { " step 2" } else { "" };
    let mut inner = nest(rng, depth + 1);
    if rng.random_bool(0.3) {
        inner.push(' ');
        inner.push_str(&access(rng, depth + 1));
    }
    if rng.random_bool(0.25) {
        let other = access(rng, depth + 1);
        inner = format!("if {it} <= 1 {{ {inner} }} else {{ {other} }}");
    }
    format!("for {it} in {lower} .. {upper}{step} {{ {inner} }}")
}

/// A random expression tree over `N`, `M`, `K`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: u32) -> FormulaExpr {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..3) {
            0 => FormulaExpr::int(rng.random_range(-6..=6)),
            1 => FormulaExpr::Rational { numerator: rng.random_range(-5..=5), denominator: rng.random_range(1..=4) },
            _ => FormulaExpr::symbol(*["N", "M", "K"].choose(rng).unwrap()),
        };
    }
    match rng.random_range(0..5) {
        0 => FormulaExpr::Add((0..rng.random_range(1..=3)).map(|_| random_formula(rng, depth - 1)).collect()),
        1 => FormulaExpr::Mul((0..rng.random_range(1..=3)).map(|_| random_formula(rng, depth - 1)).collect()),
        2 => FormulaExpr::div(random_formula(rng, depth - 1), FormulaExpr::int(rng.random_range(1..=3))),
        3 => FormulaExpr::pow(random_formula(rng, depth - 1), rng.random_range(1..=2)),
        _ => FormulaExpr::sqrt(random_formula(rng, depth - 1)),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
