#![allow(dead_code)]

use std::path::PathBuf;

use loopdmd_core::compile;
use loopdmd_core::polyhedral::ParamBinding;
use loopdmd_core::ValidatedProgram;
use proptest::prelude::*;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// `(file stem, source)` of every corpus program, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "dsl"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn load(name: &str) -> ValidatedProgram {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{name}.dsl"))).unwrap();
    compile(&src).unwrap()
}

/// Small bindings whose trip counts stay at or below 8.
pub fn small_bindings(p: &ValidatedProgram) -> Vec<ParamBinding> {
    [3, 4, 6]
        .iter()
        .enumerate()
        .map(|(k, &v)| ParamBinding((0..p.params.len()).map(|i| v + ((i + k) % 2) as i64).collect()))
        .collect()
}

fn subscript(iters: &[&'static str]) -> impl Strategy<Value = String> {
    let its = iters.to_vec();
    let n = its.len();
    prop_oneof![
        (0i64..3).prop_map(|c| c.to_string()),
        (0..n.max(1), -1i64..=1).prop_map(move |(k, c)| match (its.get(k), c) {
            (None, _) => "1".to_string(),
            (Some(v), 0) => v.to_string(),
            (Some(v), c) if c > 0 => format!("{v} + {c}"),
            (Some(v), c) => format!("{v} + 1 - {}", 1 - c),
        }),
    ]
}

fn access(iters: &[&'static str]) -> impl Strategy<Value = String> {
    let kind = prop_oneof![Just("read"), Just("write"), Just("update")];
    prop_oneof![
        (kind.clone(), subscript(iters), subscript(iters)).prop_map(|(k, a, b)| format!("{k} A[{a}, {b}];")),
        (kind, subscript(iters)).prop_map(|(k, a)| format!("{k} B[{a}];")),
    ]
}

const ITERS: [&str; 4] = ["i", "j", "k", "l"];

fn block(depth: usize) -> BoxedStrategy<String> {
    let iters: Vec<&'static str> = ITERS[..depth].to_vec();
    let leaf = prop::collection::vec(access(&iters), 1..3).prop_map(|v| v.join(" ")).boxed();
    if depth == ITERS.len() {
        return leaf;
    }
    let it = ITERS[depth];
    let prev = if depth == 0 { None } else { Some(ITERS[depth - 1]) };
    let lower = match prev {
        Some(p) => prop_oneof![Just("0".to_string()), Just(p.to_string())].boxed(),
        None => Just("0".to_string()).boxed(),
    };
    let upper = match prev {
        Some(p) => prop_oneof![Just("N".to_string()), Just("M".to_string()), Just(format!("{p} + 2"))].boxed(),
        None => prop_oneof![Just("N".to_string()), Just("M".to_string())].boxed(),
    };
    let nested = (lower, upper, prop_oneof![3 => Just(1i64), 1 => Just(2i64)], block(depth + 1), any::<bool>())
        .prop_map(move |(lo, hi, step, body, guarded)| {
            let body = if guarded { format!("if {it} <= 1 {{ {body} }} else {{ {body} }}") } else { body };
            let step = if step == 1 { String::new() } else { format!(" step {step}") };
            format!("for {it} in {lo} .. {hi}{step} {{ {body} }}")
        });
    prop::collection::vec(prop_oneof![2 => nested, 1 => leaf], 1..3).prop_map(|v| v.join("\n")).boxed()
}

/// Random valid nests up to depth 4 over `A[N + 4, M + 4]` and `B[N + 4]`.
pub fn program() -> impl Strategy<Value = String> {
    block(0).prop_map(|body| format!("params N, M;\narray A[N + 4, M + 4];\narray B[N + 4];\n{body}\n"))
}
