mod common;

use loopdmd_core::ast::Stmt;
use loopdmd_core::lexer::{tokenize, TokenKind};
use loopdmd_core::parser::parse;
use loopdmd_core::{compile, Category};
use proptest::prelude::*;

fn kinds(src: &str) -> Vec<String> {
    tokenize(src)
        .unwrap()
        .iter()
        .map(|t| match t.kind {
            TokenKind::Keyword(_) => format!("kw:{}", t.text),
            TokenKind::Ident => format!("id:{}", t.text),
            TokenKind::Int(v) => format!("int:{v}"),
            TokenKind::Op(_) => format!("op:{}", t.text),
            TokenKind::Delim(_) => format!("delim:{}", t.text),
        })
        .collect()
}

#[test]
fn loop_header_tokens() {
    assert_eq!(kinds("for i in 0 .. N"), ["kw:for", "id:i", "kw:in", "int:0", "op:..", "id:N"]);
}

#[test]
fn access_tokens() {
    assert_eq!(kinds("read A[i];"), ["kw:read", "id:A", "delim:[", "id:i", "delim:]", "delim:;"]);
}

#[test]
fn stray_character_is_lexical_error() {
    let d = tokenize("@").unwrap_err();
    assert_eq!(d.category, Category::Lexical);
    assert_eq!(d.start, Some(0));
}

#[test]
fn comments_are_dropped() {
    let toks = tokenize("// header\nread A[0]; // trailing").unwrap();
    assert!(matches!(toks[0].kind, TokenKind::Keyword(_)));
    assert_eq!(toks.len(), 6);
}

#[test]
fn matmul_parses() {
    let src = std::fs::read_to_string(common::corpus_dir().join("matmul.dsl")).unwrap();
    let p = parse(&tokenize(&src).unwrap()).unwrap();
    let params: Vec<_> = p.params.iter().map(|i| i.name.as_str()).collect();
    assert_eq!(params, ["M", "N", "K"]);
    let arrays: Vec<_> = p.arrays.iter().map(|a| (a.name.name.as_str(), a.extents.len())).collect();
    assert_eq!(arrays, [("A", 2), ("B", 2), ("C", 2)]);
    let Stmt::For(i) = &p.body[0] else { panic!("expected loop") };
    let Stmt::For(j) = &i.body[0] else { panic!("expected loop") };
    let Stmt::For(k) = &j.body[0] else { panic!("expected loop") };
    assert_eq!(k.body.len(), 4);
    assert!(compile(&src).is_ok());
}

#[test]
fn step_clause() {
    let p = parse(&tokenize("for i in 0 .. N step 2 { read A[i]; }").unwrap()).unwrap();
    let Stmt::For(l) = &p.body[0] else { panic!("expected loop") };
    assert_eq!(l.step, 2);
}

#[test]
fn missing_block_expects_brace() {
    let d = parse(&tokenize("for i in 0 .. N").unwrap()).unwrap_err();
    assert_eq!(d.category, Category::Syntax);
    assert!(d.message.contains('{'), "{}", d.message);
}

#[test]
fn product_of_iterators_rejected() {
    let errs = compile("params N; array A[N]; for i in 0 .. N { for j in 0 .. N { read A[i*j]; } }").unwrap_err();
    assert!(errs.iter().any(|d| d.message == "non-affine: product of two variables"), "{errs:?}");
}

#[test]
fn rank_mismatch_message() {
    let errs = compile("params N; array A[N, N]; for i in 0 .. N { read A[i]; }").unwrap_err();
    assert!(errs.iter().any(|d| d.message == "rank mismatch: expected 2 subscripts, found 1"), "{errs:?}");
}

#[test]
fn shadowed_iterator_rejected() {
    let errs = compile("params N, M; array A[N]; for i in 0 .. N { for i in 0 .. M { read A[i]; } }").unwrap_err();
    assert!(errs.iter().any(|d| d.message.starts_with("loop variable shadowing")), "{errs:?}");
}

#[test]
fn all_violations_reported() {
    let errs = compile("params N, N; array A[N]; for i in 0 .. N { read A[i*i]; read Z[0]; read A[q]; }").unwrap_err();
    assert!(errs.len() >= 4, "{errs:?}");
}

#[test]
fn empty_program_is_valid() {
    let p = compile("").unwrap();
    assert!(p.accesses.is_empty());
    assert!(compile("params N; for i in 0 .. N { }").is_ok());
}

#[test]
fn corpus_round_trips() {
    for (name, src) in common::corpus() {
        let p = parse(&tokenize(&src).unwrap()).unwrap();
        let printed = p.to_string();
        let again = parse(&tokenize(&printed).unwrap()).unwrap_or_else(|d| panic!("{name}: {d}\n{printed}"));
        assert_eq!(p.without_spans(), again.without_spans(), "{name}");
        compile(&src).unwrap_or_else(|d| panic!("{name}: {d:?}"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spans_stay_in_source(src in "[ -~\n]{0,80}") {
        if let Err(diags) = compile(&src) {
            prop_assert!(!diags.is_empty());
            for d in diags {
                if let (Some(s), Some(e)) = (d.start, d.end) {
                    prop_assert!(s <= e && e <= src.len(), "{d:?}");
                }
            }
        }
    }

    #[test]
    fn spans_stay_in_source_near_valid(src in common::program(), cut in 0usize..200, junk in "[*/@a-z0-9 ]{0,4}") {
        let cut = cut.min(src.len());
        let broken = format!("{}{junk}{}", &src[..cut], &src[cut..]);
        if let Err(diags) = compile(&broken) {
            for d in diags {
                if let (Some(s), Some(e)) = (d.start, d.end) {
                    prop_assert!(s <= e && e <= broken.len(), "{d:?}");
                }
            }
        }
    }

    #[test]
    fn generated_programs_round_trip(src in common::program()) {
        let p = parse(&tokenize(&src).unwrap()).unwrap();
        let again = parse(&tokenize(&p.to_string()).unwrap()).unwrap();
        prop_assert_eq!(p.without_spans(), again.without_spans());
        prop_assert!(compile(&src).is_ok(), "{}", src);
    }
}
