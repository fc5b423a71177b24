use std::path::PathBuf;

use loopdmd_cli::{run, REPORT_SCHEMA};
use loopdmd_core::report::Report;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(format!("{name}.dsl")).display().to_string()
}

fn call(args: &[&str], stdin: &str) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("loopdmd").chain(args.iter().copied());
    let code = run(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn validator() -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(REPORT_SCHEMA).unwrap()).unwrap()
}

#[test]
fn matmul_text_report() {
    let (code, out, _) = call(&["--input", &corpus("matmul")], "");
    assert_eq!(code, 0);
    assert!(out.contains("DMD   = "), "{out}");
    assert!(out.contains("accesses  4 * K * M * N"), "{out}");
}

#[test]
fn matmul_json_report() {
    let (code, out, _) = call(&["--input", &corpus("matmul"), "--json"], "");
    assert_eq!(code, 0);
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(validator().is_valid(&value));
    let report: Report = serde_json::from_value(value.clone()).unwrap();
    assert_eq!(report.counts.n_total.plain, "4 * K * M * N");
    assert_eq!(serde_json::to_value(&report).unwrap(), value);
}

#[test]
fn missing_file() {
    let (code, out, err) = call(&["--input", "nosuch.dsl"], "");
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("nosuch.dsl"), "{err}");
}

#[test]
fn all_diagnostics_printed() {
    let src = "params N; array A[N]; for i in 0 .. N { read A[i*i]; read B[0]; }";
    let (code, out, err) = call(&[], src);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 2, "{err}");
    let (code, _, err) = call(&["--json"], src);
    assert_eq!(code, 1);
    let diags: Vec<serde_json::Value> = serde_json::from_str(&err).unwrap();
    assert_eq!(diags.len(), 2);
}

#[test]
fn reads_stdin() {
    let (code, out, _) =
        call(&["--input", "-", "--param", "N=4"], "params N; array A[N]; for i in 0 .. N { read A[0]; }");
    assert_eq!(code, 0);
    assert!(out.contains("DMD   = 4"), "{out}");
}

#[test]
fn concrete_binding_errors() {
    let path = corpus("walkthrough");
    assert_eq!(call(&["--input", &path, "--param", "Q=3"], "").0, 2);
    assert_eq!(call(&["--input", &path, "--param", "N=3"], "").0, 2);
    assert_eq!(call(&["--input", &path, "--param", "N3"], "").0, 2);
}

#[test]
fn invalid_block_size() {
    assert_eq!(call(&["--input", &corpus("walkthrough"), "--block-size", "0"], "").0, 2);
}

#[test]
fn compatibility_flags_warn() {
    let (code, _, err) =
        call(&["--input", &corpus("walkthrough"), "--max-operations", "100", "--approximation-method", "scale"], "");
    assert_eq!(code, 0);
    assert_eq!(err.matches("warning:").count(), 2, "{err}");
}

#[test]
fn output_is_deterministic() {
    for name in ["matmul", "stepped", "conditional"] {
        let a = call(&["--input", &corpus(name), "--json"], "");
        let b = call(&["--input", &corpus(name), "--json", "--sequential"], "");
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn resource_cap_exits_two() {
    let (code, _, err) = call(&["--input", &corpus("matmul"), "--max-points", "50"], "");
    assert_eq!(code, 2);
    assert!(err.contains("50"), "{err}");
}

#[test]
fn timeout_exits_two() {
    let (code, _, err) = call(
        &[
            "--input",
            &corpus("matmul"),
            "--param",
            "M=400",
            "--param",
            "N=400",
            "--param",
            "K=400",
            "--max-points",
            "1000000000",
            "--timeout-seconds",
            "0.2",
        ],
        "",
    );
    assert_eq!(code, 2);
    assert!(err.contains("timed out"), "{err}");
}

#[test]
fn dump_shows_maps() {
    let (code, out, _) = call(&["--input", &corpus("walkthrough"), "--dump"], "");
    assert_eq!(code, 0);
    assert!(out.contains("(i, j, 1) -> (1, 0, j)"), "{out}");
}
