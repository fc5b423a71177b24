mod common;

use std::collections::HashSet;

use loopdmd_core::compile;
use loopdmd_core::locality::{analyze_concrete, concrete_distribution, dmd_numeric};
use loopdmd_core::oracle::{lru_hits, reference_trace, stack_distances};
use loopdmd_core::polyhedral::{
    build_access_map, build_timestamp_space, dump, enumerate, evaluate_access, iterator_values, Limits, ParamBinding,
    ResourceError,
};
use loopdmd_core::ValidatedProgram;
use proptest::prelude::*;

fn points(p: &ValidatedProgram, b: &ParamBinding) -> Vec<Vec<i64>> {
    let space = build_timestamp_space(p);
    enumerate(&space, b, &Limits::default()).map(|r| r.unwrap().1.to_vec()).collect()
}

#[test]
fn stepped_loop_trip_count() {
    let p = compile("params N; array A[N]; for i in 0 .. N step 2 { read A[i]; }").unwrap();
    for n in 0..9 {
        assert_eq!(points(&p, &ParamBinding(vec![n])).len() as i64, (n + 1) / 2);
    }
}

#[test]
fn walkthrough_points_in_order() {
    let p = common::load("walkthrough");
    let pts = points(&p, &ParamBinding(vec![2, 2]));
    assert_eq!(pts.len(), 8);
    assert_eq!(&pts[..5], [vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1], vec![1, 0, 0]]);
}

#[test]
fn empty_loop_range() {
    let p = compile("params N; array A[N]; for i in 0 .. N { read A[i]; }").unwrap();
    assert!(points(&p, &ParamBinding(vec![0])).is_empty());
}

#[test]
fn matmul_point_count_and_dims() {
    let p = common::load("matmul");
    assert_eq!(build_timestamp_space(&p).ndims, 4);
    assert_eq!(points(&p, &ParamBinding(vec![2, 2, 2])).len(), 32);
}

#[test]
fn walkthrough_access_map() {
    let p = common::load("walkthrough");
    let space = build_timestamp_space(&p);
    let map = build_access_map(&p, 1, 1);
    let b = ParamBinding(vec![5, 5]);
    let e = evaluate_access(&space, &map, &[1, 0, 1], &b).unwrap();
    assert_eq!((e.array, e.subscripts.as_slice()), (1, &[0, 0][..]));
    let text = dump(&p, &space, &map);
    assert!(text.contains("(i, j, 0) -> (0, i, j)"), "{text}");
    assert!(text.contains("(i, j, 1) -> (1, 0, j)"), "{text}");
}

#[test]
fn matmul_reads_a_by_declaration_order() {
    let p = common::load("matmul");
    let space = build_timestamp_space(&p);
    let map = build_access_map(&p, 1, 1);
    let e = evaluate_access(&space, &map, &[1, 2, 3, 1], &ParamBinding(vec![4, 4, 4])).unwrap();
    assert_eq!((e.array, e.subscripts.as_slice()), (0, &[1, 3][..]));
}

#[test]
fn guarded_access_only_on_diagonal() {
    let p = compile("params N; array D[N]; for i in 0 .. N { for j in 0 .. N { if i == j { read D[i]; } } }").unwrap();
    let space = build_timestamp_space(&p);
    let map = build_access_map(&p, 1, 1);
    let b = ParamBinding(vec![4]);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(evaluate_access(&space, &map, &[i, j], &b).is_some(), i == j);
        }
    }
}

#[test]
fn blocked_last_subscript() {
    let p = compile("params N; array A[N]; for j in 0 .. N { read A[j]; }").unwrap();
    let space = build_timestamp_space(&p);
    let map = build_access_map(&p, 4, 1);
    let b = ParamBinding(vec![16]);
    for j in 0..16 {
        let e = evaluate_access(&space, &map, &[j], &b).unwrap();
        assert_eq!(e.subscripts[0], 0);
        assert_eq!(e.block, Some(j / 4));
    }
}

#[test]
fn enumeration_cap() {
    let p = common::load("matmul");
    let space = build_timestamp_space(&p);
    let err = enumerate(&space, &ParamBinding(vec![10, 10, 10]), &Limits::with_max_points(100))
        .find_map(|r| r.err())
        .unwrap();
    assert_eq!(err, ResourceError::TooManyPoints { cap: 100 });
}

fn agree_with_interpreter(p: &ValidatedProgram, b: &ParamBinding) -> Result<(), TestCaseError> {
    let space = build_timestamp_space(p);
    let map = build_access_map(p, 1, 1);
    let reference = reference_trace(p, b, 1, 1);
    let got: Vec<_> = enumerate(&space, b, &Limits::default()).map(|r| r.unwrap()).collect();
    prop_assert_eq!(got.len(), reference.len());
    for ((stmt, coords), r) in got.iter().zip(&reference) {
        prop_assert_eq!(*stmt, r.stmt);
        prop_assert_eq!(iterator_values(&space, coords, b), r.iters.clone());
        prop_assert_eq!(&map.evaluate_stmt(*stmt, coords, b), &r.element);
    }
    Ok(())
}

#[test]
fn corpus_order_matches_interpreter() {
    for (name, src) in common::corpus() {
        let p = compile(&src).unwrap();
        for b in common::small_bindings(&p) {
            agree_with_interpreter(&p, &b).unwrap_or_else(|e| panic!("{name} at {b:?}: {e}"));
        }
    }
}

fn check_against_oracle(p: &ValidatedProgram, b: &ParamBinding, block: i64, sets: i64) -> Result<(), TestCaseError> {
    let a = analyze_concrete(p, b, block, sets, &Limits::default()).unwrap();
    let trace: Vec<_> = reference_trace(p, b, block, sets).into_iter().map(|e| e.element).collect();
    let depths = stack_distances(&trace);
    prop_assert_eq!(a.records.len(), trace.len());
    for (rec, (el, depth)) in a.records.iter().zip(trace.iter().zip(&depths)) {
        prop_assert_eq!(&rec.element, el);
        prop_assert_eq!(rec.rd, *depth);
        if let (Some(rd), Some(ri)) = (rec.rd, rec.ri) {
            prop_assert!(rd >= 1 && ri >= rd);
        }
    }
    let d = &a.distribution;
    let distinct: HashSet<_> = trace.iter().collect();
    prop_assert_eq!(d.n_cold as usize, distinct.len());
    for c in [1u64, 2, 4, 8, 16] {
        // Strictly fewer than c other elements since the previous use.
        let predicted = a.records.iter().filter(|r| r.rd.is_some_and(|rd| rd - 1 < c)).count() as u64;
        prop_assert_eq!(predicted, lru_hits(&trace, c as usize));
        prop_assert_eq!(d.predicted_hits(c), predicted);
    }
    Ok(())
}

#[test]
fn corpus_matches_oracle() {
    for (name, src) in common::corpus() {
        let p = compile(&src).unwrap();
        for b in common::small_bindings(&p) {
            check_against_oracle(&p, &b, 1, 1).unwrap_or_else(|e| panic!("{name} at {b:?}: {e}"));
        }
    }
}

#[test]
fn endpoint_conventions_differ_by_one() {
    // Exclusive window (t', t) never contains the reused element itself.
    let trace = ["x", "y", "z", "y", "x"];
    let inclusive = stack_distances(&trace);
    let exclusive = |t: usize| {
        let prev = trace[..t].iter().rposition(|e| *e == trace[t])?;
        Some(trace[prev + 1..t].iter().collect::<HashSet<_>>().len() as u64)
    };
    for t in 0..trace.len() {
        assert_eq!(inclusive[t], exclusive(t).map(|e| e + 1));
    }
}

#[test]
fn matmul_reference_values() {
    let p = common::load("matmul");
    let a = analyze_concrete(&p, &ParamBinding(vec![4, 4, 4]), 1, 1, &Limits::default()).unwrap();
    assert_eq!((a.distribution.n_total, a.distribution.n_cold), (256, 48));
    let d = concrete_distribution(&p, &ParamBinding(vec![2, 2, 2]), 1, 1, &Limits::default()).unwrap();
    let trace: Vec<_> =
        reference_trace(&p, &ParamBinding(vec![2, 2, 2]), 1, 1).into_iter().map(|e| e.element).collect();
    let depths = stack_distances(&trace);
    let oracle = depths.iter().map(|d| d.map_or(1.0, |r| (r as f64).sqrt())).sum::<f64>();
    assert!((dmd_numeric(&d) - oracle).abs() < 1e-9);
}

#[test]
fn walkthrough_interior_b_reuse() {
    let p = common::load("walkthrough");
    for n in 3..=8 {
        for m in 3..=8 {
            let a = analyze_concrete(&p, &ParamBinding(vec![n, m]), 1, 1, &Limits::default()).unwrap();
            for r in a.records.iter().filter(|r| r.element.array == 1 && r.timestamp[0] >= 1) {
                assert_eq!(r.rd, Some(2 * m as u64));
            }
        }
    }
}

#[test]
fn blocking_and_sets_match_oracle() {
    for name in ["walkthrough", "matmul", "stencil2d", "halving"] {
        let p = common::load(name);
        for (block, sets) in [(2, 1), (4, 1), (2, 2), (4, 2), (1, 2)] {
            let b = &common::small_bindings(&p)[1];
            check_against_oracle(&p, b, block, sets).unwrap_or_else(|e| panic!("{name} B={block} S={sets}: {e}"));
        }
    }
}

#[test]
fn repeated_runs_agree() {
    let p = common::load("conditional");
    let b = ParamBinding(vec![5, 4]);
    let one = analyze_concrete(&p, &b, 1, 1, &Limits::default()).unwrap();
    let two = analyze_concrete(&p, &b, 1, 1, &Limits::default()).unwrap();
    assert_eq!(one.records, two.records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn random_nests_follow_interpreter(src in common::program(), n in 0i64..5, m in 0i64..5) {
        let p = compile(&src).unwrap();
        agree_with_interpreter(&p, &ParamBinding(vec![n, m]))?;
    }

    #[test]
    fn random_nests_match_oracle(src in common::program(), n in 0i64..5, m in 0i64..5, block in 1i64..4, sets in 1i64..3) {
        let p = compile(&src).unwrap();
        check_against_oracle(&p, &ParamBinding(vec![n, m]), block, sets)?;
    }
}
