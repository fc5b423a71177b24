mod common;

use loopdmd_core::compile;
use loopdmd_core::locality::{concrete_distribution, scan};
use loopdmd_core::polyhedral::{build_access_map, build_timestamp_space, Limits, ParamBinding};
use loopdmd_core::symbolic::classify::{event_key, StructKey};
use loopdmd_core::symbolic::poly::ratio;
use loopdmd_core::symbolic::*;
use loopdmd_core::{Execution, StmtId, ValidatedProgram};
use num_traits::ToPrimitive;

fn analyze(p: &ValidatedProgram) -> SymbolicDistribution {
    analyze_symbolic(p, 1, 1, &SymbolicConfig::default()).unwrap()
}

fn plain(q: &QuasiPoly, d: &SymbolicDistribution) -> String {
    q.to_formula(&d.params).render_plain()
}

/// Concrete `(rd, count)` of reuses of class `class` at `x`.
fn class_counts(p: &ValidatedProgram, x: &[i64], class: ClassRef) -> std::collections::BTreeMap<u64, u64> {
    key_counts(p, x, |k| k.class == class)
}

fn key_counts(
    p: &ValidatedProgram,
    x: &[i64],
    keep: impl Fn(&StructKey) -> bool,
) -> std::collections::BTreeMap<u64, u64> {
    let space = build_timestamp_space(p);
    let map = build_access_map(p, 1, 1);
    let mut out = std::collections::BTreeMap::new();
    scan(&space, &map, &ParamBinding(x.to_vec()), &Limits::default(), |e| {
        if let (Some(k), Some(r)) = (event_key(&e), e.reuse) {
            if keep(&k) {
                *out.entry(r.rd).or_insert(0) += 1;
            }
        }
    })
    .unwrap();
    out
}

#[test]
fn walkthrough_b_group() {
    let p = common::load("walkthrough");
    let d = analyze(&p);
    assert_eq!(plain(&d.n_total, &d), "2 * M * N");
    let b_reuse = ClassRef { source: StmtId(1), pred: StmtId(1), carrier: 0 };
    let g = d.groups.iter().find(|g| g.class == b_reuse).expect("B group");
    assert_eq!(plain(&g.rd, &d), "2 * M");
    assert_eq!(plain(&g.multiplicity, &d), "M * N - M");
    assert!(g.scaling);
    // held out (N, M) = (9, 7)
    let counts = class_counts(&p, &[9, 7], b_reuse);
    assert_eq!(counts.into_iter().collect::<Vec<_>>(), [(14, 56)]);
    assert_eq!(g.rd.eval(&[9, 7]), Some(ratio(14)));
    assert_eq!(g.multiplicity.eval(&[9, 7]), Some(ratio(56)));
    let dmd = assemble_dmd(&d);
    assert!(dmd.expr.render_plain().contains("(M * N - M) * sqrt(2 * M)"), "{}", dmd.expr);
}

#[test]
fn matmul_groups_and_counts() {
    let p = common::load("matmul");
    let d = analyze(&p);
    assert_eq!(plain(&d.n_total, &d), "4 * K * M * N");
    assert_eq!(plain(&d.n_cold, &d), "K * M + K * N + M * N");
    let c_reuse = ClassRef { source: StmtId(0), pred: StmtId(3), carrier: 2 };
    let g = d.groups.iter().find(|g| g.class == c_reuse).expect("C group");
    assert_eq!(plain(&g.rd, &d), "1");
    assert_eq!(plain(&g.multiplicity, &d), "K * M * N - M * N");
    let x = [5, 6, 7];
    let counts = class_counts(&p, &x, c_reuse);
    assert_eq!(counts.into_iter().collect::<Vec<_>>(), [(1, 5 * 6 * 6)]);
    let conc = concrete_distribution(&p, &ParamBinding(x.to_vec()), 1, 1, &Limits::default()).unwrap();
    assert_eq!(d.n_total_at(&x), Some(conc.n_total as i64));
    assert_eq!(d.n_cold.eval(&x).unwrap().to_u64(), Some(conc.n_cold));
}

#[test]
fn floor_half_has_period_two() {
    let p = common::load("halving");
    let d = analyze(&p);
    assert_eq!(d.period, 2);
    for n in [10, 11] {
        let conc = concrete_distribution(&p, &ParamBinding(vec![n]), 1, 1, &Limits::default()).unwrap();
        assert_eq!(d.n_warm.eval(&[n]), Some(ratio(conc.n_warm as i64)));
        assert_eq!(conc.n_warm as i64, n / 2);
    }
}

#[test]
fn stepped_loops_agree_on_both_residues() {
    let p = common::load("stepped");
    let d = analyze(&p);
    assert_eq!(d.period, 2);
    for n in [9, 10, 13, 14] {
        let conc = concrete_distribution(&p, &ParamBinding(vec![n]), 1, 1, &Limits::default()).unwrap();
        assert_eq!(d.n_total_at(&[n]), Some(conc.n_total as i64));
        assert_eq!(d.fitted_warm_at(&[n]), Some(ratio(conc.n_warm as i64)));
        let f = assemble_dmd(&d).evaluate(&[n]).unwrap();
        assert!((f - conc.dmd).abs() <= 1e-9 * conc.dmd, "N={n}: {f} vs {}", conc.dmd);
    }
}

#[test]
fn constant_group_is_filtered() {
    let p = common::load("boundary");
    let d = analyze(&p);
    let x = ClassRef { source: StmtId(3), pred: StmtId(2), carrier: 0 };
    let g = d.groups.iter().find(|g| g.class == x).expect("X group");
    assert!(!g.scaling && !scaling_filter(g));
    assert_eq!(assemble_dmd(&d).expr.render_plain(), "2 * N + 1");
}

#[test]
fn sporadic_group_is_not_scaling() {
    // C[0] is reused only at N == 4, D[0] at every other N.
    let p =
        compile("params N; array C[1]; array D[1]; if N == 4 { read C[0]; read C[0]; } else { read D[0]; read D[0]; }")
            .unwrap();
    let d = analyze(&p);
    assert_eq!(d.grid[0], vec![4]);
    assert!(d.groups.iter().all(|g| !g.scaling));
    let c = ClassRef { source: StmtId(1), pred: StmtId(0), carrier: 0 };
    let u = d.unresolved.iter().find(|u| u.class == c).expect("C class reported");
    assert!(u.reason.contains("absent"), "{}", u.reason);
    assert!(assemble_dmd(&d).warm_terms.is_empty());
    assert_eq!(assemble_dmd(&d).expr.render_plain(), "1");
}

#[test]
fn empty_program() {
    let d = analyze(&compile("params N; array A[N]; for i in 0 .. N { }").unwrap());
    assert!(d.groups.is_empty());
    assert_eq!(plain(&d.n_total, &d), "0");
    assert_eq!(assemble_dmd(&d).expr.render_plain(), "0");
}

#[test]
fn corpus_fits_hold_out() {
    for (name, src) in common::corpus() {
        let p = compile(&src).unwrap();
        let d = analyze(&p);
        let dmd = assemble_dmd(&d);
        for x in &d.validation {
            let b = ParamBinding(x.clone());
            let conc = concrete_distribution(&p, &b, 1, 1, &Limits::default()).unwrap();
            assert_eq!(d.n_total_at(x), Some(conc.n_total as i64), "{name}");
            assert_eq!(d.n_warm.eval(x), Some(ratio(conc.n_warm as i64)), "{name}");
            let unresolved: u64 =
                d.unresolved.iter().map(|u| key_counts(&p, x, |k| u.keys.contains(k)).values().sum::<u64>()).sum();
            let fitted = d.fitted_warm_at(x).unwrap();
            assert_eq!(fitted + ratio(unresolved as i64), ratio(conc.n_warm as i64), "{name} at {x:?}");
            // DMD from the concrete groups that the formula keeps.
            let mut expected = conc.n_cold as f64;
            for g in d.groups.iter().filter(|g| g.scaling) {
                let rd = g.rd.eval_f64(x).unwrap();
                expected += g.multiplicity.eval_f64(x).unwrap() * rd.sqrt();
                let counts = class_counts(&p, x, g.class);
                let rd_int = g.rd.eval(x).unwrap().to_integer().to_u64().unwrap();
                assert!(
                    counts.get(&rd_int).is_some_and(|&c| c as f64 >= g.multiplicity.eval_f64(x).unwrap()),
                    "{name}"
                );
            }
            let got = dmd.evaluate(x).unwrap();
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{name}: {got} vs {expected}");
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let p = common::load("jacobi1d");
    let seq =
        analyze_symbolic(&p, 1, 1, &SymbolicConfig { execution: Execution::Sequential, ..Default::default() }).unwrap();
    let par =
        analyze_symbolic(&p, 1, 1, &SymbolicConfig { execution: Execution::Parallel, ..Default::default() }).unwrap();
    assert_eq!(assemble_dmd(&seq).expr, assemble_dmd(&par).expr);
}

#[test]
fn blocked_matmul_fits() {
    let p = common::load("matvec");
    let d = analyze_symbolic(&p, 2, 1, &SymbolicConfig::default()).unwrap();
    assert_eq!(d.period, 2);
    for x in &d.validation {
        let conc = concrete_distribution(&p, &ParamBinding(x.clone()), 2, 1, &Limits::default()).unwrap();
        assert_eq!(d.n_cold.eval(x), Some(ratio(conc.n_cold as i64)));
    }
}
