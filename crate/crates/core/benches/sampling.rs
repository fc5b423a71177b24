use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use loopdmd_core::symbolic::{analyze_symbolic, SymbolicConfig};
use loopdmd_core::{compile, Execution};

fn symbolic(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze_symbolic");
    group.sample_size(10);
    for name in ["matmul", "jacobi1d", "heat2d"] {
        let path = format!("{}/corpus/{name}.dsl", env!("CARGO_MANIFEST_DIR"));
        let program = compile(&std::fs::read_to_string(path).unwrap()).unwrap();
        for (label, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            let config = SymbolicConfig { execution, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(label, name), &program, |b, p| {
                b.iter(|| analyze_symbolic(p, 1, 1, &config).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, symbolic);
criterion_main!(benches);
