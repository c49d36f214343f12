use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lupi::dataset::{make_synthetic, stratified_folds, Scenario, SynthSpec};
use lupi::eval::cross_validate_with;
use lupi::kernels::KernelSpec;
use lupi::models::ModelSpec;
use lupi::par::Execution;
use lupi::select::{select_privileged, SelectionConfig};
use lupi::svm::SolverOptions;
use lupi::svmplus::SvmPlusConfig;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    let k = KernelSpec::rbf(0.2).unwrap();
    for n in [200, 800] {
        let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, n, 0)).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &ds, |b, ds| b.iter(|| k.gram_with(ds.standard(), exec).unwrap()));
        }
    }
    group.finish();
}

fn cross_validation(c: &mut Criterion) {
    let mut group = c.benchmark_group("svmplus_cv");
    group.sample_size(10);
    let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 200, 1)).unwrap();
    let plan = stratified_folds(ds.labels(), 5, 0).unwrap();
    let spec = ModelSpec::SvmPlus(SvmPlusConfig::new(KernelSpec::Linear, KernelSpec::rbf(0.1).unwrap(), 1.0, 2.0, 1.0));
    for (name, exec) in MODES {
        let trainer = spec.trainer(SolverOptions { exec, ..SolverOptions::default() });
        group.bench_function(name, |b| b.iter(|| cross_validate_with(&trainer, &ds, &plan, exec).unwrap()));
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("select");
    group.sample_size(10);
    let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 150, 2)).unwrap();
    for (name, exec) in MODES {
        let cfg = SelectionConfig { exec, max_features: 2, min_gain: f64::NEG_INFINITY, ..SelectionConfig::default() };
        group.bench_function(name, |b| b.iter(|| select_privileged(&ds, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, gram, cross_validation, selection);
criterion_main!(benches);
