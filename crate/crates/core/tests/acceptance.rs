//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits non-zero on failure only when `LUPI_ACCEPTANCE_STRICT=1`, so a red
//! criterion does not stop the rest of `cargo test` from running.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use lupi::dataset::{make_synthetic, stratified_folds, LupiDataset, Scenario, SynthSpec};
use lupi::distill::{self, tempered_softmax, DistillConfig, FeedForwardNet, DEFAULT_HIDDEN};
use lupi::eval::{metrics, search, ConfusionCounts, ParamSet, Predictor, SearchSpace, Trainer};
use lupi::kernels::KernelSpec;
use lupi::models::ModelSpec;
use lupi::par::{self, Execution};
use lupi::qp;
use lupi::select::{find_hard_examples, hard_set_accuracy, select_privileged, SelectionConfig};
use lupi::svm::{self, SolverOptions};
use lupi::svmplus::{self, SvmPlusConfig};
use lupi::transfer::{self, KtHyper, MappingKind};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = Box<dyn Fn() -> Outcome>;

fn accuracy(predicted: &[i32], truth: &[i32]) -> f64 {
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn split(ds: &LupiDataset, n_train: usize) -> (LupiDataset, LupiDataset) {
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..ds.n_rows()).collect();
    (ds.subset(&train), ds.subset(&test))
}

fn qp_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for seed in 0..100u64 {
        let p = common::random_qp(seed);
        let sol = qp::solve(&p, 1e-6, 100 * p.dim()).map_err(|e| format!("problem {seed}: {e}"))?;
        let (_, oracle, _) = common::projected_gradient(&p, 1_000_000);
        worst_gap = worst_gap.max((sol.objective - oracle).abs());
        worst_kkt = worst_kkt.max(sol.kkt.max_residual());
    }
    let elapsed = start.elapsed();
    let detail = format!("100 problems, max |Δobj| {worst_gap:.2e}, max KKT {worst_kkt:.2e}, {elapsed:.1?}");
    if worst_gap <= 1e-5 && worst_kkt <= 1e-6 && elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn svmplus_assembly() -> Outcome {
    let eye = Array2::<f64>::eye(2);
    let p = svmplus::assemble_qp_from_grams(&eye, &eye, &[1, -1], 1.0, 1.0, &[1.0, 1.0]).map_err(|e| e.to_string())?;
    let expected = [
        [2.0, 0.0, -1.0, 0.0],
        [0.0, 2.0, 0.0, -1.0],
        [-1.0, 0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, 1.0],
    ];
    let mut worst = 0.0f64;
    for (r, row) in expected.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            worst = worst.max((p.h[(r, c)] - v).abs());
        }
    }

    // γ = 0 on a non-trivial problem: the α block is the SVM Hessian, the rest is zero.
    let ds = make_synthetic(&SynthSpec::new(Scenario::Gauss2d, 12, 3)).map_err(|e| e.to_string())?;
    let k = KernelSpec::rbf(0.7).unwrap();
    let gram = k.gram(ds.standard()).unwrap();
    let gram_p = KernelSpec::Linear.gram(ds.privileged()).unwrap();
    let costs = vec![1.5; ds.n_rows()];
    let plus = svmplus::assemble_qp_from_grams(&gram, &gram_p, ds.labels(), 2.0, 0.0, &costs).map_err(|e| e.to_string())?;
    let plain = svm::assemble_svm_qp(&gram, ds.labels(), 1.5).map_err(|e| e.to_string())?;
    let l = ds.n_rows();
    let mut exact = true;
    for r in 0..2 * l {
        for c in 0..2 * l {
            let want = if r < l && c < l { plain.h[(r, c)] } else { 0.0 };
            exact &= p_eq(plus.h[(r, c)], want);
        }
    }
    let detail = format!("identity blocks max error {worst:.1e}, γ=0 reduction exact: {exact}");
    if worst <= 1e-12 && exact {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn p_eq(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a == 0.0 && b == 0.0)
}

fn probe_grid(lo: f64, hi: f64, steps: usize) -> Array2<f64> {
    let h = (hi - lo) / (steps - 1) as f64;
    Array2::from_shape_fn((steps * steps, 2), |(i, j)| lo + h * if j == 0 { (i / steps) as f64 } else { (i % steps) as f64 })
}

fn gamma_limit() -> Outcome {
    let ds = make_synthetic(&SynthSpec::new(Scenario::Gauss2d, 60, 11)).map_err(|e| e.to_string())?;
    let k = KernelSpec::rbf(0.5).unwrap();
    let plain = svm::train_svm(ds.standard(), ds.labels(), k, 1.0).map_err(|e| e.to_string())?;
    let plus = svmplus::train_svmplus(&ds, &SvmPlusConfig::new(k, KernelSpec::Linear, 1.0, 1.0, 1e-9), 1e-6)
        .map_err(|e| e.to_string())?;
    let grid = probe_grid(-4.0, 4.0, 41);
    let a = plain.decision_values(grid.view()).unwrap();
    let b = plus.decision_values(grid.view()).unwrap();
    let sup = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let detail = format!("sup-norm gap {sup:.2e} over 41×41 probes");
    if sup <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn param(p: &ParamSet, name: &str) -> f64 {
    p.iter().find(|(n, _)| n == name).expect("parameter in space").1
}

/// Both models get 5-fold CV tuning on the training split only. The SVM+ grid
/// contains κ = 1, where SVM+ coincides with the SVM.
fn svmplus_gain() -> Outcome {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let cs = vec![0.1, 1.0, 10.0];
    let k_star = KernelSpec::rbf(0.1).unwrap();
    let mut lines = Vec::new();
    let (mut sum_svm, mut sum_plus, mut wins) = (0.0, 0.0, 0);
    for seed in 0..10u64 {
        let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 400, seed)).map_err(|e| e.to_string())?;
        let (train, test) = split(&ds, 200);
        let plan = stratified_folds(train.labels(), 5, seed).map_err(|e| e.to_string())?;
        let svm_space = SearchSpace::grid(vec![("c".into(), cs.clone())]);
        let svm_spec = |p: &ParamSet| ModelSpec::StandardSvm { kernel: KernelSpec::Linear, c: param(p, "c") };
        let best_svm = search(&svm_space, |p: &ParamSet| Ok(svm_spec(p).trainer(opts)), &train, &plan, Execution::Parallel)
            .map_err(|e| e.to_string())?;
        let plus_space = SearchSpace::grid(vec![
            ("kappa".into(), vec![1.0, 2.0, 5.0]),
            ("gamma".into(), vec![0.1, 1.0]),
            ("c".into(), cs.clone()),
        ]);
        let plus_spec = |p: &ParamSet| {
            ModelSpec::SvmPlus(SvmPlusConfig::new(KernelSpec::Linear, k_star, param(p, "c"), param(p, "kappa"), param(p, "gamma")))
        };
        let best_plus = search(&plus_space, |p: &ParamSet| Ok(plus_spec(p).trainer(opts)), &train, &plan, Execution::Parallel)
            .map_err(|e| e.to_string())?;
        let svm_model = svm_spec(&best_svm.best).trainer(opts).train(&train).map_err(|e| e.to_string())?;
        let plus_model = plus_spec(&best_plus.best).trainer(opts).train(&train).map_err(|e| e.to_string())?;
        let a = accuracy(&svm_model.predict(test.standard()).unwrap(), test.labels());
        let b = accuracy(&plus_model.predict(test.standard()).unwrap(), test.labels());
        lines.push(format!("    seed {seed}: svm {a:.3}  svm+ {b:.3}"));
        sum_svm += a;
        sum_plus += b;
        wins += usize::from(b > a);
    }
    let elapsed = start.elapsed();
    for l in &lines {
        println!("{l}");
    }
    let (m_svm, m_plus) = (sum_svm / 10.0, sum_plus / 10.0);
    let detail = format!("mean svm {m_svm:.4}, svm+ {m_plus:.4}, strict wins {wins}/10, {elapsed:.1?}");
    if m_plus >= m_svm && wins >= 7 && elapsed < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kt_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let standard_at = |rng: &mut ChaCha8Rng, n: usize| Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.5..1.5));
    let privileged_of = |x: &Array2<f64>| {
        Array2::from_shape_fn((x.nrows(), 3), |(i, j)| {
            let (a, b, c) = (x[[i, 0]], x[[i, 1]], x[[i, 2]]);
            match j {
                0 => 2.0 * a.powi(3) - b + 0.5,
                1 => c * c + 3.0 * a - 1.0,
                _ => 0.5 * b.powi(3) - 2.0 * c * c + a,
            }
        })
    };
    let x = standard_at(&mut rng, 160);
    let xp = privileged_of(&x);
    let labels: Vec<i32> = (0..x.nrows()).map(|i| if xp[[i, 0]] + x[[i, 2]] > 0.3 { 1 } else { -1 }).collect();
    let ds = LupiDataset::from_binary(x, xp, labels).map_err(|e| e.to_string())?;
    let model = transfer::train_kt(&ds, MappingKind::Regression, KernelSpec::Linear, 10.0, &KtHyper::default())
        .map_err(|e| e.to_string())?;
    let probe = standard_at(&mut rng, 500);
    let truth = privileged_of(&probe);
    let estimated = transfer::estimate_privileged(&model.mappings, probe.view()).map_err(|e| e.to_string())?;
    let err = (&estimated - &truth).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let complete = ndarray::concatenate(ndarray::Axis(1), &[probe.view(), truth.view()]).unwrap();
    let reference = model.downstream.predict(complete.view()).map_err(|e| e.to_string())?;
    let predicted = transfer::predict_kt(&model, probe.view()).map_err(|e| e.to_string())?;
    let same = predicted == reference;
    let detail = format!("max recovery error {err:.2e}, 500-probe labels identical: {same}");
    if err <= 1e-8 && same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs = Array2::from_shape_fn((12, 4), |_| rng.random_range(-2.0..2.0));
    let hard: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let teacher_logits = Array2::from_shape_fn((12, 3), |_| rng.random_range(-3.0..3.0));
    let mut net = FeedForwardNet::new(&[4, 6, 3], 9).map_err(|e| e.to_string())?;
    net.fit_scaling(inputs.view());
    let theta = net.parameters();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for &t in &[1.0, 2.0, 10.0] {
        let soft = Array2::from_shape_fn((12, 3), |(i, c)| tempered_softmax(teacher_logits.row(i), t).unwrap()[c]);
        for &lambda in &[0.0, 0.5, 1.0] {
            let (_, grads) = net.loss_and_gradient(inputs.view(), &hard, soft.view(), lambda).map_err(|e| e.to_string())?;
            let analytic = grads.flatten();
            let mut probe = net.clone();
            for (k, &a) in analytic.iter().enumerate() {
                let mut shifted = theta.clone();
                shifted[k] = theta[k] + h;
                probe.set_parameters(&shifted);
                let up = probe.loss_and_gradient(inputs.view(), &hard, soft.view(), lambda).unwrap().0;
                shifted[k] = theta[k] - h;
                probe.set_parameters(&shifted);
                let down = probe.loss_and_gradient(inputs.view(), &hard, soft.view(), lambda).unwrap().0;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            }
        }
    }
    let detail = format!("max relative error {worst:.2e} over λ∈{{0,0.5,1}} × T∈{{1,2,10}}");
    if worst <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lambda_zero() -> Outcome {
    let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 120, 8)).map_err(|e| e.to_string())?;
    let cfg = DistillConfig { lambda: 0.0, epochs: 60, seed: 17, ..DistillConfig::default() };
    let student = distill::train_distilled(&ds, &cfg, &DEFAULT_HIDDEN).map_err(|e| e.to_string())?;
    let (plain, history) = distill::train_supervised(ds.standard(), &ds.class_indices(), 2, &DEFAULT_HIDDEN, &cfg)
        .map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let same_loss = bits(&student.loss_history) == bits(&history);
    let same_params = bits(&student.student.parameters()) == bits(&plain.parameters());
    let detail = format!("{} epochs, loss trajectory bitwise equal: {same_loss}, parameters bitwise equal: {same_params}", history.len());
    if same_loss && same_params {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn distill_gain() -> Outcome {
    let start = Instant::now();
    let temps = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    let lambdas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let cells: Vec<(f64, f64)> = temps.iter().flat_map(|&t| lambdas.iter().map(move |&l| (t, l))).collect();
    let seeds = 10usize;
    let data: Vec<(LupiDataset, LupiDataset)> = (0..seeds as u64)
        .map(|seed| split(&make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 400, seed)).unwrap(), 200))
        .collect();
    let results = par::map_range(Execution::Parallel, cells.len() * seeds, |k| {
        let (t, lambda) = cells[k / seeds];
        let (train, test) = &data[k % seeds];
        let cfg = DistillConfig { temperature: t, lambda, seed: (k % seeds) as u64, ..DistillConfig::default() };
        distill::train_distilled(train, &cfg, &DEFAULT_HIDDEN)
            .and_then(|m| m.predict(test.standard()))
            .map(|p| accuracy(&p, test.labels()))
    });
    let mut means = BTreeMap::new();
    for (i, &(t, lambda)) in cells.iter().enumerate() {
        let accs: Vec<f64> = results[i * seeds..(i + 1) * seeds].iter().map(|r| r.as_ref().copied().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        means.insert(((t * 10.0) as u64, (lambda * 10.0).round() as u64), accs.iter().sum::<f64>() / seeds as f64);
    }
    println!("    T \\ λ     {}", lambdas.iter().map(|l| format!("{l:>7.1}")).collect::<String>());
    for &t in &temps {
        let row: String = lambdas.iter().map(|&l| format!("{:>7.4}", means[&((t * 10.0) as u64, (l * 10.0).round() as u64)])).collect();
        println!("    {t:<9} {row}");
    }
    let baseline = means[&(10, 0)];
    let (best_cell, best) = cells
        .iter()
        .filter(|c| c.1 > 0.0)
        .map(|&(t, l)| ((t, l), means[&((t * 10.0) as u64, (l * 10.0).round() as u64)]))
        .fold(((0.0, 0.0), f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let detail = format!(
        "λ=0 mean {baseline:.4}, best λ>0 cell T={} λ={} mean {best:.4}, {:.1?}",
        best_cell.0,
        best_cell.1,
        start.elapsed()
    );
    if best >= baseline {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn with_extra_privileged(ds: &LupiDataset, leak: bool, seed: u64) -> LupiDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.n_rows();
    let base = ds.privileged();
    let extra = if leak { 3 } else { 2 };
    let m = base.ncols() + extra;
    let privileged = Array2::from_shape_fn((n, m), |(i, j)| {
        if j < base.ncols() {
            base[[i, j]]
        } else if leak && j == base.ncols() + 1 {
            ds.labels()[i] as f64
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    LupiDataset::from_binary(ds.standard().to_owned(), privileged, ds.labels().to_vec()).unwrap()
}

/// Re-run every greedy step by exhaustive scan and compare.
fn brute_force_agrees(ds: &LupiDataset, cfg: &SelectionConfig) -> Result<(Vec<usize>, Vec<f64>), String> {
    let result = select_privileged(ds, cfg).map_err(|e| e.to_string())?;
    let hard = find_hard_examples(ds.standard(), ds.labels(), cfg).map_err(|e| e.to_string())?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = hard_set_accuracy(ds, &chosen, &hard, cfg).map_err(|e| e.to_string())?;
    let limit = cfg.max_features.min(ds.n_privileged());
    while chosen.len() < limit {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..ds.n_privileged()).filter(|c| !chosen.contains(c)) {
            let mut cols = chosen.clone();
            cols.push(c);
            let acc = hard_set_accuracy(ds, &cols, &hard, cfg).map_err(|e| e.to_string())?;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((c, acc));
            }
        }
        let (c, acc) = best.expect("at least one candidate");
        if acc - current < cfg.min_gain {
            break;
        }
        chosen.push(c);
        current = acc;
    }
    if chosen != result.chosen {
        return Err(format!("greedy chose {:?}, exhaustive scan {:?}", result.chosen, chosen));
    }
    Ok((result.chosen, result.accuracies))
}

fn selection_optimality() -> Outcome {
    let mut steps = 0;
    for seed in 0..3u64 {
        let base = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 120, 40 + seed)).map_err(|e| e.to_string())?;
        let leaky = with_extra_privileged(&base, true, seed);
        let leak_col = base.n_privileged() + 1;
        let (chosen, accs) = brute_force_agrees(&leaky, &SelectionConfig::default())?;
        if chosen.first() != Some(&leak_col) || accs.get(1) != Some(&1.0) {
            return Err(format!("seed {seed}: leak column {leak_col} not first with accuracy 1.0 (chosen {chosen:?}, {accs:?})"));
        }
        steps += chosen.len();
        // Without the leak, force several accepted steps.
        let plain = with_extra_privileged(&base, false, seed);
        let cfg = SelectionConfig { min_gain: f64::NEG_INFINITY, max_features: 4, ..SelectionConfig::default() };
        steps += brute_force_agrees(&plain, &cfg)?.0.len();
    }
    Ok(format!("{steps} greedy steps matched exhaustive argmax; leak chosen first with accuracy 1.0 on 3 seeds"))
}

fn property_suites() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(RunnerConfig { cases, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&(0usize..500, 0usize..500, 0usize..500, 0usize..500), |(tp, fp, tn, fn_)| {
            let c = ConfusionCounts { tp, fp, tn, fn_ };
            match metrics(&c) {
                Err(_) => prop_assert_eq!(c.total(), 0),
                Ok(m) => {
                    prop_assert_eq!(m.accuracy, (tp + tn) as f64 / c.total() as f64);
                    prop_assert_eq!(m.precision, (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64));
                    prop_assert_eq!(m.recall, (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64));
                    prop_assert!((m.error_rate() - (fp + fn_) as f64 / c.total() as f64).abs() <= 1e-15);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("metric identities: {e}"))?;

    let mut runner = TestRunner::new(RunnerConfig { cases, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&(proptest::collection::vec(0i32..3, 6..150), 2usize..7, any::<u64>()), |(labels, k, seed)| {
            let mut counts = BTreeMap::new();
            for &y in &labels {
                *counts.entry(y).or_insert(0usize) += 1;
            }
            let plan = stratified_folds(&labels, k, seed);
            if counts.values().any(|&c| c < k) {
                prop_assert!(plan.is_err());
                return Ok(());
            }
            let plan = plan.unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), labels.len());
            for (f, &size) in sizes.iter().enumerate() {
                for (&class, &total) in &counts {
                    let in_fold = labels.iter().zip(&plan.fold_assignments).filter(|(y, a)| **y == class && **a == f).count();
                    let expected = total as f64 * size as f64 / labels.len() as f64;
                    prop_assert!((in_fold as f64 - expected).abs() <= 1.0);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("stratification: {e}"))?;
    Ok(format!("{cases} metric cases and {cases} stratification cases"))
}

fn performance(suite_start: Instant) -> Outcome {
    let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 200, 1)).map_err(|e| e.to_string())?;
    let cfg = SvmPlusConfig::new(KernelSpec::rbf(0.2).unwrap(), KernelSpec::rbf(0.2).unwrap(), 1.0, 2.0, 1.0);
    let start = Instant::now();
    svmplus::train_svmplus(&ds, &cfg, 1e-6).map_err(|e| e.to_string())?;
    let train = start.elapsed();
    let suite = suite_start.elapsed();
    let detail = format!("SVM+ at L=200 trained in {train:.2?}; suite so far {suite:.1?}");
    if train < Duration::from_secs(10) && suite < Duration::from_secs(15 * 60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let suite_start = Instant::now();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("qp oracle equivalence", Box::new(qp_oracle)),
        ("svm+ assembly exactness", Box::new(svmplus_assembly)),
        ("svm+ gamma limit", Box::new(gamma_limit)),
        ("svm+ directional gain", Box::new(svmplus_gain)),
        ("knowledge transfer exact recovery", Box::new(kt_recovery)),
        ("distillation gradient check", Box::new(gradient_check)),
        ("distillation lambda=0 equivalence", Box::new(lambda_zero)),
        ("distillation directional gain", Box::new(distill_gain)),
        ("greedy selection optimality", Box::new(selection_optimality)),
        ("metric and stratification properties", Box::new(property_suites)),
        ("performance envelope", Box::new(move || performance(suite_start))),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(*name);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        if std::env::var("LUPI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
