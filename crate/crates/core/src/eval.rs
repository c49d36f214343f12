//! Metrics, stratified cross-validation, hyperparameter search and paired
//! comparison reports.
//!
//! Label `+1` is the positive class. Prediction during evaluation only ever
//! receives the standard block of the held-out rows.

use std::fmt::Write as _;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{stratified_folds, LupiDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Seeds used for repeated runs unless overridden.
pub const DEFAULT_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(truth: &[i32], predicted: &[i32]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch { expected: truth.len(), found: predicted.len() });
        }
        let mut c = ConfusionCounts::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Precision and recall are `None` when their denominators are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl Metrics {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }
}

pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::invalid("metrics need at least one evaluated sample"));
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        accuracy: (counts.tp + counts.tn) as f64 / total as f64,
        precision: ratio(counts.tp, counts.tp + counts.fp),
        recall: ratio(counts.tp, counts.tp + counts.fn_),
    })
}

/// Anything that predicts `-1/+1` labels from standard features.
pub trait Predictor {
    fn predict(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<i32>>;
}

/// Builds a predictor from training rows, privileged block included.
pub trait Trainer: Sync {
    type Model: Predictor + Send;

    fn train(&self, train: &LupiDataset) -> Result<Self::Model>;
}

impl<F, M> Trainer for F
where
    F: Fn(&LupiDataset) -> Result<M> + Sync,
    M: Predictor + Send,
{
    type Model = M;

    fn train(&self, train: &LupiDataset) -> Result<M> {
        self(train)
    }
}

/// Mean and sample standard deviation (`ddof = 1`; zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub accuracy: Stat,
    pub precision: Option<Stat>,
    pub recall: Option<Stat>,
}

impl MetricSummary {
    /// Summary over evaluations; undefined precision/recall values are skipped.
    pub fn of(evaluations: &[Metrics]) -> Result<MetricSummary> {
        let acc: Vec<f64> = evaluations.iter().map(|m| m.accuracy).collect();
        let pre: Vec<f64> = evaluations.iter().filter_map(|m| m.precision).collect();
        let rec: Vec<f64> = evaluations.iter().filter_map(|m| m.recall).collect();
        Ok(MetricSummary {
            accuracy: Stat::of(&acc).ok_or_else(|| Error::invalid("no evaluations to summarize"))?,
            precision: Stat::of(&pre),
            recall: Stat::of(&rec),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub summary: MetricSummary,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<i32>,
}

fn run_fold<T: Trainer>(trainer: &T, dataset: &LupiDataset, plan: &SplitPlan, fold: usize) -> Result<(FoldResult, Vec<usize>, Vec<i32>)> {
    let (train_rows, test_rows) = plan.split(fold);
    let wrap = |e: Error| Error::Fold { fold, source: Box::new(e) };
    let model = trainer.train(&dataset.subset(&train_rows)).map_err(wrap)?;
    // Only the standard block of the held-out rows leaves this function.
    let held_out = dataset.subset(&test_rows);
    let truth = held_out.binary_labels().map_err(wrap)?.to_vec();
    let standard_only = held_out.standard().to_owned();
    drop(held_out);
    let predicted = model.predict(standard_only.view()).map_err(wrap)?;
    let counts = ConfusionCounts::from_labels(&truth, &predicted).map_err(wrap)?;
    let metrics = metrics(&counts).map_err(wrap)?;
    Ok((FoldResult { fold, counts, metrics }, test_rows, predicted))
}

pub fn cross_validate<T: Trainer>(trainer: &T, dataset: &LupiDataset, plan: &SplitPlan) -> Result<CvResult> {
    cross_validate_with(trainer, dataset, plan, Execution::default())
}

/// Folds may run concurrently; results are merged in fold order.
pub fn cross_validate_with<T: Trainer>(trainer: &T, dataset: &LupiDataset, plan: &SplitPlan, exec: Execution) -> Result<CvResult> {
    if plan.fold_assignments.len() != dataset.n_rows() {
        return Err(Error::DimensionMismatch { expected: dataset.n_rows(), found: plan.fold_assignments.len() });
    }
    let outcomes = par::map_range(exec, plan.n_folds, |fold| run_fold(trainer, dataset, plan, fold));
    let mut folds = Vec::with_capacity(plan.n_folds);
    let mut predictions = vec![0; dataset.n_rows()];
    for outcome in outcomes {
        let (result, rows, predicted) = outcome?;
        for (&i, p) in rows.iter().zip(predicted) {
            predictions[i] = p;
        }
        folds.push(result);
    }
    let evals: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(CvResult { summary: MetricSummary::of(&evals)?, folds, predictions })
}

/// Cross-validation repeated with one stratified plan per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedCv {
    pub seeds: Vec<u64>,
    pub runs: Vec<CvResult>,
    /// Over all fold × run evaluations.
    pub summary: MetricSummary,
}

pub fn repeated_cv<T: Trainer>(trainer: &T, dataset: &LupiDataset, n_folds: usize, seeds: &[u64], exec: Execution) -> Result<RepeatedCv> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let plan = stratified_folds(dataset.labels(), n_folds, seed)?;
        runs.push(cross_validate_with(trainer, dataset, &plan, exec)?);
    }
    let evals: Vec<Metrics> = runs.iter().flat_map(|r| r.folds.iter().map(|f| f.metrics)).collect();
    Ok(RepeatedCv { seeds: seeds.to_vec(), summary: MetricSummary::of(&evals)?, runs })
}

/// Values a single hyperparameter can take.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain {
    Values(Vec<f64>),
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub params: Vec<(String, ParamDomain)>,
    pub strategy: Strategy,
    /// Number of sampled configurations for random search.
    pub budget: usize,
    pub seed: u64,
}

/// One configuration: parameter names with values, in space order.
pub type ParamSet = Vec<(String, f64)>;

impl SearchSpace {
    pub fn grid(params: Vec<(String, Vec<f64>)>) -> Self {
        SearchSpace {
            params: params.into_iter().map(|(k, v)| (k, ParamDomain::Values(v))).collect(),
            strategy: Strategy::Grid,
            budget: 1,
            seed: 0,
        }
    }

    /// Configurations in evaluation order.
    pub fn configurations(&self) -> Result<Vec<ParamSet>> {
        if self.params.is_empty() {
            return Err(Error::invalid("search space is empty"));
        }
        match self.strategy {
            Strategy::Grid => {
                let mut out: Vec<ParamSet> = vec![Vec::new()];
                for (name, domain) in &self.params {
                    let ParamDomain::Values(values) = domain else {
                        return Err(Error::invalid(format!("grid search needs explicit values for '{name}'")));
                    };
                    if values.is_empty() {
                        return Err(Error::invalid(format!("no values for '{name}'")));
                    }
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            values.iter().map(move |&v| {
                                let mut next = prefix.clone();
                                next.push((name.clone(), v));
                                next
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
            Strategy::Random => {
                if self.budget == 0 {
                    return Err(Error::invalid("search budget must be at least 1"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..self.budget)
                    .map(|_| {
                        self.params
                            .iter()
                            .map(|(name, domain)| Ok((name.clone(), sample(domain, &mut rng)?)))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

fn sample(domain: &ParamDomain, rng: &mut ChaCha8Rng) -> Result<f64> {
    match *domain {
        ParamDomain::Values(ref v) if !v.is_empty() => Ok(v[rng.random_range(0..v.len())]),
        ParamDomain::Values(_) => Err(Error::invalid("empty value list")),
        ParamDomain::Uniform { low, high } if low <= high => Ok(low + (high - low) * rng.random::<f64>()),
        ParamDomain::LogUniform { low, high } if 0.0 < low && low <= high => {
            Ok((low.ln() + (high.ln() - low.ln()) * rng.random::<f64>()).exp())
        }
        _ => Err(Error::invalid("invalid parameter range")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardEntry {
    pub params: ParamSet,
    pub result: std::result::Result<MetricSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: ParamSet,
    pub best_summary: MetricSummary,
    pub leaderboard: Vec<LeaderboardEntry>,
}

impl SearchResult {
    /// `param…,accuracy_mean,accuracy_std,status`, one row per configuration.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.leaderboard.first() {
            for (name, _) in &first.params {
                let _ = write!(out, "{name},");
            }
        }
        out.push_str("accuracy_mean,accuracy_std,status\n");
        for e in &self.leaderboard {
            for (_, v) in &e.params {
                let _ = write!(out, "{v},");
            }
            match &e.result {
                Ok(s) => {
                    let _ = writeln!(out, "{},{},ok", s.accuracy.mean, s.accuracy.std);
                }
                Err(msg) => {
                    let _ = writeln!(out, ",,failed: {}", msg.replace(',', ";"));
                }
            }
        }
        out
    }
}

/// Evaluate every configuration under the same fold plan and keep the one with
/// the highest mean accuracy, ties to the first evaluated.
pub fn search<F, T>(space: &SearchSpace, factory: F, dataset: &LupiDataset, plan: &SplitPlan, exec: Execution) -> Result<SearchResult>
where
    F: Fn(&ParamSet) -> Result<T> + Sync,
    T: Trainer,
{
    let configs = space.configurations()?;
    // Configurations run concurrently; folds inside each stay sequential.
    let results = par::map_slice(exec, &configs, |params| {
        factory(params).and_then(|t| cross_validate_with(&t, dataset, plan, Execution::Sequential))
    });
    let mut leaderboard = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, MetricSummary)> = None;
    for (i, (params, r)) in configs.into_iter().zip(results).enumerate() {
        let result = match r {
            Ok(cv) => {
                if best.as_ref().is_none_or(|(_, b)| cv.summary.accuracy.mean > b.accuracy.mean) {
                    best = Some((i, cv.summary.clone()));
                }
                Ok(cv.summary)
            }
            Err(e) => Err(e.to_string()),
        };
        leaderboard.push(LeaderboardEntry { params, result });
    }
    let (i, best_summary) = best.ok_or(Error::AllConfigsFailed)?;
    Ok(SearchResult { best: leaderboard[i].params.clone(), best_summary, leaderboard })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub name: String,
    pub summary: MetricSummary,
    /// `(err_baseline − err_model) / err_baseline`; `None` when the baseline
    /// makes no errors.
    pub relative_error_decrease: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ModelRow>,
    pub baseline_index: usize,
    pub runs: usize,
    pub seeds: Vec<u64>,
}

pub fn relative_error_decrease(baseline_error: f64, candidate_error: f64) -> Option<f64> {
    (baseline_error > 0.0).then(|| (baseline_error - candidate_error) / baseline_error)
}

/// Report from per-model summaries that share one evaluation protocol.
pub fn comparison_from_summaries(named: Vec<(String, MetricSummary)>, baseline_index: usize, runs: usize, seeds: Vec<u64>) -> Result<ComparisonReport> {
    let baseline = named
        .get(baseline_index)
        .ok_or_else(|| Error::invalid(format!("baseline index {baseline_index} is out of range")))?;
    let base_err = 1.0 - baseline.1.accuracy.mean;
    let rows = named
        .into_iter()
        .map(|(name, summary)| ModelRow {
            relative_error_decrease: relative_error_decrease(base_err, 1.0 - summary.accuracy.mean),
            name,
            summary,
        })
        .collect();
    Ok(ComparisonReport { rows, baseline_index, runs, seeds })
}

/// Score trained models on one shared test set.
pub fn compare(models: &[(&str, &dyn Predictor)], test: &LupiDataset, baseline_index: usize) -> Result<ComparisonReport> {
    let truth = test.binary_labels()?;
    let mut named = Vec::with_capacity(models.len());
    for (name, model) in models {
        let predicted = model.predict(test.standard())?;
        let m = metrics(&ConfusionCounts::from_labels(truth, &predicted)?)?;
        named.push((name.to_string(), MetricSummary::of(&[m])?));
    }
    comparison_from_summaries(named, baseline_index, 1, Vec::new())
}

fn opt_stat(s: &Option<Stat>) -> (String, String) {
    match s {
        Some(s) => (s.mean.to_string(), s.std.to_string()),
        None => (String::new(), String::new()),
    }
}

impl ComparisonReport {
    /// Comma-separated table with the columns
    /// `model,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,relative_error_decrease`.
    /// Undefined values are left empty.
    pub fn to_table(&self) -> String {
        let mut out = String::from(
            "model,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,relative_error_decrease\n",
        );
        for row in &self.rows {
            let (pm, ps) = opt_stat(&row.summary.precision);
            let (rm, rs) = opt_stat(&row.summary.recall);
            let red = row.relative_error_decrease.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{pm},{ps},{rm},{rs},{red}",
                row.name, row.summary.accuracy.mean, row.summary.accuracy.std
            );
        }
        out
    }

    /// Human-readable block with percentages.
    pub fn summary(&self) -> String {
        let pct = |s: &Option<Stat>| match s {
            Some(s) => format!("{:6.2} ± {:5.2}", 100.0 * s.mean, 100.0 * s.std),
            None => format!("{:>15}", "n/a"),
        };
        let mut out = String::new();
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "runs: {}  seeds: [{seeds}]", self.runs);
        let _ = writeln!(out, "baseline: {}", self.rows[self.baseline_index].name);
        let _ = writeln!(out, "{:<16} {:>15} {:>15} {:>15} {:>10}", "model", "accuracy %", "precision %", "recall %", "rel. err. ↓");
        for row in &self.rows {
            let red = row.relative_error_decrease.map(|v| format!("{:.2}%", 100.0 * v)).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                out,
                "{:<16} {} {} {} {:>10}",
                row.name,
                pct(&Some(row.summary.accuracy)),
                pct(&row.summary.precision),
                pct(&row.summary.recall),
                red
            );
        }
        out
    }
}
