//! Greedy forward selection of privileged features by their out-of-fold accuracy
//! gain on hard-to-classify examples.

use std::fmt::Write as _;

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::dataset::{stratified_folds, LupiDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::{self, Execution};
use crate::svm::{self, check_binary, sign_label, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Upper bound on chosen columns; clamped to the candidate count.
    pub max_features: usize,
    pub min_gain: f64,
    pub hard_margin_tau: f64,
    pub evaluator_kernel: KernelSpec,
    pub evaluator_c: f64,
    pub n_folds: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_features: usize::MAX,
            min_gain: 0.01,
            hard_margin_tau: 1.0,
            evaluator_kernel: KernelSpec::Linear,
            evaluator_c: 1.0,
            n_folds: 5,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

impl SelectionConfig {
    fn validate(&self) -> Result<()> {
        self.evaluator_kernel.validate()?;
        if self.n_folds < 2 {
            return Err(Error::invalid("selection needs at least two folds"));
        }
        if !(self.hard_margin_tau > 0.0) {
            return Err(Error::invalid("hard_margin_tau must be positive"));
        }
        if !(self.evaluator_c > 0.0 && self.evaluator_c.is_finite()) {
            return Err(Error::invalid("evaluator C must be positive"));
        }
        if self.min_gain.is_nan() {
            return Err(Error::invalid("min_gain must be a number"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Privileged column indices in the order they were accepted.
    pub chosen: Vec<usize>,
    pub gains: Vec<f64>,
    pub hard_set_size: usize,
    /// Hard-set accuracy of the standard features alone, then after each step.
    pub accuracies: Vec<f64>,
    pub note: Option<String>,
}

impl SelectionResult {
    /// Plain-text report naming the chosen columns.
    pub fn report(&self, privileged_names: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "hard_set_size\t{}", self.hard_set_size);
        if let Some(acc) = self.accuracies.first() {
            let _ = writeln!(out, "baseline_hard_accuracy\t{acc}");
        }
        let _ = writeln!(out, "step\tcolumn\tname\tgain\thard_accuracy");
        for (step, (&col, &gain)) in self.chosen.iter().zip(&self.gains).enumerate() {
            let name = privileged_names.get(col).map(String::as_str).unwrap_or("?");
            let _ = writeln!(out, "{}\t{col}\t{name}\t{gain}\t{}", step + 1, self.accuracies[step + 1]);
        }
        if let Some(note) = &self.note {
            let _ = writeln!(out, "note\t{note}");
        }
        out
    }
}

/// Out-of-fold raw SVM decision values for every row.
fn out_of_fold_decisions(features: ArrayView2<'_, f64>, labels: &[i32], plan: &SplitPlan, config: &SelectionConfig, exec: Execution) -> Result<Vec<f64>> {
    let opts = SolverOptions { exec, ..SolverOptions::default() };
    let mut raw = vec![0.0; labels.len()];
    for fold in 0..plan.n_folds {
        let (train, test) = plan.split(fold);
        let xt = features.select(Axis(0), &train);
        let yt: Vec<i32> = train.iter().map(|&i| labels[i]).collect();
        let model = svm::train_svm_with(xt.view(), &yt, config.evaluator_kernel, config.evaluator_c, &opts)
            .map_err(|e| Error::Fold { fold, source: Box::new(e) })?;
        let values = model.decision_values(features.select(Axis(0), &test).view())?;
        for (&i, v) in test.iter().zip(values) {
            raw[i] = v;
        }
    }
    Ok(raw)
}

/// Rows misclassified out-of-fold or with `|decision| < tau`, ascending.
pub fn find_hard_examples(standard: ArrayView2<'_, f64>, labels: &[i32], config: &SelectionConfig) -> Result<Vec<usize>> {
    config.validate()?;
    check_binary(labels)?;
    let plan = stratified_folds(labels, config.n_folds, config.seed)?;
    let raw = out_of_fold_decisions(standard, labels, &plan, config, config.exec)?;
    Ok((0..labels.len())
        .filter(|&i| sign_label(raw[i]) != labels[i] || raw[i].abs() < config.hard_margin_tau)
        .collect())
}

/// `[standard | privileged[:, columns]]`.
fn feature_block(dataset: &LupiDataset, columns: &[usize]) -> Array2<f64> {
    let extra = dataset.privileged().select(Axis(1), columns);
    concatenate(Axis(1), &[dataset.standard(), extra.view()]).expect("row counts agree")
}

/// Out-of-fold accuracy on `hard` of the evaluator trained on the standard
/// columns plus the listed privileged columns.
pub fn hard_set_accuracy(dataset: &LupiDataset, columns: &[usize], hard: &[usize], config: &SelectionConfig) -> Result<f64> {
    let plan = stratified_folds(dataset.labels(), config.n_folds, config.seed)?;
    hard_accuracy_with(dataset, columns, hard, &plan, config, config.exec)
}

fn hard_accuracy_with(
    dataset: &LupiDataset,
    columns: &[usize],
    hard: &[usize],
    plan: &SplitPlan,
    config: &SelectionConfig,
    exec: Execution,
) -> Result<f64> {
    let labels = dataset.labels();
    let raw = out_of_fold_decisions(feature_block(dataset, columns).view(), labels, plan, config, exec)?;
    let correct = hard.iter().filter(|&&i| sign_label(raw[i]) == labels[i]).count();
    Ok(correct as f64 / hard.len() as f64)
}

pub fn select_privileged(dataset: &LupiDataset, config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate()?;
    let labels = dataset.binary_labels()?;
    check_binary(labels)?;
    let hard = find_hard_examples(dataset.standard(), labels, config)?;
    if hard.is_empty() {
        return Ok(SelectionResult {
            chosen: Vec::new(),
            gains: Vec::new(),
            hard_set_size: 0,
            accuracies: Vec::new(),
            note: Some("no hard examples: standard features already classify every row with margin".into()),
        });
    }
    let plan = stratified_folds(labels, config.n_folds, config.seed)?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut gains = Vec::new();
    let mut current = hard_accuracy_with(dataset, &chosen, &hard, &plan, config, config.exec)?;
    let mut accuracies = vec![current];
    let limit = config.max_features.min(dataset.n_privileged());
    // Candidates run concurrently; each evaluator stays sequential inside.
    let inner = Execution::Sequential;
    while chosen.len() < limit {
        let remaining: Vec<usize> = (0..dataset.n_privileged()).filter(|c| !chosen.contains(c)).collect();
        let scores = par::map_slice(config.exec, &remaining, |&c| {
            let mut cols = chosen.clone();
            cols.push(c);
            hard_accuracy_with(dataset, &cols, &hard, &plan, config, inner)
        });
        let mut best: Option<(usize, f64)> = None;
        for (&c, score) in remaining.iter().zip(scores) {
            let score = score?;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((c, score));
            }
        }
        let Some((col, acc)) = best else { break };
        let gain = acc - current;
        if gain < config.min_gain {
            break;
        }
        chosen.push(col);
        gains.push(gain);
        accuracies.push(acc);
        current = acc;
    }
    Ok(SelectionResult { chosen, gains, hard_set_size: hard.len(), accuracies, note: None })
}
