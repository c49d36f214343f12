//! Model influence: the SVM+ dual.
//!
//! The privileged kernel `K*` enters only through the training objective, where
//! it models the slack of each training point. The resulting decision rule is
//! `sign(Σ yᵢαᵢK(xᵢ, z) + B)` over standard features alone.
//!
//! With `z = (α, δ)` the dual is assembled as the standard-form QP
//!
//! ```text
//! H = | K∘yyᵀ + γK*∘yyᵀ   −γK*∘yyᵀ |     f = (−1, …, −1, 0, …, 0)
//!     | −γK*∘yyᵀ           γK*∘yyᵀ |
//!
//! Aeq = | yᵀ 0  |   beq = 0,   0 ≤ α ≤ κC,   0 ≤ δ ≤ C
//!       | 0  yᵀ |
//! ```

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};

use crate::dataset::LupiDataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::Execution;
use crate::qp::{self, KktReport, QpProblem};
use crate::svm::{check_binary, kkt_bias, sign_label, support_decision, BiasCandidate, SolverOptions};

/// Per-sample costs `Cᵢ`, usually one value broadcast to every row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    Scalar(f64),
    PerSample(Vec<f64>),
}

impl Cost {
    fn expand(&self, n: usize) -> Result<Vec<f64>> {
        let costs = match self {
            Cost::Scalar(c) => vec![*c; n],
            Cost::PerSample(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: v.len() });
                }
                v.clone()
            }
        };
        if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("every C must be positive"));
        }
        Ok(costs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmPlusConfig {
    /// `K`, over standard features.
    pub kernel_standard: KernelSpec,
    /// `K*`, over privileged features.
    pub kernel_privileged: KernelSpec,
    pub kappa: f64,
    pub gamma: f64,
    pub c: Cost,
}

impl SvmPlusConfig {
    pub fn new(kernel_standard: KernelSpec, kernel_privileged: KernelSpec, c: f64, kappa: f64, gamma: f64) -> Self {
        SvmPlusConfig { kernel_standard, kernel_privileged, kappa, gamma, c: Cost::Scalar(c) }
    }

    fn validate(&self) -> Result<()> {
        self.kernel_standard.validate()?;
        self.kernel_privileged.validate()?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("kappa must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmPlusModel {
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub bias: f64,
    pub support_rows_standard: Array2<f64>,
    pub support_labels: Vec<i32>,
    pub support_alphas: Vec<f64>,
    pub kernel_standard: KernelSpec,
    /// Recorded for audit only; prediction never evaluates `K*`.
    pub kernel_privileged: KernelSpec,
    pub kappa: f64,
    pub gamma: f64,
    pub costs: Vec<f64>,
    pub solve_report: KktReport,
}

/// Standard-form QP from precomputed Gram matrices.
pub fn assemble_qp_from_grams(
    gram: &Array2<f64>,
    gram_privileged: &Array2<f64>,
    labels: &[i32],
    kappa: f64,
    gamma: f64,
    costs: &[f64],
) -> Result<QpProblem> {
    let l = labels.len();
    if gram.dim() != (l, l) || gram_privileged.dim() != (l, l) || costs.len() != l {
        return Err(Error::invalid("Gram matrices and costs must match the label count"));
    }
    let yy = |i: usize, j: usize| (labels[i] * labels[j]) as f64;
    let h = DMatrix::from_fn(2 * l, 2 * l, |r, c| {
        let (i, j) = (r % l, c % l);
        let star = gamma * gram_privileged[[i, j]] * yy(i, j);
        match (r < l, c < l) {
            (true, true) => gram[[i, j]] * yy(i, j) + star,
            (true, false) | (false, true) => -star,
            (false, false) => star,
        }
    });
    let f = DVector::from_fn(2 * l, |r, _| if r < l { -1.0 } else { 0.0 });
    let aeq = DMatrix::from_fn(2, 2 * l, |row, c| match (row, c < l) {
        (0, true) | (1, false) => labels[c % l] as f64,
        _ => 0.0,
    });
    let lb = DVector::zeros(2 * l);
    let ub = DVector::from_fn(2 * l, |r, _| if r < l { kappa * costs[r] } else { costs[r - l] });
    QpProblem::new(h, f, aeq, DVector::zeros(2), lb, ub)
}

fn grams(dataset: &LupiDataset, config: &SvmPlusConfig, exec: Execution) -> Result<(Array2<f64>, Array2<f64>)> {
    let k = config.kernel_standard.gram_with(dataset.standard(), exec)?;
    let k_star = config.kernel_privileged.gram_with(dataset.privileged(), exec)?;
    Ok((k, k_star))
}

fn checked_inputs(dataset: &LupiDataset, config: &SvmPlusConfig) -> Result<Vec<f64>> {
    dataset.require_privileged()?;
    config.validate()?;
    dataset.binary_labels()?;
    config.c.expand(dataset.n_rows())
}

pub fn assemble_qp(dataset: &LupiDataset, config: &SvmPlusConfig) -> Result<QpProblem> {
    let costs = checked_inputs(dataset, config)?;
    let (k, k_star) = grams(dataset, config, Execution::default())?;
    assemble_qp_from_grams(&k, &k_star, dataset.labels(), config.kappa, config.gamma, &costs)
}

pub fn train_svmplus(dataset: &LupiDataset, config: &SvmPlusConfig, tol: f64) -> Result<SvmPlusModel> {
    train_svmplus_with(dataset, config, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn train_svmplus_with(dataset: &LupiDataset, config: &SvmPlusConfig, opts: &SolverOptions) -> Result<SvmPlusModel> {
    let costs = checked_inputs(dataset, config)?;
    let labels = dataset.labels();
    check_binary(labels)?;
    let l = labels.len();
    let (k, k_star) = grams(dataset, config, opts.exec)?;
    let problem = assemble_qp_from_grams(&k, &k_star, labels, config.kappa, config.gamma, &costs)?;
    let sol = qp::solve(&problem, opts.tol, opts.max_iter_for(2 * l))?;
    let alphas: Vec<f64> = sol.z.rows(0, l).iter().copied().collect();
    let deltas: Vec<f64> = sol.z.rows(l, l).iter().copied().collect();

    let margin = 10.0 * opts.tol;
    let candidates: Vec<BiasCandidate> = (0..l)
        .map(|j| {
            let upper = config.kappa * costs[j];
            BiasCandidate {
                label: labels[j],
                alpha: alphas[j],
                alpha_upper: upper,
                value: bias_at(&k, &k_star, labels, &alphas, &deltas, config.gamma, j),
                preferred: alphas[j] > margin
                    && alphas[j] < upper - margin
                    && deltas[j] > margin
                    && deltas[j] < costs[j] - margin,
            }
        })
        .collect();
    let bias = kkt_bias(&candidates, opts.tol)?;

    let support: Vec<usize> = (0..l).filter(|&i| alphas[i] > 1e-12 * config.kappa * costs[i]).collect();
    Ok(SvmPlusModel {
        support_rows_standard: dataset.standard().select(Axis(0), &support),
        support_labels: support.iter().map(|&i| labels[i]).collect(),
        support_alphas: support.iter().map(|&i| alphas[i]).collect(),
        alphas,
        deltas,
        bias,
        kernel_standard: config.kernel_standard,
        kernel_privileged: config.kernel_privileged,
        kappa: config.kappa,
        gamma: config.gamma,
        costs,
        solve_report: sol.kkt,
    })
}

/// `B = yⱼ(1 − Σᵢ yᵢyⱼK(xᵢ,xⱼ)αᵢ − γ Σᵢ yᵢyⱼK*(xᵢ*,xⱼ*)(αᵢ − δᵢ))`, valid when
/// row `j` has both duals strictly inside their boxes.
pub fn bias_at(
    gram: &Array2<f64>,
    gram_privileged: &Array2<f64>,
    labels: &[i32],
    alphas: &[f64],
    deltas: &[f64],
    gamma: f64,
    j: usize,
) -> f64 {
    let yj = labels[j] as f64;
    let mut main = 0.0;
    let mut correction = 0.0;
    for i in 0..labels.len() {
        let yy = labels[i] as f64 * yj;
        main += yy * gram[[i, j]] * alphas[i];
        correction += yy * gram_privileged[[i, j]] * (alphas[i] - deltas[i]);
    }
    yj * (1.0 - main - gamma * correction)
}

impl SvmPlusModel {
    pub fn n_features(&self) -> usize {
        self.support_rows_standard.ncols()
    }

    pub fn decision_values(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        support_decision(
            &self.kernel_standard,
            &self.support_rows_standard,
            &self.support_labels,
            &self.support_alphas,
            self.bias,
            standard_rows,
            Execution::default(),
        )
    }

    pub fn predict(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        Ok(self.decision_values(standard_rows)?.into_iter().map(sign_label).collect())
    }

    /// Predict for a dataset; only its standard block is read.
    pub fn predict_dataset(&self, dataset: &LupiDataset) -> Result<Vec<i32>> {
        self.predict(dataset.standard())
    }
}

/// Labels and raw decision values from standard features.
pub fn predict_svmplus(model: &SvmPlusModel, standard_rows: ArrayView2<'_, f64>) -> Result<(Vec<i32>, Vec<f64>)> {
    let raw = model.decision_values(standard_rows)?;
    Ok((raw.iter().copied().map(sign_label).collect(), raw))
}
