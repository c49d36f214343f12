//! Soft-margin kernel SVM trained through its dual. This is the standard-set and
//! complete-set baseline, and the evaluator used by feature selection.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::Execution;
use crate::qp::{self, KktReport, QpProblem};

/// Solver settings shared by the SVM-family trainers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` means `100 × dimension`.
    pub max_iter: Option<usize>,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: qp::DEFAULT_TOL, max_iter: None, exec: Execution::default() }
    }
}

impl SolverOptions {
    pub(crate) fn max_iter_for(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(100 * dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Dual variables for every training row.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_rows: Array2<f64>,
    pub support_labels: Vec<i32>,
    pub support_alphas: Vec<f64>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub kkt: KktReport,
}

/// `+1` for non-negative decision values, `-1` otherwise.
pub fn sign_label(value: f64) -> i32 {
    if value >= 0.0 {
        1
    } else {
        -1
    }
}

pub(crate) fn check_binary(labels: &[i32]) -> Result<()> {
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::invalid("SVM labels must be -1 or +1"));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Per-row data for the bias computation.
pub(crate) struct BiasCandidate {
    pub label: i32,
    pub alpha: f64,
    pub alpha_upper: f64,
    /// Value the bias must take if this row's α is strictly inside its box.
    pub value: f64,
    /// Row qualifies for the direct formula (α, and δ for SVM+, strictly interior).
    pub preferred: bool,
}

/// Bias from the rows with interior duals, falling back to the midpoint of
/// the interval implied by the bound-active rows.
pub(crate) fn kkt_bias(rows: &[BiasCandidate], tol: f64) -> Result<f64> {
    let preferred: Vec<f64> = rows.iter().filter(|r| r.preferred).map(|r| r.value).collect();
    if !preferred.is_empty() {
        return Ok(preferred.iter().sum::<f64>() / preferred.len() as f64);
    }
    let margin = 10.0 * tol;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut scale = 1.0f64;
    for r in rows {
        scale = scale.max(r.value.abs());
        let at_lower = r.alpha <= margin;
        let at_upper = r.alpha >= r.alpha_upper - margin;
        match (at_lower, at_upper, r.label > 0) {
            (false, false, _) => {
                lower = lower.max(r.value);
                upper = upper.min(r.value);
            }
            (true, _, true) | (false, true, false) => lower = lower.max(r.value),
            (true, _, false) | (false, true, true) => upper = upper.min(r.value),
        }
    }
    let slack = 1e3 * tol * scale;
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) if lower <= upper + slack => Ok(0.5 * (lower + upper)),
        (true, true) => Err(Error::EmptyBiasInterval { lower, upper }),
        (true, false) => Ok(lower),
        (false, true) => Ok(upper),
        (false, false) => Err(Error::EmptyBiasInterval { lower, upper }),
    }
}

/// Dual problem `min ½αᵀ(yyᵀ∘K)α − 1ᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`.
pub fn assemble_svm_qp(gram: &Array2<f64>, labels: &[i32], c: f64) -> Result<QpProblem> {
    let n = labels.len();
    let h = DMatrix::from_fn(n, n, |i, j| gram[[i, j]] * (labels[i] * labels[j]) as f64);
    let aeq = DMatrix::from_fn(1, n, |_, j| labels[j] as f64);
    QpProblem::new(
        h,
        DVector::from_element(n, -1.0),
        aeq,
        DVector::zeros(1),
        DVector::zeros(n),
        DVector::from_element(n, c),
    )
}

pub fn train_svm(standard: ArrayView2<'_, f64>, labels: &[i32], kernel: KernelSpec, c: f64) -> Result<SvmModel> {
    train_svm_with(standard, labels, kernel, c, &SolverOptions::default())
}

pub fn train_svm_with(
    standard: ArrayView2<'_, f64>,
    labels: &[i32],
    kernel: KernelSpec,
    c: f64,
    opts: &SolverOptions,
) -> Result<SvmModel> {
    if standard.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: standard.nrows() });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("C must be positive"));
    }
    kernel.validate()?;
    check_binary(labels)?;
    let n = labels.len();
    let gram = kernel.gram_with(standard, opts.exec)?;
    let problem = assemble_svm_qp(&gram, labels, c)?;
    let sol = qp::solve(&problem, opts.tol, opts.max_iter_for(n))?;
    let alphas: Vec<f64> = sol.z.iter().copied().collect();

    let margin = 10.0 * opts.tol;
    let candidates: Vec<BiasCandidate> = (0..n)
        .map(|i| {
            let f_i: f64 = (0..n).map(|k| gram[[i, k]] * labels[k] as f64 * alphas[k]).sum();
            BiasCandidate {
                label: labels[i],
                alpha: alphas[i],
                alpha_upper: c,
                value: labels[i] as f64 - f_i,
                preferred: alphas[i] > margin && alphas[i] < c - margin,
            }
        })
        .collect();
    let bias = kkt_bias(&candidates, opts.tol)?;

    let support: Vec<usize> = (0..n).filter(|&i| alphas[i] > 1e-12 * c).collect();
    Ok(SvmModel {
        support_rows: standard.select(Axis(0), &support),
        support_labels: support.iter().map(|&i| labels[i]).collect(),
        support_alphas: support.iter().map(|&i| alphas[i]).collect(),
        alphas,
        bias,
        kernel,
        c,
        kkt: sol.kkt,
    })
}

/// Raw decision values `Σ yᵢαᵢK(xᵢ, z) + b` from stored support data.
pub(crate) fn support_decision(
    kernel: &KernelSpec,
    support_rows: &Array2<f64>,
    support_labels: &[i32],
    support_alphas: &[f64],
    bias: f64,
    rows: ArrayView2<'_, f64>,
    exec: Execution,
) -> Result<Vec<f64>> {
    if rows.ncols() != support_rows.ncols() {
        return Err(Error::DimensionMismatch { expected: support_rows.ncols(), found: rows.ncols() });
    }
    if support_rows.nrows() == 0 {
        return Ok(vec![bias; rows.nrows()]);
    }
    let k = kernel.cross_gram_with(rows, support_rows.view(), exec)?;
    Ok(k.rows()
        .into_iter()
        .map(|kr| {
            kr.iter()
                .zip(support_labels.iter().zip(support_alphas))
                .map(|(kv, (&y, &a))| kv * y as f64 * a)
                .sum::<f64>()
                + bias
        })
        .collect())
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_rows.ncols()
    }

    pub fn decision_values(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        support_decision(
            &self.kernel,
            &self.support_rows,
            &self.support_labels,
            &self.support_alphas,
            self.bias,
            rows,
            Execution::default(),
        )
    }

    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        Ok(self.decision_values(rows)?.into_iter().map(sign_label).collect())
    }
}

/// Labels and raw decision values.
pub fn predict_svm(model: &SvmModel, rows: ArrayView2<'_, f64>) -> Result<(Vec<i32>, Vec<f64>)> {
    let raw = model.decision_values(rows)?;
    Ok((raw.iter().copied().map(sign_label).collect(), raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, Scenario, SynthSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, concatenate};

    fn one_d() -> SvmModel {
        train_svm(array![[-1.0], [1.0]].view(), &[-1, 1], KernelSpec::Linear, 10.0).unwrap()
    }

    #[test]
    fn hand_solved_two_point_dual() {
        // Dual: maximize a1 + a2 − ½(a1 + a2)² with a1 = a2, optimum a = 1/2.
        let m = one_d();
        assert_abs_diff_eq!(m.alphas[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(m.alphas[1], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-8);
        let (labels, raw) = predict_svm(&m, array![[2.0], [0.0], [-3.0]].view()).unwrap();
        assert_abs_diff_eq!(raw[0], 2.0, epsilon = 1e-8);
        assert_eq!(labels[0], 1);
        assert_eq!(labels[2], -1);
        assert_abs_diff_eq!(raw[2], -3.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_decision_is_positive() {
        assert_eq!(sign_label(0.0), 1);
        assert_eq!(sign_label(-0.0), 1);
        let m = SvmModel { bias: 0.0, ..one_d() };
        let exact = SvmModel { support_alphas: vec![0.5, 0.5], ..m };
        assert_eq!(exact.predict(array![[0.0]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn duplicated_rows_give_same_decisions() {
        let x = array![[-2.0, 0.5], [-1.0, -1.0], [1.5, 0.0], [2.0, 1.0], [-1.5, 1.0], [1.0, -0.5]];
        let y = [-1, -1, 1, 1, -1, 1];
        let kernel = KernelSpec::rbf(0.5).unwrap();
        let single = train_svm(x.view(), &y, kernel, 100.0).unwrap();
        let xx = concatenate![Axis(0), x, x];
        let yy: Vec<i32> = y.iter().chain(y.iter()).copied().collect();
        let double = train_svm(xx.view(), &yy, kernel, 100.0).unwrap();
        let probe = Array2::from_shape_fn((25, 2), |(i, j)| if j == 0 { (i % 5) as f64 - 2.0 } else { (i / 5) as f64 - 2.0 });
        let a = single.decision_values(probe.view()).unwrap();
        let b = double.decision_values(probe.view()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_single_class_and_bad_dimensions() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(train_svm(x.view(), &[1, 1], KernelSpec::Linear, 1.0), Err(Error::SingleClass)));
        assert!(train_svm(x.view(), &[1, -1], KernelSpec::Linear, 0.0).is_err());
        let m = one_d();
        assert!(matches!(m.predict(array![[1.0, 2.0]].view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dual_feasibility_and_margins_on_separable_data() {
        let mut spec = SynthSpec::new(Scenario::Gauss2d, 60, 5);
        spec.noise_std_standard = 0.3;
        let ds = make_synthetic(&spec).unwrap();
        let y = ds.labels();
        let m = train_svm(ds.standard(), y, KernelSpec::Linear, 1e4).unwrap();
        let eq: f64 = m.alphas.iter().zip(y).map(|(a, &l)| a * l as f64).sum();
        assert!(eq.abs() <= 1e-6);
        assert!(m.alphas.iter().all(|&a| (0.0..=m.c).contains(&a)));
        let raw = m.decision_values(ds.standard()).unwrap();
        for (r, &l) in raw.iter().zip(y) {
            assert!(l as f64 * r >= 1.0 - 1e-4, "margin {}", l as f64 * r);
        }
        assert_eq!(m.predict(ds.standard()).unwrap(), m.predict(ds.standard()).unwrap());
    }

    #[test]
    fn bias_interval_fallback() {
        // Two α at the upper bound: y=+1 gives b ≤ 0.3, y=−1 gives b ≥ −0.1.
        let rows = [
            BiasCandidate { label: 1, alpha: 1.0, alpha_upper: 1.0, value: 0.3, preferred: false },
            BiasCandidate { label: -1, alpha: 1.0, alpha_upper: 1.0, value: -0.1, preferred: false },
        ];
        assert_abs_diff_eq!(kkt_bias(&rows, 1e-6).unwrap(), 0.1, epsilon = 1e-15);
        let inconsistent = [
            BiasCandidate { label: 1, alpha: 1.0, alpha_upper: 1.0, value: -5.0, preferred: false },
            BiasCandidate { label: -1, alpha: 1.0, alpha_upper: 1.0, value: 5.0, preferred: false },
        ];
        assert!(matches!(kkt_bias(&inconsistent, 1e-6), Err(Error::EmptyBiasInterval { .. })));
    }
}
