//! Knowledge transfer: one mapping function per privileged feature, fitted on
//! standard features at training time and used to synthesize that feature at
//! run-time for a complete-set SVM.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::LupiDataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::{self, Execution};
use crate::svm::{self, SolverOptions, SvmModel};

const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingKind {
    Regression,
    Similarity,
}

impl MappingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingKind::Regression => "regression",
            MappingKind::Similarity => "similarity",
        }
    }
}

impl std::str::FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(MappingKind::Regression),
            "similarity" => Ok(MappingKind::Similarity),
            other => Err(Error::invalid(format!("unknown mapping kind '{other}'"))),
        }
    }
}

/// Polynomial in per-coordinate powers: `intercept + Σ_c Σ_p coef[c·degree + p − 1] · x_c^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyRegressor {
    pub degree: u32,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

/// Lazy k-nearest-neighbour estimator with `1/d` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSimilarity {
    pub k: usize,
    pub stored_standard: Array2<f64>,
    pub stored_privileged: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Poly(PolyRegressor),
    Similarity(WeightedSimilarity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingFunctionSet {
    pub per_feature: Vec<Estimator>,
    /// Standard columns fed to each estimator.
    pub input_columns: Vec<Vec<usize>>,
    /// Width of the standard block the set was fitted on.
    pub n_standard: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KtModel {
    pub kind: MappingKind,
    pub mappings: MappingFunctionSet,
    pub downstream: SvmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KtHyper {
    pub max_degree: u32,
    pub k: usize,
    /// Cap on rows stored by the similarity estimator.
    pub subsample_cap: usize,
    /// Keep only the `p` standard columns most correlated with each target.
    pub top_p: Option<usize>,
    pub seed: u64,
}

impl Default for KtHyper {
    fn default() -> Self {
        KtHyper { max_degree: 3, k: 5, subsample_cap: 5000, top_p: None, seed: 0 }
    }
}

fn basis(rows: ArrayView2<'_, f64>, degree: u32) -> DMatrix<f64> {
    let d = rows.ncols();
    let deg = degree as usize;
    DMatrix::from_fn(rows.nrows(), d * deg + 1, |i, j| {
        if j == d * deg {
            1.0
        } else {
            rows[[i, j / deg]].powi((j % deg) as i32 + 1)
        }
    })
}

fn least_squares(rows: ArrayView2<'_, f64>, target: ArrayView1<'_, f64>, degree: u32) -> Result<PolyRegressor> {
    let phi = basis(rows, degree);
    let (n, p) = phi.shape();
    // Ridge as extra rows, so the SVD sees [Φ; √ρ I].
    let mut a = DMatrix::zeros(n + p, p);
    a.view_mut((0, 0), (n, p)).copy_from(&phi);
    for j in 0..p {
        a[(n + j, j)] = RIDGE.sqrt();
    }
    let mut b = DVector::zeros(n + p);
    for i in 0..n {
        b[i] = target[i];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax.is_finite()) || svd.singular_values.min() <= smax * 1e-15 {
        return Err(Error::RankDeficient);
    }
    let beta = svd.solve(&b, 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(PolyRegressor {
        degree,
        coefficients: beta.rows(0, p - 1).iter().copied().collect(),
        intercept: beta[p - 1],
    })
}

fn degree_cap(n: usize, max_degree: u32) -> Result<u32> {
    if max_degree < 1 {
        return Err(Error::invalid("max_degree must be at least 1"));
    }
    if n < 2 {
        return Err(Error::invalid("polynomial regression needs at least two samples"));
    }
    let cap = max_degree.min((n - 1) as u32);
    if cap < max_degree {
        log::warn!("{n} samples: polynomial degree capped at {cap}");
    }
    Ok(cap)
}

fn validation_split(n: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|i| i % 5 != 4)
}

/// Validation SSE of degrees `1..=cap` on the internal 80/20 split (every
/// fifth row held out). Empty when the split leaves nothing to validate on.
pub fn degree_validation_sse(standard: ArrayView2<'_, f64>, target: ArrayView1<'_, f64>, max_degree: u32) -> Result<Vec<f64>> {
    let cap = degree_cap(standard.nrows(), max_degree)?;
    let (train, val) = validation_split(standard.nrows());
    if val.is_empty() || cap == 1 {
        return Ok(Vec::new());
    }
    let xt = standard.select(Axis(0), &train);
    let yt = target.select(Axis(0), &train);
    let xv = standard.select(Axis(0), &val);
    let yv = target.select(Axis(0), &val);
    (1..=cap)
        .map(|deg| {
            let fit = least_squares(xt.view(), yt.view(), deg)?;
            let pred = fit.predict(xv.view());
            Ok(pred.iter().zip(yv.iter()).map(|(p, t)| (p - t) * (p - t)).sum())
        })
        .collect()
}

/// Least-squares polynomial fit with the degree chosen on a held-out split.
pub fn fit_poly_regression(standard: ArrayView2<'_, f64>, target: ArrayView1<'_, f64>, max_degree: u32) -> Result<PolyRegressor> {
    if standard.nrows() != target.len() {
        return Err(Error::DimensionMismatch { expected: standard.nrows(), found: target.len() });
    }
    let sse = degree_validation_sse(standard, target, max_degree)?;
    let degree = if sse.is_empty() {
        1
    } else {
        let best = sse.iter().copied().fold(f64::INFINITY, f64::min);
        let (_, val) = validation_split(standard.nrows());
        let scale: f64 = val.iter().map(|&i| target[i] * target[i]).sum();
        let eps = 1e-10 * scale.max(1.0);
        sse.iter().position(|&s| s <= best + eps).unwrap_or(0) as u32 + 1
    };
    least_squares(standard, target, degree)
}

impl PolyRegressor {
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Array1<f64> {
        let deg = self.degree as usize;
        rows.rows()
            .into_iter()
            .map(|r| {
                let mut acc = self.intercept;
                for (c, &x) in r.iter().enumerate() {
                    let mut pow = 1.0;
                    for p in 0..deg {
                        pow *= x;
                        acc += self.coefficients[c * deg + p] * pow;
                    }
                }
                acc
            })
            .collect()
    }
}

impl WeightedSimilarity {
    pub fn new(k: usize, stored_standard: Array2<f64>, stored_privileged: Array1<f64>) -> Result<Self> {
        if k < 1 || k > stored_standard.nrows() {
            return Err(Error::invalid(format!("k must lie in 1..={}", stored_standard.nrows())));
        }
        if stored_privileged.len() != stored_standard.nrows() {
            return Err(Error::DimensionMismatch { expected: stored_standard.nrows(), found: stored_privileged.len() });
        }
        Ok(WeightedSimilarity { k, stored_standard, stored_privileged })
    }

    pub fn estimate(&self, query: ArrayView1<'_, f64>) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .stored_standard
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        if let Some(&(_, i)) = dist.iter().find(|(d, _)| *d == 0.0) {
            return self.stored_privileged[i];
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut num, mut den) = (0.0, 0.0);
        for &(d, i) in &dist[..self.k] {
            num += self.stored_privileged[i] / d;
            den += 1.0 / d;
        }
        num / den
    }

    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Array1<f64> {
        rows.rows().into_iter().map(|r| self.estimate(r)).collect()
    }
}

impl Estimator {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Array1<f64> {
        match self {
            Estimator::Poly(p) => p.predict(rows),
            Estimator::Similarity(s) => s.predict(rows),
        }
    }
}

/// Estimated privileged block, one column per mapping.
pub fn estimate_privileged(mappings: &MappingFunctionSet, standard_rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if standard_rows.ncols() != mappings.n_standard {
        return Err(Error::DimensionMismatch { expected: mappings.n_standard, found: standard_rows.ncols() });
    }
    let m = mappings.per_feature.len();
    let mut out = Array2::zeros((standard_rows.nrows(), m));
    for (j, (est, cols)) in mappings.per_feature.iter().zip(&mappings.input_columns).enumerate() {
        let inputs = standard_rows.select(Axis(1), cols);
        out.column_mut(j).assign(&est.predict(inputs.view()));
    }
    Ok(out)
}

fn pearson(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.sum() / n, y.sum() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Indices of the `p` standard columns with the largest `|corr|` to `target`,
/// in ascending column order.
pub fn top_correlated_columns(standard: ArrayView2<'_, f64>, target: ArrayView1<'_, f64>, p: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> =
        (0..standard.ncols()).map(|c| (pearson(standard.column(c), target).abs(), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cols: Vec<usize> = scored.into_iter().take(p.max(1)).map(|(_, c)| c).collect();
    cols.sort_unstable();
    cols
}

/// Class-proportional random subset of at most `cap` rows, in ascending order.
pub fn stratified_subsample(labels: &[i32], cap: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if n <= cap {
        return (0..n).collect();
    }
    let mut by_class: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut quota: Vec<(usize, f64)> = by_class
        .values()
        .map(|rows| {
            let exact = rows.len() as f64 * cap as f64 / n as f64;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = cap - quota.iter().map(|q| q.0).sum::<usize>();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].1.total_cmp(&quota[a].1).then(a.cmp(&b)));
    for c in order {
        if left == 0 {
            break;
        }
        quota[c].0 += 1;
        left -= 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(cap);
    for (rows, (q, _)) in by_class.values().zip(&quota) {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        keep.extend_from_slice(&rows[..*q]);
    }
    keep.sort_unstable();
    keep
}

/// Fits one estimator per privileged column of `dataset`.
pub fn fit_mappings(dataset: &LupiDataset, kind: MappingKind, hyper: &KtHyper, exec: Execution) -> Result<MappingFunctionSet> {
    dataset.require_privileged()?;
    let standard = dataset.standard();
    let privileged = dataset.privileged();
    let d = dataset.n_standard();
    let stored = match kind {
        MappingKind::Similarity => stratified_subsample(dataset.labels(), hyper.subsample_cap, hyper.seed),
        MappingKind::Regression => Vec::new(),
    };
    let fitted: Vec<Result<(Estimator, Vec<usize>)>> = par::map_range(exec, dataset.n_privileged(), |j| {
        let target = privileged.column(j);
        let cols = match hyper.top_p {
            Some(p) if p < d => top_correlated_columns(standard, target, p),
            _ => (0..d).collect(),
        };
        let inputs = standard.select(Axis(1), &cols);
        let est = match kind {
            MappingKind::Regression => Estimator::Poly(fit_poly_regression(inputs.view(), target, hyper.max_degree)?),
            MappingKind::Similarity => Estimator::Similarity(WeightedSimilarity::new(
                hyper.k.min(stored.len()),
                inputs.select(Axis(0), &stored),
                target.select(Axis(0), &stored),
            )?),
        };
        Ok((est, cols))
    });
    let mut per_feature = Vec::with_capacity(fitted.len());
    let mut input_columns = Vec::with_capacity(fitted.len());
    for r in fitted {
        let (est, cols) = r?;
        per_feature.push(est);
        input_columns.push(cols);
    }
    Ok(MappingFunctionSet { per_feature, input_columns, n_standard: d })
}

pub fn train_kt(
    dataset: &LupiDataset,
    kind: MappingKind,
    downstream_kernel: KernelSpec,
    c: f64,
    hyper: &KtHyper,
) -> Result<KtModel> {
    train_kt_with(dataset, kind, downstream_kernel, c, hyper, &SolverOptions::default())
}

pub fn train_kt_with(
    dataset: &LupiDataset,
    kind: MappingKind,
    downstream_kernel: KernelSpec,
    c: f64,
    hyper: &KtHyper,
    opts: &SolverOptions,
) -> Result<KtModel> {
    let mappings = fit_mappings(dataset, kind, hyper, opts.exec)?;
    // The downstream model sees the real privileged values at training time.
    let complete = dataset.complete();
    let downstream = svm::train_svm_with(complete.view(), dataset.binary_labels()?, downstream_kernel, c, opts)?;
    Ok(KtModel { kind, mappings, downstream })
}

impl KtModel {
    /// `[standard | estimated privileged]` for the given rows.
    pub fn complete_rows(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let est = estimate_privileged(&self.mappings, standard_rows)?;
        Ok(concatenate(Axis(1), &[standard_rows, est.view()]).expect("row counts agree"))
    }

    pub fn decision_values(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.downstream.decision_values(self.complete_rows(standard_rows)?.view())
    }

    pub fn predict(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        self.downstream.predict(self.complete_rows(standard_rows)?.view())
    }
}

pub fn predict_kt(model: &KtModel, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
    model.predict(standard_rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array};
    use proptest::prelude::*;

    #[test]
    fn linear_target_selects_degree_one() {
        let x = Array::linspace(-2.0, 3.0, 20).insert_axis(Axis(1));
        let y = x.column(0).mapv(|v| 2.0 * v + 3.0);
        let fit = fit_poly_regression(x.view(), y.view(), 3).unwrap();
        assert_eq!(fit.degree, 1);
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-8);
        let sse: f64 = fit.predict(x.view()).iter().zip(y.iter()).map(|(p, t)| (p - t).powi(2)).sum();
        assert!(sse <= 1e-10);
        assert_abs_diff_eq!(fit.predict(array![[4.0]].view())[0], 11.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.predict(array![[0.0]].view())[0], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn constant_target() {
        let x = Array2::from_shape_fn((15, 2), |(i, j)| if j == 0 { i as f64 / 7.0 } else { ((i * 5) % 7) as f64 });
        let y = Array1::from_elem(15, 5.0);
        let fit = fit_poly_regression(x.view(), y.view(), 3).unwrap();
        assert_abs_diff_eq!(fit.intercept, 5.0, epsilon = 1e-8);
        assert!(fit.coefficients.iter().all(|c| c.abs() <= 1e-10), "{:?}", fit.coefficients);
    }

    #[test]
    fn two_samples_cap_degree() {
        let x = array![[0.0], [1.0]];
        let y = array![1.0, 3.0];
        let fit = fit_poly_regression(x.view(), y.view(), 3).unwrap();
        assert_eq!(fit.degree, 1);
        assert!(fit_poly_regression(array![[1.0]].view(), array![1.0].view(), 3).is_err());
    }

    #[test]
    fn similarity_examples() {
        let stored = array![[0.0, 0.0], [1.0, 0.0], [3.0, 3.0]];
        let priv_ = array![7.0, 0.0, 4.0];
        let s1 = WeightedSimilarity::new(1, stored.clone(), priv_.clone()).unwrap();
        assert_eq!(s1.estimate(array![3.0, 3.0].view()), 4.0);
        let s2 = WeightedSimilarity::new(2, array![[-1.0], [1.0]], array![0.0, 4.0]).unwrap();
        assert_eq!(s2.estimate(array![0.0].view()), 2.0);
        assert!(WeightedSimilarity::new(4, stored, priv_).is_err());
    }

    #[test]
    fn exact_recovery_of_cubic_features() {
        let n = 80;
        let std = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 37 + j * 11) % 23) as f64 / 7.0 - 1.5);
        let priv_ = Array2::from_shape_fn((n, 2), |(i, j)| {
            let (a, b) = (std[[i, 0]], std[[i, 1]]);
            if j == 0 {
                0.5 * a * a * a - b + 2.0
            } else {
                a * a + 0.25 * b
            }
        });
        let labels: Vec<i32> = (0..n).map(|i| if std[[i, 0]] + std[[i, 1]] > 0.0 { 1 } else { -1 }).collect();
        let ds = LupiDataset::from_binary(std.clone(), priv_.clone(), labels).unwrap();
        let model = train_kt(&ds, MappingKind::Regression, KernelSpec::Linear, 1.0, &KtHyper::default()).unwrap();
        let est = estimate_privileged(&model.mappings, std.view()).unwrap();
        let err = (&est - &priv_).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-8, "max error {err}");
        assert!(estimate_privileged(&model.mappings, array![[1.0]].view()).is_err());
        assert_eq!(predict_kt(&model, std.slice(ndarray::s![..1, ..])).unwrap().len(), 1);
    }

    #[test]
    fn kt_requires_privileged() {
        let ds = LupiDataset::from_binary(array![[0.0], [1.0]], Array2::zeros((2, 0)), vec![-1, 1]).unwrap();
        assert!(matches!(
            train_kt(&ds, MappingKind::Regression, KernelSpec::Linear, 1.0, &KtHyper::default()),
            Err(Error::MissingPrivileged)
        ));
    }

    #[test]
    fn subsample_keeps_class_shares() {
        let labels: Vec<i32> = (0..100).map(|i| if i < 30 { 1 } else { -1 }).collect();
        let keep = stratified_subsample(&labels, 10, 4);
        assert_eq!(keep.len(), 10);
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 1).count(), 3);
        assert_eq!(keep, stratified_subsample(&labels, 10, 4));
    }

    #[test]
    fn correlated_columns() {
        let x = array![[1.0, 0.0, 5.0], [2.0, 1.0, 5.1], [3.0, 0.0, 4.9], [4.0, 1.0, 5.0]];
        let y = array![2.0, 4.0, 6.0, 8.0];
        assert_eq!(top_correlated_columns(x.view(), y.view(), 1), vec![0]);
    }

    proptest! {
        #[test]
        fn similarity_is_convex_combination(
            stored in proptest::collection::vec(-5.0f64..5.0, 20),
            values in proptest::collection::vec(-10.0f64..10.0, 10),
            query in proptest::collection::vec(-6.0f64..6.0, 2),
            k in 1usize..=10,
        ) {
            let s = WeightedSimilarity::new(k, Array2::from_shape_vec((10, 2), stored).unwrap(), Array1::from(values)).unwrap();
            let q = Array1::from(query);
            let mut dist: Vec<(f64, usize)> = s.stored_standard.rows().into_iter().enumerate()
                .map(|(i, r)| (r.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nb: Vec<f64> = dist[..k].iter().map(|&(_, i)| s.stored_privileged[i]).collect();
            let lo = nb.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = nb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = s.estimate(q.view());
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
        }

        #[test]
        fn selected_degree_never_worse_than_linear(
            xs in proptest::collection::vec(-2.0f64..2.0, 30),
            noise in proptest::collection::vec(-0.5f64..0.5, 30),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let x = Array2::from_shape_vec((30, 1), xs).unwrap();
            let y: Array1<f64> = x.column(0).iter().zip(&noise).map(|(v, e)| a * v * v + b * v + e).collect();
            let sse = degree_validation_sse(x.view(), y.view(), 3).unwrap();
            let fit = fit_poly_regression(x.view(), y.view(), 3).unwrap();
            prop_assert!(sse[fit.degree as usize - 1] <= sse[0]);
        }
    }
}
