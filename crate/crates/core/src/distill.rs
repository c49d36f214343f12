//! Generalized distillation. A teacher network trained on privileged features
//! produces tempered soft labels, and a student network on standard features
//! learns from a `λ`-weighted mix of hard and soft cross-entropy.
//!
//! Training is single-threaded with a fixed reduction order so that runs are
//! reproducible bit for bit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{index_to_label, LupiDataset};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [10, 10];
const PROB_FLOOR: f64 = 1e-12;
const TEACHER_SEED_SALT: u64 = 0x7EAC_4E55;

/// Fully connected network with rectifier hidden layers and a softmax output.
/// Inputs are standardized with statistics fixed at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` has shape `(layer_sizes[l + 1], layer_sizes[l])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input_mean: Array1<f64>,
    pub input_scale: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillConfig {
    pub temperature: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig { temperature: 2.0, lambda: 0.5, epochs: 200, batch_size: 32, learning_rate: 0.05, seed: 0 }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        check_lambda(self.lambda)?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda {lambda} is outside [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistilledModel {
    pub student: FeedForwardNet,
    pub teacher: FeedForwardNet,
    /// Teacher outputs at the configured temperature, one row per training sample.
    pub soft_labels: Array2<f64>,
    pub config: DistillConfig,
    /// Whether class indices map back to `-1/+1`.
    pub binary: bool,
    /// Student training loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// `softmax(logits / T)`.
pub fn tempered_softmax(logits: ArrayView1<'_, f64>, temperature: f64) -> Result<Array1<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("logits must be finite"));
    }
    let mut out = logits.mapv(|v| v / temperature);
    softmax_in_place(out.view_mut());
    Ok(out)
}

fn softmax_in_place(mut row: ndarray::ArrayViewMut1<'_, f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let sum = row.sum();
    row.mapv_inplace(|v| v / sum);
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for row in p.rows_mut() {
        softmax_in_place(row);
    }
    p
}

/// Mean over rows of `(1 − λ)·CE(hard) + λ·CE(soft)` against the student's
/// softmax output.
pub fn distillation_loss(student_logits: ArrayView2<'_, f64>, hard_labels: &[usize], soft_labels: ArrayView2<'_, f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if student_logits.nrows() != hard_labels.len() || student_logits.dim() != soft_labels.dim() {
        return Err(Error::invalid("logits, hard labels and soft labels must agree in shape"));
    }
    let probs = softmax_rows(&student_logits.to_owned());
    Ok(mixed_loss(&probs, hard_labels, soft_labels, lambda))
}

fn mixed_loss(probs: &Array2<f64>, hard: &[usize], soft: ArrayView2<'_, f64>, lambda: f64) -> f64 {
    let mut total = 0.0;
    for (i, p) in probs.rows().into_iter().enumerate() {
        let hard_ce = -p[hard[i]].max(PROB_FLOOR).ln();
        let soft_ce: f64 = -p.iter().zip(soft.row(i)).map(|(pk, sk)| sk * pk.max(PROB_FLOOR).ln()).sum::<f64>();
        total += (1.0 - lambda) * hard_ce + lambda * soft_ce;
    }
    total / probs.nrows() as f64
}

/// Parameter gradients, laid out like the network's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl FeedForwardNet {
    /// He-initialized network with zero biases and identity input scaling.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::invalid("network needs at least input and output layers of positive width"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
            weights.push(Array2::from_shape_simple_fn((w[1], w[0]), || normal.sample(&mut rng)));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(FeedForwardNet {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            input_mean: Array1::zeros(layer_sizes[0]),
            input_scale: Array1::ones(layer_sizes[0]),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    /// Fix the input standardization from training rows.
    pub fn fit_scaling(&mut self, inputs: ArrayView2<'_, f64>) {
        let n = inputs.nrows() as f64;
        self.input_mean = inputs.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(inputs.ncols()));
        self.input_scale = inputs.var_axis(Axis(0), 0.0).mapv(|v| if v * n > 0.0 && v > 1e-24 { v.sqrt() } else { 1.0 });
    }

    fn check_inputs(&self, inputs: ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), found: inputs.ncols() });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward_all(&self, inputs: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![(&inputs - &self.input_mean) / &self.input_scale];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(&w.t()) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_inputs(inputs)?;
        Ok(self.forward_all(inputs).pop().expect("output layer"))
    }

    /// Softmax output at temperature 1.
    pub fn predict_proba(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(&self.logits(inputs)?))
    }

    /// Loss and parameter gradients for per-row targets `(1 − λ)·onehot + λ·soft`.
    pub fn loss_and_gradient(
        &self,
        inputs: ArrayView2<'_, f64>,
        hard: &[usize],
        soft: ArrayView2<'_, f64>,
        lambda: f64,
    ) -> Result<(f64, Gradients)> {
        check_lambda(lambda)?;
        self.check_inputs(inputs)?;
        if inputs.nrows() != hard.len() || soft.dim() != (hard.len(), self.n_outputs()) {
            return Err(Error::invalid("inputs, hard labels and soft labels must agree in shape"));
        }
        let target = mix_targets(hard, soft, lambda, self.n_outputs());
        Ok(self.backprop(inputs, &target, |p| mixed_loss(p, hard, soft, lambda)))
    }

    fn backprop(&self, inputs: ArrayView2<'_, f64>, target: &Array2<f64>, loss: impl Fn(&Array2<f64>) -> f64) -> (f64, Gradients) {
        let acts = self.forward_all(inputs);
        let probs = softmax_rows(acts.last().expect("output layer"));
        let value = loss(&probs);
        let n = inputs.nrows() as f64;
        let mut delta = (&probs - target) / n;
        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            gw[l] = delta.t().dot(&acts[l]);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&acts[l], |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        (value, Gradients { weights: gw, biases: gb })
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-lr, g);
        }
    }

    /// All trainable parameters, weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = *it.next().expect("parameter count"));
        }
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

fn mix_targets(hard: &[usize], soft: ArrayView2<'_, f64>, lambda: f64, k: usize) -> Array2<f64> {
    Array2::from_shape_fn((hard.len(), k), |(i, c)| {
        let onehot = if hard[i] == c { 1.0 } else { 0.0 };
        (1.0 - lambda) * onehot + lambda * soft[[i, c]]
    })
}

fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    Array2::from_shape_fn((labels.len(), k), |(i, c)| if labels[i] == c { 1.0 } else { 0.0 })
}

fn check_classes(labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::SingleClass);
    }
    for c in 0..n_classes {
        if !labels.contains(&c) {
            return Err(Error::invalid(format!("class {c} has no training rows")));
        }
    }
    if labels.iter().any(|&c| c >= n_classes) {
        return Err(Error::invalid("class index out of range"));
    }
    Ok(())
}

fn layer_sizes(n_inputs: usize, hidden: &[usize], n_classes: usize) -> Vec<usize> {
    let mut sizes = vec![n_inputs];
    sizes.extend_from_slice(hidden);
    sizes.push(n_classes);
    sizes
}

/// Mini-batch gradient descent towards per-row targets; returns the full-data
/// loss after each epoch.
fn fit(
    net: &mut FeedForwardNet,
    inputs: ArrayView2<'_, f64>,
    target: &Array2<f64>,
    cfg: &DistillConfig,
    seed: u64,
    loss: impl Fn(&Array2<f64>) -> f64,
) -> Vec<f64> {
    net.fit_scaling(inputs);
    let n = inputs.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = inputs.select(Axis(0), batch);
            let tb = target.select(Axis(0), batch);
            let (_, grads) = net.backprop(xb.view(), &tb, |_| 0.0);
            net.step(&grads, cfg.learning_rate);
        }
        let probs = softmax_rows(net.forward_all(inputs).last().expect("output layer"));
        history.push(loss(&probs));
    }
    history
}

/// Plain cross-entropy training on hard labels.
pub fn train_supervised(
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    hidden: &[usize],
    cfg: &DistillConfig,
) -> Result<(FeedForwardNet, Vec<f64>)> {
    cfg.validate()?;
    supervised_with_seed(inputs, labels, n_classes, hidden, cfg, cfg.seed)
}

fn supervised_with_seed(
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    hidden: &[usize],
    cfg: &DistillConfig,
    seed: u64,
) -> Result<(FeedForwardNet, Vec<f64>)> {
    if inputs.ncols() == 0 {
        return Err(Error::invalid("network input needs at least one column"));
    }
    if inputs.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: inputs.nrows() });
    }
    check_classes(labels, n_classes)?;
    let mut net = FeedForwardNet::new(&layer_sizes(inputs.ncols(), hidden, n_classes), seed)?;
    let target = one_hot(labels, n_classes);
    let history = fit(&mut net, inputs, &target, cfg, seed, |p| {
        p.rows().into_iter().zip(labels).map(|(r, &y)| -r[y].max(PROB_FLOOR).ln()).sum::<f64>() / labels.len() as f64
    });
    Ok((net, history))
}

/// Teacher network on the privileged block.
pub fn train_teacher(privileged: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, hidden: &[usize], cfg: &DistillConfig) -> Result<FeedForwardNet> {
    if privileged.ncols() == 0 {
        return Err(Error::MissingPrivileged);
    }
    cfg.validate()?;
    Ok(supervised_with_seed(privileged, labels, n_classes, hidden, cfg, cfg.seed ^ TEACHER_SEED_SALT)?.0)
}

pub fn train_distilled(dataset: &LupiDataset, config: &DistillConfig, hidden: &[usize]) -> Result<DistilledModel> {
    dataset.require_privileged()?;
    config.validate()?;
    let labels = dataset.class_indices();
    let k = dataset.n_classes();
    check_classes(&labels, k)?;
    let teacher = train_teacher(dataset.privileged(), &labels, k, hidden, config)?;
    let teacher_logits = teacher.logits(dataset.privileged())?;
    let mut soft = teacher_logits.mapv(|v| v / config.temperature);
    for row in soft.rows_mut() {
        softmax_in_place(row);
    }

    let mut student = FeedForwardNet::new(&layer_sizes(dataset.n_standard(), hidden, k), config.seed)?;
    let target = mix_targets(&labels, soft.view(), config.lambda, k);
    let lambda = config.lambda;
    let loss_history = fit(&mut student, dataset.standard(), &target, config, config.seed, |p| {
        mixed_loss(p, &labels, soft.view(), lambda)
    });
    Ok(DistilledModel { student, teacher, soft_labels: soft, config: *config, binary: dataset.is_binary(), loss_history })
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class indices and probability rows from the student on standard features.
pub fn predict_distilled(model: &DistilledModel, standard_rows: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Array2<f64>)> {
    let probs = model.student.predict_proba(standard_rows)?;
    Ok((probs.rows().into_iter().map(argmax).collect(), probs))
}

impl DistilledModel {
    /// Predictions in the dataset's label encoding (`-1/+1` for binary tasks).
    pub fn predict(&self, standard_rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        let (classes, _) = predict_distilled(self, standard_rows)?;
        Ok(classes.into_iter().map(|c| index_to_label(c, self.binary)).collect())
    }
}
