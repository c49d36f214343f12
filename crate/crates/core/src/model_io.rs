//! Plain-text model files.
//!
//! The first line is `lupi-model 1`. Every following record starts with a key
//! and a type tag:
//!
//! ```text
//! <key> s <text to end of line>
//! <key> f <real>
//! <key> v <len>            followed by one line of <len> reals
//! <key> m <rows> <cols>    followed by <rows> lines of <cols> reals
//! ```
//!
//! Reals use the shortest decimal form that reads back to the same `f64`, so a
//! saved model reloads bit for bit. Blank lines and lines starting with `#`
//! between records are ignored. Keys are dotted paths such as
//! `downstream.bias` or `student.weights.1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataset::write_atomic;
use crate::distill::{DistillConfig, DistilledModel, FeedForwardNet};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::models::{NetModel, TrainedModel};
use crate::qp::KktReport;
use crate::svm::SvmModel;
use crate::svmplus::SvmPlusModel;
use crate::transfer::{Estimator, KtModel, MappingFunctionSet, MappingKind, PolyRegressor, WeightedSimilarity};

const MAGIC: &str = "lupi-model 1";

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn text(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.out, "{key} s {value}");
    }

    fn real(&mut self, key: &str, value: f64) {
        let _ = writeln!(self.out, "{key} f {value:?}");
    }

    fn vector<I: IntoIterator<Item = f64>>(&mut self, key: &str, values: I) {
        let values: Vec<f64> = values.into_iter().collect();
        let _ = writeln!(self.out, "{key} v {}", values.len());
        self.row(&values);
    }

    fn matrix(&mut self, key: &str, m: &Array2<f64>) {
        let _ = writeln!(self.out, "{key} m {} {}", m.nrows(), m.ncols());
        for r in m.rows() {
            self.row(&r.to_vec());
        }
    }

    fn row(&mut self, values: &[f64]) {
        let line: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
        self.out.push_str(&line.join(" "));
        self.out.push('\n');
    }

    fn labels(&mut self, key: &str, labels: &[i32]) {
        self.vector(key, labels.iter().map(|&y| y as f64));
    }

    fn kkt(&mut self, prefix: &str, k: &KktReport) {
        self.real(&format!("{prefix}.stationarity"), k.stationarity_residual);
        self.real(&format!("{prefix}.feasibility"), k.primal_feasibility);
        self.real(&format!("{prefix}.complementarity"), k.complementarity);
        self.real(&format!("{prefix}.tolerance"), k.tolerance_used);
    }

    fn svm(&mut self, prefix: &str, m: &SvmModel) {
        self.text(&format!("{prefix}.kernel"), &m.kernel.to_string());
        self.real(&format!("{prefix}.c"), m.c);
        self.real(&format!("{prefix}.bias"), m.bias);
        self.vector(&format!("{prefix}.alphas"), m.alphas.iter().copied());
        self.matrix(&format!("{prefix}.support_rows"), &m.support_rows);
        self.labels(&format!("{prefix}.support_labels"), &m.support_labels);
        self.vector(&format!("{prefix}.support_alphas"), m.support_alphas.iter().copied());
        self.kkt(&format!("{prefix}.kkt"), &m.kkt);
    }

    fn net(&mut self, prefix: &str, n: &FeedForwardNet) {
        self.vector(&format!("{prefix}.layer_sizes"), n.layer_sizes.iter().map(|&s| s as f64));
        self.vector(&format!("{prefix}.input_mean"), n.input_mean.iter().copied());
        self.vector(&format!("{prefix}.input_scale"), n.input_scale.iter().copied());
        for (l, (w, b)) in n.weights.iter().zip(&n.biases).enumerate() {
            self.matrix(&format!("{prefix}.weights.{l}"), w);
            self.vector(&format!("{prefix}.biases.{l}"), b.iter().copied());
        }
    }
}

/// Serialize any trained model.
pub fn to_text(model: &TrainedModel) -> String {
    let mut w = Writer::default();
    w.out.push_str(MAGIC);
    w.out.push('\n');
    w.text("kind", model.kind());
    match model {
        TrainedModel::Svm(m) | TrainedModel::Complete(m) => w.svm("svm", m),
        TrainedModel::SvmPlus(m) => {
            w.text("kernel_standard", &m.kernel_standard.to_string());
            w.text("kernel_privileged", &m.kernel_privileged.to_string());
            w.real("kappa", m.kappa);
            w.real("gamma", m.gamma);
            w.real("bias", m.bias);
            w.vector("costs", m.costs.iter().copied());
            w.vector("alphas", m.alphas.iter().copied());
            w.vector("deltas", m.deltas.iter().copied());
            w.matrix("support_rows_standard", &m.support_rows_standard);
            w.labels("support_labels", &m.support_labels);
            w.vector("support_alphas", m.support_alphas.iter().copied());
            w.kkt("kkt", &m.solve_report);
        }
        TrainedModel::Kt(m) => {
            w.text("mapping_kind", m.kind.as_str());
            w.real("n_standard", m.mappings.n_standard as f64);
            w.real("n_mappings", m.mappings.per_feature.len() as f64);
            for (j, (est, cols)) in m.mappings.per_feature.iter().zip(&m.mappings.input_columns).enumerate() {
                let p = format!("mapping.{j}");
                w.vector(&format!("{p}.input_columns"), cols.iter().map(|&c| c as f64));
                match est {
                    Estimator::Poly(r) => {
                        w.text(&format!("{p}.estimator"), "poly");
                        w.real(&format!("{p}.degree"), r.degree as f64);
                        w.vector(&format!("{p}.coefficients"), r.coefficients.iter().copied());
                        w.real(&format!("{p}.intercept"), r.intercept);
                    }
                    Estimator::Similarity(s) => {
                        w.text(&format!("{p}.estimator"), "similarity");
                        w.real(&format!("{p}.k"), s.k as f64);
                        w.matrix(&format!("{p}.stored_standard"), &s.stored_standard);
                        w.vector(&format!("{p}.stored_privileged"), s.stored_privileged.iter().copied());
                    }
                }
            }
            w.svm("downstream", &m.downstream);
        }
        TrainedModel::Distill(m) => {
            let c = &m.config;
            w.real("temperature", c.temperature);
            w.real("lambda", c.lambda);
            w.real("epochs", c.epochs as f64);
            w.real("batch_size", c.batch_size as f64);
            w.real("learning_rate", c.learning_rate);
            w.text("seed", &c.seed.to_string());
            w.text("binary", if m.binary { "true" } else { "false" });
            w.net("student", &m.student);
            w.net("teacher", &m.teacher);
            w.matrix("soft_labels", &m.soft_labels);
            w.vector("loss_history", m.loss_history.iter().copied());
        }
        TrainedModel::Net(m) => {
            w.text("binary", if m.binary { "true" } else { "false" });
            w.net("net", &m.net);
        }
    }
    w.out
}

enum Value {
    Text(String),
    Real(f64),
    Vector(Vec<f64>),
    Matrix(Array2<f64>),
}

struct Record {
    line: usize,
    value: Value,
}

struct Reader {
    records: BTreeMap<String, Record>,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format { line, message: message.into() }
}

fn parse_reals(line_no: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format_err(line_no, format!("'{t}' is not a number"))))
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(format_err(line_no, format!("expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

impl Reader {
    fn parse(text: &str) -> Result<Reader> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, first)) if first.trim() == MAGIC => {}
            _ => return Err(format_err(1, format!("missing '{MAGIC}' header"))),
        }
        let mut records = BTreeMap::new();
        while let Some((line, raw)) = lines.next() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(3, ' ');
            let key = parts.next().unwrap_or_default().to_string();
            let tag = parts.next().ok_or_else(|| format_err(line, "record has no type tag"))?;
            let rest = parts.next().unwrap_or("");
            let mut next_line = |expected: usize| -> Result<Vec<f64>> {
                let (n, l) = lines.next().ok_or_else(|| format_err(line, "unexpected end of file"))?;
                parse_reals(n, l, expected)
            };
            let count = |t: &str| t.parse::<usize>().map_err(|_| format_err(line, format!("bad size '{t}'")));
            let value = match tag {
                "s" => Value::Text(rest.to_string()),
                "f" => Value::Real(parse_reals(line, rest, 1)?[0]),
                "v" => Value::Vector(next_line(count(rest.trim())?)?),
                "m" => {
                    let (r, c) = rest.trim().split_once(' ').ok_or_else(|| format_err(line, "matrix needs rows and cols"))?;
                    let (r, c) = (count(r)?, count(c.trim())?);
                    let mut data = Vec::with_capacity(r * c);
                    for _ in 0..r {
                        data.extend(next_line(c)?);
                    }
                    Value::Matrix(Array2::from_shape_vec((r, c), data).expect("sizes checked"))
                }
                other => return Err(format_err(line, format!("unknown type tag '{other}'"))),
            };
            if records.insert(key.clone(), Record { line, value }).is_some() {
                return Err(format_err(line, format!("duplicate key '{key}'")));
            }
        }
        Ok(Reader { records })
    }

    fn get(&self, key: &str) -> Result<&Record> {
        self.records.get(key).ok_or_else(|| format_err(0, format!("missing key '{key}'")))
    }

    fn text(&self, key: &str) -> Result<&str> {
        match self.get(key)? {
            Record { value: Value::Text(s), .. } => Ok(s),
            r => Err(format_err(r.line, format!("'{key}' is not text"))),
        }
    }

    fn real(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            Record { value: Value::Real(v), .. } => Ok(*v),
            r => Err(format_err(r.line, format!("'{key}' is not a real"))),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.real(key)?;
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(format_err(self.get(key)?.line, format!("'{key}' is not a count")))
        }
    }

    fn vector(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key)? {
            Record { value: Value::Vector(v), .. } => Ok(v.clone()),
            r => Err(format_err(r.line, format!("'{key}' is not a vector"))),
        }
    }

    fn counts(&self, key: &str) -> Result<Vec<usize>> {
        self.vector(key)?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(format_err(0, format!("'{key}' holds a non-count")))
                }
            })
            .collect()
    }

    fn labels(&self, key: &str) -> Result<Vec<i32>> {
        Ok(self.vector(key)?.into_iter().map(|v| v as i32).collect())
    }

    fn matrix(&self, key: &str) -> Result<Array2<f64>> {
        match self.get(key)? {
            Record { value: Value::Matrix(m), .. } => Ok(m.clone()),
            r => Err(format_err(r.line, format!("'{key}' is not a matrix"))),
        }
    }

    fn kernel(&self, key: &str) -> Result<KernelSpec> {
        self.text(key)?.parse()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.text(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(format_err(self.get(key)?.line, format!("'{other}' is not true/false"))),
        }
    }

    fn kkt(&self, prefix: &str) -> Result<KktReport> {
        Ok(KktReport {
            stationarity_residual: self.real(&format!("{prefix}.stationarity"))?,
            primal_feasibility: self.real(&format!("{prefix}.feasibility"))?,
            complementarity: self.real(&format!("{prefix}.complementarity"))?,
            tolerance_used: self.real(&format!("{prefix}.tolerance"))?,
        })
    }

    fn svm(&self, prefix: &str) -> Result<SvmModel> {
        let m = SvmModel {
            alphas: self.vector(&format!("{prefix}.alphas"))?,
            bias: self.real(&format!("{prefix}.bias"))?,
            support_rows: self.matrix(&format!("{prefix}.support_rows"))?,
            support_labels: self.labels(&format!("{prefix}.support_labels"))?,
            support_alphas: self.vector(&format!("{prefix}.support_alphas"))?,
            kernel: self.kernel(&format!("{prefix}.kernel"))?,
            c: self.real(&format!("{prefix}.c"))?,
            kkt: self.kkt(&format!("{prefix}.kkt"))?,
        };
        if m.support_rows.nrows() != m.support_labels.len() || m.support_labels.len() != m.support_alphas.len() {
            return Err(format_err(0, format!("'{prefix}' support arrays disagree in length")));
        }
        Ok(m)
    }

    fn net(&self, prefix: &str) -> Result<FeedForwardNet> {
        let layer_sizes = self.counts(&format!("{prefix}.layer_sizes"))?;
        if layer_sizes.len() < 2 {
            return Err(format_err(0, format!("'{prefix}' needs at least two layers")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let w = self.matrix(&format!("{prefix}.weights.{l}"))?;
            let b = Array1::from(self.vector(&format!("{prefix}.biases.{l}"))?);
            if w.dim() != (pair[1], pair[0]) || b.len() != pair[1] {
                return Err(format_err(0, format!("'{prefix}' layer {l} has the wrong shape")));
            }
            weights.push(w);
            biases.push(b);
        }
        let input_mean = Array1::from(self.vector(&format!("{prefix}.input_mean"))?);
        let input_scale = Array1::from(self.vector(&format!("{prefix}.input_scale"))?);
        if input_mean.len() != layer_sizes[0] || input_scale.len() != layer_sizes[0] {
            return Err(format_err(0, format!("'{prefix}' input scaling has the wrong length")));
        }
        Ok(FeedForwardNet { layer_sizes, weights, biases, input_mean, input_scale })
    }
}

/// Parse a model written by [`to_text`].
pub fn from_text(text: &str) -> Result<TrainedModel> {
    let r = Reader::parse(text)?;
    let kind = r.text("kind")?;
    Ok(match kind {
        "svm" => TrainedModel::Svm(r.svm("svm")?),
        "complete" => TrainedModel::Complete(r.svm("svm")?),
        "svmplus" => {
            let support_labels = r.labels("support_labels")?;
            TrainedModel::SvmPlus(SvmPlusModel {
                alphas: r.vector("alphas")?,
                deltas: r.vector("deltas")?,
                bias: r.real("bias")?,
                support_rows_standard: r.matrix("support_rows_standard")?,
                support_labels,
                support_alphas: r.vector("support_alphas")?,
                kernel_standard: r.kernel("kernel_standard")?,
                kernel_privileged: r.kernel("kernel_privileged")?,
                kappa: r.real("kappa")?,
                gamma: r.real("gamma")?,
                costs: r.vector("costs")?,
                solve_report: r.kkt("kkt")?,
            })
        }
        "kt" => {
            let kind: MappingKind = r.text("mapping_kind")?.parse()?;
            let n_standard = r.count("n_standard")?;
            let mut per_feature = Vec::new();
            let mut input_columns = Vec::new();
            for j in 0..r.count("n_mappings")? {
                let p = format!("mapping.{j}");
                let cols = r.counts(&format!("{p}.input_columns"))?;
                if cols.iter().any(|&c| c >= n_standard) {
                    return Err(format_err(0, format!("'{p}' references a missing standard column")));
                }
                let est = match r.text(&format!("{p}.estimator"))? {
                    "poly" => {
                        let degree = r.count(&format!("{p}.degree"))? as u32;
                        let coefficients = r.vector(&format!("{p}.coefficients"))?;
                        if degree < 1 || coefficients.len() != cols.len() * degree as usize {
                            return Err(format_err(0, format!("'{p}' coefficient count does not match degree")));
                        }
                        Estimator::Poly(PolyRegressor { degree, coefficients, intercept: r.real(&format!("{p}.intercept"))? })
                    }
                    "similarity" => {
                        let stored = r.matrix(&format!("{p}.stored_standard"))?;
                        if stored.ncols() != cols.len() {
                            return Err(format_err(0, format!("'{p}' stored rows have the wrong width")));
                        }
                        Estimator::Similarity(WeightedSimilarity::new(
                            r.count(&format!("{p}.k"))?,
                            stored,
                            Array1::from(r.vector(&format!("{p}.stored_privileged"))?),
                        )?)
                    }
                    other => return Err(format_err(0, format!("unknown estimator '{other}'"))),
                };
                per_feature.push(est);
                input_columns.push(cols);
            }
            TrainedModel::Kt(KtModel {
                kind,
                mappings: MappingFunctionSet { per_feature, input_columns, n_standard },
                downstream: r.svm("downstream")?,
            })
        }
        "distill" => TrainedModel::Distill(DistilledModel {
            student: r.net("student")?,
            teacher: r.net("teacher")?,
            soft_labels: r.matrix("soft_labels")?,
            config: DistillConfig {
                temperature: r.real("temperature")?,
                lambda: r.real("lambda")?,
                epochs: r.count("epochs")?,
                batch_size: r.count("batch_size")?,
                learning_rate: r.real("learning_rate")?,
                seed: r.text("seed")?.parse().map_err(|_| format_err(0, "'seed' is not an unsigned integer"))?,
            },
            binary: r.flag("binary")?,
            loss_history: r.vector("loss_history")?,
        }),
        "net" => TrainedModel::Net(NetModel { net: r.net("net")?, binary: r.flag("binary")? }),
        other => return Err(format_err(r.get("kind")?.line, format!("unknown model kind '{other}'"))),
    })
}

/// Write atomically (temporary file, then rename).
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, to_text(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    from_text(&text)
}
