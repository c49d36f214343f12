//! The paired standard/privileged data model, tabular ingestion, fold plans and
//! synthetic generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Training data with a standard block (available at run-time) and a privileged
/// block (training time only), sharing one label vector.
///
/// Binary labels are encoded as `-1`/`+1`; multiclass labels as `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LupiDataset {
    standard: Array2<f64>,
    privileged: Array2<f64>,
    labels: Vec<i32>,
    standard_names: Vec<String>,
    privileged_names: Vec<String>,
    label_name: String,
    /// Raw class names in lexicographic order. For binary data `classes[0]` is
    /// encoded as `-1` and `classes[1]` as `+1`.
    classes: Vec<String>,
}

impl LupiDataset {
    /// Build a dataset from already-encoded labels.
    ///
    /// `labels` must be `-1`/`+1` when `classes` has two entries, otherwise `0..K`.
    pub fn new(
        standard: Array2<f64>,
        privileged: Array2<f64>,
        labels: Vec<i32>,
        standard_names: Vec<String>,
        privileged_names: Vec<String>,
        label_name: String,
        classes: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if standard.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: standard.nrows() });
        }
        if privileged.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: privileged.nrows() });
        }
        if standard.ncols() == 0 {
            return Err(Error::Schema("zero standard columns".into()));
        }
        if standard_names.len() != standard.ncols() || privileged_names.len() != privileged.ncols() {
            return Err(Error::invalid("feature name count does not match column count"));
        }
        if standard.iter().chain(privileged.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrices contain NaN or infinite entries"));
        }
        let binary = classes.len() == 2;
        for &y in &labels {
            let ok = if binary { y == -1 || y == 1 } else { y >= 0 && (y as usize) < classes.len().max(1) };
            if !ok {
                return Err(Error::invalid(format!("label {y} is outside the class encoding")));
            }
        }
        Ok(LupiDataset {
            standard,
            privileged,
            labels,
            standard_names,
            privileged_names,
            label_name,
            classes,
        })
    }

    /// Binary dataset with generated column names (`s0..`, `p0..`, `y`).
    pub fn from_binary(standard: Array2<f64>, privileged: Array2<f64>, labels: Vec<i32>) -> Result<Self> {
        let sn = (0..standard.ncols()).map(|j| format!("s{j}")).collect();
        let pn = (0..privileged.ncols()).map(|j| format!("p{j}")).collect();
        Self::new(standard, privileged, labels, sn, pn, "y".into(), vec!["-1".into(), "1".into()])
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_standard(&self) -> usize {
        self.standard.ncols()
    }

    pub fn n_privileged(&self) -> usize {
        self.privileged.ncols()
    }

    pub fn standard(&self) -> ArrayView2<'_, f64> {
        self.standard.view()
    }

    pub fn privileged(&self) -> ArrayView2<'_, f64> {
        self.privileged.view()
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn standard_names(&self) -> &[String] {
        &self.standard_names
    }

    pub fn privileged_names(&self) -> &[String] {
        &self.privileged_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn is_binary(&self) -> bool {
        self.classes.len() == 2
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Labels as `-1`/`+1`, or an error for multiclass data.
    pub fn binary_labels(&self) -> Result<&[i32]> {
        if self.is_binary() {
            Ok(&self.labels)
        } else {
            Err(Error::invalid(format!("expected binary labels, found {} classes", self.classes.len())))
        }
    }

    /// Labels as class indices `0..K` (binary `-1` maps to 0, `+1` to 1).
    pub fn class_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|&y| label_to_index(y, self.is_binary())).collect()
    }

    /// Error unless the privileged block has at least one column.
    pub fn require_privileged(&self) -> Result<()> {
        if self.n_privileged() == 0 {
            Err(Error::MissingPrivileged)
        } else {
            Ok(())
        }
    }

    /// Horizontal concatenation `[standard | privileged]`.
    pub fn complete(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.standard.view(), self.privileged.view()]).expect("row counts agree")
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> LupiDataset {
        LupiDataset {
            standard: self.standard.select(Axis(0), rows),
            privileged: self.privileged.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            standard_names: self.standard_names.clone(),
            privileged_names: self.privileged_names.clone(),
            label_name: self.label_name.clone(),
            classes: self.classes.clone(),
        }
    }

    /// Same rows with only the listed privileged columns kept.
    pub fn with_privileged_columns(&self, cols: &[usize]) -> LupiDataset {
        LupiDataset {
            privileged: self.privileged.select(Axis(1), cols),
            privileged_names: cols.iter().map(|&j| self.privileged_names[j].clone()).collect(),
            ..self.clone()
        }
    }

    /// Same rows with the standard block replaced; used to fold selected
    /// privileged columns into the feature set.
    pub fn with_standard(&self, standard: Array2<f64>, names: Vec<String>) -> Result<LupiDataset> {
        Self::new(
            standard,
            self.privileged.clone(),
            self.labels.clone(),
            names,
            self.privileged_names.clone(),
            self.label_name.clone(),
            self.classes.clone(),
        )
    }

    /// Both blocks merged into the standard block, with no privileged columns
    /// left. This is the view a complete-set model trains and predicts on.
    pub fn as_complete(&self) -> LupiDataset {
        let mut names = self.standard_names.clone();
        names.extend(self.privileged_names.iter().cloned());
        LupiDataset {
            standard: self.complete(),
            privileged: Array2::zeros((self.n_rows(), 0)),
            standard_names: names,
            privileged_names: Vec::new(),
            ..self.clone()
        }
    }

    fn raw_label(&self, i: usize) -> &str {
        let idx = label_to_index(self.labels[i], self.is_binary());
        &self.classes[idx]
    }
}

/// Class index for an encoded label.
pub fn label_to_index(y: i32, binary: bool) -> usize {
    if binary {
        usize::from(y > 0)
    } else {
        y as usize
    }
}

/// Encoded label for a class index.
pub fn index_to_label(k: usize, binary: bool) -> i32 {
    if binary {
        if k == 0 {
            -1
        } else {
            1
        }
    } else {
        k as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Standard,
    Privileged,
    Label,
    Ignore,
}

impl std::str::FromStr for ColumnRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(ColumnRole::Standard),
            "privileged" => Ok(ColumnRole::Privileged),
            "label" => Ok(ColumnRole::Label),
            "ignore" => Ok(ColumnRole::Ignore),
            other => Err(Error::Schema(format!("unknown column role '{other}'"))),
        }
    }
}

impl ColumnRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnRole::Standard => "standard",
            ColumnRole::Privileged => "privileged",
            ColumnRole::Label => "label",
            ColumnRole::Ignore => "ignore",
        }
    }
}

/// Header name → role map read from a sidecar file of `name = role` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    roles: BTreeMap<String, ColumnRole>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, role: ColumnRole) -> Self {
        self.roles.insert(column.to_string(), role);
        self
    }

    pub fn role(&self, column: &str) -> Option<ColumnRole> {
        self.roles.get(column).copied()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, role) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected 'column = role'", lineno + 1)))?;
            let name = name.trim().to_string();
            if schema.roles.insert(name.clone(), role.parse()?).is_some() {
                return Err(Error::Schema(format!("column '{name}' listed twice")));
            }
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

/// Read a delimited table (comma, or tab for `.tsv`) whose first row is the header.
///
/// Every header column must appear in `schema`. Two distinct labels are encoded
/// as `-1`/`+1` with the lexicographically smaller raw label mapped to `-1`; more
/// labels are encoded `0..K` in lexicographic order.
pub fn load_tabular(path: &Path, schema: &Schema) -> Result<LupiDataset> {
    let file = fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: String::new(), message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();

    let mut roles = Vec::with_capacity(header.len());
    for name in &header {
        let role = schema
            .role(name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' has no role")))?;
        roles.push(role);
    }
    for name in schema.roles.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!("schema names column '{name}' which is not in the header")));
        }
    }
    let label_cols: Vec<usize> = roles.iter().enumerate().filter(|(_, r)| **r == ColumnRole::Label).map(|(j, _)| j).collect();
    if label_cols.len() > 1 {
        return Err(Error::Schema("more than one label column".into()));
    }
    let label_col = *label_cols.first().ok_or_else(|| Error::Schema("no label column".into()))?;
    let std_cols: Vec<usize> = roles.iter().enumerate().filter(|(_, r)| **r == ColumnRole::Standard).map(|(j, _)| j).collect();
    let priv_cols: Vec<usize> = roles.iter().enumerate().filter(|(_, r)| **r == ColumnRole::Privileged).map(|(j, _)| j).collect();
    if std_cols.is_empty() {
        return Err(Error::Schema("zero standard columns".into()));
    }

    let mut std_vals = Vec::new();
    let mut priv_vals = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let cell = |j: usize| -> Result<f64> {
            let text = &record[j];
            let value: f64 = text.parse().map_err(|_| Error::Parse {
                row,
                column: header[j].clone(),
                message: format!("cannot parse '{text}' as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse { row, column: header[j].clone(), message: "non-finite value".into() });
            }
            Ok(value)
        };
        for &j in &std_cols {
            std_vals.push(cell(j)?);
        }
        for &j in &priv_cols {
            priv_vals.push(cell(j)?);
        }
        let label = record[label_col].to_string();
        if label.is_empty() {
            return Err(Error::Parse { row, column: header[label_col].clone(), message: "missing label".into() });
        }
        raw_labels.push(label);
    }
    let n = raw_labels.len();
    let standard = Array2::from_shape_vec((n, std_cols.len()), std_vals).expect("shape");
    let privileged = Array2::from_shape_vec((n, priv_cols.len()), priv_vals).expect("shape");
    let classes: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let binary = classes.len() == 2;
    let labels = raw_labels
        .iter()
        .map(|l| index_to_label(classes.binary_search(l).expect("class present"), binary))
        .collect();
    LupiDataset::new(
        standard,
        privileged,
        labels,
        std_cols.iter().map(|&j| header[j].clone()).collect(),
        priv_cols.iter().map(|&j| header[j].clone()).collect(),
        header[label_col].clone(),
        classes,
    )
}

/// Write `dataset` as a delimited table (standard, privileged, label columns)
/// and return the matching schema.
pub fn write_tabular(dataset: &LupiDataset, path: &Path) -> Result<Schema> {
    let io_err = |source: std::io::Error| Error::Io { path: path.to_path_buf(), source };
    let mut writer = csv::WriterBuilder::new().delimiter(delimiter_for(path)).from_writer(Vec::new());
    let mut schema = Schema::new();
    let mut header: Vec<&str> = Vec::new();
    for name in &dataset.standard_names {
        header.push(name);
        schema = schema.with(name, ColumnRole::Standard);
    }
    for name in &dataset.privileged_names {
        header.push(name);
        schema = schema.with(name, ColumnRole::Privileged);
    }
    header.push(&dataset.label_name);
    schema = schema.with(&dataset.label_name, ColumnRole::Label);
    let csv_err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) };
    writer.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.n_rows() {
        let mut record: Vec<String> = dataset.standard.row(i).iter().map(|v| v.to_string()).collect();
        record.extend(dataset.privileged.row(i).iter().map(|v| v.to_string()));
        record.push(dataset.raw_label(i).to_string());
        writer.write_record(&record).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)?;
    Ok(schema)
}

/// Write a schema sidecar file.
pub fn write_schema(schema: &Schema, column_order: &[String], path: &Path) -> Result<()> {
    let mut text = String::new();
    for name in column_order {
        if let Some(role) = schema.role(name) {
            text.push_str(&format!("{name} = {}\n", role.as_str()));
        }
    }
    write_atomic(path, text.as_bytes())
}

/// Write to a temporary sibling then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: path.to_path_buf(), source };
    let file_name = path.file_name().ok_or_else(|| Error::invalid(format!("'{}' is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}

/// Assignment of every row to one of `n_folds` stratified folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub fold_assignments: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl SplitPlan {
    /// `(train_rows, test_rows)` for one fold, each in ascending row order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.fold_assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified fold plan.
///
/// Fold sizes differ by at most one, and each fold receives every class in
/// proportion to its size, rounded up or down. Rows within a class are shuffled
/// with the seeded generator before being dealt to folds.
pub fn stratified_folds(labels: &[i32], n_folds: usize, seed: u64) -> Result<SplitPlan> {
    if n_folds < 2 {
        return Err(Error::invalid("n_folds must be at least 2"));
    }
    let mut by_class: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    for (class, rows) in &by_class {
        if rows.len() < n_folds {
            return Err(Error::invalid(format!(
                "class {class} has {} members, fewer than {n_folds} folds",
                rows.len()
            )));
        }
    }
    let n = labels.len();
    let fold_sizes: Vec<usize> = (0..n_folds).map(|f| n / n_folds + usize::from(f < n % n_folds)).collect();
    let class_sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let counts = rounded_allocation(&class_sizes, &fold_sizes);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; n];
    for (c, rows) in by_class.values_mut().enumerate() {
        rows.shuffle(&mut rng);
        let mut next = rows.iter();
        for (f, &count) in counts[c].iter().enumerate() {
            for &i in next.by_ref().take(count) {
                assignments[i] = f;
            }
        }
    }
    Ok(SplitPlan { fold_assignments: assignments, n_folds, seed })
}

/// Integer matrix with the given row and column sums whose entries are the floor
/// or ceiling of `rows[c] * cols[f] / total`.
///
/// Starts from the floors and distributes the remaining units with unit-capacity
/// augmenting paths between rows and columns; such a rounding always exists.
fn rounded_allocation(rows: &[usize], cols: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = rows.iter().sum();
    let mut counts: Vec<Vec<usize>> = rows.iter().map(|&r| cols.iter().map(|&c| r * c / total).collect()).collect();
    let fractional: Vec<Vec<bool>> = rows.iter().map(|&r| cols.iter().map(|&c| (r * c) % total != 0).collect()).collect();
    let mut row_left: Vec<usize> = rows.iter().zip(&counts).map(|(&r, row)| r - row.iter().sum::<usize>()).collect();
    let mut col_left: Vec<usize> = (0..cols.len()).map(|f| cols[f] - counts.iter().map(|row| row[f]).sum::<usize>()).collect();
    // bumped[c][f]: a unit has been added on top of the floor.
    let mut bumped = vec![vec![false; cols.len()]; rows.len()];

    fn augment(
        c: usize,
        fractional: &[Vec<bool>],
        bumped: &mut [Vec<bool>],
        col_left: &mut [usize],
        visited: &mut [bool],
    ) -> bool {
        for f in 0..col_left.len() {
            if !fractional[c][f] || bumped[c][f] || visited[f] {
                continue;
            }
            visited[f] = true;
            if col_left[f] > 0 {
                col_left[f] -= 1;
                bumped[c][f] = true;
                return true;
            }
            // Reroute a row that already used this column.
            for other in 0..bumped.len() {
                if other != c && bumped[other][f] {
                    bumped[other][f] = false;
                    if augment(other, fractional, bumped, col_left, visited) {
                        bumped[c][f] = true;
                        return true;
                    }
                    bumped[other][f] = true;
                }
            }
        }
        false
    }

    #[allow(clippy::needless_range_loop)]
    for c in 0..rows.len() {
        while row_left[c] > 0 {
            let mut visited = vec![false; cols.len()];
            let ok = augment(c, &fractional, &mut bumped, &mut col_left, &mut visited);
            assert!(ok, "controlled rounding always exists");
            row_left[c] -= 1;
        }
    }
    for (c, row) in counts.iter_mut().enumerate() {
        for (f, v) in row.iter_mut().enumerate() {
            *v += usize::from(bumped[c][f]);
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two 2-D Gaussian classes with label-flip outliers; the privileged column is
    /// the signed distance to the true boundary.
    Gauss2d,
    /// Five latent dimensions observed through a noisy standard block and a
    /// cleaner privileged block.
    LatentLupi,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss2d" => Ok(Scenario::Gauss2d),
            "latent-lupi" => Ok(Scenario::LatentLupi),
            other => Err(Error::invalid(format!("unknown scenario '{other}' (expected gauss2d or latent-lupi)"))),
        }
    }
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Gauss2d => "gauss2d",
            Scenario::LatentLupi => "latent-lupi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub noise_std_standard: f64,
    pub noise_std_privileged: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Defaults: unit standard noise, 0.1 privileged noise, no outliers.
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        SynthSpec { scenario, n, noise_std_standard: 1.0, noise_std_privileged: 0.1, outlier_fraction: 0.0, seed }
    }
}

/// Fixed linear functional that labels the latent-lupi scenario.
pub const LATENT_DIRECTION: [f64; 5] = [1.0, -0.8, 0.6, 0.4, -0.2];

pub fn make_synthetic(spec: &SynthSpec) -> Result<LupiDataset> {
    if spec.n < 4 {
        return Err(Error::invalid(format!("synthetic datasets need n >= 4, got {}", spec.n)));
    }
    if !(spec.noise_std_standard >= 0.0 && spec.noise_std_privileged >= 0.0) {
        return Err(Error::invalid("noise standard deviations must be non-negative"));
    }
    if !(0.0..=1.0).contains(&spec.outlier_fraction) {
        return Err(Error::invalid("outlier_fraction must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.scenario {
        Scenario::Gauss2d => Ok(gauss2d(spec, &mut rng)),
        Scenario::LatentLupi => latent_lupi(spec, &mut rng),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss2d(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> LupiDataset {
    let n = spec.n;
    let mut standard = Array2::zeros((n, 2));
    let mut privileged = Array2::zeros((n, 1));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1 } else { -1 };
        let mean = y as f64;
        let x0 = mean + spec.noise_std_standard * normal(rng);
        let x1 = mean + spec.noise_std_standard * normal(rng);
        standard[[i, 0]] = x0;
        standard[[i, 1]] = x1;
        // True boundary is x0 + x1 = 0.
        privileged[[i, 0]] = (x0 + x1) / std::f64::consts::SQRT_2 + spec.noise_std_privileged * normal(rng);
        labels.push(y);
    }
    let n_outliers = (spec.outlier_fraction * n as f64).round() as usize;
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    for &i in rows.iter().take(n_outliers) {
        labels[i] = -labels[i];
    }
    LupiDataset::new(
        standard,
        privileged,
        labels,
        vec!["x0".into(), "x1".into()],
        vec!["margin".into()],
        "y".into(),
        vec!["-1".into(), "1".into()],
    )
    .expect("generator output is well formed")
}

fn latent_lupi(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<LupiDataset> {
    if spec.noise_std_privileged > spec.noise_std_standard {
        return Err(Error::invalid("latent-lupi requires noise_std_privileged <= noise_std_standard"));
    }
    let n = spec.n;
    let dim = LATENT_DIRECTION.len();
    let mut standard = Array2::zeros((n, dim));
    let mut privileged = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let z: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let score: f64 = z.iter().zip(LATENT_DIRECTION.iter()).map(|(a, b)| a * b).sum();
        labels.push(if score >= 0.0 { 1 } else { -1 });
        for j in 0..dim {
            standard[[i, j]] = z[j] + spec.noise_std_standard * normal(rng);
            privileged[[i, j]] = z[j] + spec.noise_std_privileged * normal(rng);
        }
    }
    let outliers = (spec.outlier_fraction * n as f64).round() as usize;
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    for &i in rows.iter().take(outliers) {
        labels[i] = -labels[i];
    }
    LupiDataset::new(
        standard,
        privileged,
        labels,
        (0..dim).map(|j| format!("s{j}")).collect(),
        (0..dim).map(|j| format!("p{j}")).collect(),
        "y".into(),
        vec!["-1".into(), "1".into()],
    )
}
