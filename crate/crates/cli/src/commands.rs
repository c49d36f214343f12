use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lupi::dataset::{load_tabular, make_synthetic, write_atomic, write_schema, write_tabular, LupiDataset, Schema, SynthSpec};
use lupi::eval::{comparison_from_summaries, repeated_cv, Trainer};
use lupi::model_io::{load_model, save_model};
use lupi::models::ModelSpec;
use lupi::par::Execution;
use lupi::select::select_privileged;
use ndarray::Array2;

use crate::config::{DataSource, ExperimentConfig, RawConfig, SelectConfig};
use crate::failure::{Failure, WithContext};

pub fn load_data(source: &DataSource) -> Result<LupiDataset, Failure> {
    source.check_files()?;
    match source {
        DataSource::File { data, schema } => {
            let schema = Schema::load(schema).labelled("dataset")?;
            load_tabular(data, &schema).labelled("dataset")
        }
        DataSource::Synth(spec) => make_synthetic(spec).labelled("dataset"),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))
}

/// Writes the table and its schema sidecar; returns the summary line.
pub fn synth(spec: &SynthSpec, data: &Path, schema: Option<&Path>) -> Result<String, Failure> {
    let ds = make_synthetic(spec).labelled("dataset")?;
    if let Some(dir) = data.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let schema_path = schema.map(Path::to_path_buf).unwrap_or_else(|| data.with_extension("schema"));
    let roles = write_tabular(&ds, data).labelled("dataset")?;
    let mut order = ds.standard_names().to_vec();
    order.extend(ds.privileged_names().iter().cloned());
    order.push(ds.label_name().to_string());
    write_schema(&roles, &order, &schema_path).labelled("dataset")?;
    let positives = ds.labels().iter().filter(|&&y| y == 1).count();
    Ok(format!(
        "{}: {} rows, {} standard + {} privileged columns, {} positive / {} negative -> {}, {}",
        spec.scenario.as_str(),
        ds.n_rows(),
        ds.n_standard(),
        ds.n_privileged(),
        positives,
        ds.n_rows() - positives,
        data.display(),
        schema_path.display()
    ))
}

fn module_of(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::StandardSvm { .. } | ModelSpec::CompleteSvm { .. } => "svm",
        ModelSpec::Kt { .. } => "transfer",
        ModelSpec::SvmPlus(_) => "svmplus",
        ModelSpec::Distill { .. } | ModelSpec::StandardNet { .. } => "distill",
    }
}

pub struct RunOutput {
    pub summary: String,
    pub dir: PathBuf,
}

/// Cross-validates the baseline and the configured approach on the same plans,
/// then fits both on all rows and saves them.
pub fn run(config_path: &Path, exec: Execution) -> Result<RunOutput, Failure> {
    let raw = RawConfig::load(config_path)?;
    let mut cfg = ExperimentConfig::from_raw(&raw)?;
    cfg.solver.exec = exec;
    let ds = load_data(&cfg.data)?;
    create_dir(&cfg.output_dir)?;

    let mut specs = vec![cfg.baseline.clone()];
    if cfg.model != cfg.baseline {
        specs.push(cfg.model.clone());
    }
    let mut named = Vec::new();
    for spec in &specs {
        let view = spec.evaluation_view(&ds);
        let cv = repeated_cv(&spec.trainer(cfg.solver), &view, cfg.folds, &cfg.seeds, exec).labelled(module_of(spec))?;
        named.push((spec.name().to_string(), cv.summary));
    }
    let runs = cfg.folds * cfg.seeds.len();
    let report = comparison_from_summaries(named, 0, runs, cfg.seeds.clone()).labelled("eval")?;

    let fit = |spec: &ModelSpec| spec.trainer(cfg.solver).train(&spec.evaluation_view(&ds)).labelled(module_of(spec));
    let model = fit(&cfg.model)?;
    let baseline = fit(&cfg.baseline)?;

    let dir = &cfg.output_dir;
    let mut summary = format!("approach: {}\n", cfg.approach.as_str());
    summary.push_str(&report.summary());
    write_atomic(&dir.join("report.csv"), report.to_table().as_bytes()).labelled("output")?;
    write_atomic(&dir.join("summary.txt"), summary.as_bytes()).labelled("output")?;
    save_model(&model, &dir.join("model.txt")).labelled("output")?;
    save_model(&baseline, &dir.join("baseline.txt")).labelled("output")?;
    Ok(RunOutput { summary, dir: dir.clone() })
}

pub fn select(config_path: &Path, exec: Execution) -> Result<RunOutput, Failure> {
    let raw = RawConfig::load(config_path)?;
    let mut cfg = SelectConfig::from_raw(&raw)?;
    cfg.selection.exec = exec;
    let ds = load_data(&cfg.data)?;
    let result = select_privileged(&ds, &cfg.selection).labelled("select")?;
    create_dir(&cfg.output_dir)?;
    let report = result.report(ds.privileged_names());
    write_atomic(&cfg.output_dir.join("selection.txt"), report.as_bytes()).labelled("output")?;
    Ok(RunOutput { summary: report, dir: cfg.output_dir })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub steps: usize,
}

/// Nine significant digits, fixed-point.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn grid_points(grid: &Grid) -> Array2<f64> {
    let axis = |(lo, hi): (f64, f64), k: usize| {
        if grid.steps == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (grid.steps - 1) as f64
        }
    };
    let s = grid.steps;
    Array2::from_shape_fn((s * s, 2), |(i, j)| if j == 0 { axis(grid.x, i / s) } else { axis(grid.y, i % s) })
}

/// `x,y,value` rows for one model.
pub fn boundary_table(model_path: &Path, grid: &Grid) -> Result<String, Failure> {
    if !model_path.is_file() {
        return Err(Failure::data(format!("{}: file not found", model_path.display())));
    }
    let model = load_model(model_path).labelled("model")?;
    if model.n_inputs() != 2 {
        return Err(Failure::data(format!(
            "{}: boundary grids need a model over 2 standard features, this one has {}",
            model_path.display(),
            model.n_inputs()
        )));
    }
    let points = grid_points(grid);
    let values = model.decision_values(points.view()).labelled("model")?;
    let mut out = String::from("x,y,value\n");
    for (p, v) in points.rows().into_iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", sig9(p[0]), sig9(p[1]), sig9(v));
    }
    Ok(out)
}

pub fn boundary(models: &[PathBuf], outputs: &[PathBuf], grid: &Grid) -> Result<Vec<String>, Failure> {
    if models.len() != outputs.len() {
        return Err(Failure::usage(format!("{} --model paths but {} --out paths", models.len(), outputs.len())));
    }
    if grid.steps == 0 || !(grid.x.0 < grid.x.1 && grid.y.0 < grid.y.1) {
        return Err(Failure::usage("grid needs steps ≥ 1 and min < max on both axes"));
    }
    // Build every table first so a bad model leaves no partial output.
    let tables = models.iter().map(|m| boundary_table(m, grid)).collect::<Result<Vec<_>, _>>()?;
    let mut lines = Vec::new();
    for ((table, out), model) in tables.iter().zip(outputs).zip(models) {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        write_atomic(out, table.as_bytes()).labelled("output")?;
        lines.push(format!("{} -> {} ({} points)", model.display(), out.display(), grid.steps * grid.steps));
    }
    Ok(lines)
}
