//! Flat `key = value` experiment files with dotted keys.
//!
//! ```text
//! # comments and blank lines are ignored
//! data.synth.scenario = latent-lupi
//! data.synth.n = 300
//! approach = svmplus
//! approach.svmplus.gamma = 0.5
//! eval.seeds = 0,1,2
//! output.dir = out
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lupi::dataset::{Scenario, SynthSpec};
use lupi::distill::{DistillConfig, DEFAULT_HIDDEN};
use lupi::kernels::KernelSpec;
use lupi::models::{Approach, ModelSpec};
use lupi::select::SelectionConfig;
use lupi::svm::SolverOptions;
use lupi::svmplus::SvmPlusConfig;
use lupi::transfer::{KtHyper, MappingKind};

use crate::failure::Failure;

const KNOWN_KEYS: &[&str] = &[
    "data.path",
    "data.schema",
    "data.synth.scenario",
    "data.synth.n",
    "data.synth.seed",
    "data.synth.noise_standard",
    "data.synth.noise_privileged",
    "data.synth.outliers",
    "approach",
    "baseline.kernel",
    "baseline.c",
    "approach.complete.kernel",
    "approach.complete.c",
    "approach.kt.kernel",
    "approach.kt.c",
    "approach.kt.max_degree",
    "approach.kt.k",
    "approach.kt.subsample_cap",
    "approach.kt.top_p",
    "approach.kt.seed",
    "approach.svmplus.kernel",
    "approach.svmplus.kernel_privileged",
    "approach.svmplus.c",
    "approach.svmplus.kappa",
    "approach.svmplus.gamma",
    "approach.distill.temperature",
    "approach.distill.lambda",
    "approach.distill.epochs",
    "approach.distill.batch_size",
    "approach.distill.learning_rate",
    "approach.distill.hidden",
    "approach.distill.seed",
    "select.max_features",
    "select.min_gain",
    "select.tau",
    "select.kernel",
    "select.c",
    "select.folds",
    "select.seed",
    "eval.folds",
    "eval.seeds",
    "solver.tol",
    "solver.max_iter",
    "output.dir",
];

/// Raw key/value pairs plus the directory relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("config line {}: expected 'key = value'", i + 1)))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Failure::usage(format!("config line {}: unknown key '{key}'", i + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Failure::usage(format!("config line {}: '{key}' set twice", i + 1)));
            }
        }
        Ok(RawConfig { values, base })
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Failure::usage(format!("'{key}': cannot parse '{v}'"))),
        }
    }

    fn kernel(&self, key: &str, default: KernelSpec) -> Result<KernelSpec, Failure> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| Failure::usage(format!("'{key}': {e}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, Failure> {
        let Some(v) = self.str(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| Failure::usage(format!("'{key}': cannot parse '{s}'"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(|p| self.base.join(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { data: PathBuf, schema: PathBuf },
    Synth(SynthSpec),
}

impl DataSource {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Failure> {
        match (raw.path("data.path"), raw.str("data.synth.scenario")) {
            (Some(_), Some(_)) => Err(Failure::usage("set either data.path or data.synth.scenario, not both")),
            (None, None) => Err(Failure::usage("no data source: set data.path or data.synth.scenario")),
            (Some(data), None) => {
                let schema = raw.path("data.schema").unwrap_or_else(|| data.with_extension("schema"));
                Ok(DataSource::File { data, schema })
            }
            (None, Some(scenario)) => {
                let scenario: Scenario = scenario.parse().map_err(|e| Failure::usage(format!("data.synth.scenario: {e}")))?;
                let mut spec = SynthSpec::new(scenario, raw.get("data.synth.n", 200)?, raw.get("data.synth.seed", 0)?);
                spec.noise_std_standard = raw.get("data.synth.noise_standard", spec.noise_std_standard)?;
                spec.noise_std_privileged = raw.get("data.synth.noise_privileged", spec.noise_std_privileged)?;
                spec.outlier_fraction = raw.get("data.synth.outliers", spec.outlier_fraction)?;
                Ok(DataSource::Synth(spec))
            }
        }
    }

    /// Referenced files must exist when a run starts.
    pub fn check_files(&self) -> Result<(), Failure> {
        if let DataSource::File { data, schema } = self {
            for p in [data, schema] {
                if !p.is_file() {
                    return Err(Failure::data(format!("{}: file not found", p.display())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub approach: Approach,
    pub model: ModelSpec,
    pub baseline: ModelSpec,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub solver: SolverOptions,
    pub output_dir: PathBuf,
}

fn distill_config(raw: &RawConfig) -> Result<(DistillConfig, Vec<usize>), Failure> {
    let d = DistillConfig::default();
    let cfg = DistillConfig {
        temperature: raw.get("approach.distill.temperature", d.temperature)?,
        lambda: raw.get("approach.distill.lambda", d.lambda)?,
        epochs: raw.get("approach.distill.epochs", d.epochs)?,
        batch_size: raw.get("approach.distill.batch_size", d.batch_size)?,
        learning_rate: raw.get("approach.distill.learning_rate", d.learning_rate)?,
        seed: raw.get("approach.distill.seed", d.seed)?,
    };
    let hidden = raw.list("approach.distill.hidden")?.unwrap_or_else(|| DEFAULT_HIDDEN.to_vec());
    Ok((cfg, hidden))
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Failure> {
        let approach: Approach = raw
            .str("approach")
            .ok_or_else(|| Failure::usage("config must set 'approach'"))?
            .parse()
            .map_err(|e| Failure::usage(format!("approach: {e}")))?;
        let base_kernel = raw.kernel("baseline.kernel", KernelSpec::Linear)?;
        let base_c = raw.get("baseline.c", 1.0)?;
        let standard = ModelSpec::StandardSvm { kernel: base_kernel, c: base_c };
        let model = match approach {
            Approach::Standard => standard.clone(),
            Approach::Complete => ModelSpec::CompleteSvm {
                kernel: raw.kernel("approach.complete.kernel", base_kernel)?,
                c: raw.get("approach.complete.c", base_c)?,
            },
            Approach::KtRegression | Approach::KtSimilarity => {
                let d = KtHyper::default();
                let top_p: Option<usize> = match raw.str("approach.kt.top_p") {
                    None | Some("none") => None,
                    Some(_) => Some(raw.get("approach.kt.top_p", 0)?),
                };
                ModelSpec::Kt {
                    kind: if approach == Approach::KtRegression { MappingKind::Regression } else { MappingKind::Similarity },
                    kernel: raw.kernel("approach.kt.kernel", base_kernel)?,
                    c: raw.get("approach.kt.c", base_c)?,
                    hyper: KtHyper {
                        max_degree: raw.get("approach.kt.max_degree", d.max_degree)?,
                        k: raw.get("approach.kt.k", d.k)?,
                        subsample_cap: raw.get("approach.kt.subsample_cap", d.subsample_cap)?,
                        top_p,
                        seed: raw.get("approach.kt.seed", d.seed)?,
                    },
                }
            }
            Approach::SvmPlus => ModelSpec::SvmPlus(SvmPlusConfig::new(
                raw.kernel("approach.svmplus.kernel", base_kernel)?,
                raw.kernel("approach.svmplus.kernel_privileged", KernelSpec::Linear)?,
                raw.get("approach.svmplus.c", base_c)?,
                raw.get("approach.svmplus.kappa", 2.0)?,
                raw.get("approach.svmplus.gamma", 1.0)?,
            )),
            Approach::Distill => {
                let (config, hidden) = distill_config(raw)?;
                ModelSpec::Distill { config, hidden }
            }
        };
        // Distillation is compared against the same network without soft labels.
        let baseline = match &model {
            ModelSpec::Distill { config, hidden } => ModelSpec::StandardNet { config: *config, hidden: hidden.clone() },
            _ => standard,
        };
        let seeds = raw.list("eval.seeds")?.unwrap_or_else(|| lupi::eval::DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(Failure::usage("eval.seeds is empty"));
        }
        let defaults = SolverOptions::default();
        let max_iter = match raw.str("solver.max_iter") {
            None => None,
            Some(_) => Some(raw.get("solver.max_iter", 0usize)?),
        };
        Ok(ExperimentConfig {
            data: DataSource::from_raw(raw)?,
            approach,
            model,
            baseline,
            folds: raw.get("eval.folds", 5)?,
            seeds,
            solver: SolverOptions { tol: raw.get("solver.tol", defaults.tol)?, max_iter, exec: defaults.exec },
            output_dir: raw.path("output.dir").unwrap_or_else(|| raw.base.join("lupi-out")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    pub data: DataSource,
    pub selection: SelectionConfig,
    pub output_dir: PathBuf,
}

impl SelectConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Failure> {
        let d = SelectionConfig::default();
        let max_features = match raw.str("select.max_features") {
            None | Some("all") => d.max_features,
            Some(_) => raw.get("select.max_features", 0)?,
        };
        Ok(SelectConfig {
            data: DataSource::from_raw(raw)?,
            selection: SelectionConfig {
                max_features,
                min_gain: raw.get("select.min_gain", d.min_gain)?,
                hard_margin_tau: raw.get("select.tau", d.hard_margin_tau)?,
                evaluator_kernel: raw.kernel("select.kernel", d.evaluator_kernel)?,
                evaluator_c: raw.get("select.c", d.evaluator_c)?,
                n_folds: raw.get("select.folds", d.n_folds)?,
                seed: raw.get("select.seed", d.seed)?,
                exec: d.exec,
            },
            output_dir: raw.path("output.dir").unwrap_or_else(|| raw.base.join("lupi-out")),
        })
    }
}
