//! One handle over every approach, so drivers can train, evaluate and save
//! models without knowing which approach produced them.

use std::borrow::Cow;

use ndarray::ArrayView2;

use crate::dataset::{index_to_label, LupiDataset};
use crate::distill::{self, argmax, DistillConfig, DistilledModel, FeedForwardNet};
use crate::error::{Error, Result};
use crate::eval::{Predictor, Trainer};
use crate::kernels::KernelSpec;
use crate::svm::{self, SolverOptions, SvmModel};
use crate::svmplus::{self, SvmPlusConfig, SvmPlusModel};
use crate::transfer::{self, KtHyper, KtModel, MappingKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    Standard,
    Complete,
    KtRegression,
    KtSimilarity,
    SvmPlus,
    Distill,
}

impl Approach {
    pub const ALL: [Approach; 6] = [
        Approach::Standard,
        Approach::Complete,
        Approach::KtRegression,
        Approach::KtSimilarity,
        Approach::SvmPlus,
        Approach::Distill,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Standard => "standard",
            Approach::Complete => "complete",
            Approach::KtRegression => "kt-regression",
            Approach::KtSimilarity => "kt-similarity",
            Approach::SvmPlus => "svmplus",
            Approach::Distill => "distill",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approach::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown approach '{s}'")))
    }
}

/// Everything needed to train one model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    StandardSvm { kernel: KernelSpec, c: f64 },
    /// Trained and evaluated on [`LupiDataset::as_complete`].
    CompleteSvm { kernel: KernelSpec, c: f64 },
    Kt { kind: MappingKind, kernel: KernelSpec, c: f64, hyper: KtHyper },
    SvmPlus(SvmPlusConfig),
    Distill { config: DistillConfig, hidden: Vec<usize> },
    /// Student architecture trained on hard labels only.
    StandardNet { config: DistillConfig, hidden: Vec<usize> },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::StandardSvm { .. } => "standard",
            ModelSpec::CompleteSvm { .. } => "complete",
            ModelSpec::Kt { kind: MappingKind::Regression, .. } => "kt-regression",
            ModelSpec::Kt { kind: MappingKind::Similarity, .. } => "kt-similarity",
            ModelSpec::SvmPlus(_) => "svmplus",
            ModelSpec::Distill { .. } => "distill",
            ModelSpec::StandardNet { .. } => "standard-net",
        }
    }

    /// The rows a model of this kind sees; only the complete-set baseline
    /// merges the privileged block into its inputs.
    pub fn evaluation_view<'a>(&self, dataset: &'a LupiDataset) -> Cow<'a, LupiDataset> {
        match self {
            ModelSpec::CompleteSvm { .. } => Cow::Owned(dataset.as_complete()),
            _ => Cow::Borrowed(dataset),
        }
    }

    pub fn trainer(&self, opts: SolverOptions) -> ModelTrainer {
        ModelTrainer { spec: self.clone(), opts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTrainer {
    pub spec: ModelSpec,
    pub opts: SolverOptions,
}

impl Trainer for ModelTrainer {
    type Model = TrainedModel;

    fn train(&self, train: &LupiDataset) -> Result<TrainedModel> {
        let opts = &self.opts;
        Ok(match &self.spec {
            ModelSpec::StandardSvm { kernel, c } => {
                TrainedModel::Svm(svm::train_svm_with(train.standard(), train.binary_labels()?, *kernel, *c, opts)?)
            }
            ModelSpec::CompleteSvm { kernel, c } => {
                let complete = train.complete();
                TrainedModel::Complete(svm::train_svm_with(complete.view(), train.binary_labels()?, *kernel, *c, opts)?)
            }
            ModelSpec::Kt { kind, kernel, c, hyper } => {
                TrainedModel::Kt(transfer::train_kt_with(train, *kind, *kernel, *c, hyper, opts)?)
            }
            ModelSpec::SvmPlus(cfg) => TrainedModel::SvmPlus(svmplus::train_svmplus_with(train, cfg, opts)?),
            ModelSpec::Distill { config, hidden } => TrainedModel::Distill(distill::train_distilled(train, config, hidden)?),
            ModelSpec::StandardNet { config, hidden } => {
                let (net, _) =
                    distill::train_supervised(train.standard(), &train.class_indices(), train.n_classes(), hidden, config)?;
                TrainedModel::Net(NetModel { net, binary: train.is_binary() })
            }
        })
    }
}

/// Feed-forward classifier with labels in the dataset encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct NetModel {
    pub net: FeedForwardNet,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(SvmModel),
    /// SVM over `[standard | privileged]`.
    Complete(SvmModel),
    SvmPlus(SvmPlusModel),
    Kt(KtModel),
    Distill(DistilledModel),
    Net(NetModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Complete(_) => "complete",
            TrainedModel::SvmPlus(_) => "svmplus",
            TrainedModel::Kt(_) => "kt",
            TrainedModel::Distill(_) => "distill",
            TrainedModel::Net(_) => "net",
        }
    }

    /// Width of the rows `predict` expects.
    pub fn n_inputs(&self) -> usize {
        match self {
            TrainedModel::Svm(m) | TrainedModel::Complete(m) => m.n_features(),
            TrainedModel::SvmPlus(m) => m.n_features(),
            TrainedModel::Kt(m) => m.mappings.n_standard,
            TrainedModel::Distill(m) => m.student.n_inputs(),
            TrainedModel::Net(m) => m.net.n_inputs(),
        }
    }

    /// Real-valued score whose sign is the binary decision. Networks report
    /// `P(+1) − P(−1)`.
    pub fn decision_values(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let net_margin = |net: &FeedForwardNet, binary: bool| -> Result<Vec<f64>> {
            if !binary {
                return Err(Error::invalid("decision values need a binary model"));
            }
            let p = net.predict_proba(rows)?;
            Ok(p.rows().into_iter().map(|r| r[1] - r[0]).collect())
        };
        match self {
            TrainedModel::Svm(m) | TrainedModel::Complete(m) => m.decision_values(rows),
            TrainedModel::SvmPlus(m) => m.decision_values(rows),
            TrainedModel::Kt(m) => m.decision_values(rows),
            TrainedModel::Distill(m) => net_margin(&m.student, m.binary),
            TrainedModel::Net(m) => net_margin(&m.net, m.binary),
        }
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        match self {
            TrainedModel::Svm(m) | TrainedModel::Complete(m) => m.predict(rows),
            TrainedModel::SvmPlus(m) => m.predict(rows),
            TrainedModel::Kt(m) => m.predict(rows),
            TrainedModel::Distill(m) => m.predict(rows),
            TrainedModel::Net(m) => m.predict(rows),
        }
    }
}

impl Predictor for SvmModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        SvmModel::predict(self, rows)
    }
}

impl Predictor for SvmPlusModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        SvmPlusModel::predict(self, rows)
    }
}

impl Predictor for KtModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        KtModel::predict(self, rows)
    }
}

impl Predictor for DistilledModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        DistilledModel::predict(self, rows)
    }
}

impl Predictor for NetModel {
    fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        let p = self.net.predict_proba(rows)?;
        Ok(p.rows().into_iter().map(|r| index_to_label(argmax(r), self.binary)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, stratified_folds, Scenario, SynthSpec};
    use crate::eval::cross_validate;

    #[test]
    fn approach_names_round_trip() {
        for a in Approach::ALL {
            assert_eq!(a.as_str().parse::<Approach>().unwrap(), a);
        }
        assert!("svm++".parse::<Approach>().is_err());
    }

    #[test]
    fn complete_baseline_uses_merged_view() {
        let ds = make_synthetic(&SynthSpec::new(Scenario::Gauss2d, 40, 2)).unwrap();
        let spec = ModelSpec::CompleteSvm { kernel: KernelSpec::Linear, c: 1.0 };
        let view = spec.evaluation_view(&ds);
        assert_eq!(view.n_standard(), 3);
        let plan = stratified_folds(view.labels(), 4, 0).unwrap();
        let cv = cross_validate(&spec.trainer(SolverOptions::default()), &view, &plan).unwrap();
        assert!(cv.summary.accuracy.mean > 0.5);
        let model = spec.trainer(SolverOptions::default()).train(&view).unwrap();
        assert_eq!(model.n_inputs(), 3);
        assert!(model.predict(ds.standard()).is_err());
    }

    #[test]
    fn distill_at_lambda_zero_equals_standard_net() {
        let ds = make_synthetic(&SynthSpec::new(Scenario::LatentLupi, 60, 4)).unwrap();
        let config = DistillConfig { lambda: 0.0, epochs: 20, ..DistillConfig::default() };
        let hidden = distill::DEFAULT_HIDDEN.to_vec();
        let opts = SolverOptions::default();
        let d = ModelSpec::Distill { config, hidden: hidden.clone() }.trainer(opts).train(&ds).unwrap();
        let n = ModelSpec::StandardNet { config, hidden }.trainer(opts).train(&ds).unwrap();
        assert_eq!(d.decision_values(ds.standard()).unwrap(), n.decision_values(ds.standard()).unwrap());
    }
}
