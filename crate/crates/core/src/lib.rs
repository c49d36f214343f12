//! Detection models that learn from features available only at training time.
//!
//! Three training approaches share one data model ([`dataset::LupiDataset`]):
//!
//! * [`transfer`]: knowledge transfer. Per-feature mapping functions estimate the
//!   privileged block from standard features at run-time.
//! * [`svmplus`]: model influence. The SVM+ dual uses a second kernel over the
//!   privileged block to correct the slack of a standard-feature SVM.
//! * [`distill`]: generalized distillation. A teacher network on privileged
//!   features produces tempered soft labels for a student on standard features.
//!
//! Every trained model predicts from the standard block alone. [`select`] picks
//! which privileged columns are worth collecting and [`eval`] runs the
//! cross-validated comparisons.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod distill;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod model_io;
pub mod models;
pub mod par;
pub mod qp;
pub mod select;
pub mod svm;
pub mod svmplus;
pub mod transfer;

pub use error::{Error, Result};
