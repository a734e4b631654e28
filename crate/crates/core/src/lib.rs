//! Depth-based supervised classification with the DD-alpha procedure.

pub mod alpha;
pub mod classifier;
pub mod depth;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod lp;
pub mod mcd;
pub mod rng;
pub mod sig17;
pub mod simulation;
pub mod tolerance;

pub use classifier::{train, Config, Model, OutsiderRule, Prediction};
pub use depth::{DepthKind, DepthVector, Estimator, LabeledDataset};
pub use error::{Error, Result};
pub use linalg::Matrix;
