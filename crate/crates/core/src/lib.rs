//! Semi-supervised learning on small 2-D problems: a reverse-mode autodiff
//! engine, an MLP, the usual SSL losses, dataset splitting and an
//! experiment harness.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod losses;
pub mod matrix;
pub mod model;
pub mod report;
pub mod rng;
pub mod training;

pub use autodiff::{Expr, Gradient, Graph};
pub use datasets::{Dataset, SslSplit};
pub use error::{Error, Result};
pub use losses::{Method, MethodConfig};
pub use matrix::Matrix;
pub use model::{ParameterSet, StochasticConfig};
pub use training::{train, RunRecord, TrainConfig};
