//! Gaussian-process emulation with a power-exponential correlation,
//! profile-likelihood fitting by a genetic algorithm and interchangeable
//! linear-algebra backends.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod bench;
pub mod correlation;
pub mod error;
pub mod experiment;
pub mod likelihood;
pub mod optimizer;
pub mod predictor;
pub mod real;
pub mod types;

pub use backend::{Backend, BackendKind, CorrelationFactor, LedgerCounts};
pub use correlation::{build_corr_matrix, corr_vector, CorrelationMatrix, PairwisePowers};
pub use error::{GpError, Result};
pub use experiment::{maximin_lhd, DesignSpec, TestFunction};
pub use likelihood::{fit_gp, neg2_log_profile, refine_fit, GpModel, ProfileEval};
pub use optimizer::{ga_minimize, GaConfig, GaOutcome, GaTrace};
pub use predictor::{predict, predict_set, sspe, PredictionSet};
pub use types::{Dataset, FitConfig, Hyperparameters, Precision, ThetaBounds};
