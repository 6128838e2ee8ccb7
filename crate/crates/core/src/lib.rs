//! Fixed-effects estimation for panel data under possible misspecification:
//! the within estimator, half-panel jackknife and HK bias corrections,
//! clustered-covariance and cross-section bootstrap inference, simulation
//! designs, pseudo-true parameter oracles and a Monte Carlo harness.

// `!(x < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod mc;
pub mod numeric;
pub mod oracle;
pub mod panel;
pub mod rng;

pub use bootstrap::{BootstrapRun, WeightDraw, WeightScheme};
pub use error::{Error, ErrorCategory, Result};
pub use estimators::{fe_fit, hk_fit, hpj_fit, FitResult, Method};
pub use inference::{ccm_sigma, normal_ci, t_statistic, wald_statistic, CcmEstimate, Interval};
pub use mc::{run_experiment, ExperimentConfig, InferenceOption, McResult};
pub use panel::{
    build_lagged_design, load_csv, within_transform, LagSpec, PanelDataset, WithinView,
};
