//! Alternating k-means biclustering.
//!
//! Rows and columns of a data matrix are split into `k` exclusive
//! biclusters by minimizing the empirical clustering risk under the
//! dimensionality-normalized (dn) norm: each row is scored against every
//! bicluster center using only that bicluster's columns, with squared
//! residuals averaged over the number of columns involved.
//!
//! Modules:
//! - [`matrix`]: dense matrices, index sets, partitions.
//! - [`loss`]: dn norm, empirical risk, penalized loss.
//! - [`kmeans`]: Euclidean Lloyd k-means (initialization and KM baseline).
//! - [`engine`]: the alternating algorithm and multi-restart fitting.
//! - [`simgen`]: two-block Gaussian block-model generator.
//! - [`evaluation`]: misclassification rates and elbow curves.
//! - [`bench`]: simulation grids with replicate aggregation.
//! - [`io`] and [`cli`]: file formats and the batch commands behind `akm`.

pub mod bench;
pub mod cli;
pub mod engine;
pub mod evaluation;
pub mod io;
pub mod kmeans;
pub mod loss;
pub mod matrix;
pub mod rng;
pub mod simgen;

pub use engine::{
    akm_fit, akm_fit_lambdas, akm_fit_report, akm_single_run, AkmConfig, BiclusterResult,
    FitReport, Source,
};
pub use loss::{dn_norm_sq, empirical_risk, penalized_loss, CenterSet, LossReport};
pub use matrix::{project, DataMatrix, IndexSet, Partition};
