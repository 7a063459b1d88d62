//! Polychoric correlation from ordinal contingency tables: maximum likelihood,
//! the two-step estimator, and a minimum-discrepancy estimator that stays
//! accurate when part of the sample does not follow the latent normal model.

pub mod discrepancy;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod matrix;
pub mod model;
pub mod normal;
pub mod optim;
pub mod simulation;

pub use discrepancy::{loss, phi, DiscrepancyConfig, DEFAULT_C};
pub use error::{Error, Margin, Result};
pub use estimate::{
    detect_instability, fit, fit_frequencies, fit_twostep, fit_twostep_frequencies, pearson_sample_correlation, EstimateResult, FitOptions, Init, Method, MlCovariance,
    Warning,
};
pub use inference::{
    confidence_interval, flag_misfit_cells, pearson_residuals, sandwich_covariance, score, ConfidenceInterval,
    CovarianceComponents, MisfitCell, PearsonResiduals,
};
pub use model::{
    cell_prob_grad, cell_prob_hessian, cell_probs, empirical_frequencies, CellGrid, ContingencyTable, GridKind, Theta,
};
pub use matrix::{fit_matrix, CorrelationMatrixResult, OrdinalDataset};
pub use simulation::{
    generate_multivariate, generate_pair, population_frequencies, run_study, Estimator, MixtureSpec, Misspecification,
    PerformanceReport,
};
