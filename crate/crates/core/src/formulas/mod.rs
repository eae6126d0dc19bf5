//! Asymptotic predictions: deterministic MSW limits, CLT means and
//! variances, and the contour-integral covariances for linear spectral
//! statistics.

mod hankel;
mod lss;
mod mf;
mod prediction;
mod zeta;

pub use hankel::{hankel_system, mmse_limit, HankelSystem, MMSE_TOL};
pub use lss::{
    lss_vec_cov_numeric, lss_vec_cov_numeric_c2, lss_eig_cov_base_numeric,
    lss_eig_cov_correction_closed, lss_eig_cov_correction_numeric, lss_eig_mean_base_numeric,
    lss_eig_mean_correction_closed, lss_eig_mean_correction_numeric, lss_eig_prediction, LssContours,
    Realness,
    THEORY_TOL,
};
pub use mf::{mf_mi_mean_exact, mf_mi_params, mf_sum_mean, mf_sum_mean_exact, mf_sum_variance};
pub use prediction::{predict, CltPrediction, PredictionInputs, StatisticKind};
pub use zeta::{msw_variance, msw_variance_with, zeta_covariance, BridgeConvention, ZetaCovariance};
