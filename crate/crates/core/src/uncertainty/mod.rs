//! Heteroscedastic covariance construction, Gaussian NLL loss, and
//! MC-dropout uncertainty fusion.

pub mod chol;
pub mod fuse;

pub use chol::{
    build_covariance, gaussian_nll, gaussian_nll_with_grads, CholFactor, NllGrads, ALPHA_FLOOR,
    BETA_INDEX,
};
pub use fuse::{fuse_mc_samples, CovarianceEstimate};
