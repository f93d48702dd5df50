//! Inference kernel: χ² screening, L1 feature elimination, refit and Wald tests.

pub mod chi2;
pub mod linalg;
pub mod logistic;
pub mod special;
pub mod wald;

pub use chi2::{chi_squared_test, ChiSquaredOptions, ChiSquaredReport, ContingencyTable};
pub use linalg::{Cholesky, Matrix};
pub use logistic::{
    fit_logistic_l1, fit_logistic_mle, negative_log_likelihood, nll_gradient, nll_hessian, Design,
    LassoFit, MleFit, SolverSettings,
};
pub use special::{chi2_sf, erfc, gamma_q, normal_two_sided_p};
pub use wald::{wald_test, wald_tests, SignificanceTier, WaldRow};
