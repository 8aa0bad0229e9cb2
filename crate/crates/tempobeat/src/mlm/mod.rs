//! Linear mixed models over the three temporal levels: crossed hour-of-day
//! intercepts alongside date-within-month-year intercepts, fit by maximum
//! likelihood with the fixed effects profiled out.

mod design;
mod fit;
mod optim;
mod oracle;
mod solve;

pub use design::{build_design, Design, Factor, ModelKind, ModelSpec, Restriction, FACTOR_NAMES};
pub use fit::{
    fit_ml, lr_test_vs_linear, one_way_ml_closed_form, ols_loglik, predict_conditional,
    FixedEffectEstimate, ModelFit, RandomEffects, VarianceComponent, VarianceComponents,
    LOG_VAR_HI, LOG_VAR_LO, Z_95,
};
pub use optim::FD_STEP;
pub use oracle::{dense_blups, oracle_fit_dense, ORACLE_MAX_ROWS};
pub use solve::{DesignStats, Evaluation, ProfiledDeviance, Sigma2};
