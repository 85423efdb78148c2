//! Accounting recursion, mean functions, likelihoods and priors.

mod accounting;
mod likelihood;
pub(crate) mod mean;
mod params;
mod prior;
mod spec;

pub use accounting::{accounting_forward, accounting_step, observed_cases, LatentState};
pub use likelihood::{normal_deviance_cell, poisson_deviance_cell, total_deviance};
pub use mean::{compute_state, log_mean, transmission_term, CellInputs, Design};
pub use params::{zero_sum_tolerance, ParamBlock, ParamLayout, ParamVector};
pub use prior::{gamma_logpdf, gaussian_logpdf, icar_logpdf, icar_quadratic_form, log_prior};
pub use spec::{DataModel, ModelSpec, PriorConfig, Variant};
