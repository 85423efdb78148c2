#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forecast;
pub mod ingest;
pub mod matrix;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod real;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use real::Real;

pub type PanelData64 = ingest::PanelData<f64>;
pub type ModelSpec64 = model::ModelSpec<f64>;
pub type ParamVector64 = model::ParamVector<f64>;
pub type ChainTrace64 = mcmc::ChainTrace<f64>;
pub type SamplerConfig64 = mcmc::SamplerConfig<f64>;

pub type PanelData32 = ingest::PanelData<f32>;
pub type ModelSpec32 = model::ModelSpec<f32>;
pub type ParamVector32 = model::ParamVector<f32>;
pub type ChainTrace32 = mcmc::ChainTrace<f32>;
pub type SamplerConfig32 = mcmc::SamplerConfig<f32>;
