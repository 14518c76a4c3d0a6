//! Post-hoc interpretation engine for black-box classifiers.
//!
//! Local gradient explanations ([`gradient`]), perturbation surrogates
//! ([`perturbation`]), and input-space optimization ([`global`]) run over a
//! small self-contained CNN engine ([`engine`]) or any [`models::Predictor`].

pub mod cli;
pub mod engine;
pub mod error;
pub mod global;
pub mod gradient;
pub mod io;
pub mod models;
pub mod perturbation;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
