//! Desk-scale multi-task forecasting over earnings-call style data.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`tensor`]: dense tensors with reverse-mode automatic differentiation
//!   and an Adam optimizer; the substrate for every trainable module.
//! - [`numerals`]: financial numeral detection, category tagging, and the
//!   two adaptive pre-training tasks (category classification, magnitude
//!   comparison).
//! - [`encoder`]: hierarchical multi-modal encoder: token-level transformer,
//!   text/audio fusion, sentence-level transformer, regression heads.
//! - [`pareto`]: preference-vector decomposition of the two-task problem
//!   and constrained multi-objective descent.
//! - [`metrics`]: MCC, F1, MSE, realized log-volatility, LRAP, ROC AUC.
//! - [`trading`]: deterministic single-share trading simulation with
//!   cumulative profit and Sharpe ratio.
//! - [`data`]: corpus schema, chronological splitting, label computation,
//!   and a seeded synthetic corpus generator with planted signal.
//! - [`pipeline`]: orchestration: pre-training, Pareto training, evaluation
//!   and simulation reports.

pub mod data;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod numerals;
pub mod pareto;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod trading;

pub use error::{Error, Result};
