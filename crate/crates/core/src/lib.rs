//! Forecasting toolkit for one-year-ahead football player development.
//!
//! The pipeline runs: synthetic league simulation ([`sim`]) → Elo-style
//! ratings ([`rating`]) → labeled monthly/biannual datasets ([`features`]) →
//! linear, tree and kNN regressors ([`linear`], [`tree`], [`knn`]) with
//! uncertainty estimates ([`uncertainty`]) → time-series tuning
//! ([`tuning`]) → subgroup-aware evaluation ([`evaluation`]).
//! [`experiment`] wires these together behind a config file.

pub mod data;
pub mod dates;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod io;
pub mod knn;
pub mod linear;
pub mod matrix;
pub mod models;
pub mod rating;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod tree;
pub mod tuning;
pub mod uncertainty;

pub use data::{Dataset, FeatureDef, FeatureKind, IndicatorKind, LabeledExample, PlayerHistory};
pub use error::{Error, Result};
pub use matrix::Matrix;
