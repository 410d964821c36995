//! Health-cost accounting for data-center air pollution.
//!
//! The pipeline runs from facility emissions ([`attribution`]) through
//! source-receptor dispersion ([`dispersion`]) to incidence and monetized
//! health cost ([`health`]). Time-varying price and intensity signals
//! ([`signals`], [`stats`]) feed the health-aware load balancer in
//! [`scheduler`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod dispersion;
mod error;
pub mod health;
pub mod pollutants;
pub mod scheduler;
pub mod signals;
pub mod stats;

pub use error::{Error, Result};
pub use pollutants::{PollutantVector, Species};
