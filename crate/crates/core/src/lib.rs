//! Ray-traced link-level simulation of base-station to vehicle links in
//! statistically generated high-rise cities, across 4.6, 8.2, 15 and 28 GHz.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod band;
pub mod channel;
pub mod city;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod material;
pub mod metrics;
pub mod propagation;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
