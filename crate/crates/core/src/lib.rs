//! Geo-spatiotemporal priors for fine-grained species classification.
//!
//! A small residual MLP estimates `P(species | lat, lon, date)` from a
//! cyclical encoding of the observation. Its output is fused with an
//! external image classifier by elementwise product. The crate also carries
//! the class-imbalance tools used to train such priors on long-tailed data,
//! a synthetic data generator, and top-k micro/macro evaluation.

pub mod domain;
pub mod encode;
pub mod error;
pub mod fusion;
pub mod geonet;
pub mod imbalance;
pub mod io;
pub mod metrics;
pub mod synth;

pub use domain::{validate_dataset, validate_dataset_with, ClassVocabulary, Dataset, LabelHierarchy, ProbVector};
pub use error::{Error, Result};
pub use fusion::{fuse_file, fuse_posteriors, ProbMatrix};
pub use geonet::{GeoNet, GeoNetConfig};
