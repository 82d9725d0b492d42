//! Privacy-preserving remote photoplethysmography.
//!
//! Facial video is reduced to a 64x64 cheek-and-forehead ROI, its pixels are
//! permuted with a per-sample secret key and the result is blurred. Spatial
//! structure (and with it identity) is destroyed while every frame keeps its
//! colour statistics, so mean-trace pulse estimators such as CHROM and POS
//! give the same answer on the perturbed video.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod filter;
pub mod formats;
pub mod ingest;
pub mod model;
pub mod perturb;
pub mod pipeline;
pub mod rng;
pub mod roi;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use estimators::{Estimator, RgbTraces};
pub use model::{
    Clip, Frame, HrReport, KeyMode, KeyPolicy, KeyProvenance, LandmarkSet, PermutationKey, PerturbMethod, PerturbSpec,
    PpgTrace, RealClip, VideoHr,
};
