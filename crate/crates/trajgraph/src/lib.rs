//! Attention-built spatio-temporal graph networks for pedestrian trajectory
//! forecasting.
//!
//! The crate trains and evaluates a small graph model end to end on the
//! classic trajectory-file format (`frame_id ped_id x y` per line):
//!
//! - [`tape`]: a dense-tensor reverse-mode differentiation engine.
//! - [`data`]: scene loading, (8 observed + 12 future)-frame windowing, and
//!   graph tensor assembly.
//! - [`attention`]: multi-head scaled-dot-product attention producing
//!   symmetric weighted adjacency matrices over pedestrians (per frame) and
//!   over frames (per pedestrian).
//! - [`gcn`]: degree-normalized graph convolutions along both axes.
//! - [`tcnn`]: a time-extrapolator convolutional decoder mapping 8 observed
//!   steps to 12 predicted bivariate-Gaussian parameter sets.
//! - [`loss`]: Gaussian negative log-likelihood, kernel maximum mean
//!   discrepancy, their weighted hybrid, and distribution sampling.
//! - [`metrics`]: ADE / FDE / dispersion metrics with best-of-K evaluation.
//! - [`model`]: the assembled trainable model, SGD with momentum, and binary
//!   checkpointing.
//! - [`harness`]: training / evaluation / ablation / export runs behind the
//!   `trajgraph` command-line binary.
//!
//! Runnable walkthroughs live in `examples/`: `gradient_check`,
//! `build_adjacency`, `dataset_windows`, `train_synthetic`, `sample_cloud`,
//! and `metrics_demo`.

pub mod attention;
pub mod data;
pub mod error;
pub mod gcn;
pub mod harness;
pub mod layout;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod tcnn;

pub use error::{Error, Result};
