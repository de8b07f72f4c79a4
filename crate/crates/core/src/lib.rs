//! Occlusion-robustness benchmarking for KITTI-style pedestrian detection.
//!
//! The crate derives half-body label variants and synthetically occluded or
//! grayscale images from a dataset, evaluates detector output (mAP and
//! per-frame inherent confidence), summarizes how confidence shifts between
//! experiments, and fuses full/upper/lower-body detections through a
//! confidence-gated cascade.

pub mod bbox;
pub mod cascade;
pub mod confidence_analysis;
pub mod config;
pub mod error;
pub mod eval_metrics;
pub mod kitti_io;
pub mod label_transform;
pub mod occlusion_synth;
pub mod pipeline;
pub mod plot;
pub mod synthetic;

pub use bbox::BoundingBox;
pub use error::{Error, Result};
