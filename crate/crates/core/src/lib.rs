//! Detection post-processing for glare-induced false positives.
//!
//! Bright regions are masked and inpainted, a detector runs on each image
//! variant, the per-variant detections are merged with weighted boxes
//! fusion, and results are scored with average domain accuracy.

pub mod adapter;
pub mod benchmark;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod glare_mask;
pub mod image;
pub mod inpaint;
pub mod losses;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod wbf;

pub use error::{Error, Result};
pub use geometry::{area, iou, BBox};
pub use glare_mask::{build_mask, dilate, erode, gaussian_blur, threshold, to_grayscale, MaskParams};
pub use image::{GrayMask, ImageBuffer};
pub use inpaint::{harmonic_fill, inpaint_ns, inpaint_ns_traced, InpaintOutcome, InpaintParams};
pub use wbf::{fuse, fuse_clusters, DetectionSet, FusedCluster, FusionParams, ScoreMode};
pub use eval::{ada, image_accuracy, match_detections, DomainReport, GroundTruth, MatchResult};
pub use losses::{masked_mse_loss, penalty_matrix, smooth_l1, PenaltyMatrix};
pub use synth::{generate_scene, simulate_detector, Scene, SceneSpec, SimDetectorSpec};
pub use pipeline::{run_pipeline, PipelineConfig, Variant};
pub use report::Report;
