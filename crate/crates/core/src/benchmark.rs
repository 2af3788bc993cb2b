//! Synthetic multi-domain benchmark, in memory or written to disk.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{GroundTruth, DEFAULT_CONFIDENCES, MATCH_IOU};
use crate::formats::{self, GlareRecord, GroundTruthRecord};
use crate::glare_mask::MaskParams;
use crate::inpaint::InpaintParams;
use crate::pipeline::{build_report, make_variants, normalize_variants, Detector, EvalSettings, ImageDetections, SimulatedDetector, Variant};
use crate::report::Report;
use crate::synth::{benchmark_specs, default_domains, generate_scene, DomainSpec, Scene, SimDetectorSpec};
use crate::wbf::FusionParams;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub domains: Vec<DomainSpec>,
    pub images_per_domain: usize,
    pub variants: Vec<Variant>,
    pub detector: SimDetectorSpec,
    pub mask: MaskParams,
    pub inpaint: InpaintParams,
    pub fusion: FusionParams,
    pub confidences: Vec<f64>,
    pub iou_thr: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domains: default_domains(),
            images_per_domain: 50,
            variants: Variant::ALL.to_vec(),
            detector: SimDetectorSpec::default(),
            mask: MaskParams::default(),
            inpaint: InpaintParams::default(),
            fusion: FusionParams::default(),
            confidences: DEFAULT_CONFIDENCES.to_vec(),
            iou_thr: MATCH_IOU,
        }
    }
}

pub fn generate_benchmark(seed: u64, domains: &[DomainSpec], images_per_domain: usize) -> Result<Vec<Scene>> {
    benchmark_specs(seed, domains, images_per_domain)
        .par_iter()
        .map(generate_scene)
        .collect()
}

/// Generates the benchmark, runs the simulated detector on every variant
/// and scores all variant combinations.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Report> {
    let variants = normalize_variants(&cfg.variants)?;
    let scenes = generate_benchmark(cfg.seed, &cfg.domains, cfg.images_per_domain)?;
    let gts: HashMap<String, GroundTruth> = scenes
        .iter()
        .map(|s| (s.ground_truth.image_id.clone(), s.ground_truth.clone()))
        .collect();
    let detector = SimulatedDetector {
        spec: cfg.detector.clone(),
        ground_truth: gts.clone(),
        glare: scenes
            .iter()
            .map(|s| (s.ground_truth.image_id.clone(), s.glare_regions.clone()))
            .collect(),
        seed: cfg.seed,
    };
    let results = scenes
        .par_iter()
        .map(|s| {
            let id = &s.ground_truth.image_id;
            let prepared = make_variants(&s.image, &variants, &cfg.mask, &cfg.inpaint)?;
            let sets = prepared
                .images
                .iter()
                .map(|(v, img)| Ok((*v, detector.detect(id, *v, img, None)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageDetections {
                image_id: id.clone(),
                sets,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_report(
        &results,
        &gts,
        &EvalSettings {
            variants,
            fusion: cfg.fusion,
            confidences: cfg.confidences.clone(),
            iou_thr: cfg.iou_thr,
        },
    )
}

/// Writes `images/<id>.png`, `ground_truth.jsonl` and `glare_regions.jsonl`.
pub fn write_benchmark(dir: &Path, scenes: &[Scene]) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    scenes
        .par_iter()
        .try_for_each(|s| s.image.save_png(&images.join(format!("{}.png", s.ground_truth.image_id))))?;
    formats::write_jsonl(
        &dir.join("ground_truth.jsonl"),
        scenes.iter().map(|s| GroundTruthRecord::from(&s.ground_truth)),
    )?;
    formats::write_jsonl(
        &dir.join("glare_regions.jsonl"),
        scenes.iter().map(|s| GlareRecord {
            image_id: s.ground_truth.image_id.clone(),
            regions: s.glare_regions.iter().map(|b| b.coords()).collect(),
        }),
    )
}
