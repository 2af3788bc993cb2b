//! End-to-end workflow: build image variants, run a detector on each, fuse
//! the per-variant detections and score every variant combination.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::adapter::DetectorCommand;
use crate::error::{Error, Result};
use crate::eval::{ada, image_accuracy, match_detections, GroundTruth, MATCH_IOU};
use crate::formats::{self, DetectionRecord};
use crate::geometry::BBox;
use crate::glare_mask::{blur_plane, build_mask, default_sigma, dilate, erode, gaussian_taps, MaskParams};
use crate::image::{GrayMask, ImageBuffer};
use crate::inpaint::{inpaint_ns, InpaintParams};
use crate::report::{Report, ReportRow};
use crate::synth::{derive_seed, simulate_detector, SimDetectorSpec};
use crate::wbf::{fuse, DetectionSet, FusionParams};

/// One preprocessed version of an input image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Original,
    Inpainted,
    /// Inpainted, then smoothed along the mask border.
    Smoothed,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Inpainted, Variant::Smoothed];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Inpainted => "inpainted",
            Variant::Smoothed => "smoothed",
        }
    }

    /// Report row label. The smoothed variant takes the autoencoder slot.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Original => "Original",
            Variant::Inpainted => "Inpaint",
            Variant::Smoothed => "Autoencoder",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(Variant::Original),
            "inpainted" | "inpaint" => Ok(Variant::Inpainted),
            "smoothed" | "smooth" | "autoencoder" => Ok(Variant::Smoothed),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Sorted, deduplicated variant list that always starts with `Original`.
pub fn normalize_variants(variants: &[Variant]) -> Result<Vec<Variant>> {
    let mut v = variants.to_vec();
    v.sort();
    v.dedup();
    if v.first() != Some(&Variant::Original) {
        return Err(Error::Config("the original variant must always be included".into()));
    }
    Ok(v)
}

/// Every subset of `variants` containing the original, in report order:
/// by size, then lexicographically.
pub fn variant_combinations(variants: &[Variant]) -> Vec<Vec<Variant>> {
    let extras: Vec<Variant> = variants.iter().copied().filter(|&v| v != Variant::Original).collect();
    let mut combos: Vec<Vec<Variant>> = (0..1u32 << extras.len())
        .map(|bits| {
            let mut c = vec![Variant::Original];
            c.extend(extras.iter().enumerate().filter(|(i, _)| bits & (1 << i) != 0).map(|(_, &v)| v));
            c
        })
        .collect();
    combos.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    combos
}

pub fn combination_label(combo: &[Variant]) -> String {
    combo.iter().map(|v| v.label()).collect::<Vec<_>>().join("+")
}

/// Width of the band around the mask edge that gets smoothed.
const SMOOTH_BAND_ITERS: usize = 2;
const SMOOTH_KERNEL: usize = 5;

/// Replaces pixels near the mask border with a Gaussian-smoothed copy, to
/// soften discontinuities left by inpainting.
pub fn smooth_mask_border(img: &ImageBuffer, mask: &GrayMask) -> Result<ImageBuffer> {
    if mask.is_empty() {
        return Ok(img.clone());
    }
    let band = dilate(mask, 3, SMOOTH_BAND_ITERS)?.and_not(&erode(mask, 3, SMOOTH_BAND_ITERS)?);
    let taps = gaussian_taps(SMOOTH_KERNEL, default_sigma(SMOOTH_KERNEL))?;
    let mut out = img.clone();
    for c in 0..img.channels() {
        let blurred = blur_plane(&img.channel_plane(c), img.width(), img.height(), &taps);
        for (i, _) in band.bits().iter().enumerate().filter(|(_, &b)| b) {
            out.data_mut()[i * img.channels() + c] = crate::image::to_u8(blurred[i]);
        }
    }
    Ok(out)
}

/// The images each variant feeds to the detector.
#[derive(Debug, Clone)]
pub struct VariantImages {
    pub mask: GrayMask,
    pub images: Vec<(Variant, ImageBuffer)>,
}

pub fn make_variants(img: &ImageBuffer, variants: &[Variant], mask_p: &MaskParams, inpaint_p: &InpaintParams) -> Result<VariantImages> {
    let need_inpaint = variants.iter().any(|&v| v != Variant::Original);
    let mask = if need_inpaint {
        build_mask(img, mask_p)?
    } else {
        GrayMask::empty(img.width(), img.height())
    };
    let inpainted = if !need_inpaint || mask.is_empty() {
        img.clone()
    } else {
        match inpaint_ns(img, &mask, inpaint_p) {
            Ok(i) => i,
            // nothing left to propagate from; the variant degenerates to the original
            Err(Error::FullMask) => img.clone(),
            Err(e) => return Err(e),
        }
    };
    let mut images = Vec::with_capacity(variants.len());
    for &v in variants {
        let im = match v {
            Variant::Original => img.clone(),
            Variant::Inpainted => inpainted.clone(),
            Variant::Smoothed => smooth_mask_border(&inpainted, &mask)?,
        };
        images.push((v, im));
    }
    Ok(VariantImages { mask, images })
}

/// Produces a detection set for one variant of one image.
pub trait Detector: Sync {
    fn detect(&self, image_id: &str, variant: Variant, img: &ImageBuffer, path: Option<&Path>) -> Result<DetectionSet>;

    /// Whether `detect` needs the variant written to disk.
    fn needs_path(&self) -> bool {
        false
    }
}

/// In-process simulated detector keyed by image id.
pub struct SimulatedDetector {
    pub spec: SimDetectorSpec,
    pub ground_truth: HashMap<String, GroundTruth>,
    pub glare: HashMap<String, Vec<BBox>>,
    pub seed: u64,
}

impl SimulatedDetector {
    /// Seed used for a given image and variant.
    pub fn seed_for(&self, image_id: &str, variant: Variant) -> u64 {
        derive_seed(self.seed, image_id, variant.index())
    }
}

impl Detector for SimulatedDetector {
    fn detect(&self, image_id: &str, variant: Variant, img: &ImageBuffer, _path: Option<&Path>) -> Result<DetectionSet> {
        let gt = self
            .ground_truth
            .get(image_id)
            .ok_or_else(|| Error::Config(format!("simulated detector has no ground truth for {image_id:?}")))?;
        let glare = self.glare.get(image_id).map(Vec::as_slice).unwrap_or(&[]);
        let mut set = simulate_detector(img, gt, glare, &self.spec, self.seed_for(image_id, variant))?;
        set.source_id = variant.name().to_owned();
        Ok(set)
    }
}

/// Runs an external program per variant image.
pub struct CommandDetector(pub DetectorCommand);

impl Detector for CommandDetector {
    fn detect(&self, image_id: &str, variant: Variant, _img: &ImageBuffer, path: Option<&Path>) -> Result<DetectionSet> {
        let path = path.ok_or_else(|| Error::Config("command detector needs image files".into()))?;
        let mut set = self.0.detect(path)?;
        set.image_id = image_id.to_owned();
        set.source_id = variant.name().to_owned();
        Ok(set)
    }

    fn needs_path(&self) -> bool {
        true
    }
}

/// Precomputed detections, one set per `(variant, image)`.
pub struct FileDetector {
    sets: HashMap<(Variant, String), DetectionSet>,
}

impl FileDetector {
    /// Loads `<dir>/<variant>/` (per-image `.json` or `.jsonl`) or
    /// `<dir>/<variant>.jsonl` for each variant.
    pub fn load(dir: &Path, variants: &[Variant]) -> Result<Self> {
        let mut sets = HashMap::new();
        for &v in variants {
            let sub = dir.join(v.name());
            let lines = dir.join(format!("{}.jsonl", v.name()));
            let source = if sub.is_dir() {
                sub
            } else if lines.is_file() {
                lines
            } else {
                return Err(Error::Config(format!(
                    "no detections for variant {v} under {}",
                    dir.display()
                )));
            };
            for mut s in formats::read_detections(&source)? {
                if s.source_id.is_empty() {
                    s.source_id = v.name().to_owned();
                }
                sets.insert((v, s.image_id.clone()), s);
            }
        }
        Ok(Self { sets })
    }

    pub fn from_sets(sets: impl IntoIterator<Item = (Variant, DetectionSet)>) -> Self {
        Self {
            sets: sets.into_iter().map(|(v, s)| ((v, s.image_id.clone()), s)).collect(),
        }
    }

    /// Image ids with detections for `variant`.
    pub fn image_ids(&self, variant: Variant) -> Vec<String> {
        let mut ids: Vec<String> = self.sets.keys().filter(|(v, _)| *v == variant).map(|(_, id)| id.clone()).collect();
        ids.sort();
        ids
    }
}

impl Detector for FileDetector {
    fn detect(&self, image_id: &str, variant: Variant, _img: &ImageBuffer, _path: Option<&Path>) -> Result<DetectionSet> {
        self.sets
            .get(&(variant, image_id.to_owned()))
            .cloned()
            .ok_or_else(|| Error::Config(format!("no {variant} detections for image {image_id:?}")))
    }
}

/// Detections of every variant of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDetections {
    pub image_id: String,
    pub sets: Vec<(Variant, DetectionSet)>,
}

impl ImageDetections {
    /// Detections for a variant combination; a lone variant is used as is.
    pub fn combined(&self, combo: &[Variant], fusion: &FusionParams) -> Result<DetectionSet> {
        let picked: Vec<DetectionSet> = self
            .sets
            .iter()
            .filter(|(v, _)| combo.contains(v))
            .map(|(_, s)| s.clone())
            .collect();
        if picked.len() == 1 {
            return Ok(picked.into_iter().next().expect("one set"));
        }
        fuse(&picked, fusion)
    }

    pub fn fused_all(&self, fusion: &FusionParams) -> Result<DetectionSet> {
        let all: Vec<Variant> = self.sets.iter().map(|(v, _)| *v).collect();
        self.combined(&all, fusion)
    }
}

/// Evaluation settings shared by the file and in-memory pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub variants: Vec<Variant>,
    pub fusion: FusionParams,
    pub confidences: Vec<f64>,
    pub iou_thr: f64,
}

/// Scores every variant combination at every confidence threshold. Images
/// without ground truth are skipped.
pub fn build_report(results: &[ImageDetections], gts: &HashMap<String, GroundTruth>, s: &EvalSettings) -> Result<Report> {
    let combos = variant_combinations(&s.variants);
    let mut rows = Vec::with_capacity(combos.len());
    for combo in &combos {
        let mut per_conf: Vec<BTreeMap<String, Vec<f64>>> = vec![BTreeMap::new(); s.confidences.len()];
        for r in results {
            let Some(gt) = gts.get(&r.image_id) else { continue };
            let dets = r.combined(combo, &s.fusion)?;
            for (k, &conf) in s.confidences.iter().enumerate() {
                let m = match_detections(&dets.boxes, &gt.boxes, s.iou_thr, conf);
                per_conf[k].entry(gt.domain.clone()).or_default().push(image_accuracy(&m));
            }
        }
        let cells = per_conf
            .into_iter()
            .map(|by_domain| ada(&by_domain.into_iter().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ReportRow {
            label: combination_label(combo),
            cells,
        });
    }
    Ok(Report {
        confidences: s.confidences.clone(),
        rows,
    })
}

/// Where detections come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorSource {
    Simulated { spec: SimDetectorSpec, glare: Option<PathBuf> },
    Command(DetectorCommand),
    Files(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub images: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub variants: Vec<Variant>,
    pub detector: DetectorSource,
    pub mask: MaskParams,
    pub inpaint: InpaintParams,
    pub fusion: FusionParams,
    pub confidences: Vec<f64>,
    pub iou_thr: f64,
    pub output: PathBuf,
    pub workers: usize,
    pub seed: u64,
    pub overlays: bool,
}

impl PipelineConfig {
    pub fn new(images: impl Into<PathBuf>, output: impl Into<PathBuf>, detector: DetectorSource) -> Self {
        Self {
            images: images.into(),
            ground_truth: None,
            variants: Variant::ALL.to_vec(),
            detector,
            mask: MaskParams::default(),
            inpaint: InpaintParams::default(),
            fusion: FusionParams::default(),
            confidences: crate::eval::DEFAULT_CONFIDENCES.to_vec(),
            iou_thr: MATCH_IOU,
            output: output.into(),
            workers: 1,
            seed: 0,
            overlays: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        normalize_variants(&self.variants)?;
        self.mask.validate()?;
        self.inpaint.validate()?;
        self.fusion.validate()?;
        if self.confidences.is_empty() || self.confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config(format!("confidence thresholds {:?} must be in [0, 1]", self.confidences)));
        }
        if !(self.iou_thr > 0.0 && self.iou_thr <= 1.0) {
            return Err(Error::Config(format!("match iou {} outside (0, 1]", self.iou_thr)));
        }
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: Option<Report>,
    pub processed: Vec<String>,
    /// Images skipped because of per-image errors, with the reason.
    pub failures: Vec<(String, String)>,
}

impl PipelineOutcome {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files in `dir` keyed by file stem, sorted.
pub fn list_images(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_owned(), p)))
        .collect();
    out.sort();
    Ok(out)
}

const BOX_COLOR: [u8; 3] = [255, 40, 40];
const GT_COLOR: [u8; 3] = [40, 220, 40];

/// Draws box outlines onto an RGB copy of `img`.
pub fn render_overlay(img: &ImageBuffer, fused: &[BBox], gt: &[BBox], min_score: f64) -> Result<ImageBuffer> {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for px in img.data().chunks_exact(img.channels()) {
        if img.channels() == 1 {
            data.extend([px[0]; 3]);
        } else {
            data.extend_from_slice(px);
        }
    }
    let mut out = ImageBuffer::new(w, h, 3, data)?;
    let mut draw = |b: &BBox, color: [u8; 3]| {
        let x0 = (b.x_min().floor().max(0.0) as usize).min(w - 1);
        let y0 = (b.y_min().floor().max(0.0) as usize).min(h - 1);
        let x1 = ((b.x_max().ceil() as usize).saturating_sub(1)).clamp(x0, w - 1);
        let y1 = ((b.y_max().ceil() as usize).saturating_sub(1)).clamp(y0, h - 1);
        for x in x0..=x1 {
            for y in [y0, y1] {
                for (c, &v) in color.iter().enumerate() {
                    out.set(x, y, c, v);
                }
            }
        }
        for y in y0..=y1 {
            for x in [x0, x1] {
                for (c, &v) in color.iter().enumerate() {
                    out.set(x, y, c, v);
                }
            }
        }
    };
    for b in gt {
        draw(b, GT_COLOR);
    }
    for b in fused.iter().filter(|b| b.score() >= min_score) {
        draw(b, BOX_COLOR);
    }
    Ok(out)
}

struct Job<'a> {
    image_id: &'a str,
    path: &'a Path,
}

fn process_one(job: &Job, cfg: &PipelineConfig, variants: &[Variant], detector: &dyn Detector, gts: &HashMap<String, GroundTruth>) -> Result<ImageDetections> {
    let img = ImageBuffer::load(job.path)?;
    let prepared = make_variants(&img, variants, &cfg.mask, &cfg.inpaint)?;
    let mut sets = Vec::with_capacity(variants.len());
    for (v, vimg) in &prepared.images {
        let path = if detector.needs_path() {
            if *v == Variant::Original {
                Some(job.path.to_path_buf())
            } else {
                let p = cfg.output.join("variants").join(v.name()).join(format!("{}.png", job.image_id));
                vimg.save_png(&p)?;
                Some(p)
            }
        } else {
            None
        };
        sets.push((*v, detector.detect(job.image_id, *v, vimg, path.as_deref())?));
    }
    let result = ImageDetections {
        image_id: job.image_id.to_owned(),
        sets,
    };
    let fused = result.fused_all(&cfg.fusion)?;
    formats::write_detection(&cfg.output.join("fused").join(format!("{}.json", job.image_id)), &fused)?;
    if cfg.overlays {
        let gt = gts.get(job.image_id).map(|g| g.boxes.as_slice()).unwrap_or(&[]);
        let min_score = cfg.confidences.iter().copied().fold(f64::INFINITY, f64::min);
        render_overlay(&img, &fused.boxes, gt, min_score)?.save_png(&cfg.output.join("overlays").join(format!("{}.png", job.image_id)))?;
        if !prepared.mask.is_empty() {
            prepared.mask.save_png(&cfg.output.join("masks").join(format!("{}.png", job.image_id)))?;
        }
    }
    Ok(result)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn build_detector(cfg: &PipelineConfig, variants: &[Variant], gts: &HashMap<String, GroundTruth>) -> Result<Box<dyn Detector>> {
    Ok(match &cfg.detector {
        DetectorSource::Simulated { spec, glare } => {
            spec.validate()?;
            if gts.is_empty() {
                return Err(Error::Config("the simulated detector needs ground truth".into()));
            }
            let glare = match glare {
                Some(p) => formats::read_glare(p)?
                    .into_iter()
                    .map(|r| Ok((r.image_id.clone(), r.boxes()?)))
                    .collect::<Result<HashMap<_, _>>>()?,
                None => HashMap::new(),
            };
            Box::new(SimulatedDetector {
                spec: spec.clone(),
                ground_truth: gts.clone(),
                glare,
                seed: cfg.seed,
            })
        }
        DetectorSource::Command(cmd) => Box::new(CommandDetector(cmd.clone())),
        DetectorSource::Files(dir) => Box::new(FileDetector::load(dir, variants)?),
    })
}

/// Runs the whole workflow over an image directory.
///
/// Per-image failures are logged and the image skipped; they are returned
/// in [`PipelineOutcome::failures`]. Configuration problems abort the run.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let variants = normalize_variants(&cfg.variants)?;
    let images = list_images(&cfg.images)?;
    if images.is_empty() {
        return Err(Error::Config(format!("no images found in {}", cfg.images.display())));
    }
    let gts: HashMap<String, GroundTruth> = match &cfg.ground_truth {
        Some(p) => formats::read_ground_truth(p)?.into_iter().map(|g| (g.image_id.clone(), g)).collect(),
        None => HashMap::new(),
    };
    let detector = build_detector(cfg, &variants, &gts)?;

    create_dir(&cfg.output.join("fused"))?;
    if detector.needs_path() {
        for v in variants.iter().filter(|&&v| v != Variant::Original) {
            create_dir(&cfg.output.join("variants").join(v.name()))?;
        }
    }
    if cfg.overlays {
        create_dir(&cfg.output.join("overlays"))?;
        create_dir(&cfg.output.join("masks"))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let jobs: Vec<Job> = images.iter().map(|(id, p)| Job { image_id: id, path: p }).collect();
    let results: Vec<Result<ImageDetections>> =
        pool.install(|| jobs.par_iter().map(|j| process_one(j, cfg, &variants, detector.as_ref(), &gts)).collect());

    let mut done = Vec::new();
    let mut failures = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(d) => done.push(d),
            Err(e) => {
                warn!("skipping {}: {e}", job.image_id);
                failures.push((job.image_id.to_owned(), e.to_string()));
            }
        }
    }

    let fused: Vec<DetectionRecord> = done
        .iter()
        .map(|d| d.fused_all(&cfg.fusion).map(|s| DetectionRecord::from(&s)))
        .collect::<Result<_>>()?;
    formats::write_jsonl(&cfg.output.join("fused.jsonl"), fused)?;

    let report = if gts.is_empty() {
        None
    } else {
        let settings = EvalSettings {
            variants: variants.clone(),
            fusion: cfg.fusion,
            confidences: cfg.confidences.clone(),
            iou_thr: cfg.iou_thr,
        };
        let report = build_report(&done, &gts, &settings)?;
        let csv = cfg.output.join("report.csv");
        fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let dom = cfg.output.join("report_domains.csv");
        fs::write(&dom, report.domains_csv()).map_err(|e| Error::io(&dom, e))?;
        info!("wrote {}", csv.display());
        Some(report)
    };

    Ok(PipelineOutcome {
        report,
        processed: done.into_iter().map(|d| d.image_id).collect(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_in_table_order() {
        let labels: Vec<String> = variant_combinations(&Variant::ALL).iter().map(|c| combination_label(c)).collect();
        assert_eq!(labels, ["Original", "Original+Inpaint", "Original+Autoencoder", "Original+Inpaint+Autoencoder"]);
        assert_eq!(variant_combinations(&[Variant::Original]).len(), 1);
    }

    #[test]
    fn variants_require_original() {
        assert!(normalize_variants(&[Variant::Inpainted]).is_err());
        assert_eq!(
            normalize_variants(&[Variant::Smoothed, Variant::Original, Variant::Smoothed]).unwrap(),
            vec![Variant::Original, Variant::Smoothed]
        );
        assert_eq!("Autoencoder".parse::<Variant>().unwrap(), Variant::Smoothed);
        assert!("sharpened".parse::<Variant>().is_err());
    }

    #[test]
    fn smoothing_touches_only_the_border_band() {
        let img = ImageBuffer::from_fn(40, 40, |x, y| ((x * 13 + y * 7) % 200) as u8).unwrap();
        let mask = GrayMask::from_fn(40, 40, |x, y| (15..25).contains(&x) && (15..25).contains(&y));
        let out = smooth_mask_border(&img, &mask).unwrap();
        for y in 0..40 {
            for x in 0..40 {
                let near = (13..27).contains(&x) && (13..27).contains(&y);
                let deep = (17..23).contains(&x) && (17..23).contains(&y);
                if !near || deep {
                    assert_eq!(out.get(x, y, 0), img.get(x, y, 0), "({x}, {y})");
                }
            }
        }
        assert_ne!(out, img);
    }

    #[test]
    fn full_glare_image_degenerates_to_original() {
        let img = ImageBuffer::filled(30, 30, 3, 220).unwrap();
        let v = make_variants(&img, &Variant::ALL, &MaskParams::default(), &InpaintParams::default()).unwrap();
        assert_eq!(v.mask.count(), 900);
        assert!(v.images.iter().all(|(_, i)| *i == img));
    }

    #[test]
    fn overlay_draws_outlines() {
        let img = ImageBuffer::filled(20, 20, 1, 0).unwrap();
        let b = BBox::new(2.0, 3.0, 8.0, 9.0, 0.9, 0).unwrap();
        let o = render_overlay(&img, &[b], &[], 0.5).unwrap();
        assert_eq!(o.channels(), 3);
        assert_eq!(o.get(2, 3, 0), 255);
        assert_eq!(o.get(7, 8, 0), 255);
        assert_eq!(o.get(4, 5, 0), 0);
        let faint = render_overlay(&img, &[b.with_score(0.1).unwrap()], &[], 0.5).unwrap();
        assert!(faint.data().iter().all(|&v| v == 0));
    }
}
