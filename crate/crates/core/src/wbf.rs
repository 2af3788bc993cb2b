//! Weighted boxes fusion across detection sets for one image.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// All scored boxes for one image from one model or image variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub image_id: String,
    pub source_id: String,
    pub boxes: Vec<BBox>,
    pub model_weight: f64,
}

impl DetectionSet {
    pub fn new(image_id: impl Into<String>, source_id: impl Into<String>, boxes: Vec<BBox>) -> Self {
        Self {
            image_id: image_id.into(),
            source_id: source_id.into(),
            boxes,
            model_weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.model_weight = weight;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Plain mean of member scores.
    Mean,
    /// Model-weight weighted mean of member scores.
    WeightedMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub iou_thr: f64,
    pub skip_box_thr: f64,
    pub score_mode: ScoreMode,
    pub rescale_by_models: bool,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            iou_thr: 0.55,
            skip_box_thr: 0.0,
            score_mode: ScoreMode::WeightedMean,
            rescale_by_models: true,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thr > 0.0 && self.iou_thr <= 1.0) {
            return Err(Error::InvalidParam(format!("iou_thr {} outside (0, 1]", self.iou_thr)));
        }
        if !(self.skip_box_thr >= 0.0 && self.skip_box_thr < 1.0) {
            return Err(Error::InvalidParam(format!(
                "skip_box_thr {} outside [0, 1)",
                self.skip_box_thr
            )));
        }
        Ok(())
    }
}

/// Position of a box in the fusion input: `(set index, box index)`.
pub type MemberRef = (usize, usize);

#[derive(Debug, Clone)]
struct Entry<'a> {
    bbox: BBox,
    weight: f64,
    source: &'a str,
    at: MemberRef,
}

/// Processing order: score descending, coordinates, then source so that
/// permuting the input sets cannot change the outcome.
fn entry_cmp(a: &Entry, b: &Entry) -> Ordering {
    a.bbox
        .rank_cmp(&b.bbox)
        .then_with(|| a.source.cmp(b.source))
        .then(a.weight.total_cmp(&b.weight))
}

/// Fused box of a cluster. Coordinates are the score-times-weight average of
/// the members, clamped to the members' componentwise extent. Scores are not
/// rescaled here.
fn fuse_members(members: &[&Entry], mode: ScoreMode) -> Result<BBox> {
    let first = members[0].bbox;
    let total: f64 = members.iter().map(|e| e.bbox.score() * e.weight).sum();
    let mut coords = [0.0; 4];
    let mut lo = first.coords();
    let mut hi = first.coords();
    for e in members {
        let c = e.bbox.coords();
        let k = if total > 0.0 {
            e.bbox.score() * e.weight / total
        } else {
            1.0 / members.len() as f64
        };
        for j in 0..4 {
            coords[j] += k * c[j];
            lo[j] = lo[j].min(c[j]);
            hi[j] = hi[j].max(c[j]);
        }
    }
    for j in 0..4 {
        coords[j] = coords[j].clamp(lo[j], hi[j]);
    }
    let score = match mode {
        ScoreMode::Mean => members.iter().map(|e| e.bbox.score()).sum::<f64>() / members.len() as f64,
        ScoreMode::WeightedMean => {
            let w: f64 = members.iter().map(|e| e.weight).sum();
            total / w
        }
    };
    BBox::new(coords[0], coords[1], coords[2], coords[3], score.clamp(0.0, 1.0), first.label())
}

/// A fused output box and the input boxes that formed it.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCluster {
    pub bbox: BBox,
    pub members: Vec<MemberRef>,
}

/// Fuses detection sets and reports each output box's cluster membership.
/// Clusters are returned in output order.
pub fn fuse_clusters(sets: &[DetectionSet], p: &FusionParams) -> Result<Vec<FusedCluster>> {
    p.validate()?;
    let first = sets.first().ok_or(Error::EmptyInput)?;
    if let Some(other) = sets.iter().find(|s| s.image_id != first.image_id) {
        return Err(Error::MismatchedImageIds(first.image_id.clone(), other.image_id.clone()));
    }
    for s in sets {
        if !(s.model_weight > 0.0 && s.model_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "model weight {} of {:?} must be positive",
                s.model_weight, s.source_id
            )));
        }
    }

    let mut entries: Vec<Entry> = sets
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            s.boxes.iter().enumerate().map(move |(bi, b)| Entry {
                bbox: *b,
                weight: s.model_weight,
                source: &s.source_id,
                at: (si, bi),
            })
        })
        .filter(|e| e.bbox.score() >= p.skip_box_thr)
        .collect();
    entries.sort_by(entry_cmp);

    struct Cluster<'e, 'a> {
        members: Vec<&'e Entry<'a>>,
        fused: BBox,
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for e in &entries {
        let hit = clusters
            .iter_mut()
            .find(|c| c.fused.label() == e.bbox.label() && iou(&c.fused, &e.bbox) > p.iou_thr);
        match hit {
            Some(c) => {
                c.members.push(e);
                c.fused = fuse_members(&c.members, p.score_mode)?;
            }
            None => clusters.push(Cluster {
                members: vec![e],
                fused: fuse_members(&[e], p.score_mode)?,
            }),
        }
    }

    let n_sets = sets.len();
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mut bbox = c.fused;
        if p.rescale_by_models {
            let sources: BTreeSet<&str> = c.members.iter().map(|e| e.source).collect();
            let factor = sources.len().min(n_sets) as f64 / n_sets as f64;
            bbox = bbox.with_score(bbox.score() * factor)?;
        }
        let mut members: Vec<MemberRef> = c.members.iter().map(|e| e.at).collect();
        members.sort_unstable();
        out.push(FusedCluster { bbox, members });
    }
    out.sort_by(|a, b| a.bbox.rank_cmp(&b.bbox));
    Ok(out)
}

/// Weighted boxes fusion of several detection sets of the same image.
pub fn fuse(sets: &[DetectionSet], p: &FusionParams) -> Result<DetectionSet> {
    let clusters = fuse_clusters(sets, p)?;
    Ok(DetectionSet::new(
        sets[0].image_id.clone(),
        "wbf",
        clusters.into_iter().map(|c| c.bbox).collect(),
    ))
}
