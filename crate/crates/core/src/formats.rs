//! Detection and ground-truth JSON documents.
//!
//! Detections: `{"image_id": str, "source_id": str, "boxes": [{"bbox":
//! [x_min, y_min, x_max, y_max], "score": float, "label": int}]}`. Ground
//! truth is the same minus `score`, plus an optional `domain` tag. Either
//! kind may be stored one document per `.json` file or one per line in a
//! `.jsonl` file; directories are scanned for both.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::BBox;
use crate::wbf::DetectionSet;

pub const DEFAULT_DOMAIN: &str = "default";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRecord {
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default)]
    pub label: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    #[serde(default)]
    pub source_id: String,
    pub boxes: Vec<BoxRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtBoxRecord {
    pub bbox: [f64; 4],
    #[serde(default)]
    pub label: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub boxes: Vec<GtBoxRecord>,
}

/// Glare regions of a synthetic scene; consumed by the simulated detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlareRecord {
    pub image_id: String,
    pub regions: Vec<[f64; 4]>,
}

impl From<&DetectionSet> for DetectionRecord {
    fn from(s: &DetectionSet) -> Self {
        DetectionRecord {
            image_id: s.image_id.clone(),
            source_id: s.source_id.clone(),
            boxes: s
                .boxes
                .iter()
                .map(|b| BoxRecord {
                    bbox: b.coords(),
                    score: b.score(),
                    label: b.label(),
                })
                .collect(),
            model_weight: (s.model_weight != 1.0).then_some(s.model_weight),
        }
    }
}

impl DetectionRecord {
    pub fn into_set(self) -> Result<DetectionSet> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| BBox::new(b.bbox[0], b.bbox[1], b.bbox[2], b.bbox[3], b.score, b.label))
            .collect::<Result<Vec<_>>>()?;
        Ok(DetectionSet {
            image_id: self.image_id,
            source_id: self.source_id,
            boxes,
            model_weight: self.model_weight.unwrap_or(1.0),
        })
    }
}

impl From<&GroundTruth> for GroundTruthRecord {
    fn from(g: &GroundTruth) -> Self {
        GroundTruthRecord {
            image_id: g.image_id.clone(),
            domain: Some(g.domain.clone()),
            boxes: g
                .boxes
                .iter()
                .map(|b| GtBoxRecord {
                    bbox: b.coords(),
                    label: b.label(),
                })
                .collect(),
        }
    }
}

impl GroundTruthRecord {
    pub fn into_ground_truth(self) -> Result<GroundTruth> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| BBox::ground_truth(b.bbox[0], b.bbox[1], b.bbox[2], b.bbox[3], b.label))
            .collect::<Result<Vec<_>>>()?;
        let domain = self.domain.filter(|d| !d.is_empty()).unwrap_or_else(|| DEFAULT_DOMAIN.to_owned());
        Ok(GroundTruth {
            image_id: self.image_id,
            domain,
            boxes,
        })
    }
}

impl GlareRecord {
    pub fn boxes(&self) -> Result<Vec<BBox>> {
        self.regions
            .iter()
            .map(|r| BBox::ground_truth(r[0], r[1], r[2], r[3], 0))
            .collect()
    }
}

fn parse_doc<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    if path.extension().is_some_and(|e| e == "jsonl") {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(json_err))
            .collect()
    } else {
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
        match value {
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(|v| serde_json::from_value(v).map_err(json_err))
                .collect(),
            v => Ok(vec![serde_json::from_value(v).map_err(json_err)?]),
        }
    }
}

/// `.json`/`.jsonl` files directly inside `dir`, sorted by name.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json" || e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every record from a file or from all JSON files in a directory.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let files = if path.is_dir() {
        json_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        out.extend(parse_doc(&text, &f)?);
    }
    Ok(out)
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionSet>> {
    read_records::<DetectionRecord>(path)?
        .into_iter()
        .map(DetectionRecord::into_set)
        .collect()
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    read_records::<GroundTruthRecord>(path)?
        .into_iter()
        .map(GroundTruthRecord::into_ground_truth)
        .collect()
}

pub fn read_glare(path: &Path) -> Result<Vec<GlareRecord>> {
    read_records(path)
}

pub fn detection_json(set: &DetectionSet) -> String {
    serde_json::to_string(&DetectionRecord::from(set)).expect("detection records always serialize")
}

pub fn parse_detection_json(text: &str) -> std::result::Result<DetectionSet, String> {
    let rec: DetectionRecord = serde_json::from_str(text.trim()).map_err(|e| e.to_string())?;
    rec.into_set().map_err(|e| e.to_string())
}

pub fn write_detection(path: &Path, set: &DetectionSet) -> Result<()> {
    let body = serde_json::to_string_pretty(&DetectionRecord::from(set)).expect("detection records always serialize");
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

/// One JSON document per line, in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item).expect("records always serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let set = DetectionSet::new(
            "img_1",
            "original",
            vec![BBox::new(1.5, 2.0, 10.25, 12.0, 0.875, 0).unwrap()],
        );
        let one = dir.path().join("img_1.json");
        write_detection(&one, &set).unwrap();
        assert_eq!(read_detections(&one).unwrap(), vec![set.clone()]);

        let lines = dir.path().join("all.jsonl");
        let other = DetectionSet::new("img_2", "original", vec![]).with_weight(2.0);
        write_jsonl(&lines, [DetectionRecord::from(&set), DetectionRecord::from(&other)]).unwrap();
        assert_eq!(read_detections(&lines).unwrap(), vec![set.clone(), other.clone()]);

        // directory mode reads both files, sorted by name
        assert_eq!(read_detections(dir.path()).unwrap(), vec![set.clone(), other, set]);
    }

    #[test]
    fn ground_truth_defaults_domain() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        fs::write(&path, r#"{"image_id": "a", "boxes": [{"bbox": [0, 0, 4, 4], "label": 0}]}"#).unwrap();
        let gt = read_ground_truth(&path).unwrap();
        assert_eq!(gt[0].domain, DEFAULT_DOMAIN);
        assert_eq!(gt[0].boxes[0].score(), 1.0);
    }

    #[test]
    fn malformed_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{not json").unwrap();
        assert!(matches!(read_detections(&path), Err(Error::Json { .. })));
        fs::write(&path, r#"{"image_id": "a", "source_id": "s", "boxes": [{"bbox": [5, 0, 1, 4], "score": 0.5}]}"#).unwrap();
        assert!(matches!(read_detections(&path), Err(Error::InvalidBox { .. })));
        assert!(parse_detection_json("[]").is_err());
    }
}
