//! Python bindings for the `glarefuse` crate.
//!
//! Images cross the boundary as raw interleaved `bytes` plus their
//! dimensions; masks are `bytes` with one byte per pixel (non-zero = set).

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use ::glarefuse as gf;
use ::glarefuse::{BBox, DetectionSet, FusionParams, GrayMask, ImageBuffer, InpaintParams, MaskParams, ScoreMode};

fn err(e: gf::Error) -> PyErr {
    match e {
        gf::Error::Io { .. } | gf::Error::DetectorSpawn(_) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Axis-aligned box `(x_min, y_min, x_max, y_max)` with a score and label.
#[pyclass(name = "Box", module = "glarefuse", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyBox(BBox);

#[pymethods]
impl PyBox {
    #[new]
    #[pyo3(signature = (x_min, y_min, x_max, y_max, score = 1.0, label = 0))]
    fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64, label: u32) -> PyResult<Self> {
        BBox::new(x_min, y_min, x_max, y_max, score, label).map(PyBox).map_err(err)
    }

    #[getter]
    fn x_min(&self) -> f64 {
        self.0.x_min()
    }
    #[getter]
    fn y_min(&self) -> f64 {
        self.0.y_min()
    }
    #[getter]
    fn x_max(&self) -> f64 {
        self.0.x_max()
    }
    #[getter]
    fn y_max(&self) -> f64 {
        self.0.y_max()
    }
    #[getter]
    fn score(&self) -> f64 {
        self.0.score()
    }
    #[getter]
    fn label(&self) -> u32 {
        self.0.label()
    }

    fn coords(&self) -> (f64, f64, f64, f64) {
        let [a, b, c, d] = self.0.coords();
        (a, b, c, d)
    }

    fn area(&self) -> f64 {
        self.0.area()
    }

    fn iou(&self, other: &PyBox) -> f64 {
        self.0.iou(&other.0)
    }

    fn __eq__(&self, other: &PyBox) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let b = &self.0;
        format!(
            "Box({}, {}, {}, {}, score={}, label={})",
            b.x_min(),
            b.y_min(),
            b.x_max(),
            b.y_max(),
            b.score(),
            b.label()
        )
    }
}

fn unwrap_boxes(boxes: &[PyBox]) -> Vec<BBox> {
    boxes.iter().map(|b| b.0).collect()
}

fn wrap_boxes(boxes: &[BBox]) -> Vec<PyBox> {
    boxes.iter().copied().map(PyBox).collect()
}

#[pyfunction]
fn iou(a: &PyBox, b: &PyBox) -> f64 {
    gf::iou(&a.0, &b.0)
}

#[pyfunction]
fn area(a: &PyBox) -> f64 {
    gf::area(&a.0)
}

/// Weighted boxes fusion of several box lists of the same image.
#[pyfunction]
#[pyo3(signature = (sets, weights = None, iou_thr = 0.55, skip_box_thr = 0.0, score_mode = "weighted-mean", rescale = true))]
fn fuse(
    sets: Vec<Vec<PyBox>>,
    weights: Option<Vec<f64>>,
    iou_thr: f64,
    skip_box_thr: f64,
    score_mode: &str,
    rescale: bool,
) -> PyResult<Vec<PyBox>> {
    let score_mode = match score_mode {
        "mean" => ScoreMode::Mean,
        "weighted-mean" | "weighted_mean" => ScoreMode::WeightedMean,
        other => return Err(PyValueError::new_err(format!("unknown score mode {other:?}"))),
    };
    if let Some(w) = &weights {
        if w.len() != sets.len() {
            return Err(PyValueError::new_err(format!("{} weights for {} sets", w.len(), sets.len())));
        }
    }
    let sets: Vec<DetectionSet> = sets
        .iter()
        .enumerate()
        .map(|(k, boxes)| {
            let s = DetectionSet::new("image", format!("set{k}"), unwrap_boxes(boxes));
            match &weights {
                Some(w) => s.with_weight(w[k]),
                None => s,
            }
        })
        .collect();
    let p = FusionParams {
        iou_thr,
        skip_box_thr,
        score_mode,
        rescale_by_models: rescale,
    };
    gf::fuse(&sets, &p).map(|s| wrap_boxes(&s.boxes)).map_err(err)
}

/// Greedy matching; returns `(tp, fp, fn, [(pred index, gt index, iou)])`.
#[pyfunction]
#[pyo3(signature = (preds, gts, iou_thr = 0.5, conf_thr = 0.0))]
fn match_detections(
    preds: Vec<PyBox>,
    gts: Vec<PyBox>,
    iou_thr: f64,
    conf_thr: f64,
) -> (usize, usize, usize, Vec<(usize, usize, f64)>) {
    let m = gf::match_detections(&unwrap_boxes(&preds), &unwrap_boxes(&gts), iou_thr, conf_thr);
    (m.true_positives, m.false_positives, m.false_negatives, m.pairs)
}

#[pyfunction]
fn image_accuracy(tp: usize, fp: usize, fn_: usize) -> f64 {
    gf::image_accuracy(&gf::MatchResult {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        pairs: Vec::new(),
    })
}

/// Average domain accuracy; returns `(ada, {domain: mean accuracy})`.
#[pyfunction]
fn ada(domains: BTreeMap<String, Vec<f64>>) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let input: Vec<(String, Vec<f64>)> = domains.into_iter().collect();
    let r = gf::ada(&input).map_err(err)?;
    let per = r.per_domain.into_iter().map(|(k, v)| (k, v.mean_accuracy)).collect();
    Ok((r.ada, per))
}

fn image(data: &[u8], width: usize, height: usize, channels: usize) -> PyResult<ImageBuffer> {
    ImageBuffer::new(width, height, channels, data.to_vec()).map_err(err)
}

fn mask(data: &[u8], width: usize, height: usize) -> PyResult<GrayMask> {
    GrayMask::new(width, height, data.iter().map(|&v| v != 0).collect()).map_err(err)
}

/// Glare mask of an image; one byte per pixel, 255 where set.
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, low = 170, high = 255, blur = 9, erode = 2, dilate = 4))]
#[allow(clippy::too_many_arguments)]
fn build_mask<'py>(
    py: Python<'py>,
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    low: u8,
    high: u8,
    blur: usize,
    erode: usize,
    dilate: usize,
) -> PyResult<Bound<'py, PyBytes>> {
    let img = image(data, width, height, channels)?;
    let p = MaskParams {
        low,
        high,
        blur_kernel: blur,
        blur_sigma: gf::glare_mask::default_sigma(blur),
        erode_iters: erode,
        dilate_iters: dilate,
        ..MaskParams::default()
    };
    let m = py.detach(|| gf::build_mask(&img, &p)).map_err(err)?;
    Ok(PyBytes::new(py, m.to_image().data()))
}

/// Navier-Stokes inpainting of the masked pixels.
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, mask_data, radius = 3, max_iters = 300, dt = 0.1, tol = 1e-3, diffusion_weight = 1.0, diffusion_every = 2))]
#[allow(clippy::too_many_arguments)]
fn inpaint<'py>(
    py: Python<'py>,
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    mask_data: &[u8],
    radius: usize,
    max_iters: usize,
    dt: f64,
    tol: f64,
    diffusion_weight: f64,
    diffusion_every: usize,
) -> PyResult<Bound<'py, PyBytes>> {
    let img = image(data, width, height, channels)?;
    let m = mask(mask_data, width, height)?;
    let p = InpaintParams {
        radius,
        max_iters,
        dt,
        tol,
        diffusion_weight,
        diffusion_every,
    };
    let out = py.detach(|| gf::inpaint_ns(&img, &m, &p)).map_err(err)?;
    Ok(PyBytes::new(py, out.data()))
}

/// Laplace fill of the masked pixels.
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, mask_data, max_iters = 10000, tol = 1e-4))]
#[allow(clippy::too_many_arguments)]
fn harmonic_fill<'py>(
    py: Python<'py>,
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    mask_data: &[u8],
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyBytes>> {
    let img = image(data, width, height, channels)?;
    let m = mask(mask_data, width, height)?;
    let out = py.detach(|| gf::harmonic_fill(&img, &m, max_iters, tol)).map_err(err)?;
    Ok(PyBytes::new(py, out.data()))
}

#[pyfunction]
#[pyo3(signature = (x, beta = 1.0))]
fn smooth_l1(x: f64, beta: f64) -> PyResult<f64> {
    gf::smooth_l1(x, beta).map_err(err)
}

/// Row-major penalty weights for an image with the given boxes.
#[pyfunction]
fn penalty_matrix(width: usize, height: usize, boxes: Vec<PyBox>) -> Vec<f64> {
    gf::penalty_matrix(width, height, &unwrap_boxes(&boxes)).values().to_vec()
}

/// Penalty-weighted summed squared error; `boxes` define the penalty matrix.
#[pyfunction]
fn masked_mse(pred: Vec<f64>, target: Vec<f64>, width: usize, height: usize, boxes: Vec<PyBox>) -> PyResult<f64> {
    let p = gf::penalty_matrix(width, height, &unwrap_boxes(&boxes));
    gf::masked_mse_loss(&pred, &target, &p).map_err(err)
}

/// Synthetic scene; returns `(image bytes, width, height, channels, gt boxes, glare boxes)`.
#[pyfunction]
#[pyo3(signature = (seed, width = 256, height = 256, n_heads = 12, n_glare = 3, domain = "synthetic"))]
#[allow(clippy::type_complexity)]
fn generate_scene<'py>(
    py: Python<'py>,
    seed: u64,
    width: usize,
    height: usize,
    n_heads: usize,
    n_glare: usize,
    domain: &str,
) -> PyResult<(Bound<'py, PyBytes>, usize, usize, usize, Vec<PyBox>, Vec<PyBox>)> {
    let spec = gf::SceneSpec {
        seed,
        domain: domain.to_owned(),
        width,
        height,
        n_heads,
        n_glare,
        ..gf::SceneSpec::default()
    };
    let s = gf::generate_scene(&spec).map_err(err)?;
    Ok((
        PyBytes::new(py, s.image.data()),
        s.image.width(),
        s.image.height(),
        s.image.channels(),
        wrap_boxes(&s.ground_truth.boxes),
        wrap_boxes(&s.glare_regions),
    ))
}

#[pymodule]
#[pyo3(name = "glarefuse")]
fn glarefuse_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBox>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(area, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(match_detections, m)?)?;
    m.add_function(wrap_pyfunction!(image_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(ada, m)?)?;
    m.add_function(wrap_pyfunction!(build_mask, m)?)?;
    m.add_function(wrap_pyfunction!(inpaint, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_fill, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_l1, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(masked_mse, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    Ok(())
}
