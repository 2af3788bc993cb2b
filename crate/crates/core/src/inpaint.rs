//! Navier-Stokes style inpainting.
//!
//! Intensity is treated as a stream function: the image Laplacian (the
//! "vorticity") is transported along isophotes, interleaved with curvature
//! driven anisotropic diffusion. Masked pixels start from a harmonic fill.
//! All channels are processed independently and only masked pixels are
//! ever written.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayMask, ImageBuffer};

/// Transport and diffusion run on intensities scaled to `[0, 1]`; residuals
/// and tolerances are in 8-bit intensity levels.
const LEVELS: f64 = 255.0;

const HARMONIC_INIT_ITERS: usize = 20_000;
const HARMONIC_INIT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InpaintParams {
    /// Window radius for the isophote direction estimate (structure tensor).
    pub radius: usize,
    pub max_iters: usize,
    pub dt: f64,
    /// Stop once the mean absolute per-pixel update drops below this.
    pub tol: f64,
    pub diffusion_weight: f64,
    /// One diffusion pass after every this many transport steps.
    pub diffusion_every: usize,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            radius: 3,
            max_iters: 300,
            dt: 0.1,
            tol: 1e-3,
            diffusion_weight: 1.0,
            diffusion_every: 2,
        }
    }
}

impl InpaintParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt {} must be positive", self.dt)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParam(format!("tol {} must be non-negative", self.tol)));
        }
        if !(self.diffusion_weight >= 0.0 && self.diffusion_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "diffusion_weight {} must be non-negative",
                self.diffusion_weight
            )));
        }
        if self.diffusion_every == 0 {
            return Err(Error::InvalidParam("diffusion_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of an inpainting run with its convergence trace.
#[derive(Debug, Clone)]
pub struct InpaintOutcome {
    pub image: ImageBuffer,
    /// Mean absolute per-pixel update (intensity levels) for each iteration,
    /// one sequence per channel.
    pub residuals: Vec<Vec<f64>>,
}

fn check_inputs(img: &ImageBuffer, mask: &GrayMask) -> Result<()> {
    if !mask.same_dims(img) {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    if mask.count() == img.pixel_count() {
        return Err(Error::FullMask);
    }
    Ok(())
}

/// Masked pixel indices plus the geometry needed by the solvers.
struct Region {
    width: usize,
    height: usize,
    masked: Vec<usize>,
    bits: Vec<bool>,
    /// Bounding box of the mask grown by `pad`, as `(x0, y0, x1, y1)` exclusive.
    bounds: (usize, usize, usize, usize),
}

impl Region {
    fn new(mask: &GrayMask, pad: usize) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let masked: Vec<usize> = mask
            .bits()
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        for &i in &masked {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
        }
        let bounds = if masked.is_empty() {
            (0, 0, 0, 0)
        } else {
            (x0.saturating_sub(pad), y0.saturating_sub(pad), (x1 + pad).min(w), (y1 + pad).min(h))
        };
        Self {
            width: w,
            height: h,
            masked,
            bits: mask.bits().to_vec(),
            bounds,
        }
    }

    /// In-bounds 4-neighbours of pixel `i`.
    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = (i % self.width, i / self.width);
        let w = self.width;
        [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < self.height).then(|| i + w),
        ]
        .into_iter()
        .flatten()
    }

    fn known_range(&self, plane: &[f64]) -> (f64, f64) {
        plane
            .iter()
            .zip(&self.bits)
            .filter(|(_, &m)| !m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    }
}

/// Gauss-Seidel with over-relaxation on the 4-neighbour Laplace equation;
/// unmasked pixels are Dirichlet data, image borders are Neumann.
/// Returns the number of sweeps performed.
fn harmonic_plane(plane: &mut [f64], region: &Region, max_iters: usize, tol: f64) -> usize {
    if region.masked.is_empty() {
        return 0;
    }
    // start from the mean of the known pixels touching the mask
    let (mut sum, mut n) = (0.0, 0usize);
    for &i in &region.masked {
        for j in region.neighbours(i) {
            if !region.bits[j] {
                sum += plane[j];
                n += 1;
            }
        }
    }
    let start = if n > 0 { sum / n as f64 } else { 0.0 };
    for &i in &region.masked {
        plane[i] = start;
    }

    let (x0, y0, x1, y1) = region.bounds;
    let extent = (x1 - x0).max(y1 - y0) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (extent + 1.0)).sin());
    let (lo, hi) = region.known_range(plane);

    for sweep in 1..=max_iters {
        let mut change = 0.0;
        for &i in &region.masked {
            let (mut s, mut k) = (0.0, 0.0);
            for j in region.neighbours(i) {
                s += plane[j];
                k += 1.0;
            }
            let target = s / k;
            let next = (plane[i] + omega * (target - plane[i])).clamp(lo, hi);
            change += (next - plane[i]).abs();
            plane[i] = next;
        }
        if change / (region.masked.len() as f64) < tol {
            return sweep;
        }
    }
    max_iters
}

/// Solves Laplace's equation inside the mask with the unmasked pixels as
/// boundary values. Unmasked pixels are returned untouched.
pub fn harmonic_fill(img: &ImageBuffer, mask: &GrayMask, max_iters: usize, tol: f64) -> Result<ImageBuffer> {
    check_inputs(img, mask)?;
    let region = Region::new(mask, 0);
    let mut out = img.clone();
    if region.masked.is_empty() {
        return Ok(out);
    }
    for c in 0..img.channels() {
        let mut plane = img.channel_plane(c);
        harmonic_plane(&mut plane, &region, max_iters.max(1), tol);
        write_masked(&mut out, c, &plane, &region);
    }
    Ok(out)
}

fn write_masked(out: &mut ImageBuffer, c: usize, plane: &[f64], region: &Region) {
    let ch = out.channels();
    let data = out.data_mut();
    for &i in &region.masked {
        data[i * ch + c] = crate::image::to_u8(plane[i]);
    }
}

/// Per-iteration scratch fields over the padded mask bounding box.
struct Fields {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    lap: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    // integral images of the structure tensor entries, (w+1) x (h+1)
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
}

impl Fields {
    fn new(region: &Region) -> Self {
        let (x0, y0, x1, y1) = region.bounds;
        let (w, h) = (x1 - x0, y1 - y0);
        Self {
            x0,
            y0,
            w,
            h,
            lap: vec![0.0; w * h],
            gx: vec![0.0; w * h],
            gy: vec![0.0; w * h],
            sxx: vec![0.0; (w + 1) * (h + 1)],
            sxy: vec![0.0; (w + 1) * (h + 1)],
            syy: vec![0.0; (w + 1) * (h + 1)],
        }
    }

    fn local(&self, i: usize, img_w: usize) -> (usize, usize) {
        (i % img_w - self.x0, i / img_w - self.y0)
    }

    fn update(&mut self, u: &[f64], img_w: usize, img_h: usize, radius: usize) {
        let at = |x: usize, y: usize| u[y * img_w + x];
        for ly in 0..self.h {
            let y = ly + self.y0;
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(img_h - 1));
            for lx in 0..self.w {
                let x = lx + self.x0;
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(img_w - 1));
                let c = at(x, y);
                let k = ly * self.w + lx;
                // reflected borders make the missing neighbour equal the centre
                self.lap[k] = at(xl, y) + at(xr, y) + at(x, yu) + at(x, yd) - 4.0 * c;
                self.gx[k] = (at(xr, y) - at(xl, y)) / (xr - xl).max(1) as f64;
                self.gy[k] = (at(x, yd) - at(x, yu)) / (yd - yu).max(1) as f64;
            }
        }
        if radius > 0 {
            let stride = self.w + 1;
            for ly in 0..self.h {
                let (mut rxx, mut rxy, mut ryy) = (0.0, 0.0, 0.0);
                for lx in 0..self.w {
                    let k = ly * self.w + lx;
                    rxx += self.gx[k] * self.gx[k];
                    rxy += self.gx[k] * self.gy[k];
                    ryy += self.gy[k] * self.gy[k];
                    let o = (ly + 1) * stride + lx + 1;
                    self.sxx[o] = self.sxx[o - stride] + rxx;
                    self.sxy[o] = self.sxy[o - stride] + rxy;
                    self.syy[o] = self.syy[o - stride] + ryy;
                }
            }
        }
    }

    /// Laplacian at local coordinates, clamped into the field.
    fn lap_at(&self, lx: isize, ly: isize) -> f64 {
        let x = lx.clamp(0, self.w as isize - 1) as usize;
        let y = ly.clamp(0, self.h as isize - 1) as usize;
        self.lap[y * self.w + x]
    }

    /// Unit isophote direction at a local pixel, or `None` where flat.
    fn isophote(&self, lx: usize, ly: usize, radius: usize) -> Option<(f64, f64)> {
        let k = ly * self.w + lx;
        let (gx, gy) = (self.gx[k], self.gy[k]);
        let g2 = gx * gx + gy * gy;
        if g2 < 1e-24 {
            return None;
        }
        let (ex, ey) = if radius == 0 {
            let g = g2.sqrt();
            (gx / g, gy / g)
        } else {
            let stride = self.w + 1;
            let (xa, ya) = (lx.saturating_sub(radius), ly.saturating_sub(radius));
            let (xb, yb) = ((lx + radius + 1).min(self.w), (ly + radius + 1).min(self.h));
            let rect = |s: &[f64]| s[yb * stride + xb] - s[ya * stride + xb] - s[yb * stride + xa] + s[ya * stride + xa];
            let (jxx, jxy, jyy) = (rect(&self.sxx), rect(&self.sxy), rect(&self.syy));
            let theta = 0.5 * (2.0 * jxy).atan2(jxx - jyy);
            let (mut ex, mut ey) = (theta.cos(), theta.sin());
            if ex * gx + ey * gy < 0.0 {
                ex = -ex;
                ey = -ey;
            }
            (ex, ey)
        };
        Some((-ey, ex))
    }
}

/// One transport step: `u_t = grad(lap u) . N |grad u|` with upwind
/// slope-limited gradient magnitude.
fn transport_step(u: &[f64], next: &mut [f64], region: &Region, f: &Fields, radius: usize, dt: f64) {
    let (w, h) = (region.width, region.height);
    for &i in &region.masked {
        let (x, y) = (i % w, i / w);
        let (lx, ly) = f.local(i, w);
        let Some((nx, ny)) = f.isophote(lx, ly, radius) else {
            next[i] = u[i];
            continue;
        };
        let (lxi, lyi) = (lx as isize, ly as isize);
        let dlx = 0.5 * (f.lap_at(lxi + 1, lyi) - f.lap_at(lxi - 1, lyi));
        let dly = 0.5 * (f.lap_at(lxi, lyi + 1) - f.lap_at(lxi, lyi - 1));
        let beta = dlx * nx + dly * ny;

        let c = u[i];
        let xb = if x > 0 { c - u[i - 1] } else { 0.0 };
        let xf = if x + 1 < w { u[i + 1] - c } else { 0.0 };
        let yb = if y > 0 { c - u[i - w] } else { 0.0 };
        let yf = if y + 1 < h { u[i + w] - c } else { 0.0 };
        let sq = |v: f64| v * v;
        let grad = if beta > 0.0 {
            (sq(xb.min(0.0)) + sq(xf.max(0.0)) + sq(yb.min(0.0)) + sq(yf.max(0.0))).sqrt()
        } else {
            (sq(xb.max(0.0)) + sq(xf.min(0.0)) + sq(yb.max(0.0)) + sq(yf.min(0.0))).sqrt()
        };
        next[i] = c + dt * beta * grad;
    }
}

/// Mean-curvature diffusion `u_t = w * kappa |grad u|` on masked pixels.
fn diffusion_step(u: &[f64], next: &mut [f64], region: &Region, weight: f64) {
    let (w, h) = (region.width, region.height);
    for &i in &region.masked {
        let (x, y) = (i % w, i / w);
        let l = if x > 0 { i - 1 } else { i };
        let r = if x + 1 < w { i + 1 } else { i };
        let t = if y > 0 { i - w } else { i };
        let b = if y + 1 < h { i + w } else { i };
        let c = u[i];
        let ux = 0.5 * (u[r] - u[l]);
        let uy = 0.5 * (u[b] - u[t]);
        let uxx = u[r] - 2.0 * c + u[l];
        let uyy = u[b] - 2.0 * c + u[t];
        let tl = if x > 0 && y > 0 { i - w - 1 } else { i };
        let tr = if x + 1 < w && y > 0 { i - w + 1 } else { i };
        let bl = if x > 0 && y + 1 < h { i + w - 1 } else { i };
        let br = if x + 1 < w && y + 1 < h { i + w + 1 } else { i };
        let uxy = 0.25 * (u[br] - u[bl] - u[tr] + u[tl]);
        let g2 = ux * ux + uy * uy;
        let flow = if g2 > 1e-24 {
            (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / g2
        } else {
            0.0
        };
        next[i] = c + weight * flow;
    }
}

fn ns_plane(plane: &mut [f64], region: &Region, p: &InpaintParams) -> Vec<f64> {
    let mut residuals = Vec::new();
    if region.masked.is_empty() {
        return residuals;
    }
    harmonic_plane(plane, region, HARMONIC_INIT_ITERS, HARMONIC_INIT_TOL);
    let (lo, hi) = region.known_range(plane);
    let (lo, hi) = (lo / LEVELS, hi / LEVELS);

    let mut u: Vec<f64> = plane.iter().map(|v| v / LEVELS).collect();
    let mut stage = u.clone();
    let mut next = u.clone();
    let mut fields = Fields::new(region);
    let n = region.masked.len() as f64;

    for iter in 1..=p.max_iters {
        fields.update(&u, region.width, region.height, p.radius);
        transport_step(&u, &mut stage, region, &fields, p.radius, p.dt);
        if iter % p.diffusion_every == 0 && p.diffusion_weight > 0.0 {
            diffusion_step(&stage, &mut next, region, p.dt * p.diffusion_weight);
        } else {
            for &i in &region.masked {
                next[i] = stage[i];
            }
        }
        let mut change = 0.0;
        for &i in &region.masked {
            let v = next[i].clamp(lo, hi);
            change += (v - u[i]).abs();
            u[i] = v;
        }
        let residual = change * LEVELS / n;
        residuals.push(residual);
        if residual < p.tol {
            break;
        }
    }
    for &i in &region.masked {
        plane[i] = u[i] * LEVELS;
    }
    residuals
}

/// Navier-Stokes inpainting with the convergence trace.
pub fn inpaint_ns_traced(img: &ImageBuffer, mask: &GrayMask, p: &InpaintParams) -> Result<InpaintOutcome> {
    check_inputs(img, mask)?;
    p.validate()?;
    // the stencils reach two pixels and the tensor window `radius` beyond the mask
    let region = Region::new(mask, p.radius + 2);
    let mut out = img.clone();
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(img.channels());
    let mut solved: Vec<(Vec<f64>, Vec<f64>, usize)> = Vec::new();
    for c in 0..img.channels() {
        let input = img.channel_plane(c);
        // channels are independent, so a repeated plane (gray RGB) is solved once
        if let Some((_, plane, first)) = solved.iter().find(|(src, ..)| *src == input) {
            write_masked(&mut out, c, plane, &region);
            residuals.push(residuals[*first].clone());
            continue;
        }
        let mut plane = input.clone();
        residuals.push(ns_plane(&mut plane, &region, p));
        write_masked(&mut out, c, &plane, &region);
        solved.push((input, plane, c));
    }
    Ok(InpaintOutcome { image: out, residuals })
}

pub fn inpaint_ns(img: &ImageBuffer, mask: &GrayMask, p: &InpaintParams) -> Result<ImageBuffer> {
    inpaint_ns_traced(img, mask, p).map(|o| o.image)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> GrayMask {
        GrayMask::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            dx * dx + dy * dy <= r * r
        })
    }

    #[test]
    fn single_pixel_harmonic() {
        // 4-neighbours 10, 20, 30, 40 around the centre
        let img = ImageBuffer::new(3, 3, 1, vec![0, 10, 0, 20, 99, 30, 0, 40, 0]).unwrap();
        let mask = GrayMask::from_fn(3, 3, |x, y| x == 1 && y == 1);
        let out = harmonic_fill(&img, &mask, 100, 1e-9).unwrap();
        assert_eq!(out.get(1, 1, 0), 25);
    }

    #[test]
    fn constant_is_fixed_point() {
        let img = ImageBuffer::filled(20, 16, 3, 131).unwrap();
        let mask = disk(20, 16, 9.0, 8.0, 5.0);
        assert_eq!(inpaint_ns(&img, &mask, &InpaintParams::default()).unwrap(), img);
        assert_eq!(harmonic_fill(&img, &mask, 500, 1e-6).unwrap(), img);
    }

    #[test]
    fn seam_strip_stays_in_range() {
        let img = ImageBuffer::from_fn(24, 12, |x, _| if x < 12 { 50 } else { 150 }).unwrap();
        let mask = GrayMask::from_fn(24, 12, |x, _| (11..13).contains(&x));
        let out = inpaint_ns(&img, &mask, &InpaintParams::default()).unwrap();
        for y in 0..12 {
            for x in 0..24 {
                if mask.get(x, y) {
                    assert!((50..=150).contains(&out.get(x, y, 0)));
                } else {
                    assert_eq!(out.get(x, y, 0), img.get(x, y, 0));
                }
            }
        }
    }

    #[test]
    fn errors() {
        let img = ImageBuffer::filled(4, 4, 1, 0).unwrap();
        assert!(matches!(
            inpaint_ns(&img, &GrayMask::empty(4, 5), &InpaintParams::default()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            harmonic_fill(&img, &GrayMask::full(4, 4), 10, 0.0),
            Err(Error::FullMask)
        ));
        let bad = InpaintParams {
            dt: 0.0,
            ..Default::default()
        };
        assert!(inpaint_ns(&img, &GrayMask::empty(4, 4), &bad).is_err());
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = ImageBuffer::from_fn(9, 7, |x, y| (x * 20 + y) as u8).unwrap();
        assert_eq!(inpaint_ns(&img, &GrayMask::empty(9, 7), &InpaintParams::default()).unwrap(), img);
    }

    #[test]
    fn ramp_residuals_settle() {
        let img = ImageBuffer::from_fn(32, 32, |x, _| (x * 7) as u8).unwrap();
        let mask = disk(32, 32, 15.5, 15.5, 8.0);
        let p = InpaintParams {
            tol: 1e-4,
            ..Default::default()
        };
        let out = inpaint_ns_traced(&img, &mask, &p).unwrap();
        let r = &out.residuals[0];
        for w in r.windows(2).skip(10) {
            assert!(w[1] <= w[0] + 1e-6, "residual rose: {:?}", w);
        }
    }

    #[test]
    fn deterministic() {
        let img = ImageBuffer::from_fn(30, 30, |x, y| ((x * x + 3 * y) % 200) as u8).unwrap();
        let mask = disk(30, 30, 12.0, 14.0, 6.0);
        let p = InpaintParams::default();
        assert_eq!(inpaint_ns(&img, &mask, &p).unwrap(), inpaint_ns(&img, &mask, &p).unwrap());
    }
}
