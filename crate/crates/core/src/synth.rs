//! Seeded synthetic benchmark: field scenes with head-like blobs and glare
//! patches, plus a simulated detector that fires false positives on bright
//! glare.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::BBox;
use crate::image::{GrayMask, ImageBuffer};
use crate::wbf::DetectionSet;

/// Brightness above which the simulated detector mistakes glare for heads.
pub const GLARE_GATE: f64 = 170.0;

const PLACEMENT_ATTEMPTS: usize = 500;
const GLARE_FALLOFF: f64 = 3.0;
const HEAD_GLARE_MARGIN: f64 = 12.0;
const TEXTURE: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub image_id: String,
    pub domain: String,
    pub width: usize,
    pub height: usize,
    pub n_heads: usize,
    pub n_glare: usize,
    pub head_intensity_range: (u8, u8),
    pub glare_intensity_range: (u8, u8),
    pub background_intensity: u8,
    /// Range of head ellipse semi-axes, pixels.
    pub head_radius: (f64, f64),
    /// Range of glare ellipse semi-axes, pixels.
    pub glare_radius: (f64, f64),
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            image_id: "scene".into(),
            domain: "synthetic".into(),
            width: 256,
            height: 256,
            n_heads: 12,
            n_glare: 3,
            head_intensity_range: (105, 150),
            glare_intensity_range: (200, 255),
            background_intensity: 70,
            head_radius: (5.0, 9.0),
            glare_radius: (12.0, 22.0),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!("scene {}x{} too small", self.width, self.height));
        }
        let (gl, gh) = self.glare_intensity_range;
        if gl > gh || gl < 170 {
            return bad(format!("glare intensity range ({gl}, {gh}) must lie within [170, 255]"));
        }
        let (hl, hh) = self.head_intensity_range;
        if hl > hh {
            return bad(format!("head intensity range ({hl}, {hh}) is empty"));
        }
        for (name, (lo, hi)) in [("head", self.head_radius), ("glare", self.glare_radius)] {
            if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} radius range ({lo}, {hi}) is invalid"));
            }
        }
        if self.domain.is_empty() {
            return bad("empty domain tag".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: ImageBuffer,
    pub ground_truth: GroundTruth,
    /// Bounding boxes of the rendered glare blobs.
    pub glare_regions: Vec<BBox>,
    /// Pixels brought to 170 or above by glare.
    pub glare_pixels: GrayMask,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    /// Normalized radial distance; < 1 inside.
    fn rho(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = ((x - self.cx) / self.rx, (y - self.cy) / self.ry);
        (dx * dx + dy * dy).sqrt()
    }

    fn extent(&self, pad: f64) -> [f64; 4] {
        [
            self.cx - self.rx - pad,
            self.cy - self.ry - pad,
            self.cx + self.rx + pad,
            self.cy + self.ry + pad,
        ]
    }
}

fn overlaps(a: [f64; 4], b: [f64; 4]) -> bool {
    a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3]
}

fn draw_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn draw_u8(rng: &mut ChaCha8Rng, (lo, hi): (u8, u8)) -> u8 {
    rng.random_range(lo..=hi)
}

/// Places an ellipse fully inside the image, away from `avoid`.
fn place(
    rng: &mut ChaCha8Rng,
    spec: &SceneSpec,
    radius: (f64, f64),
    pad: f64,
    avoid: &[[f64; 4]],
    what: &'static str,
) -> Result<Ellipse> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let rx = draw_range(rng, radius);
        // elongated along a random axis
        let stretch = rng.random_range(1.0..1.6);
        let (rx, ry) = if rng.random_bool(0.5) { (rx, rx * stretch) } else { (rx * stretch, rx) };
        let (mx, my) = (rx + GLARE_FALLOFF + 1.0, ry + GLARE_FALLOFF + 1.0);
        if 2.0 * mx >= w || 2.0 * my >= h {
            continue;
        }
        let e = Ellipse {
            cx: rng.random_range(mx..w - mx),
            cy: rng.random_range(my..h - my),
            rx,
            ry,
        };
        if avoid.iter().all(|a| !overlaps(e.extent(pad), *a)) {
            return Ok(e);
        }
    }
    Err(Error::Unplaceable {
        what,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

/// Renders one scene. Pure function of the spec (including its seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let bg = i32::from(spec.background_intensity);
    let mut plane: Vec<i32> = (0..w * h).map(|_| bg + rng.random_range(-3..=3)).collect();

    let mut glare_extents = Vec::new();
    let mut glares = Vec::new();
    for _ in 0..spec.n_glare {
        let e = place(&mut rng, spec, spec.glare_radius, GLARE_FALLOFF + 2.0, &glare_extents, "glare patch")?;
        glare_extents.push(e.extent(GLARE_FALLOFF));
        glares.push((e, i32::from(draw_u8(&mut rng, spec.glare_intensity_range))));
    }

    let mut glare_pixels = GrayMask::empty(w, h);
    let mut glare_regions = Vec::new();
    for (e, peak) in &glares {
        let ext = e.extent(GLARE_FALLOFF);
        let (x0, y0) = (ext[0].floor().max(0.0) as usize, ext[1].floor().max(0.0) as usize);
        let (x1, y1) = ((ext[2].ceil() as usize).min(w), (ext[3].ceil() as usize).min(h));
        let (mut bx0, mut by0, mut bx1, mut by1) = (w, h, 0, 0);
        for y in y0..y1 {
            for x in x0..x1 {
                let rho = e.rho(x as f64 + 0.5, y as f64 + 0.5);
                // distance outside the core, roughly in pixels
                let out = (rho - 1.0) * e.rx.min(e.ry);
                if out >= GLARE_FALLOFF {
                    continue;
                }
                let t = if out <= 0.0 { 1.0 } else { 1.0 - out / GLARE_FALLOFF };
                let i = y * w + x;
                let v = ((1.0 - t) * plane[i] as f64 + t * *peak as f64).round() as i32;
                plane[i] = plane[i].max(v);
                if plane[i] >= GLARE_GATE as i32 {
                    glare_pixels.set(x, y, true);
                }
                bx0 = bx0.min(x);
                by0 = by0.min(y);
                bx1 = bx1.max(x + 1);
                by1 = by1.max(y + 1);
            }
        }
        glare_regions.push(BBox::ground_truth(bx0 as f64, by0 as f64, bx1 as f64, by1 as f64, 0)?);
    }

    let mut avoid: Vec<[f64; 4]> = glare_extents
        .iter()
        .map(|g| [g[0] - HEAD_GLARE_MARGIN, g[1] - HEAD_GLARE_MARGIN, g[2] + HEAD_GLARE_MARGIN, g[3] + HEAD_GLARE_MARGIN])
        .collect();
    let mut boxes = Vec::with_capacity(spec.n_heads);
    for _ in 0..spec.n_heads {
        let e = place(&mut rng, spec, spec.head_radius, 2.0, &avoid, "wheat head")?;
        avoid.push(e.extent(0.0));
        let level = i32::from(draw_u8(&mut rng, spec.head_intensity_range));
        let ext = e.extent(1.0);
        let (x0, y0) = (ext[0].floor().max(0.0) as usize, ext[1].floor().max(0.0) as usize);
        let (x1, y1) = ((ext[2].ceil() as usize).min(w), (ext[3].ceil() as usize).min(h));
        let (mut bx0, mut by0, mut bx1, mut by1) = (w, h, 0, 0);
        for y in y0..y1 {
            for x in x0..x1 {
                if e.rho(x as f64 + 0.5, y as f64 + 0.5) >= 1.0 {
                    continue;
                }
                plane[y * w + x] = level + rng.random_range(-TEXTURE..=TEXTURE);
                bx0 = bx0.min(x);
                by0 = by0.min(y);
                bx1 = bx1.max(x + 1);
                by1 = by1.max(y + 1);
            }
        }
        boxes.push(BBox::ground_truth(bx0 as f64, by0 as f64, bx1 as f64, by1 as f64, 0)?);
    }

    let mut data = Vec::with_capacity(w * h * 3);
    for v in plane {
        let g = v.clamp(0, 255) as u8;
        data.extend([g, g, g]);
    }
    Ok(Scene {
        image: ImageBuffer::new(w, h, 3, data)?,
        ground_truth: GroundTruth {
            image_id: spec.image_id.clone(),
            domain: spec.domain.clone(),
            boxes,
        },
        glare_regions,
        glare_pixels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDetectorSpec {
    pub tp_rate: f64,
    pub glare_fp_rate: f64,
    pub base_fp_rate: f64,
    /// Standard deviation of coordinate noise, pixels.
    pub jitter: f64,
    /// Uniform score range for true detections.
    pub tp_score: (f64, f64),
    /// Uniform score range for false detections.
    pub fp_score: (f64, f64),
    /// Independent chances per glare region to fire a false box.
    pub glare_fp_per_region: usize,
    /// Independent chances per image to fire a background false box.
    pub base_fp_slots: usize,
}

impl Default for SimDetectorSpec {
    fn default() -> Self {
        Self {
            tp_rate: 0.9,
            glare_fp_rate: 0.8,
            base_fp_rate: 0.05,
            jitter: 1.0,
            tp_score: (0.5, 0.95),
            fp_score: (0.3, 0.7),
            glare_fp_per_region: 2,
            base_fp_slots: 3,
        }
    }
}

impl SimDetectorSpec {
    /// Detects every head exactly and never fires falsely.
    pub fn perfect() -> Self {
        Self {
            tp_rate: 1.0,
            glare_fp_rate: 0.0,
            base_fp_rate: 0.0,
            jitter: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        for (name, r) in [
            ("tp_rate", self.tp_rate),
            ("glare_fp_rate", self.glare_fp_rate),
            ("base_fp_rate", self.base_fp_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} {r} outside [0, 1]"));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter {} must be non-negative", self.jitter));
        }
        for (name, (lo, hi)) in [("tp_score", self.tp_score), ("fp_score", self.fp_score)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("{name} range ({lo}, {hi}) must lie within [0, 1]"));
            }
        }
        if self.fp_score.0 > self.tp_score.0 || self.fp_score.1 > self.tp_score.1 {
            return bad("false-positive scores must sit below true-positive scores".into());
        }
        Ok(())
    }
}

/// Clips a jittered box to the image, keeping at least one pixel of extent.
fn clipped_box(c: [f64; 4], w: f64, h: f64, score: f64, label: u32) -> Result<BBox> {
    let x0 = c[0].clamp(0.0, w - 1.0);
    let y0 = c[1].clamp(0.0, h - 1.0);
    let x1 = c[2].clamp(x0 + 1.0, w.max(x0 + 1.0));
    let y1 = c[3].clamp(y0 + 1.0, h.max(y0 + 1.0));
    BBox::new(x0, y0, x1, y1, score, label)
}

/// Simulated detector.
///
/// True heads are found with probability `tp_rate` and jittered. Each glare
/// region gets `glare_fp_per_region` chances at `glare_fp_rate` to produce a
/// head-sized false box inside it, kept only when the mean brightness under
/// that box in `img` exceeds 170; inpainted glare therefore stops firing.
/// The random stream does not depend on `img`, so two variants of one image
/// with the same seed differ only through the brightness gate.
pub fn simulate_detector(
    img: &ImageBuffer,
    gt: &GroundTruth,
    glare_regions: &[BBox],
    spec: &SimDetectorSpec,
    seed: u64,
) -> Result<DetectionSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let noise = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let score = |rng: &mut ChaCha8Rng, r: (f64, f64)| draw_range(rng, r);
    let mut boxes = Vec::new();

    for g in &gt.boxes {
        let hit = rng.random_bool(spec.tp_rate);
        let mut c = g.coords();
        for v in &mut c {
            let d = noise.sample(&mut rng);
            if spec.jitter > 0.0 {
                *v += d;
            }
        }
        let s = score(&mut rng, spec.tp_score);
        if hit {
            boxes.push(clipped_box(c, w, h, s, g.label())?);
        }
    }

    for region in glare_regions {
        for _ in 0..spec.glare_fp_per_region {
            let fire = rng.random_bool(spec.glare_fp_rate);
            // a head-sized box centred in the inner part of the region
            let half = 0.25 * region.width().min(region.height());
            let cx = region.x_min() + region.width() * rng.random_range(0.4..0.6);
            let cy = region.y_min() + region.height() * rng.random_range(0.4..0.6);
            let s = score(&mut rng, spec.fp_score);
            if !fire {
                continue;
            }
            let bright = img
                .region_mean(cx - half, cy - half, cx + half, cy + half)
                .is_some_and(|m| m > GLARE_GATE);
            if bright {
                boxes.push(clipped_box([cx - half, cy - half, cx + half, cy + half], w, h, s, 0)?);
            }
        }
    }

    for _ in 0..spec.base_fp_slots {
        let fire = rng.random_bool(spec.base_fp_rate);
        let bw = rng.random_range(8.0..20.0);
        let bh = rng.random_range(8.0..20.0);
        let x0 = rng.random_range(0.0..(w - bw).max(1.0));
        let y0 = rng.random_range(0.0..(h - bh).max(1.0));
        let s = score(&mut rng, spec.fp_score);
        if fire {
            boxes.push(clipped_box([x0, y0, x0 + bw, y0 + bh], w, h, s, 0)?);
        }
    }

    Ok(DetectionSet::new(gt.image_id.clone(), "simulated", boxes))
}

/// Scene parameters of one benchmark domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub template: SceneSpec,
}

/// Three field conditions with differing soil, head and glare brightness.
pub fn default_domains() -> Vec<DomainSpec> {
    let base = SceneSpec::default();
    vec![
        DomainSpec {
            name: "sunny_soil".into(),
            template: SceneSpec {
                background_intensity: 80,
                head_intensity_range: (110, 155),
                n_glare: 3,
                ..base.clone()
            },
        },
        DomainSpec {
            name: "dark_canopy".into(),
            template: SceneSpec {
                background_intensity: 45,
                head_intensity_range: (95, 140),
                glare_intensity_range: (190, 245),
                n_heads: 14,
                n_glare: 2,
                ..base.clone()
            },
        },
        DomainSpec {
            name: "pale_field".into(),
            template: SceneSpec {
                background_intensity: 100,
                head_intensity_range: (125, 160),
                glare_intensity_range: (210, 255),
                n_heads: 10,
                n_glare: 4,
                ..base
            },
        },
    ]
}

/// Stable 64-bit mixing of a base seed with string and integer salts.
pub fn derive_seed(seed: u64, salt: &str, index: u64) -> u64 {
    // FNV-1a over the salt, then a splitmix64 finalizer
    let mut hsh: u64 = 0xcbf2_9ce4_8422_2325;
    for b in salt.bytes() {
        hsh ^= u64::from(b);
        hsh = hsh.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ hsh.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scene specs for `images_per_domain` images in each domain.
pub fn benchmark_specs(seed: u64, domains: &[DomainSpec], images_per_domain: usize) -> Vec<SceneSpec> {
    domains
        .iter()
        .flat_map(|d| {
            (0..images_per_domain).map(move |i| SceneSpec {
                seed: derive_seed(seed, &d.name, i as u64),
                image_id: format!("{}_{i:04}", d.name),
                domain: d.name.clone(),
                ..d.template.clone()
            })
        })
        .collect()
}
