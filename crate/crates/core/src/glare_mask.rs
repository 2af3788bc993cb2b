//! Glare mask construction: grayscale, Gaussian blur, brightness threshold,
//! then erosion and dilation with a square structuring element.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{to_u8, GrayMask, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub low: u8,
    pub high: u8,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub erode_iters: usize,
    pub dilate_iters: usize,
    pub morph_kernel: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            low: 170,
            high: 255,
            blur_kernel: 9,
            blur_sigma: default_sigma(9),
            erode_iters: 2,
            dilate_iters: 4,
            morph_kernel: 3,
        }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.low > self.high {
            return Err(Error::InvalidParam(format!(
                "threshold low {} exceeds high {}",
                self.low, self.high
            )));
        }
        check_kernel(self.blur_kernel)?;
        check_kernel(self.morph_kernel)?;
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::InvalidParam(format!("blur sigma {} must be positive", self.blur_sigma)));
        }
        Ok(())
    }
}

/// Conventional sigma for a given Gaussian kernel size.
pub fn default_sigma(kernel: usize) -> f64 {
    0.3 * ((kernel as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

fn check_kernel(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::EvenKernel(k));
    }
    Ok(())
}

fn require_gray(img: &ImageBuffer) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::UnsupportedChannels(img.channels()));
    }
    Ok(())
}

/// BT.601 luma, rounded to nearest. Single-channel input is returned as is.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|p| to_u8(0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])))
                .collect();
            ImageBuffer::new(img.width(), img.height(), 1, data)
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// Normalized 1-D Gaussian taps of odd length `kernel`.
pub fn gaussian_taps(kernel: usize, sigma: f64) -> Result<Vec<f64>> {
    check_kernel(kernel)?;
    let r = (kernel / 2) as f64;
    let mut taps: Vec<f64> = (0..kernel)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian convolution of an `f64` plane with edge replication.
pub(crate) fn blur_plane(plane: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * row[clamp(x as isize + k as isize - r as isize, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[clamp(y as isize + k as isize - r as isize, height) * width + x])
                .sum();
        }
    }
    out
}

/// Gaussian blur of a single-channel image. Rounds once, after both passes.
pub fn gaussian_blur(gray: &ImageBuffer, kernel: usize, sigma: f64) -> Result<ImageBuffer> {
    require_gray(gray)?;
    let taps = gaussian_taps(kernel, sigma)?;
    if kernel == 1 {
        return Ok(gray.clone());
    }
    let plane = blur_plane(&gray.channel_plane(0), gray.width(), gray.height(), &taps);
    let mut out = gray.clone();
    out.store_plane(0, &plane);
    Ok(out)
}

/// Sets every pixel with `low <= value <= high`.
pub fn threshold(gray: &ImageBuffer, low: u8, high: u8) -> Result<GrayMask> {
    require_gray(gray)?;
    if low > high {
        return Err(Error::InvalidParam(format!("threshold low {low} exceeds high {high}")));
    }
    GrayMask::new(
        gray.width(),
        gray.height(),
        gray.data().iter().map(|&v| (low..=high).contains(&v)).collect(),
    )
}

#[derive(Clone, Copy)]
enum Morph {
    Erode,
    Dilate,
}

/// One pass of a 1-D line structuring element along x (`horizontal`) or y.
/// Out-of-bounds neighbours count as `false`.
fn line_pass(bits: &[bool], width: usize, height: usize, r: usize, horizontal: bool, op: Morph) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    let (len, stride, lines, line_stride) = if horizontal {
        (width, 1, height, width)
    } else {
        (height, width, width, 1)
    };
    for line in 0..lines {
        let base = line * line_stride;
        // prefix counts of set bits along the line
        let mut prefix = vec![0usize; len + 1];
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(bits[base + i * stride]);
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            let set = prefix[hi] - prefix[lo];
            out[base + i * stride] = match op {
                // the window must be fully inside and fully set
                Morph::Erode => i >= r && i + r < len && set == 2 * r + 1,
                Morph::Dilate => set > 0,
            };
        }
    }
    out
}

fn morph(mask: &GrayMask, kernel: usize, iters: usize, op: Morph) -> Result<GrayMask> {
    check_kernel(kernel)?;
    let (w, h) = (mask.width(), mask.height());
    let r = kernel / 2;
    let mut bits = mask.bits().to_vec();
    if r > 0 {
        for _ in 0..iters {
            let tmp = line_pass(&bits, w, h, r, true, op);
            bits = line_pass(&tmp, w, h, r, false, op);
        }
    }
    GrayMask::new(w, h, bits)
}

/// Binary erosion with a `kernel x kernel` square, repeated `iters` times.
pub fn erode(mask: &GrayMask, kernel: usize, iters: usize) -> Result<GrayMask> {
    morph(mask, kernel, iters, Morph::Erode)
}

/// Binary dilation with a `kernel x kernel` square, repeated `iters` times.
pub fn dilate(mask: &GrayMask, kernel: usize, iters: usize) -> Result<GrayMask> {
    morph(mask, kernel, iters, Morph::Dilate)
}

/// Gray -> Blur -> Threshold -> Erode -> Dilate.
pub fn build_mask(img: &ImageBuffer, p: &MaskParams) -> Result<GrayMask> {
    p.validate()?;
    let gray = to_grayscale(img)?;
    let blurred = gaussian_blur(&gray, p.blur_kernel, p.blur_sigma)?;
    let mask = threshold(&blurred, p.low, p.high)?;
    let mask = erode(&mask, p.morph_kernel, p.erode_iters)?;
    dilate(&mask, p.morph_kernel, p.dilate_iters)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Naive sliding-window morphology, O(n k^2) per iteration.
    use crate::image::GrayMask;

    pub fn naive(mask: &GrayMask, kernel: usize, iters: usize, erode: bool) -> GrayMask {
        let (w, h) = (mask.width() as isize, mask.height() as isize);
        let r = (kernel / 2) as isize;
        let mut cur = mask.clone();
        for _ in 0..iters {
            let prev = cur.clone();
            cur = GrayMask::from_fn(w as usize, h as usize, |x, y| {
                let mut all = true;
                let mut any = false;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        let v = nx >= 0 && ny >= 0 && nx < w && ny < h && prev.get(nx as usize, ny as usize);
                        all &= v;
                        any |= v;
                    }
                }
                if erode {
                    all
                } else {
                    any
                }
            });
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(w: usize, h: usize, v: u8) -> ImageBuffer {
        ImageBuffer::filled(w, h, 1, v).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        let rgb = ImageBuffer::new(2, 1, 3, vec![200, 200, 200, 255, 0, 0]).unwrap();
        let g = to_grayscale(&rgb).unwrap();
        assert_eq!(g.data(), &[200, 76]);
        let one = gray(3, 3, 42);
        assert_eq!(to_grayscale(&one).unwrap(), one);
    }

    #[test]
    fn blur_constant_and_identity() {
        let img = gray(12, 9, 200);
        for k in [1, 3, 5, 9] {
            let out = gaussian_blur(&img, k, default_sigma(k)).unwrap();
            assert!(out.data().iter().all(|&v| v == 200));
        }
        let noisy = ImageBuffer::from_fn(8, 8, |x, y| ((x * 37 + y * 11) % 256) as u8).unwrap();
        assert_eq!(gaussian_blur(&noisy, 1, 1.0).unwrap(), noisy);
    }

    #[test]
    fn blur_impulse_center_tap() {
        // hand oracle: 1-D taps e^{-1/2}, 1, e^{-1/2}, normalized; 2-D centre tap is the square
        let e = (-0.5f64).exp();
        let w0 = 1.0 / (1.0 + 2.0 * e);
        let expected = (255.0 * w0 * w0).round() as u8;
        assert_eq!(expected, 52);
        let img = ImageBuffer::from_fn(9, 9, |x, y| if x == 4 && y == 4 { 255 } else { 0 }).unwrap();
        let out = gaussian_blur(&img, 3, 1.0).unwrap();
        assert_eq!(out.get(4, 4, 0), expected);
    }

    #[test]
    fn blur_rejects_even_kernel_and_color() {
        assert!(matches!(gaussian_blur(&gray(4, 4, 0), 4, 1.0), Err(Error::EvenKernel(4))));
        let rgb = ImageBuffer::filled(4, 4, 3, 0).unwrap();
        assert!(gaussian_blur(&rgb, 3, 1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(&gray(5, 5, 200), 170, 255).unwrap().count(), 25);
        assert!(threshold(&gray(5, 5, 100), 170, 255).unwrap().is_empty());
        assert_eq!(threshold(&gray(1, 1, 170), 170, 255).unwrap().count(), 1);
        assert!(threshold(&gray(1, 1, 170), 200, 100).is_err());
    }

    #[test]
    fn erode_full_mask_clears_border_per_iteration() {
        let m = GrayMask::full(10, 8);
        for iters in 1..=3 {
            let e = erode(&m, 3, iters).unwrap();
            let expect = GrayMask::from_fn(10, 8, |x, y| x >= iters && y >= iters && x < 10 - iters && y < 8 - iters);
            assert_eq!(e, expect);
        }
    }

    #[test]
    fn dilate_examples() {
        let empty = GrayMask::empty(9, 9);
        assert_eq!(dilate(&empty, 5, 3).unwrap(), empty);
        let mut single = GrayMask::empty(9, 9);
        single.set(4, 4, true);
        let d = dilate(&single, 3, 1).unwrap();
        assert_eq!(d, GrayMask::from_fn(9, 9, |x, y| (3..=5).contains(&x) && (3..=5).contains(&y)));
        assert!(erode(&single, 2, 1).is_err());
    }

    #[test]
    fn build_mask_constant_images() {
        let p = MaskParams::default();
        assert!(build_mask(&gray(40, 30, 100), &p).unwrap().is_empty());
        // border cleared by 2 erosions is regrown by the 4 dilations
        assert_eq!(build_mask(&gray(40, 30, 200), &p).unwrap().count(), 1200);
    }

    #[test]
    fn build_mask_patch_matches_naive_composition() {
        let img = ImageBuffer::from_fn(100, 100, |x, y| {
            if (20..70).contains(&x) && (25..75).contains(&y) {
                230
            } else {
                80
            }
        })
        .unwrap();
        let p = MaskParams::default();
        let mask = build_mask(&img, &p).unwrap();

        // oracle composition with the naive morphology
        let blurred = gaussian_blur(&img, 9, p.blur_sigma).unwrap();
        let t = threshold(&blurred, 170, 255).unwrap();
        let e = oracle::naive(&t, 3, 2, true);
        let d = oracle::naive(&e, 3, 4, false);
        assert_eq!(mask, d);

        // dilated superset of the patch core, confined near the patch
        assert!(GrayMask::from_fn(100, 100, |x, y| (22..68).contains(&x) && (27..73).contains(&y))
            .and_not(&mask)
            .is_empty());
        assert!(mask.and_not(&GrayMask::from_fn(100, 100, |x, y| (14..76).contains(&x) && (19..81).contains(&y))).is_empty());
    }

    #[test]
    fn morphology_matches_naive_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let density = rng.random_range(0.2..0.9);
            let m = GrayMask::from_fn(64, 64, |_, _| rng.random_bool(density));
            let k = [1, 3, 5][rng.random_range(0..3)];
            let it = rng.random_range(0..4);
            assert_eq!(erode(&m, k, it).unwrap(), oracle::naive(&m, k, it, true));
            assert_eq!(dilate(&m, k, it).unwrap(), oracle::naive(&m, k, it, false));
        }
    }

    proptest! {
        #[test]
        fn dilate_contains_mask_contains_erode(bits in proptest::collection::vec(any::<bool>(), 20 * 15)) {
            let m = GrayMask::new(20, 15, bits).unwrap();
            let d = dilate(&m, 3, 1).unwrap();
            let e = erode(&m, 3, 1).unwrap();
            prop_assert!(m.and_not(&d).is_empty());
            prop_assert!(e.and_not(&m).is_empty());
        }

        #[test]
        fn threshold_monotone_in_low(data in proptest::collection::vec(any::<u8>(), 36), a in any::<u8>(), b in any::<u8>()) {
            let img = ImageBuffer::new(6, 6, 1, data).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let strict = threshold(&img, hi, 255).unwrap();
            let loose = threshold(&img, lo, 255).unwrap();
            prop_assert!(strict.and_not(&loose).is_empty());
        }

        #[test]
        fn build_mask_keeps_dimensions(w in 1usize..30, h in 1usize..30, v in any::<u8>()) {
            let img = ImageBuffer::filled(w, h, 3, v).unwrap();
            let m = build_mask(&img, &MaskParams::default()).unwrap();
            prop_assert_eq!((m.width(), m.height()), (w, h));
        }
    }
}
