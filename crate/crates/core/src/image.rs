//! Owned 8-bit image buffers and binary masks, plus PNG/JPEG I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major interleaved 8-bit image with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel image from a per-pixel function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copies channel `c` out as a plane of `f64`.
    pub fn channel_plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| f64::from(v))
            .collect()
    }

    /// Writes a plane back into channel `c`, rounding and clamping to `[0, 255]`.
    pub fn store_plane(&mut self, c: usize, plane: &[f64]) {
        debug_assert_eq!(plane.len(), self.pixel_count());
        for (i, &v) in plane.iter().enumerate() {
            self.data[i * self.channels + c] = to_u8(v);
        }
    }

    /// Mean over all channels of the pixels whose centres lie in the given
    /// pixel rectangle (clipped to the image). `None` if the rectangle is empty.
    pub fn region_mean(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<f64> {
        let (xs, xe) = pixel_span(x0, x1, self.width);
        let (ys, ye) = pixel_span(y0, y1, self.height);
        if xs >= xe || ys >= ye {
            return None;
        }
        let mut sum = 0u64;
        for y in ys..ye {
            let row = &self.data[(y * self.width + xs) * self.channels..(y * self.width + xe) * self.channels];
            sum += row.iter().map(|&v| u64::from(v)).sum::<u64>();
        }
        let n = ((xe - xs) * (ye - ys) * self.channels) as f64;
        Some(sum as f64 / n)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            image::DynamicImage::ImageLuma8(g) => Self::new(w, h, 1, g.into_raw()),
            other => Self::new(w, h, 3, other.into_rgb8().into_raw()),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Half-open range of pixel indices whose centres fall in `[lo, hi)`.
pub(crate) fn pixel_span(lo: f64, hi: f64, len: usize) -> (usize, usize) {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().max(0.0);
    let start = (start as usize).min(len);
    let end = (end as usize).min(len);
    (start, end)
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Binary per-pixel mask; `true` marks a pixel to be inpainted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl GrayMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, img: &ImageBuffer) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    /// Pixelwise `self && !other`.
    pub fn and_not(&self, other: &GrayMask) -> GrayMask {
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect();
        GrayMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// 0 = keep, 255 = inpaint.
    pub fn to_image(&self) -> ImageBuffer {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Any non-zero sample of the first channel marks the pixel.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let bits = img.data().iter().step_by(img.channels()).map(|&v| v != 0).collect();
        GrayMask {
            width: img.width(),
            height: img.height(),
            bits,
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save_png(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_image(&ImageBuffer::load(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageBuffer::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(matches!(
            ImageBuffer::new(2, 2, 2, vec![0; 8]),
            Err(Error::UnsupportedChannels(2))
        ));
        assert!(ImageBuffer::new(0, 2, 1, vec![]).is_err());
        assert!(GrayMask::new(3, 3, vec![false; 8]).is_err());
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = GrayMask::from_fn(7, 5, |x, y| (x + y) % 3 == 0);
        mask.save_png(&path).unwrap();
        let back = GrayMask::load(&path).unwrap();
        assert_eq!(back, mask);
        let raw = ImageBuffer::load(&path).unwrap();
        assert_eq!(raw.channels(), 1);
        assert!(raw.data().iter().all(|&v| v == 0 || v == 255));
    }

    #[test]
    fn region_mean_uses_pixel_centres() {
        let img = ImageBuffer::from_fn(4, 4, |x, _| if x < 2 { 0 } else { 200 }).unwrap();
        assert_eq!(img.region_mean(2.0, 0.0, 4.0, 4.0), Some(200.0));
        assert_eq!(img.region_mean(0.0, 0.0, 4.0, 4.0), Some(100.0));
        assert_eq!(img.region_mean(1.6, 0.0, 1.9, 4.0), None);
    }
}
