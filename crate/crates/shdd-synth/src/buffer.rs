//! RGB image buffer in [0,1] float, plus PNG round-tripping.

use std::path::Path;

use image::{ImageBuffer, Rgb};
use tensor_core::{Element, Tensor};

use crate::error::SynthError;
use crate::Result;

/// Planar RGB image, one f64 plane per channel, row-major within a plane.
/// All pipeline math happens here; quantization to 8 bits occurs only at
/// PNG boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbBuffer {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl RgbBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        let plane = vec![0.0; width * height];
        RgbBuffer {
            width,
            height,
            planes: [plane.clone(), plane.clone(), plane],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut b = RgbBuffer::new(width, height);
        for c in 0..3 {
            b.planes[c].fill(rgb[c]);
        }
        b
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.planes[c]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }

    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.planes[c][y * self.width + x] = v;
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> RgbBuffer {
        assert!(x + w <= self.width && y + h <= self.height, "crop out of bounds");
        let mut out = RgbBuffer::new(w, h);
        for c in 0..3 {
            for row in 0..h {
                let src = &self.planes[c][(y + row) * self.width + x..][..w];
                out.planes[c][row * w..(row + 1) * w].copy_from_slice(src);
            }
        }
        out
    }

    /// `[1,3,H,W]` tensor view of the image.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let mut data = Vec::with_capacity(3 * self.width * self.height);
        for c in 0..3 {
            data.extend(self.planes[c].iter().map(|&v| T::from_f64(v)));
        }
        Tensor::new(vec![1, 3, self.height, self.width], data).unwrap()
    }

    /// Inverse of [`to_tensor`][Self::to_tensor], clamping to [0,1] since
    /// network output is unbounded.
    pub fn from_tensor<T: Element>(t: &Tensor<T>) -> Result<RgbBuffer> {
        let shape = t.shape();
        if shape.len() != 4 || shape[0] != 1 || shape[1] != 3 {
            return Err(SynthError::invalid(
                "from_tensor",
                format!("expected shape [1,3,H,W], got {shape:?}"),
            ));
        }
        let (h, w) = (shape[2], shape[3]);
        let mut b = RgbBuffer::new(w, h);
        for c in 0..3 {
            for (dst, src) in b.planes[c].iter_mut().zip(&t.data()[c * h * w..(c + 1) * h * w]) {
                *dst = src.into_f64().clamp(0.0, 1.0);
            }
        }
        Ok(b)
    }

    pub fn from_rgb8(img: &ImageBuffer<Rgb<u8>, Vec<u8>>) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut b = RgbBuffer::new(w, h);
        for (i, px) in img.pixels().enumerate() {
            for c in 0..3 {
                b.planes[c][i] = px.0[c] as f64 / 255.0;
            }
        }
        b
    }

    /// Clips to [0,1] and quantizes with round-half-away-from-zero.
    pub fn to_rgb8(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        let mut out: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::new(self.width as u32, self.height as u32);
        for (i, px) in out.pixels_mut().enumerate() {
            for c in 0..3 {
                px.0[c] = (self.planes[c][i].clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
        out
    }

    /// Decodes any PNG the `image` crate understands; grayscale and alpha
    /// variants are promoted/flattened to RGB.
    pub fn load_png(path: &Path) -> Result<RgbBuffer> {
        let img = image::open(path).map_err(|e| SynthError::image(path, e))?;
        Ok(RgbBuffer::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save(path)
            .map_err(|e| SynthError::image(path, e))
    }
}
