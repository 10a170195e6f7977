//! Grayscale rasters and their stacked-vector view.
//!
//! Stacking order is a row-major scan: pixel `(x, y)` (0-based column, row)
//! lives at index `y * width + x`. Every module that stacks, warps or masks
//! images uses this order.

use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl FaceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("image must be at least 1x1, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(FaceImage { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        FaceImage { width, height, pixels: vec![0.0; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        FaceImage { width, height, pixels }
    }

    /// Inverse of [`FaceImage::to_vector`].
    pub fn from_vector(width: usize, height: usize, v: &DVector<f64>) -> Result<Self> {
        Self::new(width, height, v.as_slice().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Dimension `d = width * height` of the stacked vector.
    pub fn dim(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.pixels)
    }

    /// Loads an 8-bit grayscale image (PGM P5 always; PNG as well) and
    /// normalizes intensities to [0, 1].
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded = image::load_from_memory(&bytes)
            .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })?;
        let luma = decoded.to_luma8();
        let (w, h) = luma.dimensions();
        let pixels = luma.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self::new(w as usize, h as usize, pixels)
    }

    /// Writes a binary PGM, clamping intensities to [0, 1].
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
