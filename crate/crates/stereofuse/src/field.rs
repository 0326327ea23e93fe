//! Disparity fields, sparse priors, meta-disparities and occlusion masks.

use crate::error::{FusionError, Result};

/// Integer disparity plus subpixel correction, with its evaluated energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaDisparity {
    pub x: usize,
    pub y: usize,
    pub d: i32,
    /// Subpixel correction, |t| < 1.
    pub t: f64,
    pub energy: f64,
}

impl MetaDisparity {
    pub fn disparity(&self) -> f64 {
        self.d as f64 + self.t
    }
}

/// One prior seed: pixel position in the left image plus a (possibly
/// fractional) disparity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedPoint {
    pub x: usize,
    pub y: usize,
    pub d: f64,
}

/// Sparse set of seed pixels with prior disparities, left-image frame.
#[derive(Debug, Clone, Default)]
pub struct SparsePrior {
    pub entries: Vec<SeedPoint>,
}

impl SparsePrior {
    pub fn new(entries: Vec<SeedPoint>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Check positions are unique, in-bounds, and disparities in range.
    pub fn validate(&self, width: usize, height: usize, d_min: f64, d_max: f64) -> Result<()> {
        let mut seen = vec![false; width * height];
        for s in &self.entries {
            if s.x >= width || s.y >= height {
                return Err(FusionError::InvalidInput(format!(
                    "seed ({}, {}) outside {}x{} image",
                    s.x, s.y, width, height
                )));
            }
            if s.d < d_min || s.d > d_max {
                return Err(FusionError::InvalidInput(format!(
                    "seed disparity {} outside [{}, {}]",
                    s.d, d_min, d_max
                )));
            }
            let i = s.y * width + s.x;
            if seen[i] {
                return Err(FusionError::InvalidInput(format!(
                    "duplicate seed position ({}, {})",
                    s.x, s.y
                )));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Dense per-pixel floating-point disparity with validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityField {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DisparityField {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, values: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(FusionError::DimensionMismatch(
                "disparity field parts do not match dimensions".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_flags(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Value at (x, y) if valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        if self.valid[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        let i = y * self.width + x;
        self.values[i] = value;
        self.valid[i] = true;
    }

    #[inline]
    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.valid[i] = false;
        self.values[i] = 0.0;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn density(&self) -> f64 {
        self.valid_count() as f64 / (self.width * self.height) as f64
    }
}

/// Stereo- and depth-occlusion bitfields over the image domain.
#[derive(Debug, Clone)]
pub struct OcclusionMasks {
    width: usize,
    height: usize,
    pub stereo_occ: Vec<bool>,
    pub depth_occ: Vec<bool>,
}

impl OcclusionMasks {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            stereo_occ: vec![false; width * height],
            depth_occ: vec![false; width * height],
        }
    }

    pub fn new(width: usize, height: usize, stereo_occ: Vec<bool>, depth_occ: Vec<bool>) -> Result<Self> {
        if stereo_occ.len() != width * height || depth_occ.len() != width * height {
            return Err(FusionError::DimensionMismatch(
                "occlusion mask length mismatch".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            stereo_occ,
            depth_occ,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_stereo_occ(&self, x: usize, y: usize) -> bool {
        self.stereo_occ[y * self.width + x]
    }

    #[inline]
    pub fn is_depth_occ(&self, x: usize, y: usize) -> bool {
        self.depth_occ[y * self.width + x]
    }
}

/// Dense per-pixel scalar field (entropy, weights, heatmaps).
#[derive(Debug, Clone)]
pub struct ScalarField {
    width: usize,
    height: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}
