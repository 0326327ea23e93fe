//! Grayscale and color image storage with clamped-border window access.

use crate::error::{FusionError, Result};

/// Row-major luminance image with samples in [0, 1].
#[derive(Debug, Clone)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(FusionError::InvalidInput(format!(
                "gray image data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::InvalidInput(
                "gray image contains non-finite samples".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Sample with clamped (replicated) borders.
    #[inline]
    pub fn at_clamped(&self, x: i64, y: i64) -> f32 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.at(x, y)
    }

    /// Central x-difference (v(x+1) - v(x-1)) / 2 with clamped borders.
    #[inline]
    pub fn x_derivative(&self, x: i64, y: i64) -> f64 {
        (self.at_clamped(x + 1, y) as f64 - self.at_clamped(x - 1, y) as f64) / 2.0
    }

    /// Raw (not mean-free) window samples around `center`, row-major,
    /// length (2*half+1)^2.
    pub fn window_raw(&self, center: (i64, i64), half: i64) -> Vec<f64> {
        let side = 2 * half + 1;
        let mut out = Vec::with_capacity((side * side) as usize);
        for dy in -half..=half {
            for dx in -half..=half {
                out.push(self.at_clamped(center.0 + dx, center.1 + dy) as f64);
            }
        }
        out
    }

    /// Zero-mean vectorized window around `center`.
    pub fn window_vector(&self, center: (i64, i64), half: i64) -> Vec<f64> {
        let mut v = self.window_raw(center, half);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for s in &mut v {
            *s -= mean;
        }
        v
    }

    /// Window of central x-differences around `center`.
    pub fn window_x_derivative(&self, center: (i64, i64), half: i64) -> Vec<f64> {
        let side = 2 * half + 1;
        let mut out = Vec::with_capacity((side * side) as usize);
        for dy in -half..=half {
            for dx in -half..=half {
                out.push(self.x_derivative(center.0 + dx, center.1 + dy));
            }
        }
        out
    }
}

/// Color-distance scale: bandwidths like gamma_c are quoted in 8-bit
/// intensity units while samples are stored in [0, 1].
pub const COLOR_UNIT: f64 = 255.0;

/// Optional RGB planes kept alongside the luminance image for the
/// color kernel of the upsampling filter. Gray inputs replicate the
/// luminance into all three planes.
#[derive(Debug, Clone)]
pub struct ColorImage {
    width: usize,
    height: usize,
    r: Vec<f32>,
    g: Vec<f32>,
    b: Vec<f32>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, r: Vec<f32>, g: Vec<f32>, b: Vec<f32>) -> Result<Self> {
        let n = width * height;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(FusionError::InvalidInput(
                "color plane length mismatch".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            r,
            g,
            b,
        })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            r: img.data().to_vec(),
            g: img.data().to_vec(),
            b: img.data().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [f32; 3] {
        let i = y * self.width + x;
        [self.r[i], self.g[i], self.b[i]]
    }

    /// L1 color distance between two pixels.
    #[inline]
    pub fn dist_l1(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let ca = self.rgb(a.0, a.1);
        let cb = self.rgb(b.0, b.1);
        (ca[0] - cb[0]).abs() as f64 + (ca[1] - cb[1]).abs() as f64 + (ca[2] - cb[2]).abs() as f64
    }
}
