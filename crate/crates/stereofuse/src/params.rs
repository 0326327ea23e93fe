//! Fusion parameters and flat key=value config parsing.

use crate::error::{FusionError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ecc,
    Emcc,
}

impl std::str::FromStr for Criterion {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecc" => Ok(Criterion::Ecc),
            "emcc" => Ok(Criterion::Emcc),
            other => Err(FusionError::Config(format!(
                "criterion must be ecc or emcc, got {other}"
            ))),
        }
    }
}

/// How the per-pixel stereo/prior mixing weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum EtaMode {
    /// Occlusion- and entropy-driven weights.
    Adaptive,
    /// Constant (eta_s, eta_d) at every pixel, masks ignored.
    Fixed(f64, f64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FusionParams {
    /// Propagation radius around the parent disparity.
    pub r: i32,
    /// Energy acceptance threshold.
    pub t_threshold: f64,
    /// Regularizer weight.
    pub lambda: f64,
    /// Depth-consistency bandwidth of the aggregation weights.
    pub gamma_d: f64,
    /// Color bandwidth of the upsampling filter.
    pub gamma_c: f64,
    /// Upsampling reliability cutoff.
    pub e_c: f64,
    /// Upsampling filter radius in pixels.
    pub upsample_radius: i32,
    /// Correlation window is (2*window_half+1)^2.
    pub window_half: i32,
    /// Normalized-entropy cutoff below which t estimation is disabled.
    pub entropy_subpixel_threshold: f64,
    pub d_min: i32,
    pub d_max: i32,
    pub criterion: Criterion,
    pub eta_mode: EtaMode,
    /// Disable to force t = 0 everywhere.
    pub subpixel: bool,
    /// Disable to skip depth-guided aggregation weights.
    pub aggregation: bool,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            r: 1,
            t_threshold: 0.5,
            lambda: 0.01,
            gamma_d: 5.0,
            gamma_c: 10.0,
            e_c: 0.2,
            upsample_radius: 20,
            window_half: 4,
            entropy_subpixel_threshold: 0.4,
            d_min: 0,
            d_max: 64,
            criterion: Criterion::Ecc,
            eta_mode: EtaMode::Adaptive,
            subpixel: true,
            aggregation: true,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(FusionError::Config("r must be >= 1".into()));
        }
        if !(self.t_threshold > 0.0) {
            return Err(FusionError::Config("T must be > 0".into()));
        }
        if self.window_half < 1 {
            return Err(FusionError::Config("window must be >= 3".into()));
        }
        if self.d_min >= self.d_max {
            return Err(FusionError::Config("d_min must be < d_max".into()));
        }
        if !(0.0..=1.0).contains(&self.entropy_subpixel_threshold) {
            return Err(FusionError::Config(
                "entropy_threshold must be in [0, 1]".into(),
            ));
        }
        if self.gamma_d <= 0.0 || self.gamma_c <= 0.0 {
            return Err(FusionError::Config("bandwidths must be > 0".into()));
        }
        if self.upsample_radius < 1 {
            return Err(FusionError::Config("upsample_radius must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.e_c) {
            return Err(FusionError::Config("e_c must be in [0, 1]".into()));
        }
        if self.lambda < 0.0 {
            return Err(FusionError::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        let side = (2 * self.window_half + 1) as usize;
        side * side
    }

    /// Parse a flat key=value config (one key per line, `#` comments).
    /// Unspecified keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = FusionParams::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                FusionError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            p.set_key(key.trim(), value.trim())?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| FusionError::Config(format!("invalid value for {key}: {value}")))
        }
        match key {
            "r" => self.r = num(key, value)?,
            "T" | "t" | "threshold" => self.t_threshold = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "gamma_d" => self.gamma_d = num(key, value)?,
            "gamma_c" => self.gamma_c = num(key, value)?,
            "e_c" => self.e_c = num(key, value)?,
            "upsample_radius" => self.upsample_radius = num(key, value)?,
            "window" => {
                let w: i32 = num(key, value)?;
                if w < 3 || w % 2 == 0 {
                    return Err(FusionError::Config(format!(
                        "window must be an odd size >= 3, got {w}"
                    )));
                }
                self.window_half = w / 2;
            }
            "entropy_threshold" => self.entropy_subpixel_threshold = num(key, value)?,
            "d_min" => self.d_min = num(key, value)?,
            "d_max" => self.d_max = num(key, value)?,
            "criterion" => self.criterion = value.parse()?,
            "subpixel" => self.subpixel = parse_bool(key, value)?,
            "aggregation" => self.aggregation = parse_bool(key, value)?,
            "adaptive_fusion" => {
                self.eta_mode = if parse_bool(key, value)? {
                    EtaMode::Adaptive
                } else {
                    EtaMode::Fixed(0.5, 0.5)
                };
            }
            other => {
                return Err(FusionError::Config(format!("unknown config key: {other}")));
            }
        }
        Ok(())
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(FusionError::Config(format!(
            "invalid boolean for {key}: {other}"
        ))),
    }
}
