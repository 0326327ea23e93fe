//! Metrics, synthetic scene rendering, prior degradation and the
//! module-contribution experiment harness.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{entropy_field, EnergyContext};
use crate::error::{FusionError, Result};
use crate::field::{DisparityField, SeedPoint, SparsePrior};
use crate::growing::wta_baseline;
use crate::image::{ColorImage, GrayImage};
use crate::init::initial_maps;
use crate::params::{Criterion, EtaMode, FusionParams};
use crate::pipeline::fuse;

/// Percentage of non-occluded pixels with |result - gt| > delta.
/// Invalid result pixels count as bad.
pub fn bmp(
    result: &DisparityField,
    gt: &DisparityField,
    occluded: &[bool],
    delta: f64,
) -> Result<f64> {
    check_dims(result, gt, occluded)?;
    let mut bad = 0usize;
    let mut total = 0usize;
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            if occluded[y * gt.width() + x] {
                continue;
            }
            let Some(g) = gt.get(x, y) else {
                continue;
            };
            total += 1;
            match result.get(x, y) {
                Some(r) => {
                    if (r as f64 - g as f64).abs() > delta {
                        bad += 1;
                    }
                }
                None => bad += 1,
            }
        }
    }
    if total == 0 {
        return Err(FusionError::NoValidPixels);
    }
    Ok(100.0 * bad as f64 / total as f64)
}

/// Mean square disparity error over non-occluded pixels valid in both maps.
pub fn mse(result: &DisparityField, gt: &DisparityField, occluded: &[bool]) -> Result<f64> {
    check_dims(result, gt, occluded)?;
    let mut acc = 0.0;
    let mut n = 0usize;
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            if occluded[y * gt.width() + x] {
                continue;
            }
            if let (Some(r), Some(g)) = (result.get(x, y), gt.get(x, y)) {
                acc += (r as f64 - g as f64).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(FusionError::NoValidPixels);
    }
    Ok(acc / n as f64)
}

fn check_dims(result: &DisparityField, gt: &DisparityField, occluded: &[bool]) -> Result<()> {
    if result.width() != gt.width()
        || result.height() != gt.height()
        || occluded.len() != gt.width() * gt.height()
    {
        return Err(FusionError::DimensionMismatch(
            "metric inputs must share dimensions".into(),
        ));
    }
    Ok(())
}

/// Simulated sensor degradation of a ground-truth disparity map.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DegradeConfig {
    /// Grid subsampling factor.
    pub factor: usize,
    /// Mean magnitude of the smooth additive bias field, in pixels.
    pub bias_amplitude: f64,
    /// Colored-noise amplitude; peak-to-peak excursion is 2 sigma.
    pub noise_sigma: f64,
    /// Spatial wavelength of the noise sinusoid, in pixels.
    pub noise_period: f64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            factor: 10,
            bias_amplitude: 2.0,
            noise_sigma: 2.0,
            noise_period: 40.0,
        }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factor < 1 {
            return Err(FusionError::Config("factor must be >= 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(FusionError::Config("sigma must be >= 0".into()));
        }
        if self.noise_period <= 0.0 {
            return Err(FusionError::Config("noise period must be > 0".into()));
        }
        Ok(())
    }
}

/// Smooth low-frequency bias field with spatial mean `amplitude`.
fn bias_at(amplitude: f64, x: f64, y: f64, w: f64, h: f64) -> f64 {
    amplitude
        * (1.0
            + 0.3
                * (2.0 * std::f64::consts::PI * x / w).sin()
                * (2.0 * std::f64::consts::PI * y / h).cos())
}

/// Colored noise: product of two phase-shifted sinusoids, |n| <= sigma.
fn noise_at(sigma: f64, period: f64, phase: (f64, f64), x: f64, y: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / period;
    sigma * (k * x + phase.0).sin() * (k * y + phase.1).sin()
}

/// Subsample the ground truth on a factor-k grid and add the smooth bias
/// plus colored noise. Deterministic for a fixed seed (noise phases).
pub fn degrade(gt: &DisparityField, cfg: &DegradeConfig, seed: u64) -> Result<SparsePrior> {
    cfg.validate()?;
    let (w, h) = (gt.width(), gt.height());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = (
        rng.gen::<f64>() * 2.0 * std::f64::consts::PI,
        rng.gen::<f64>() * 2.0 * std::f64::consts::PI,
    );
    let mut entries = Vec::new();
    for y in (0..h).step_by(cfg.factor) {
        for x in (0..w).step_by(cfg.factor) {
            let Some(d) = gt.get(x, y) else {
                continue;
            };
            let (xf, yf) = (x as f64, y as f64);
            let d = d as f64
                + bias_at(cfg.bias_amplitude, xf, yf, w as f64, h as f64)
                + noise_at(cfg.noise_sigma, cfg.noise_period, phase, xf, yf);
            entries.push(SeedPoint { x, y, d });
        }
    }
    Ok(SparsePrior::new(entries))
}

/// One textured rectangle at a (possibly slanted) disparity plane:
/// d(x, y) = d0 + gx (x - x0) + gy (y - y0) over [x0, x1) x [y0, y1).
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub d0: f64,
    pub gx: f64,
    pub gy: f64,
    /// Value-noise cell size in pixels; larger means smoother texture.
    pub texture_scale: f64,
    /// Amplitude of the texture around its base level.
    pub texture_contrast: f64,
    /// Mean gray level of the plane's texture.
    pub texture_base: f64,
    pub texture_seed: u64,
    /// Flat surface color used for the color guidance pair; defaults to
    /// the gray base level when unset.
    pub hue: Option<[f32; 3]>,
}

impl Plane {
    pub fn fronto(rect: (f64, f64, f64, f64), d: f64, scale: f64, contrast: f64, seed: u64) -> Self {
        Self {
            x0: rect.0,
            y0: rect.1,
            x1: rect.2,
            y1: rect.3,
            d0: d,
            gx: 0.0,
            gy: 0.0,
            texture_scale: scale,
            texture_contrast: contrast,
            texture_base: 0.5,
            texture_seed: seed,
            hue: None,
        }
    }

    pub fn with_base(mut self, base: f64) -> Self {
        self.texture_base = base;
        self
    }

    pub fn with_hue(mut self, rgb: [f32; 3]) -> Self {
        self.hue = Some(rgb);
        self
    }

    fn hue_or_base(&self) -> [f32; 3] {
        self.hue
            .unwrap_or([self.texture_base as f32; 3])
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn disparity(&self, x: f64, y: f64) -> f64 {
        self.d0 + self.gx * (x - self.x0) + self.gy * (y - self.y0)
    }

    /// Left x whose projection lands on right x_r at row y, if any.
    fn left_source(&self, x_r: f64, y: f64) -> Option<f64> {
        let denom = 1.0 + self.gx;
        if denom.abs() < 1e-9 {
            return None;
        }
        let x_l = (x_r - self.d0 + self.gx * self.x0 - self.gy * (y - self.y0)) / denom;
        self.contains(x_l, y).then_some(x_l)
    }
}

/// Scene: planes over a fixed canvas; the nearest (largest-disparity)
/// plane owns each pixel. Must be fully covered (use a background plane).
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Plane>,
    pub d_min: i32,
    pub d_max: i32,
    /// Additive iid Gaussian sensor noise per view (0 disables).
    pub image_noise_sigma: f64,
    pub noise_seed: u64,
}

/// Rendered stereo pair with ground truth and analytic occlusion mask.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub left: GrayImage,
    pub right: GrayImage,
    /// Color guidance pair: flat per-surface hues under the same noise,
    /// standing in for a registered color camera.
    pub left_color: ColorImage,
    pub right_color: ColorImage,
    pub gt: DisparityField,
    /// Left pixels not visible in the right view.
    pub occluded: Vec<bool>,
}

/// Deterministic value-noise texture: random lattice values interpolated
/// bilinearly, so it can be sampled at subpixel positions consistently.
struct ValueNoise {
    cells_x: usize,
    cells_y: usize,
    scale: f64,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(width: f64, height: f64, scale: f64, seed: u64) -> Self {
        let cells_x = (width / scale).ceil() as usize + 2;
        let cells_y = (height / scale).ceil() as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..cells_x * cells_y).map(|_| rng.gen::<f64>()).collect();
        Self {
            cells_x,
            cells_y,
            scale,
            values,
        }
    }

    fn lattice(&self, i: usize, j: usize) -> f64 {
        let i = i.min(self.cells_x - 1);
        let j = j.min(self.cells_y - 1);
        self.values[j * self.cells_x + i]
    }

    /// Sample in [0, 1] at continuous image coordinates.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let u = (x.max(0.0)) / self.scale;
        let v = (y.max(0.0)) / self.scale;
        let i = u.floor() as usize;
        let j = v.floor() as usize;
        let fu = u - u.floor();
        let fv = v - v.floor();
        let a = self.lattice(i, j) * (1.0 - fu) + self.lattice(i + 1, j) * fu;
        let b = self.lattice(i, j + 1) * (1.0 - fu) + self.lattice(i + 1, j + 1) * fu;
        a * (1.0 - fv) + b * fv
    }
}

/// Render the scene: the left image samples each owning plane's texture,
/// the right image is synthesized by inverting the disparity mapping
/// (left x + d(x) = right x) per plane, and the occlusion mask marks
/// left pixels whose projection is overwritten by a nearer plane.
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    let (w, h) = (spec.width, spec.height);
    if spec.planes.is_empty() {
        return Err(FusionError::InvalidInput("scene has no planes".into()));
    }
    let textures: Vec<ValueNoise> = spec
        .planes
        .iter()
        .map(|p| ValueNoise::new(w as f64, h as f64, p.texture_scale, p.texture_seed))
        .collect();
    let tex_value = |pi: usize, x: f64, y: f64| -> f64 {
        let p = &spec.planes[pi];
        (p.texture_base + p.texture_contrast * (textures[pi].sample(x, y) - 0.5)).clamp(0.0, 1.0)
    };

    // left ownership: nearest plane containing the pixel
    let owner_left = |x: f64, y: f64| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in spec.planes.iter().enumerate() {
            if p.contains(x, y) {
                let d = p.disparity(x, y);
                if best.map_or(true, |(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
        }
        best.map(|(i, _)| i)
    };
    // right ownership: nearest plane projecting onto the right pixel
    let owner_right = |x_r: f64, y: f64| -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, p) in spec.planes.iter().enumerate() {
            if let Some(x_l) = p.left_source(x_r, y) {
                let d = p.disparity(x_l, y);
                if best.map_or(true, |(_, _, bd)| d > bd) {
                    best = Some((i, x_l, d));
                }
            }
        }
        best.map(|(i, x_l, _)| (i, x_l))
    };

    let mut left = vec![0.0f32; w * h];
    let mut right = vec![0.0f32; w * h];
    let mut left_rgb = [vec![0.0f32; w * h], vec![0.0f32; w * h], vec![0.0f32; w * h]];
    let mut right_rgb = [vec![0.0f32; w * h], vec![0.0f32; w * h], vec![0.0f32; w * h]];
    let mut gt = DisparityField::invalid(w, h);
    let mut occluded = vec![false; w * h];
    for y in 0..h {
        let yf = y as f64;
        for x in 0..w {
            let xf = x as f64;
            let Some(pi) = owner_left(xf, yf) else {
                return Err(FusionError::InvalidInput(format!(
                    "scene leaves pixel ({x},{y}) uncovered; add a background plane"
                )));
            };
            left[y * w + x] = tex_value(pi, xf, yf) as f32;
            let hue = spec.planes[pi].hue_or_base();
            for c in 0..3 {
                left_rgb[c][y * w + x] = hue[c];
            }
            let d = spec.planes[pi].disparity(xf, yf);
            gt.set(x, y, d as f32);
            // occluded if the right-view pixel it lands on is owned by
            // a different plane (or it projects outside the image)
            let x_r = xf + d;
            if x_r < 0.0 || x_r >= w as f64 {
                occluded[y * w + x] = true;
            } else if let Some((qi, x_l)) = owner_right(x_r, yf) {
                if qi != pi || (x_l - xf).abs() > 0.75 {
                    occluded[y * w + x] = true;
                }
            } else {
                occluded[y * w + x] = true;
            }
        }
        for x in 0..w {
            let x_r = x as f64;
            let (v, hue) = match owner_right(x_r, yf) {
                Some((pi, x_l)) => (tex_value(pi, x_l, yf), spec.planes[pi].hue_or_base()),
                None => (0.5, [0.5; 3]), // uncovered right border: neutral gray
            };
            right[y * w + x] = v as f32;
            for c in 0..3 {
                right_rgb[c][y * w + x] = hue[c];
            }
        }
    }
    if spec.image_noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
        let mut add_noise = |img: &mut [f32]| {
            for v in img.iter_mut() {
                // Box-Muller standard normal
                let u1: f64 = rng.gen::<f64>().max(1e-12);
                let u2: f64 = rng.gen();
                let n = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                *v = (*v + (spec.image_noise_sigma * n) as f32).clamp(0.0, 1.0);
            }
        };
        add_noise(&mut left);
        add_noise(&mut right);
        for plane in left_rgb.iter_mut().chain(right_rgb.iter_mut()) {
            add_noise(plane);
        }
    }
    let [lr, lg, lb] = left_rgb;
    let [rr, rg, rb] = right_rgb;
    Ok(RenderedScene {
        left: GrayImage::new(w, h, left)?,
        right: GrayImage::new(w, h, right)?,
        left_color: ColorImage::new(w, h, lr, lg, lb)?,
        right_color: ColorImage::new(w, h, rr, rg, rb)?,
        gt,
        occluded,
    })
}

/// Built-in desk-scale scenes.
pub fn scene_by_name(name: &str) -> Option<SceneSpec> {
    match name {
        // low-texture two-plane scene: background plus a nearer box
        "two_planes" => Some(SceneSpec {
            width: 320,
            height: 240,
            planes: vec![
                Plane::fronto((0.0, 0.0, 320.0, 240.0), 6.3, 10.0, 0.4, 101)
                    .with_base(0.45)
                    .with_hue([0.45, 0.50, 0.40]),
                Plane::fronto((90.0, 50.0, 250.0, 190.0), 13.7, 10.0, 0.85, 202)
                    .with_base(0.62)
                    .with_hue([0.62, 0.45, 0.70]),
            ],
            d_min: 0,
            d_max: 32,
            image_noise_sigma: 0.03,
            noise_seed: 404,
        }),
        // single smoothly textured plane at fractional disparity
        "single_plane" => Some(SceneSpec {
            width: 320,
            height: 240,
            planes: vec![Plane::fronto((0.0, 0.0, 320.0, 240.0), 5.3, 6.0, 0.9, 77)],
            d_min: 0,
            d_max: 16,
            image_noise_sigma: 0.0,
            noise_seed: 0,
        }),
        _ => None,
    }
}

/// Methods compared by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FusedEcc,
    FusedEmcc,
    Wta,
    UpsampleOnly,
    SimpleFusion,
    DataTermOnly,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::FusedEcc => "fused_ecc",
            Method::FusedEmcc => "fused_emcc",
            Method::Wta => "wta",
            Method::UpsampleOnly => "upsample_only",
            Method::SimpleFusion => "simple_fusion",
            Method::DataTermOnly => "data_term_only",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused_ecc" => Ok(Method::FusedEcc),
            "fused_emcc" => Ok(Method::FusedEmcc),
            "wta" => Ok(Method::Wta),
            "upsample_only" => Ok(Method::UpsampleOnly),
            "simple_fusion" => Ok(Method::SimpleFusion),
            "data_term_only" => Ok(Method::DataTermOnly),
            other => Err(FusionError::Config(format!("unknown method: {other}"))),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MethodReport {
    pub method: Method,
    /// BMP at delta = 0.5, 1, 2 (percent).
    pub bmp: [f64; 3],
    pub mse: f64,
    /// Valid fraction before gap filling, in [0, 1].
    pub density_pre_fill: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentReport {
    pub scene_width: usize,
    pub scene_height: usize,
    pub seed: u64,
    pub degrade: DegradeConfig,
    pub methods: Vec<MethodReport>,
}

pub const BMP_DELTAS: [f64; 3] = [0.5, 1.0, 2.0];

fn method_params(method: Method, base: &FusionParams) -> FusionParams {
    let mut p = base.clone();
    match method {
        Method::FusedEcc => {
            p.criterion = Criterion::Ecc;
        }
        Method::FusedEmcc => {
            p.criterion = Criterion::Emcc;
        }
        Method::Wta => {
            // stereo only: prior influence removed
            p.eta_mode = EtaMode::Fixed(1.0, 0.0);
        }
        Method::UpsampleOnly => {}
        Method::SimpleFusion => {
            p.eta_mode = EtaMode::Fixed(0.5, 0.5);
            p.subpixel = false;
            p.aggregation = false;
        }
        Method::DataTermOnly => {
            // improved data term (aggregation + subpixel) without the
            // adaptive occlusion-driven weighting
            p.eta_mode = EtaMode::Fixed(0.5, 0.5);
        }
    }
    p
}

fn run_method(
    method: Method,
    scene: &RenderedScene,
    prior: &SparsePrior,
    base: &FusionParams,
) -> Result<MethodReport> {
    let params = method_params(method, base);
    let lc = &scene.left_color;
    let rc = &scene.right_color;
    let start = Instant::now();
    let (field, density) = match method {
        Method::UpsampleOnly => {
            let maps = initial_maps(prior, lc, rc, &params)?;
            let density = maps.d0_left.density();
            (maps.d0_left, density)
        }
        Method::Wta => {
            let maps = initial_maps(prior, lc, rc, &params)?;
            let entropy = entropy_field(&scene.left, params.window_half);
            let ctx = EnergyContext::new(
                &scene.left,
                &scene.right,
                &maps.d0_left,
                &maps.masks,
                &entropy,
                &params,
            )?;
            let out = wta_baseline(&ctx);
            let density = out.field.density();
            (out.field, density)
        }
        _ => {
            let out = fuse(
                &scene.left,
                &scene.right,
                lc,
                rc,
                prior,
                &params,
                true,
                false,
            )?;
            (out.field, out.density_pre_fill)
        }
    };
    let runtime_s = start.elapsed().as_secs_f64();
    let mut bmps = [0.0; 3];
    for (i, delta) in BMP_DELTAS.iter().enumerate() {
        bmps[i] = bmp(&field, &scene.gt, &scene.occluded, *delta)?;
    }
    Ok(MethodReport {
        method,
        bmp: bmps,
        mse: mse(&field, &scene.gt, &scene.occluded)?,
        density_pre_fill: density,
        runtime_s,
    })
}

/// Render the scene, degrade its ground truth into a prior, and score
/// every requested method against the rendered ground truth.
pub fn run_experiment(
    spec: &SceneSpec,
    degrade_cfg: &DegradeConfig,
    base: &FusionParams,
    methods: &[Method],
    seed: u64,
) -> Result<ExperimentReport> {
    let mut params = base.clone();
    params.d_min = spec.d_min;
    params.d_max = spec.d_max;
    let scene = render_scene(spec)?;
    let prior = degrade(&scene.gt, degrade_cfg, seed)?;
    let mut reports = Vec::new();
    for &m in methods {
        reports.push(run_method(m, &scene, &prior, &params)?);
    }
    Ok(ExperimentReport {
        scene_width: spec.width,
        scene_height: spec.height,
        seed,
        degrade: *degrade_cfg,
        methods: reports,
    })
}

impl ExperimentReport {
    /// Aligned-column text table of the method x metric grid.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9}\n",
            "method", "BMP(0.5)", "BMP(1)", "BMP(2)", "MSE", "density", "time(s)"
        ));
        for m in &self.methods {
            out.push_str(&format!(
                "{:<16} {:>10.3} {:>10.3} {:>10.3} {:>10.4} {:>8.1}% {:>9.3}\n",
                m.method.name(),
                m.bmp[0],
                m.bmp[1],
                m.bmp[2],
                m.mse,
                100.0 * m.density_pre_fill,
                m.runtime_s
            ));
        }
        out
    }
}
