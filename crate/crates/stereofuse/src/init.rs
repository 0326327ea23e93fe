//! Prior refinement and color-guided upsampling: produces the dense
//! initial disparity map and the occlusion masks that drive the fusion
//! weights.

use rayon::prelude::*;

use crate::energy::stereo_occlusion_mask;
use crate::error::{FusionError, Result};
use crate::field::{DisparityField, OcclusionMasks, SeedPoint, SparsePrior};
use crate::image::ColorImage;
use crate::params::FusionParams;

/// Minimum neighbor count for the outlier test; below it a seed is kept.
const REFINE_MIN_NEIGHBORS: usize = 4;
/// Disparity tolerance of the left/right cross-check, in pixels. The
/// checked maps are prior-based, so the tolerance must absorb the
/// prior's own noise while still catching occlusion-sized jumps.
pub const CROSS_CHECK_TOL: f64 = 4.0;

/// Scattered-data upsampling filter settings.
#[derive(Debug, Clone, Copy)]
pub struct UpsampleConfig {
    /// Support radius in pixels.
    pub radius: i32,
    /// Color bandwidth of the exponential kernel.
    pub gamma_c: f64,
    /// Reliability cutoff on the normalized support weight.
    pub e_c: f64,
    /// Spatial Gaussian bandwidth.
    pub gamma_s: f64,
}

impl UpsampleConfig {
    pub fn from_params(p: &FusionParams) -> Self {
        Self {
            radius: p.upsample_radius,
            gamma_c: p.gamma_c,
            e_c: p.e_c,
            gamma_s: p.upsample_radius as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(FusionError::Config("upsample radius must be >= 1".into()));
        }
        if self.gamma_c <= 0.0 || self.gamma_s <= 0.0 {
            return Err(FusionError::Config("bandwidths must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.e_c) {
            return Err(FusionError::Config("e_c must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Uniform-bucket index over seed positions for radius queries.
struct SeedGrid<'a> {
    seeds: &'a [SeedPoint],
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> SeedGrid<'a> {
    fn new(seeds: &'a [SeedPoint], width: usize, height: usize, cell: f64) -> Self {
        let cell = cell.max(1.0);
        let cols = (width as f64 / cell).ceil().max(1.0) as usize;
        let rows = (height as f64 / cell).ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, s) in seeds.iter().enumerate() {
            let cx = ((s.x as f64 / cell) as usize).min(cols - 1);
            let cy = ((s.y as f64 / cell) as usize).min(rows - 1);
            buckets[cy * cols + cx].push(i);
        }
        Self {
            seeds,
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// Visit seed indices within `radius` of (x, y).
    fn for_each_within(&self, x: f64, y: f64, radius: f64, mut f: impl FnMut(usize, f64)) {
        let c0 = (((x - radius) / self.cell).floor().max(0.0)) as usize;
        let c1 = (((x + radius) / self.cell).floor() as usize).min(self.cols - 1);
        let r0 = (((y - radius) / self.cell).floor().max(0.0)) as usize;
        let r1 = (((y + radius) / self.cell).floor() as usize).min(self.rows - 1);
        let r2 = radius * radius;
        for cy in r0..=r1 {
            for cx in c0..=c1 {
                for &i in &self.buckets[cy * self.cols + cx] {
                    let s = &self.seeds[i];
                    let dx = s.x as f64 - x;
                    let dy = s.y as f64 - y;
                    let dist2 = dx * dx + dy * dy;
                    if dist2 <= r2 {
                        f(i, dist2);
                    }
                }
            }
        }
    }
}

/// Mean seed spacing assuming a roughly uniform distribution.
fn mean_spacing(n: usize, width: usize, height: usize) -> f64 {
    ((width * height) as f64 / n.max(1) as f64).sqrt()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Remove seeds inconsistent with their local neighborhood: a seed is an
/// outlier when its disparity deviates from the neighborhood median by
/// more than max(2 px, 3 * MAD). Seeds with too few neighbors are kept.
pub fn refine_sparse(
    prior: &SparsePrior,
    width: usize,
    height: usize,
) -> (SparsePrior, Vec<SeedPoint>) {
    let radius = 2.0 * mean_spacing(prior.len(), width, height);
    let grid = SeedGrid::new(&prior.entries, width, height, radius);
    let keep: Vec<bool> = prior
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut ds = Vec::new();
            grid.for_each_within(s.x as f64, s.y as f64, radius, |j, _| {
                if j != i {
                    ds.push(prior.entries[j].d);
                }
            });
            if ds.len() < REFINE_MIN_NEIGHBORS {
                return true;
            }
            let med = median(&mut ds);
            let mut dev: Vec<f64> = ds.iter().map(|d| (d - med).abs()).collect();
            let mad = median(&mut dev);
            (s.d - med).abs() <= (3.0 * mad).max(2.0)
        })
        .collect();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (s, k) in prior.entries.iter().zip(&keep) {
        if *k {
            kept.push(*s);
        } else {
            removed.push(*s);
        }
    }
    (SparsePrior::new(kept), removed)
}

/// Dense initial map by joint spatial/color weighted scattered-data
/// filtering of the seeds. A pixel stays invalid when its accumulated
/// weight falls below e_c times the density-adjusted full support.
pub fn upsample(
    prior: &SparsePrior,
    color: &ColorImage,
    cfg: &UpsampleConfig,
) -> Result<DisparityField> {
    cfg.validate()?;
    let (w, h) = (color.width(), color.height());
    if prior.is_empty() {
        return Ok(DisparityField::invalid(w, h));
    }
    let radius = cfg.radius as f64;
    let inv_two_sigma2 = 1.0 / (2.0 * cfg.gamma_s * cfg.gamma_s);

    // reference weight: spatial kernel summed over a fully seeded disk,
    // scaled by the actual seed density
    let mut full_support = 0.0;
    for dy in -cfg.radius..=cfg.radius {
        for dx in -cfg.radius..=cfg.radius {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 <= radius * radius {
                full_support += (-d2 * inv_two_sigma2).exp();
            }
        }
    }
    let density = prior.len() as f64 / (w * h) as f64;
    let min_weight = cfg.e_c * full_support * density;

    let grid = SeedGrid::new(&prior.entries, w, h, radius);
    let results: Vec<Option<f32>> = (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (idx % w, idx / w);
            let mut sum_sc = 0.0;
            let mut wsum_sc = 0.0;
            let mut sum_s = 0.0;
            let mut wsum_s = 0.0;
            grid.for_each_within(x as f64, y as f64, radius, |i, dist2| {
                let s = &prior.entries[i];
                let ws = (-dist2 * inv_two_sigma2).exp();
                let wc = (-color.dist_l1((x, y), (s.x, s.y)) * crate::image::COLOR_UNIT
                    / cfg.gamma_c)
                    .exp();
                sum_sc += ws * wc * s.d;
                wsum_sc += ws * wc;
                sum_s += ws * s.d;
                wsum_s += ws;
            });
            // the reliability cutoff is geometric: enough seeds nearby.
            // Color only steers the estimate; if it starves the support
            // entirely (heavy texture), fall back to the spatial mean.
            if wsum_s < min_weight || wsum_s == 0.0 {
                None
            } else if wsum_sc > 1e-12 {
                Some((sum_sc / wsum_sc) as f32)
            } else {
                Some((sum_s / wsum_s) as f32)
            }
        })
        .collect();
    let mut field = DisparityField::invalid(w, h);
    for (idx, v) in results.iter().enumerate() {
        if let Some(v) = v {
            field.set(idx % w, idx / w, *v);
        }
    }
    Ok(field)
}

/// Mirror a left-image prior into the right image: (x, y, d) maps to
/// (x + round(d), y, -d). Colliding seeds keep the larger |d| (nearer).
pub fn mirror_prior(prior: &SparsePrior, width: usize, height: usize) -> SparsePrior {
    let mut best: Vec<Option<f64>> = vec![None; width * height];
    for s in &prior.entries {
        let xr = s.x as i64 + s.d.round() as i64;
        if xr < 0 || xr >= width as i64 {
            continue;
        }
        let i = s.y * width + xr as usize;
        let d = -s.d;
        if best[i].map_or(true, |cur| d.abs() > cur.abs()) {
            best[i] = Some(d);
        }
    }
    let mut entries = Vec::new();
    for (i, d) in best.iter().enumerate() {
        if let Some(d) = d {
            entries.push(SeedPoint {
                x: i % width,
                y: i / width,
                d: *d,
            });
        }
    }
    SparsePrior::new(entries)
}

/// Everything the energy context needs from initialization.
#[derive(Debug, Clone)]
pub struct InitialMaps {
    pub d0_left: DisparityField,
    pub d0_right: DisparityField,
    pub masks: OcclusionMasks,
    pub refined_prior: SparsePrior,
    pub removed: Vec<SeedPoint>,
}

/// Refine the prior, upsample both views, cross-check them into the
/// stereo-occlusion mask, and collect depth-occlusions from upsampling
/// gaps plus removed seeds.
pub fn initial_maps(
    prior: &SparsePrior,
    left_color: &ColorImage,
    right_color: &ColorImage,
    params: &FusionParams,
) -> Result<InitialMaps> {
    let (w, h) = (left_color.width(), left_color.height());
    if prior.is_empty() {
        return Err(FusionError::EmptySeedSet);
    }
    let cfg = UpsampleConfig::from_params(params);
    let (refined, removed) = refine_sparse(prior, w, h);
    if refined.is_empty() {
        return Err(FusionError::EmptySeedSet);
    }
    let d0_left = upsample(&refined, left_color, &cfg)?;
    let prior_right = mirror_prior(&refined, w, h);
    let d0_right = upsample(&prior_right, right_color, &cfg)?;

    let stereo_occ = stereo_occlusion_mask(&d0_left, &d0_right, CROSS_CHECK_TOL)?;
    let mut depth_occ = vec![false; w * h];
    for i in 0..w * h {
        if !d0_left.valid_flags()[i] {
            depth_occ[i] = true;
        }
    }
    for s in &removed {
        depth_occ[s.y * w + s.x] = true;
    }
    let masks = OcclusionMasks::new(w, h, stereo_occ, depth_occ)?;
    Ok(InitialMaps {
        d0_left,
        d0_right,
        masks,
        refined_prior: refined,
        removed,
    })
}
