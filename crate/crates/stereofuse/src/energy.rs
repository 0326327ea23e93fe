//! Local energy assembly: stereo data term with depth-guided aggregation,
//! prior regularizer, entropy-based reliability and adaptive fusion weights.

use rayon::prelude::*;

use crate::correlation::{
    apply_weights, ecc, ecc_maximize, emcc, emcc_maximize, TaylorPatchPair,
};
use crate::error::{FusionError, Result};
use crate::field::{DisparityField, OcclusionMasks, ScalarField};
use crate::image::GrayImage;
use crate::params::{Criterion, EtaMode, FusionParams};

/// Worst stereo energy, returned for degenerate windows.
pub const E_S_MAX: f64 = 2.0;

const ENTROPY_BINS: usize = 32;

/// Per-pixel stereo/prior mixing weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPair {
    /// (0, 1): stereo-occluded, prior drives the energy.
    PriorOnly,
    /// (1, 0): depth-occluded, stereo drives the energy.
    StereoOnly,
    /// (e, 1-e): entropy-blended convex combination.
    Blend(f64),
    /// (inf, inf): no usable evidence, defer to post-filling.
    Infeasible,
}

impl EtaPair {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, EtaPair::Infeasible)
    }

    /// (eta_s, eta_d) as scalars; infinity marks the infeasible case.
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            EtaPair::PriorOnly => (0.0, 1.0),
            EtaPair::StereoOnly => (1.0, 0.0),
            EtaPair::Blend(e) => (e, 1.0 - e),
            EtaPair::Infeasible => (f64::INFINITY, f64::INFINITY),
        }
    }
}

/// Read-only bundle of everything the per-pixel energy needs.
pub struct EnergyContext<'a> {
    pub left: &'a GrayImage,
    pub right: &'a GrayImage,
    pub d0: &'a DisparityField,
    pub masks: &'a OcclusionMasks,
    pub entropy: &'a ScalarField,
    pub params: &'a FusionParams,
}

impl<'a> EnergyContext<'a> {
    pub fn new(
        left: &'a GrayImage,
        right: &'a GrayImage,
        d0: &'a DisparityField,
        masks: &'a OcclusionMasks,
        entropy: &'a ScalarField,
        params: &'a FusionParams,
    ) -> Result<Self> {
        let (w, h) = (left.width(), left.height());
        if right.width() != w
            || right.height() != h
            || d0.width() != w
            || d0.height() != h
            || masks.width() != w
            || masks.height() != h
            || entropy.width() != w
            || entropy.height() != h
        {
            return Err(FusionError::DimensionMismatch(
                "energy context fields must share image dimensions".into(),
            ));
        }
        Ok(Self {
            left,
            right,
            d0,
            masks,
            entropy,
            params,
        })
    }

    pub fn width(&self) -> usize {
        self.left.width()
    }

    pub fn height(&self) -> usize {
        self.left.height()
    }
}

/// Laplacian-shaped kernel used for the depth-consistency weights.
#[inline]
pub fn g_kernel(x: f64, gamma: f64) -> f64 {
    (-x.abs() / gamma).exp()
}

/// Depth-consistency weights over the window around `p`: w_q =
/// g(d0_p - d0_q; gamma_d). Pixels with invalid d0 (either end) get 1.
pub fn aggregation_weights(
    d0: &DisparityField,
    p: (usize, usize),
    half: i32,
    gamma_d: f64,
) -> Vec<f64> {
    let side = (2 * half + 1) as usize;
    let mut w = Vec::with_capacity(side * side);
    let center = d0.get(p.0, p.1).map(|v| v as f64);
    let (width, height) = (d0.width() as i64, d0.height() as i64);
    for dy in -(half as i64)..=half as i64 {
        for dx in -(half as i64)..=half as i64 {
            let x = (p.0 as i64 + dx).clamp(0, width - 1) as usize;
            let y = (p.1 as i64 + dy).clamp(0, height - 1) as usize;
            let wq = match (center, d0.get(x, y)) {
                (Some(c), Some(q)) => g_kernel(c - q as f64, gamma_d),
                _ => 1.0,
            };
            w.push(wq);
        }
    }
    // center weight is exactly 1
    let mid = (side * side) / 2;
    w[mid] = 1.0;
    w
}

/// Build the zero-mean window vectors and their x-difference windows for
/// the left pixel `p` matched at integer disparity `d`.
pub fn patch_pair(ctx: &EnergyContext, p: (usize, usize), d: i32) -> TaylorPatchPair {
    let half = ctx.params.window_half as i64;
    let pl = (p.0 as i64, p.1 as i64);
    let pr = (p.0 as i64 + d as i64, p.1 as i64);
    TaylorPatchPair {
        ul: ctx.left.window_vector(pl, half),
        ur: ctx.right.window_vector(pr, half),
        dul: ctx.left.window_x_derivative(pl, half),
        dur: ctx.right.window_x_derivative(pr, half),
    }
}

/// Stereo data term E_S = 1 - C(t*) with aggregation weighting and
/// entropy-gated subpixel estimation. Degenerate windows return the
/// worst energy with t = 0.
pub fn data_term(ctx: &EnergyContext, p: (usize, usize), d: i32) -> (f64, f64) {
    let mut pair = patch_pair(ctx, p, d);
    if ctx.params.aggregation {
        let w = aggregation_weights(ctx.d0, p, ctx.params.window_half, ctx.params.gamma_d);
        // weights are same-length by construction
        pair = apply_weights(&pair, &w).expect("aggregation weights length");
    }
    let subpixel = ctx.params.subpixel
        && ctx.entropy.at(p.0, p.1) >= ctx.params.entropy_subpixel_threshold;
    let result = if subpixel {
        match ctx.params.criterion {
            Criterion::Ecc => ecc_maximize(&pair),
            Criterion::Emcc => emcc_maximize(&pair),
        }
    } else {
        let v = match ctx.params.criterion {
            Criterion::Ecc => ecc(&pair, 0.0),
            Criterion::Emcc => emcc(&pair, 0.0),
        };
        v.map(|v| (0.0, v))
    };
    match result {
        Ok((t, c)) => (((1.0 - c).clamp(0.0, E_S_MAX)), t),
        Err(_) => (E_S_MAX, 0.0),
    }
}

/// Prior regularizer lambda * |d - d0|.
#[inline]
pub fn regularizer(d: f64, d0_p: f64, lambda: f64) -> f64 {
    lambda * (d - d0_p).abs()
}

/// Normalized window entropy of the intensity histogram, in [0, 1].
pub fn entropy_field(img: &GrayImage, half: i32) -> ScalarField {
    let (w, h) = (img.width(), img.height());
    let mut field = ScalarField::zeros(w, h);
    let norm = (ENTROPY_BINS as f64).ln();
    field
        .data
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            let mut hist = [0u32; ENTROPY_BINS];
            for (x, out) in row.iter_mut().enumerate() {
                hist.fill(0);
                let mut count = 0u32;
                for dy in -(half as i64)..=half as i64 {
                    for dx in -(half as i64)..=half as i64 {
                        let v = img.at_clamped(x as i64 + dx, y as i64 + dy) as f64;
                        let bin = ((v * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
                        hist[bin] += 1;
                        count += 1;
                    }
                }
                let mut e = 0.0;
                for &c in &hist {
                    if c > 0 {
                        let p = c as f64 / count as f64;
                        e -= p * p.ln();
                    }
                }
                *out = (e / norm).clamp(0.0, 1.0);
            }
        });
    field
}

/// Cross-check a left-to-right map against a right-to-left map; a pixel
/// is stereo-occluded when its counterpart disagrees beyond `tol` or is
/// missing. Consistent maps cancel: d_lr(p) + d_rl(x + d_lr(p), y) = 0.
pub fn stereo_occlusion_mask(
    left_to_right: &DisparityField,
    right_to_left: &DisparityField,
    tol: f64,
) -> Result<Vec<bool>> {
    let (w, h) = (left_to_right.width(), left_to_right.height());
    if right_to_left.width() != w || right_to_left.height() != h {
        return Err(FusionError::DimensionMismatch(
            "cross-check maps must share dimensions".into(),
        ));
    }
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let Some(d_lr) = left_to_right.get(x, y) else {
                continue; // no stereo estimate here; handled as depth-occlusion
            };
            let xr = (x as f64 + d_lr as f64).round();
            let occluded = if xr < 0.0 || xr >= w as f64 {
                true
            } else {
                match right_to_left.get(xr as usize, y) {
                    Some(d_rl) => (d_lr as f64 + d_rl as f64).abs() > tol,
                    None => true,
                }
            };
            mask[y * w + x] = occluded;
        }
    }
    Ok(mask)
}

/// Adaptive fusion weights for pixel `p`.
pub fn eta(ctx: &EnergyContext, p: (usize, usize)) -> EtaPair {
    if let EtaMode::Fixed(s, d) = ctx.params.eta_mode {
        return EtaPair::Blend(s / (s + d).max(f64::MIN_POSITIVE));
    }
    let so = ctx.masks.is_stereo_occ(p.0, p.1);
    let doo = ctx.masks.is_depth_occ(p.0, p.1);
    match (so, doo) {
        (true, false) => EtaPair::PriorOnly,
        (false, true) => EtaPair::StereoOnly,
        (false, false) => EtaPair::Blend(ctx.entropy.at(p.0, p.1)),
        (true, true) => EtaPair::Infeasible,
    }
}

/// Total local energy eta_s * E_S(d; t*) + eta_d * lambda |d - d0|.
pub fn local_energy(ctx: &EnergyContext, p: (usize, usize), d: i32) -> Result<(f64, f64)> {
    local_energy_gated(ctx, p, d, true)
}

/// As `local_energy` but with an extra switch to force t = 0 (used when
/// seeding, where the prior fixes t to zero).
pub fn local_energy_gated(
    ctx: &EnergyContext,
    p: (usize, usize),
    d: i32,
    allow_subpixel: bool,
) -> Result<(f64, f64)> {
    let pair = eta(ctx, p);
    if pair.is_infeasible() {
        return Err(FusionError::InfeasiblePixel);
    }
    let (eta_s, eta_d) = pair.weights();
    let (e_s, t) = if eta_s > 0.0 {
        if allow_subpixel {
            data_term(ctx, p, d)
        } else {
            let saved = ctx.params.subpixel;
            if saved {
                let mut params = ctx.params.clone();
                params.subpixel = false;
                let sub_ctx = EnergyContext { params: &params, ..*ctx };
                data_term(&sub_ctx, p, d)
            } else {
                data_term(ctx, p, d)
            }
        }
    } else {
        (0.0, 0.0)
    };
    let e_d = if eta_d > 0.0 {
        match ctx.d0.get(p.0, p.1) {
            Some(d0) => regularizer(d as f64 + t, d0 as f64, ctx.params.lambda),
            // no prior available: the whole weight goes to stereo
            None => return Ok((e_s, t)),
        }
    } else {
        0.0
    };
    Ok((eta_s * e_s + eta_d * e_d, t))
}
