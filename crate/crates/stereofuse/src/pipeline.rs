//! End-to-end fusion: initialization, entropy, growing and gap filling.

use std::time::Instant;

use crate::energy::{entropy_field, EnergyContext};
use crate::error::Result;
use crate::field::{DisparityField, ScalarField, SparsePrior};
use crate::growing::{grow, grow_traced, post_fill, GrowOutput};
use crate::image::{ColorImage, GrayImage};
use crate::init::{initial_maps, InitialMaps};
use crate::params::FusionParams;

/// Per-stage wall-clock timings in seconds.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct StageTimings {
    pub init: f64,
    pub entropy: f64,
    pub grow: f64,
    pub fill: f64,
}

#[derive(Debug)]
pub struct FusionOutput {
    /// Final disparity map after gap filling (if enabled).
    pub field: DisparityField,
    /// Density of the grown map before filling, in [0, 1].
    pub density_pre_fill: f64,
    pub grown: GrowOutput,
    pub maps: InitialMaps,
    pub entropy: ScalarField,
    pub timings: StageTimings,
    /// False when filling was requested but could not reach full density.
    pub fully_dense: bool,
}

/// Run the full pipeline on a loaded stereo pair and sparse prior.
pub fn fuse(
    left: &GrayImage,
    right: &GrayImage,
    left_color: &ColorImage,
    right_color: &ColorImage,
    prior: &SparsePrior,
    params: &FusionParams,
    fill: bool,
    trace: bool,
) -> Result<FusionOutput> {
    params.validate()?;
    prior.validate(
        left.width(),
        left.height(),
        params.d_min as f64,
        params.d_max as f64,
    )?;
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let maps = initial_maps(prior, left_color, right_color, params)?;
    timings.init = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let entropy = entropy_field(left, params.window_half);
    timings.entropy = t0.elapsed().as_secs_f64();

    let ctx = EnergyContext::new(left, right, &maps.d0_left, &maps.masks, &entropy, params)?;
    let t0 = Instant::now();
    let grown = if trace {
        grow_traced(&maps.refined_prior, &ctx)?
    } else {
        grow(&maps.refined_prior, &ctx)?
    };
    timings.grow = t0.elapsed().as_secs_f64();
    let density_pre_fill = grown.field.density();

    let t0 = Instant::now();
    let (field, fully_dense) = if fill {
        post_fill(&grown.field, left_color, params)
    } else {
        (grown.field.clone(), grown.field.density() == 1.0)
    };
    timings.fill = t0.elapsed().as_secs_f64();

    Ok(FusionOutput {
        field,
        density_pre_fill,
        grown,
        maps,
        entropy,
        timings,
        fully_dense,
    })
}
