//! Dense subpixel disparity estimation fusing a sparse low-resolution
//! depth prior with a rectified stereo pair.
//!
//! The pipeline upsamples and cross-checks the prior, then grows dense
//! meta-disparities (integer disparity + closed-form subpixel correction)
//! from the seeds by best-first constrained minimization of a per-pixel
//! MAP energy, and finally fills the remaining gaps.

pub mod correlation;
pub mod energy;
pub mod error;
pub mod eval;
pub mod field;
pub mod growing;
pub mod image;
pub mod init;
pub mod io;
pub mod params;
pub mod pipeline;

pub use error::{FusionError, Result};
pub use field::{DisparityField, MetaDisparity, OcclusionMasks, ScalarField, SeedPoint, SparsePrior};
pub use image::{ColorImage, GrayImage};
pub use params::{Criterion, EtaMode, FusionParams};
