use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    /// Window norm or criterion denominator below the degeneracy floor.
    #[error("degenerate (textureless) window")]
    DegenerateWindow,

    /// Pixel lies in the intersection of stereo- and depth-occlusions.
    #[error("pixel is infeasible for fusion (stereo- and depth-occluded)")]
    InfeasiblePixel,

    #[error("no usable seeds after filtering")]
    EmptySeedSet,

    #[error("no valid pixels for metric evaluation")]
    NoValidPixels,

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, FusionError>;
