//! Python bindings: images, sparse priors, parameters, the fusion
//! pipeline and the simulation/scoring helpers.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use stereofuse::eval;
use stereofuse::pipeline;
use stereofuse::{ColorImage, DisparityField, FusionError, GrayImage, SparsePrior};
use stereofuse::field::SeedPoint;

fn err(e: FusionError) -> PyErr {
    match e {
        FusionError::Io(_) | FusionError::Image(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Grayscale image with samples in [0, 1], row-major.
#[pyclass(name = "GrayImage", skip_from_py_object)]
#[derive(Clone)]
struct PyGrayImage {
    inner: GrayImage,
}

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f32>) -> PyResult<Self> {
        Ok(Self {
            inner: GrayImage::new(width, height, data).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: stereofuse::io::load_gray(path.as_ref()).map_err(err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn at(&self, x: usize, y: usize) -> PyResult<f32> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel out of bounds"));
        }
        Ok(self.inner.at(x, y))
    }

    fn data(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        stereofuse::io::write_gray_16bit(path.as_ref(), &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Dense disparity map with per-pixel validity.
#[pyclass(name = "DisparityField", skip_from_py_object)]
#[derive(Clone)]
struct PyDisparityField {
    inner: DisparityField,
}

#[pymethods]
impl PyDisparityField {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: stereofuse::io::read_pfm(path.as_ref()).map_err(err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density()
    }

    /// Disparity at (x, y), or None when invalid.
    fn get(&self, x: usize, y: usize) -> Option<f32> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return None;
        }
        self.inner.get(x, y)
    }

    /// Row-major values; invalid pixels are NaN.
    fn values(&self) -> Vec<f32> {
        self.inner
            .values()
            .iter()
            .zip(self.inner.valid_flags())
            .map(|(&v, &ok)| if ok { v } else { f32::NAN })
            .collect()
    }

    fn save_pfm(&self, path: &str) -> PyResult<()> {
        stereofuse::io::write_pfm(path.as_ref(), &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "DisparityField({}x{}, density {:.3})",
            self.inner.width(),
            self.inner.height(),
            self.inner.density()
        )
    }
}

/// Sparse disparity prior: a list of (x, y, d) seeds.
#[pyclass(name = "SparsePrior", skip_from_py_object)]
#[derive(Clone)]
struct PySparsePrior {
    inner: SparsePrior,
}

#[pymethods]
impl PySparsePrior {
    #[new]
    fn new(seeds: Vec<(usize, usize, f64)>) -> Self {
        Self {
            inner: SparsePrior::new(
                seeds
                    .into_iter()
                    .map(|(x, y, d)| SeedPoint { x, y, d })
                    .collect(),
            ),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: stereofuse::io::read_prior(path.as_ref()).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn seeds(&self) -> Vec<(usize, usize, f64)> {
        self.inner.entries.iter().map(|s| (s.x, s.y, s.d)).collect()
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        stereofuse::io::write_prior_csv(path.as_ref(), &self.inner).map_err(err)
    }
}

/// Fusion parameters; construct with defaults then `set("key", "value")`.
#[pyclass(name = "FusionParams", skip_from_py_object)]
#[derive(Clone)]
struct PyFusionParams {
    inner: stereofuse::FusionParams,
}

#[pymethods]
impl PyFusionParams {
    #[new]
    fn new() -> Self {
        Self {
            inner: stereofuse::FusionParams::default(),
        }
    }

    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: stereofuse::FusionParams::from_config_str(text).map_err(err)?,
        })
    }

    /// Set one parameter by config key (r, T, lambda, gamma_d, gamma_c,
    /// e_c, upsample_radius, window, entropy_threshold, d_min, d_max,
    /// criterion, subpixel, aggregation, adaptive_fusion).
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set_key(key, value).map_err(err)?;
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn r(&self) -> i32 {
        self.inner.r
    }

    #[getter]
    fn t_threshold(&self) -> f64 {
        self.inner.t_threshold
    }

    #[getter]
    fn lambda_weight(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn d_min(&self) -> i32 {
        self.inner.d_min
    }

    #[getter]
    fn d_max(&self) -> i32 {
        self.inner.d_max
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Result of the fusion pipeline.
#[pyclass(name = "FusionResult")]
struct PyFusionResult {
    #[pyo3(get)]
    disparity: PyDisparityField,
    #[pyo3(get)]
    density_pre_fill: f64,
    #[pyo3(get)]
    pops: usize,
    #[pyo3(get)]
    fully_dense: bool,
    /// (init, entropy, grow, fill) stage times in seconds.
    #[pyo3(get)]
    timings: (f64, f64, f64, f64),
}

/// Fuse a rectified stereo pair with a sparse prior into a dense
/// subpixel disparity map.
#[pyfunction]
#[pyo3(signature = (left, right, prior, params=None, fill=true))]
fn fuse(
    left: &PyGrayImage,
    right: &PyGrayImage,
    prior: &PySparsePrior,
    params: Option<&PyFusionParams>,
    fill: bool,
) -> PyResult<PyFusionResult> {
    let params = params
        .map(|p| p.inner.clone())
        .unwrap_or_default();
    let lc = ColorImage::from_gray(&left.inner);
    let rc = ColorImage::from_gray(&right.inner);
    let out = pipeline::fuse(
        &left.inner,
        &right.inner,
        &lc,
        &rc,
        &prior.inner,
        &params,
        fill,
        false,
    )
    .map_err(err)?;
    Ok(PyFusionResult {
        disparity: PyDisparityField { inner: out.field },
        density_pre_fill: out.density_pre_fill,
        pops: out.grown.pops,
        fully_dense: out.fully_dense,
        timings: (
            out.timings.init,
            out.timings.entropy,
            out.timings.grow,
            out.timings.fill,
        ),
    })
}

/// Percentage of non-occluded pixels with |result - gt| > delta.
#[pyfunction]
#[pyo3(signature = (result, gt, delta, occluded=None))]
fn bmp(
    result: &PyDisparityField,
    gt: &PyDisparityField,
    delta: f64,
    occluded: Option<Vec<bool>>,
) -> PyResult<f64> {
    let occ =
        occluded.unwrap_or_else(|| vec![false; gt.inner.width() * gt.inner.height()]);
    eval::bmp(&result.inner, &gt.inner, &occ, delta).map_err(err)
}

/// Mean square error over non-occluded pixels valid in both maps.
#[pyfunction]
#[pyo3(signature = (result, gt, occluded=None))]
fn mse(
    result: &PyDisparityField,
    gt: &PyDisparityField,
    occluded: Option<Vec<bool>>,
) -> PyResult<f64> {
    let occ =
        occluded.unwrap_or_else(|| vec![false; gt.inner.width() * gt.inner.height()]);
    eval::mse(&result.inner, &gt.inner, &occ).map_err(err)
}

/// Render a built-in scene ("two_planes", "single_plane") and degrade
/// its ground truth into a sparse prior. Returns
/// (left, right, gt, occluded, prior).
#[pyfunction]
#[pyo3(signature = (scene, seed=1, factor=10, sigma=2.0, bias=2.0))]
fn simulate(
    scene: &str,
    seed: u64,
    factor: usize,
    sigma: f64,
    bias: f64,
) -> PyResult<(PyGrayImage, PyGrayImage, PyDisparityField, Vec<bool>, PySparsePrior)> {
    let spec = eval::scene_by_name(scene)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scene: {scene}")))?;
    let rendered = eval::render_scene(&spec).map_err(err)?;
    let cfg = eval::DegradeConfig {
        factor,
        bias_amplitude: bias,
        noise_sigma: sigma,
        noise_period: 40.0,
    };
    let prior = eval::degrade(&rendered.gt, &cfg, seed).map_err(err)?;
    Ok((
        PyGrayImage {
            inner: rendered.left,
        },
        PyGrayImage {
            inner: rendered.right,
        },
        PyDisparityField { inner: rendered.gt },
        rendered.occluded,
        PySparsePrior { inner: prior },
    ))
}

#[pymodule]
fn stereofuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyDisparityField>()?;
    m.add_class::<PySparsePrior>()?;
    m.add_class::<PyFusionParams>()?;
    m.add_class::<PyFusionResult>()?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(bmp, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
