//! Python bindings: cubes, labels, preprocessing, the model and training.

use std::path::PathBuf;

use hsi_mvt::data::{self, HsiCube, LabelMap, SynthConfig};
use hsi_mvt::model::{self, ModelConfig, ModelParams};
use hsi_mvt::mpca::MultiviewRepresentation;
use hsi_mvt::tensor::Tensor;
use hsi_mvt::train::{self, PatchSource, TrainConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: hsi_mvt::Error) -> PyErr {
    match e {
        hsi_mvt::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serialize to JSON then hand the text to Python's `json.loads`.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A hyperspectral cube, `height × width × bands`, pixel-interleaved.
#[pyclass(name = "Cube", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCube(HsiCube);

#[pymethods]
impl PyCube {
    #[new]
    fn new(height: usize, width: usize, bands: usize, values: Vec<f32>) -> PyResult<Self> {
        HsiCube::new(height, width, bands, values).map(Self).map_err(err)
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn bands(&self) -> usize {
        self.0.bands
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.0.height, self.0.width, self.0.bands)
    }

    fn values(&self) -> Vec<f32> {
        self.0.values.clone()
    }

    fn pixel(&self, h: usize, w: usize) -> PyResult<Vec<f32>> {
        if h >= self.0.height || w >= self.0.width {
            return Err(PyValueError::new_err(format!("pixel ({h}, {w}) out of range")));
        }
        Ok(self.0.pixel(h, w).to_vec())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::save_cube(&self.0, path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        data::load_cube(path).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Cube({}×{}×{})", self.0.height, self.0.width, self.0.bands)
    }
}

/// Per-pixel class ids; 0 marks unlabeled pixels.
#[pyclass(name = "Labels", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLabels(LabelMap);

#[pymethods]
impl PyLabels {
    #[new]
    fn new(height: usize, width: usize, classes: usize, ids: Vec<u16>) -> PyResult<Self> {
        LabelMap::new(height, width, classes, ids).map(Self).map_err(err)
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes
    }

    fn ids(&self) -> Vec<u16> {
        self.0.ids.clone()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::save_labels(&self.0, path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        data::load_labels(path).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Labels({}×{}, {} classes)", self.0.height, self.0.width, self.0.classes)
    }
}

/// Model configuration plus parameters.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    cfg: ModelConfig,
    params: ModelParams<f32>,
}

fn parse_config(config: Option<&str>) -> PyResult<ModelConfig> {
    let cfg: ModelConfig = match config {
        None => ModelConfig::default(),
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pymethods]
impl PyModel {
    /// Fresh model from a JSON config (defaults when omitted).
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<&str>, seed: u64) -> PyResult<Self> {
        let cfg = parse_config(config)?;
        let params = ModelParams::init(&cfg, seed).map_err(err)?;
        Ok(Self { cfg, params })
    }

    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.cfg).map_err(json_err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Logits for one `P×P×C` patch given as a flat list.
    fn forward(&self, patch: Vec<f32>) -> PyResult<Vec<f32>> {
        let p = self.cfg.patch_size;
        let t = Tensor::new(&[p, p, self.cfg.in_channels()], patch).map_err(err)?;
        model::forward(&t, &self.params, &self.cfg).map_err(err)
    }

    /// 1-based class id for one patch.
    fn predict(&self, patch: Vec<f32>) -> PyResult<u16> {
        Ok(model::predict(&self.forward(patch)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_checkpoint(&self.cfg, &self.params, path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (cfg, params) = model::load_checkpoint(path).map_err(err)?;
        Ok(Self { cfg, params })
    }
}

#[pyfunction]
#[pyo3(signature = (seed=0, height=64, width=64, bands=40, classes=3, noise=0.01))]
fn synth(seed: u64, height: usize, width: usize, bands: usize, classes: usize, noise: f64) -> PyResult<(PyCube, PyLabels)> {
    let (cube, labels) = data::synth_scene(&SynthConfig {
        seed,
        height,
        width,
        bands,
        classes,
        noise_sigma: noise,
    })
    .map_err(err)?;
    Ok((PyCube(cube), PyLabels(labels)))
}

#[pyfunction]
fn mmnorm(cube: &PyCube) -> PyResult<PyCube> {
    data::mmnorm(&cube.0).map(PyCube).map_err(err)
}

/// `g` interleaved views reduced to `d` components each.
#[pyfunction]
fn mpca(py: Python<'_>, cube: &PyCube, g: usize, d: usize) -> PyResult<PyCube> {
    let rep = py.detach(|| hsi_mvt::mpca::mpca(&cube.0, g, d)).map_err(err)?.0;
    Ok(PyCube(rep.cube))
}

/// Min-max normalization followed by the reduction the config asks for.
#[pyfunction]
#[pyo3(signature = (cube, config=None))]
fn preprocess(py: Python<'_>, cube: &PyCube, config: Option<&str>) -> PyResult<PyCube> {
    let cfg = parse_config(config)?;
    let rep = py.detach(|| train::preprocess(&cube.0, &cfg)).map_err(err)?.0;
    Ok(PyCube(rep.cube))
}

fn train_config(epochs: usize, seed: u64, lr: f64, batch: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        learning_rate: lr,
        batch_size: batch,
        ..TrainConfig::default()
    }
}

/// Train on a preprocessed cube. Returns the model and the epoch history.
#[pyfunction(name = "train")]
#[pyo3(signature = (cube, labels, config=None, epochs=300, seed=0, lr=1e-4, batch=64))]
#[allow(clippy::too_many_arguments)]
fn train_py<'py>(
    py: Python<'py>,
    cube: &PyCube,
    labels: &PyLabels,
    config: Option<&str>,
    epochs: usize,
    seed: u64,
    lr: f64,
    batch: usize,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let mut cfg = parse_config(config)?;
    cfg.num_classes = labels.0.classes;
    let rep = MultiviewRepresentation {
        cube: cube.0.clone(),
        views: cfg.views,
        components: cfg.view_components,
    };
    let tc = train_config(epochs, seed, lr, batch);
    let outcome = py.detach(|| train::train(&rep, &labels.0, &cfg, &tc)).map_err(err)?;
    let history = to_py(py, &outcome.history)?;
    Ok((
        PyModel {
            cfg,
            params: outcome.params,
        },
        history,
    ))
}

fn test_split(labels: &LabelMap, seed: u64) -> PyResult<Vec<usize>> {
    let fractions = TrainConfig::default().fractions();
    Ok(data::stratified_split(labels, fractions, seed).map_err(err)?.test)
}

/// Metrics on the test split drawn with `seed`.
#[pyfunction]
#[pyo3(signature = (model, cube, labels, seed=0))]
fn evaluate<'py>(
    py: Python<'py>,
    model: &PyModel,
    cube: &PyCube,
    labels: &PyLabels,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let test = test_split(&labels.0, seed)?;
    let source = PatchSource::new(&cube.0, &labels.0, model.cfg.patch_size);
    let report = py
        .detach(|| train::evaluate(&model.params, &model.cfg, &source, &test))
        .map_err(err)?;
    to_py(py, &report)
}

/// Metrics on original and 180°-rotated test patches.
#[pyfunction]
#[pyo3(signature = (model, cube, labels, seed=0))]
fn audit<'py>(
    py: Python<'py>,
    model: &PyModel,
    cube: &PyCube,
    labels: &PyLabels,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let test = test_split(&labels.0, seed)?;
    let source = PatchSource::new(&cube.0, &labels.0, model.cfg.patch_size);
    let report = py
        .detach(|| train::rotation_audit(&model.params, &model.cfg, &source, &test))
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn hsimvt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCube>()?;
    m.add_class::<PyLabels>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(mmnorm, m)?)?;
    m.add_function(wrap_pyfunction!(mpca, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(train_py, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
