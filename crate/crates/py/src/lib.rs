//! Python bindings. Configs and scenarios cross the boundary as JSON strings
//! or dicts; images as row-major lists of rows with samples in `[0, 1]`.

use std::path::PathBuf;

use flowpilot::detector::{DetectionSignal, Detector as CoreDetector, DetectorConfig};
use flowpilot::flow::FlowParams;
use flowpilot::harness::{self, RunConfig};
use flowpilot::pilot::{LifecycleAction, Pilot as CorePilot, PilotConfig, TwistCommand};
use flowpilot::sim::{self, Pose, Scenario};
use flowpilot::{Error, Image};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Frame { .. } => PyOSError::new_err(e.to_string()),
        Error::TimeRegression { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Accepts `None`, a JSON string, or anything `json.dumps` can encode.
fn from_py<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let Some(obj) = obj.filter(|o| !o.is_none()) else {
        return Ok(T::default());
    };
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn image_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Image> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Image::new(width, height, rows.concat()).map_err(to_py_err)
}

fn image_to_rows(img: &Image) -> Vec<Vec<f64>> {
    img.data().chunks(img.width()).map(<[f64]>::to_vec).collect()
}

/// Dense flow between two frames: `(dx, dy, valid)` as lists of rows.
#[pyfunction]
#[pyo3(signature = (prev, curr, params=None))]
#[allow(clippy::type_complexity)]
fn estimate_flow(
    prev: Vec<Vec<f64>>,
    curr: Vec<Vec<f64>>,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    let params: FlowParams = from_py(params)?;
    let flow = flowpilot::flow::estimate_flow(&image_from_rows(prev)?, &image_from_rows(curr)?, &params)
        .map_err(to_py_err)?;
    let w = flow.width;
    let dx = flow.d.chunks(w).map(|r| r.iter().map(|d| d[0]).collect()).collect();
    let dy = flow.d.chunks(w).map(|r| r.iter().map(|d| d[1]).collect()).collect();
    let valid = flow.valid.chunks(w).map(<[bool]>::to_vec).collect();
    Ok((dx, dy, valid))
}

/// Renders the scenario's world from a pose.
#[pyfunction]
#[pyo3(signature = (scenario, x, y, z, yaw=0.0))]
fn render(scenario: &Bound<'_, PyAny>, x: f64, y: f64, z: f64, yaw: f64) -> PyResult<Vec<Vec<f64>>> {
    let scenario: Scenario = from_py(Some(scenario))?;
    scenario.validate().map_err(to_py_err)?;
    let world = scenario.world().map_err(to_py_err)?;
    let pose = Pose { yaw, ..Pose::at(x, y, z) };
    Ok(image_to_rows(&sim::render(&world, &pose, &scenario.camera)))
}

/// Headless closed-loop run; returns the metrics dict.
#[pyfunction]
#[pyo3(signature = (scenario, config=None, seed=None))]
fn run_sim<'py>(
    py: Python<'py>,
    scenario: &Bound<'py, PyAny>,
    config: Option<&Bound<'py, PyAny>>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut scenario: Scenario = from_py(Some(scenario))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let cfg: RunConfig = from_py(config)?;
    let metrics = py.detach(|| harness::run_sim(&scenario, &cfg)).map_err(to_py_err)?;
    to_py(py, &metrics)
}

/// Detector over a directory of PGM/PNG frames; returns the metrics dict.
#[pyfunction]
#[pyo3(signature = (frames, config=None))]
fn run_replay<'py>(py: Python<'py>, frames: PathBuf, config: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: RunConfig = from_py(config)?;
    let metrics = py.detach(|| harness::run_replay(&frames, &cfg)).map_err(to_py_err)?;
    to_py(py, &metrics)
}

/// Streaming obstacle detector.
#[pyclass(module = "flowpilot")]
struct Detector {
    inner: CoreDetector,
}

#[pymethods]
impl Detector {
    #[new]
    #[pyo3(signature = (config=None, flow=None))]
    fn new(config: Option<&Bound<'_, PyAny>>, flow: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: DetectorConfig = from_py(config)?;
        let flow: FlowParams = from_py(flow)?;
        Ok(Self {
            inner: CoreDetector::new(cfg, flow).map_err(to_py_err)?,
        })
    }

    /// Feeds one frame. Returns `None` for the first frame, else a dict with
    /// `signal`, `regions`, `argmax`, `kept` and `proc_ms`.
    fn push<'py>(&mut self, py: Python<'py>, frame: Vec<Vec<f64>>) -> PyResult<Option<Bound<'py, PyAny>>> {
        let img = image_from_rows(frame)?;
        match self.inner.push(&img).map_err(to_py_err)? {
            Some(det) => Ok(Some(to_py(py, &det.telemetry(true))?)),
            None => Ok(None),
        }
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

/// Reactive flight controller.
#[pyclass(module = "flowpilot")]
struct Pilot {
    inner: CorePilot,
}

#[pymethods]
impl Pilot {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: PilotConfig = from_py(config)?;
        Ok(Self {
            inner: CorePilot::new(cfg).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode().name()
    }

    /// `"takeoff"`, `"land"` or `"reset"`.
    fn lifecycle(&mut self, action: &str) -> PyResult<()> {
        let action: LifecycleAction = serde_json::from_value(serde_json::Value::String(action.to_owned()))
            .map_err(|_| PyValueError::new_err(format!("unknown lifecycle action '{action}'")))?;
        self.inner.lifecycle(action);
        Ok(())
    }

    /// One control tick. `override` is a twist dict (`linear_x`, ...) in m/s.
    #[pyo3(signature = (signal=0, r#override=None, altitude=None))]
    fn tick<'py>(
        &mut self,
        py: Python<'py>,
        signal: i8,
        r#override: Option<&Bound<'py, PyAny>>,
        altitude: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        if !(-1..=1).contains(&signal) {
            return Err(PyValueError::new_err("signal must be -1, 0 or 1"));
        }
        let manual: Option<TwistCommand> = match r#override.filter(|o| !o.is_none()) {
            Some(o) => Some(from_py(Some(o))?),
            None => None,
        };
        let sig = DetectionSignal {
            value: signal,
            ..DetectionSignal::NONE
        };
        let cmd = self.inner.tick(&sig, manual.as_ref(), altitude);
        to_py(py, &cmd)
    }
}

#[pymodule(name = "flowpilot")]
fn flowpilot_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds the module's functions and classes to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(estimate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(run_sim, m)?)?;
    m.add_function(wrap_pyfunction!(run_replay, m)?)?;
    m.add_class::<Detector>()?;
    m.add_class::<Pilot>()?;
    Ok(())
}
