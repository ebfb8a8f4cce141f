//! Python bindings. Specs cross the boundary as plain dicts with the same
//! shape as the CLI's JSON inputs; reports come back as dicts.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use gyrotop_core::dynamics::{form, integrate as integrate_form, velocity_chart_inverse, FormKind, PhasePoint};
use gyrotop_core::geometry::{compute_n, frame_r, local_frame};
use gyrotop_core::topology::{existence_verdict, flux_of_n, gyro_charge, DomainSpec, SurfaceSpec};
use gyrotop_core::{Chart, FieldKind, FieldSpec};

create_exception!(gyrotop, GyrotopError, PyException, "Physics or domain error raised by the core library.");

fn err(e: gyrotop_core::Error) -> PyErr {
    match e {
        gyrotop_core::Error::InvalidSpec(m) => PyValueError::new_err(m),
        other => GyrotopError::new_err(format!("{}: {other}", other.name())),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid {what}: {e}")))
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::from(v)
}

fn parse_chart(name: &str, spec: &FieldSpec, x: &Vector3<f64>) -> PyResult<Chart> {
    if name == "auto" {
        Chart::auto(spec, x).map_err(err)
    } else {
        name.parse().map_err(err)
    }
}

/// A catalog magnetic field with its parameters.
#[pyclass(name = "Field", module = "gyrotop", frozen)]
struct PyField {
    spec: FieldSpec,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (kind, params = None))]
    fn new(kind: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let kind: FieldKind = serde_json::from_value(serde_json::Value::String(kind.into()))
            .map_err(|_| PyValueError::new_err(format!("unknown field kind {kind:?}")))?;
        let spec = FieldSpec {
            kind,
            params: params.unwrap_or_default(),
        };
        spec.validate().map_err(err)?;
        Ok(PyField { spec })
    }

    #[staticmethod]
    fn from_dict(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: FieldSpec = from_py(spec, "field spec")?;
        spec.validate().map_err(err)?;
        Ok(PyField { spec })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.spec)
    }

    #[getter]
    fn kind(&self) -> String {
        self.spec.kind.to_string()
    }

    fn param(&self, name: &str) -> f64 {
        self.spec.param(name)
    }

    fn b(&self, x: [f64; 3]) -> PyResult<[f64; 3]> {
        Ok(self.spec.b_field(&vec3(x)).map_err(err)?.into())
    }

    /// B, its Jacobian `grad_b[i][j] = dB_j/dx_i` and A where defined.
    fn eval<'py>(&self, py: Python<'py>, x: [f64; 3]) -> PyResult<Bound<'py, PyDict>> {
        let s = self.spec.eval(&vec3(x)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("b", <[f64; 3]>::from(s.b))?;
        let rows: Vec<[f64; 3]> = (0..3).map(|i| [s.grad_b[(i, 0)], s.grad_b[(i, 1)], s.grad_b[(i, 2)]]).collect();
        d.set_item("grad_b", rows)?;
        d.set_item("potential", s.potential.map(<[f64; 3]>::from))?;
        Ok(d)
    }

    fn n(&self, x: [f64; 3]) -> PyResult<[f64; 3]> {
        Ok(compute_n(&self.spec, &vec3(x)).map_err(err)?.n.into())
    }

    #[pyo3(signature = (x, chart = "auto"))]
    fn frame<'py>(&self, py: Python<'py>, x: [f64; 3], chart: &str) -> PyResult<Bound<'py, PyDict>> {
        let x = vec3(x);
        let chart = parse_chart(chart, &self.spec, &x)?;
        let f = local_frame(&self.spec, &x, chart).map_err(err)?;
        let r = frame_r(&self.spec, &x, chart).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("chart", chart.to_string())?;
        d.set_item("e1", <[f64; 3]>::from(f.e1))?;
        d.set_item("e2", <[f64; 3]>::from(f.e2))?;
        d.set_item("b", <[f64; 3]>::from(f.b))?;
        d.set_item("R", <[f64; 3]>::from(r))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Field({:?}, {:?})", self.spec.kind.to_string(), self.spec.params)
    }
}

#[pyfunction]
fn catalog(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &gyrotop_core::fields::catalog())
}

/// Flux of N through a sphere or torus and the resulting charge.
#[pyfunction]
#[pyo3(signature = (field, surface, order = None))]
fn flux<'py>(py: Python<'py>, field: &PyField, surface: &Bound<'py, PyAny>, order: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let surface: SurfaceSpec = from_py(surface, "surface spec")?;
    surface.validate().map_err(err)?;
    let report = flux_of_n(&field.spec, &surface, order.unwrap_or_else(|| surface.default_order())).map_err(err)?;
    let q = gyro_charge(&report).map_err(err)?;
    let out = to_py(py, &report)?;
    out.set_item("q", q)?;
    Ok(out)
}

#[pyfunction]
fn verdict<'py>(py: Python<'py>, field: &PyField, domain: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let domain: DomainSpec = from_py(domain, "domain spec")?;
    to_py(py, &existence_verdict(&field.spec, &domain).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (field, points = 100, seed = 0))]
fn bundle_check<'py>(py: Python<'py>, field: &PyField, points: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    if points == 0 {
        return Err(PyValueError::new_err("points must be positive"));
    }
    let report = py.detach(|| gyrotop_core::bundle::run_suite(&field.spec, points, seed));
    to_py(py, &report)
}

/// Integrates one of the one-forms from a Cartesian start `(x0, v0)`.
/// Returns the run summary plus the sampled trajectory columns.
#[pyfunction]
#[pyo3(signature = (field, form_kind, x0, v0, t_final, dt, chart = None))]
#[allow(clippy::too_many_arguments)]
fn integrate<'py>(
    py: Python<'py>,
    field: &PyField,
    form_kind: &str,
    x0: [f64; 3],
    v0: [f64; 3],
    t_final: f64,
    dt: f64,
    chart: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = &field.spec;
    let kind: FormKind = form_kind.parse().map_err(err)?;
    if !(dt > 0.0 && dt.is_finite() && t_final > 0.0 && t_final.is_finite()) {
        return Err(PyValueError::new_err("dt and t_final must be positive"));
    }
    let x0 = vec3(x0);
    let chart = match (kind, chart) {
        (FormKind::GcLocal, c) => Some(parse_chart(c.unwrap_or("auto"), spec, &x0)?),
        (_, Some(_)) => return Err(PyValueError::new_err("chart only applies to gc-local")),
        (_, None) => None,
    };
    let one_form = form(spec, kind, chart.unwrap_or(Chart::SeedX)).map_err(err)?;
    let start = PhasePoint::new(x0, vec3(v0), 0.0);
    let z0 = match chart {
        Some(c) => velocity_chart_inverse(spec, &start, c).map_err(err)?.coords(0.0),
        None => start.coords(),
    };
    let traj = py.detach(|| integrate_form(&one_form, &z0, t_final, dt)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("summary", to_py(py, &traj.summary())?)?;
    d.set_item("chart", chart.map(|c| c.to_string()))?;
    d.set_item("t", traj.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
    d.set_item("x", traj.samples.iter().map(|s| <[f64; 3]>::from(s.x)).collect::<Vec<_>>())?;
    d.set_item("v", traj.samples.iter().map(|s| <[f64; 3]>::from(s.v)).collect::<Vec<_>>())?;
    d.set_item("mu", traj.samples.iter().map(|s| s.mu).collect::<Vec<_>>())?;
    d.set_item("energy", traj.samples.iter().map(|s| s.energy).collect::<Vec<_>>())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (points = 50))]
fn verify_all(py: Python<'_>, points: usize) -> PyResult<Bound<'_, PyAny>> {
    if points == 0 {
        return Err(PyValueError::new_err("points must be positive"));
    }
    let report = py.detach(|| gyrotop_core::verify::verify_all(points));
    to_py(py, &report)
}

#[pymodule]
fn gyrotop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GyrotopError", m.py().get_type::<GyrotopError>())?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(flux, m)?)?;
    m.add_function(wrap_pyfunction!(verdict, m)?)?;
    m.add_function(wrap_pyfunction!(bundle_check, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
