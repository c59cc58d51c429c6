//! Python bindings: a `Model` class wrapping the isotopies, with torsion,
//! linking, tilt and certification methods.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use torsionlab::curves::EssentialCurve;
use torsionlab::geometry::{PlanePoint, TangentVector};
use torsionlab::harness::{
    certify_negative_torsion, find_zero_torsion_on_curve, GridSpec, ZeroSearchOptions,
    DEFAULT_MARGIN_FLOOR,
};
use torsionlab::models::{
    IdentityModel, Isotopy, IsotopyOrder, PendulumModel, RigidRotationModel, TwistMapModel,
};
use torsionlab::tilt::torsion_via_tilt_column;
use torsionlab::torsion::{linking_finite, torsion_finite, torsion_profile};
use torsionlab::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Precondition(_) | Error::NotNegativeTorsion(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

enum Kind {
    Generic,
    Pendulum(PendulumModel),
}

#[pyclass(frozen)]
struct Model {
    inner: Box<dyn Isotopy>,
    kind: Kind,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn identity() -> Self {
        Self { inner: Box::new(IdentityModel), kind: Kind::Generic }
    }

    #[staticmethod]
    fn rigid_rotation(rate: f64) -> Self {
        Self { inner: Box::new(RigidRotationModel::new(rate)), kind: Kind::Generic }
    }

    /// Standard twist map with kick `(k / 2 pi) sin(2 pi x)`.
    #[staticmethod]
    #[pyo3(signature = (k, horizontal_first = false))]
    fn twist_map(k: f64, horizontal_first: bool) -> Self {
        let order = if horizontal_first { IsotopyOrder::HorizontalFirst } else { IsotopyOrder::VerticalFirst };
        Self {
            inner: Box::new(TwistMapModel::standard(k).isotopy_variant(order)),
            kind: Kind::Generic,
        }
    }

    /// Pendulum flow; defaults to the stiffness `1 / (4 pi^2)`.
    #[staticmethod]
    #[pyo3(signature = (stiffness = None, step = PendulumModel::DEFAULT_STEP))]
    fn pendulum(stiffness: Option<f64>, step: f64) -> PyResult<Self> {
        let m = PendulumModel::new(stiffness.unwrap_or(torsionlab::models::PAPER_STIFFNESS), step).map_err(py_err)?;
        Ok(Self { inner: Box::new(m), kind: Kind::Pendulum(m) })
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner.descriptor())
    }

    /// `Torsion_n(f, (x, y), vector)`.
    #[pyo3(signature = (x, y, n, vector = (0.0, 1.0)))]
    fn torsion(&self, py: Python<'_>, x: f64, y: f64, n: u32, vector: (f64, f64)) -> PyResult<f64> {
        py.detach(|| torsion_finite(self.inner.as_ref(), PlanePoint::new(x, y), TangentVector::new(vector.0, vector.1), n))
            .map(|t| t.value)
            .map_err(py_err)
    }

    /// `[m Torsion_m for m in 1..=n]`.
    #[pyo3(signature = (x, y, n, vector = (0.0, 1.0)))]
    fn torsion_profile(&self, py: Python<'_>, x: f64, y: f64, n: u32, vector: (f64, f64)) -> PyResult<Vec<f64>> {
        py.detach(|| torsion_profile(self.inner.as_ref(), PlanePoint::new(x, y), TangentVector::new(vector.0, vector.1), n))
            .map_err(py_err)
    }

    /// `Linking_n` of two lifted points.
    fn linking(&self, py: Python<'_>, a: (f64, f64), b: (f64, f64), n: u32) -> PyResult<f64> {
        py.detach(|| linking_finite(self.inner.as_ref(), PlanePoint::new(a.0, a.1), PlanePoint::new(b.0, b.1), n))
            .map_err(py_err)
    }

    /// Time-one torsion of the vertical through tilts, at `(x, y)` for each `y`.
    fn tilt_torsion(&self, py: Python<'_>, x: f64, ys: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| torsion_via_tilt_column(self.inner.as_ref(), x, &ys, &Default::default()))
            .map_err(py_err)
    }

    /// `(passed, margin)` of the negative-torsion certificate on a grid.
    #[pyo3(signature = (x_steps, y_lo, y_hi, y_steps, margin_floor = DEFAULT_MARGIN_FLOOR))]
    fn certify(&self, py: Python<'_>, x_steps: usize, y_lo: f64, y_hi: f64, y_steps: usize, margin_floor: f64) -> PyResult<(bool, f64)> {
        py.detach(|| {
            let grid = GridSpec::new(x_steps, y_lo, y_hi, y_steps)?;
            certify_negative_torsion(self.inner.as_ref(), &grid, margin_floor)
        })
        .map(|c| (c.pass, c.margin))
        .map_err(py_err)
    }

    /// Zero-torsion search on the circle at `height`:
    /// `(passed, witness_x, witness_y, k)`.
    #[pyo3(signature = (height, n, assume_negative_torsion = false))]
    fn find_zero_on_circle(&self, py: Python<'_>, height: f64, n: u32, assume_negative_torsion: bool) -> PyResult<(bool, f64, f64, i64)> {
        py.detach(|| {
            let curve = EssentialCurve::circle(height)?;
            let opts = ZeroSearchOptions { assume_negative_torsion, ..Default::default() };
            find_zero_torsion_on_curve(self.inner.as_ref(), &curve, n, &opts)
        })
        .map(|r| (r.pass, r.witness.x, r.witness.y, r.k))
        .map_err(py_err)
    }

    /// Period of a pendulum orbit inside the separatrix.
    fn orbit_period(&self, x: f64, y: f64) -> PyResult<f64> {
        match &self.kind {
            Kind::Pendulum(m) => m.orbit_period(torsionlab::geometry::AnnulusPoint::new(x, y)).map_err(py_err),
            Kind::Generic => Err(PyValueError::new_err("orbit_period needs a pendulum model")),
        }
    }
}

#[pymodule(name = "torsionlab")]
fn torsionlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    Ok(())
}
