//! Python bindings over the kerndual core.
//!
//! The surface mirrors the library's vocabulary: kernels parsed from the
//! grammar, measures, GP fits, span elements, discrepancies, and quadrature
//! rules. Points are accepted as plain floats (scalar domain) or sequences
//! of floats; library errors surface as ValueError.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kerndual::{embeddings, gp, quadrature, rkhs};
use kerndual::{Kernel as CoreKernel, Measure as CoreMeasure, Point};

fn err(e: kerndual::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum PointArg {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<PointArg> for Point {
    fn from(p: PointArg) -> Point {
        match p {
            PointArg::Scalar(x) => vec![x],
            PointArg::Vector(v) => v,
        }
    }
}

fn points(xs: Vec<PointArg>) -> Vec<Point> {
    xs.into_iter().map(Point::from).collect()
}

/// Kernel parsed from the shared grammar, e.g. "se:gamma=1" or
/// "sum(matern:m=1,h=0.5|delta:var=0.1)".
#[pyclass(frozen, module = "kerndual_py")]
struct Kernel {
    inner: CoreKernel,
}

#[pymethods]
impl Kernel {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let inner: CoreKernel = spec.parse().map_err(err)?;
        Ok(Kernel { inner })
    }

    fn eval(&self, x: PointArg, y: PointArg) -> PyResult<f64> {
        self.inner
            .eval(&Point::from(x), &Point::from(y))
            .map_err(err)
    }

    fn gram(&self, xs: Vec<PointArg>) -> PyResult<Vec<Vec<f64>>> {
        let g = self.inner.gram(&points(xs)).map_err(err)?;
        Ok(g.outer_iter().map(|row| row.to_vec()).collect())
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Kernel(\"{}\")", self.inner)
    }
}

/// Integration measure: uniform interval, isotropic Gaussian, or a finitely
/// supported probability measure.
#[pyclass(frozen, module = "kerndual_py")]
struct Measure {
    inner: CoreMeasure,
}

#[pymethods]
impl Measure {
    #[staticmethod]
    fn uniform01() -> Measure {
        Measure {
            inner: CoreMeasure::uniform01(),
        }
    }

    #[staticmethod]
    fn uniform(a: f64, b: f64) -> PyResult<Measure> {
        let inner = CoreMeasure::UniformInterval { a, b };
        inner.validate().map_err(err)?;
        Ok(Measure { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (mean, var = 1.0))]
    fn gaussian(mean: PointArg, var: f64) -> PyResult<Measure> {
        let inner = CoreMeasure::IsotropicGaussian {
            mean: Point::from(mean),
            var,
        };
        inner.validate().map_err(err)?;
        Ok(Measure { inner })
    }

    #[staticmethod]
    fn finite(atoms: Vec<PointArg>, weights: Vec<f64>) -> PyResult<Measure> {
        CoreMeasure::finite(points(atoms), weights)
            .map(|inner| Measure { inner })
            .map_err(err)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Gaussian process posterior over a fixed design.
#[pyclass(frozen, module = "kerndual_py")]
struct GpFit {
    inner: gp::GpFit,
}

#[pymethods]
impl GpFit {
    fn posterior_mean(&self, x: PointArg) -> PyResult<f64> {
        self.inner.posterior_mean(&Point::from(x)).map_err(err)
    }

    fn posterior_var(&self, x: PointArg) -> PyResult<f64> {
        self.inner.posterior_var(&Point::from(x)).map_err(err)
    }

    fn posterior_cov(&self, x: PointArg, y: PointArg) -> PyResult<f64> {
        self.inner
            .posterior_cov(&Point::from(x), &Point::from(y))
            .map_err(err)
    }

    #[pyo3(signature = (x, z = 1.96))]
    fn credible_interval(&self, x: PointArg, z: f64) -> PyResult<(f64, f64)> {
        self.inner
            .credible_interval(&Point::from(x), z)
            .map_err(err)
    }

    fn dual(&self) -> Vec<f64> {
        self.inner.dual().to_vec()
    }

    fn jitter_rel(&self) -> f64 {
        self.inner.jitter_rel()
    }

    fn __repr__(&self) -> String {
        format!(
            "GpFit(n={}, noise_var={})",
            self.inner.n(),
            self.inner.noise_var()
        )
    }
}

/// Fit a GP posterior. noise_var = 0 gives the noiseless interpolating
/// posterior; prior_mean != 0 uses a constant prior mean.
#[pyfunction]
#[pyo3(signature = (kernel, xs, ys, noise_var = 0.0, prior_mean = 0.0))]
fn gp_fit(
    kernel: &Kernel,
    xs: Vec<PointArg>,
    ys: Vec<f64>,
    noise_var: f64,
    prior_mean: f64,
) -> PyResult<GpFit> {
    let prior = if prior_mean == 0.0 {
        gp::PriorMean::Zero
    } else {
        gp::PriorMean::Const(prior_mean)
    };
    gp::fit(&kernel.inner, &points(xs), &ys, noise_var, prior)
        .map(|inner| GpFit { inner })
        .map_err(err)
}

/// Finite kernel expansion sum_i c_i k(., x_i).
#[pyclass(frozen, module = "kerndual_py")]
struct SpanElement {
    inner: rkhs::SpanElement,
}

#[pymethods]
impl SpanElement {
    #[new]
    fn new(kernel: &Kernel, centers: Vec<PointArg>, coeffs: Vec<f64>) -> PyResult<Self> {
        rkhs::SpanElement::new(kernel.inner.clone(), points(centers), coeffs)
            .map(|inner| SpanElement { inner })
            .map_err(err)
    }

    fn eval(&self, x: PointArg) -> PyResult<f64> {
        self.inner.eval(&Point::from(x)).map_err(err)
    }

    fn norm(&self) -> PyResult<f64> {
        self.inner.norm().map_err(err)
    }

    fn inner_product(&self, other: &SpanElement) -> PyResult<f64> {
        self.inner.inner(&other.inner).map_err(err)
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        self.inner.centers().to_vec()
    }

    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("SpanElement(n={})", self.inner.coeffs().len())
    }
}

/// Minimum-norm interpolant of (xs, ys). Returns (element, jitter_rel).
#[pyfunction]
fn interpolate(kernel: &Kernel, xs: Vec<PointArg>, ys: Vec<f64>) -> PyResult<(SpanElement, f64)> {
    let (el, report) = rkhs::min_norm_interpolant(&kernel.inner, &points(xs), &ys).map_err(err)?;
    Ok((SpanElement { inner: el }, report.jitter_rel))
}

/// Kernel ridge regression with penalty n * lam. Returns (element, jitter_rel).
#[pyfunction]
fn krr(
    kernel: &Kernel,
    xs: Vec<PointArg>,
    ys: Vec<f64>,
    lam: f64,
) -> PyResult<(SpanElement, f64)> {
    let (el, report) = rkhs::krr(&kernel.inner, &points(xs), &ys, lam).map_err(err)?;
    Ok((SpanElement { inner: el }, report.jitter_rel))
}

/// Worst-case interpolation error at x over the unit ball; equals the
/// noiseless GP posterior standard deviation at x.
#[pyfunction]
fn power_function(kernel: &Kernel, xs: Vec<PointArg>, x: PointArg) -> PyResult<f64> {
    rkhs::power_function(&kernel.inner, &points(xs), &Point::from(x)).map_err(err)
}

/// Squared discrepancy between two measures, from closed-form kernel means.
#[pyfunction]
fn mmd_squared(kernel: &Kernel, p: &Measure, q: &Measure) -> PyResult<f64> {
    embeddings::mmd_squared_exact(&kernel.inner, &p.inner, &q.inner).map_err(err)
}

/// Unbiased two-sample discrepancy estimate; may be negative near zero.
#[pyfunction]
fn mmd_u_statistic(kernel: &Kernel, xs: Vec<PointArg>, ys: Vec<PointArg>) -> PyResult<f64> {
    embeddings::mmd_u_statistic(&kernel.inner, &points(xs), &points(ys)).map_err(err)
}

/// Biased V-statistic dependence estimate from paired samples.
#[pyfunction]
fn hsic(
    kernel_x: &Kernel,
    kernel_y: &Kernel,
    xs: Vec<PointArg>,
    ys: Vec<PointArg>,
) -> PyResult<f64> {
    embeddings::hsic_estimator(&kernel_x.inner, &kernel_y.inner, &points(xs), &points(ys))
        .map_err(err)
}

/// Optimally weighted quadrature rule on fixed nodes.
#[pyclass(frozen, module = "kerndual_py")]
struct QuadratureRule {
    inner: quadrature::QuadratureRule,
}

#[pymethods]
impl QuadratureRule {
    fn nodes(&self) -> Vec<Vec<f64>> {
        self.inner.nodes().to_vec()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn posterior_variance(&self) -> f64 {
        self.inner.posterior_variance()
    }

    /// Squared node-vs-target discrepancy recomputed from scratch; agrees
    /// with posterior_variance up to roundoff.
    fn mmd_check(&self) -> PyResult<f64> {
        self.inner.mmd_check().map_err(err)
    }

    fn estimate(&self, values: Vec<f64>) -> PyResult<f64> {
        quadrature::bq_estimate(&self.inner, &values).map_err(err)
    }

    fn jitter_rel(&self) -> f64 {
        self.inner.jitter_rel()
    }

    fn __repr__(&self) -> String {
        format!("QuadratureRule(n={})", self.inner.nodes().len())
    }
}

#[pyfunction]
fn bq_rule(kernel: &Kernel, measure: &Measure, nodes: Vec<PointArg>) -> PyResult<QuadratureRule> {
    quadrature::bq_rule(&kernel.inner, &measure.inner, &points(nodes))
        .map(|inner| QuadratureRule { inner })
        .map_err(err)
}

#[pymodule]
fn kerndual_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Measure>()?;
    m.add_class::<GpFit>()?;
    m.add_class::<SpanElement>()?;
    m.add_class::<QuadratureRule>()?;
    m.add_function(wrap_pyfunction!(gp_fit, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate, m)?)?;
    m.add_function(wrap_pyfunction!(krr, m)?)?;
    m.add_function(wrap_pyfunction!(power_function, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_squared, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_u_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(hsic, m)?)?;
    m.add_function(wrap_pyfunction!(bq_rule, m)?)?;
    m.add("__version__", kerndual::VERSION)?;
    Ok(())
}
