use hcmix::calibration::{self, LrtModel};
use hcmix::distributions::{self, DenseParam, GGParams, MixtureAlt, SparseParam};
use hcmix::experiments::{self, Figure, RunOptions, ScenarioConfig};
use hcmix::rng::stream;
use hcmix::statistics::{self, TestKind, TwoSample};
use hcmix::theory::{self, BoundaryQuery, ConditionReport};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: hcmix::Error) -> PyErr {
    match e {
        hcmix::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(name: &str) -> PyResult<TestKind> {
    name.parse().map_err(to_py)
}

/// Generalized Gaussian law with shape `gamma` and scale.
#[pyclass(name = "GGParams", module = "hcmix", frozen)]
struct PyGG {
    inner: GGParams,
}

#[pymethods]
impl PyGG {
    #[new]
    #[pyo3(signature = (gamma, scale = 1.0))]
    fn new(gamma: f64, scale: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GGParams::new(gamma, scale).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn normal() -> Self {
        Self { inner: GGParams::normal() }
    }

    #[staticmethod]
    fn unit_variance_laplace() -> Self {
        Self {
            inner: GGParams::unit_variance_laplace(),
        }
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        distributions::gg_pdf(x, &self.inner).map_err(to_py)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        distributions::gg_cdf(x, &self.inner).map_err(to_py)
    }

    fn sf(&self, x: f64) -> PyResult<f64> {
        distributions::gg_survival(x, &self.inner).map_err(to_py)
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        distributions::gg_quantile(q, &self.inner).map_err(to_py)
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        distributions::gg_sample(count, &self.inner, &mut stream(seed))
    }

    fn __repr__(&self) -> String {
        format!("GGParams(gamma={}, scale={})", self.inner.gamma, self.inner.scale)
    }
}

/// Mixture `(1 - epsilon) F + epsilon F(. - mu)`.
#[pyclass(name = "MixtureAlt", module = "hcmix", frozen)]
struct PyMix {
    inner: MixtureAlt,
}

#[pymethods]
impl PyMix {
    #[new]
    fn new(epsilon: f64, mu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: MixtureAlt::new(epsilon, mu).map_err(to_py)?,
        })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    fn cdf(&self, base: &PyGG, x: f64) -> f64 {
        self.inner.cdf(&base.inner, x)
    }

    fn sf(&self, base: &PyGG, x: f64) -> f64 {
        self.inner.sf(&base.inner, x)
    }

    #[pyo3(signature = (base, count, seed = 0))]
    fn sample(&self, base: &PyGG, count: usize, seed: u64) -> Vec<f64> {
        distributions::mixture_sample(count, &base.inner, &self.inner, &mut stream(seed))
    }

    fn __repr__(&self) -> String {
        format!("MixtureAlt(epsilon={}, mu={})", self.inner.epsilon, self.inner.mu)
    }
}

#[pyfunction]
fn sparse_calibration(n: u64, beta: f64, r: f64, gamma: f64) -> PyResult<PyMix> {
    let sp = SparseParam::new(beta, r).map_err(to_py)?;
    Ok(PyMix {
        inner: distributions::sparse_calibration(n, &sp, gamma).map_err(to_py)?,
    })
}

#[pyfunction]
fn dense_calibration(n: u64, beta: f64, s: f64) -> PyResult<PyMix> {
    let dp = DenseParam::new(beta, s).map_err(to_py)?;
    Ok(PyMix {
        inner: distributions::dense_calibration(n, &dp).map_err(to_py)?,
    })
}

fn two_sample(x: Vec<f64>, y: Vec<f64>, dejitter: bool) -> PyResult<TwoSample> {
    let ts = TwoSample::new(x, y).map_err(to_py)?;
    Ok(if dejitter { ts.dejittered() } else { ts })
}

/// All four rank statistics of two samples.
#[pyfunction]
#[pyo3(signature = (x, y, dejitter = false))]
fn rank_statistics<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>, dejitter: bool) -> PyResult<Bound<'py, PyDict>> {
    let ts = two_sample(x, y, dejitter)?;
    let order = ts.pooled_order().map_err(to_py)?;
    let ks = order.ks();
    let d = PyDict::new(py);
    d.set_item("hc", order.hc())?;
    d.set_item("wilcoxon", order.wilcoxon())?;
    d.set_item("ks_d", ks.d)?;
    d.set_item("ks_lambda", ks.lambda)?;
    d.set_item("tailrun", order.tail_run())?;
    Ok(d)
}

#[pyfunction]
fn hc_stat(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    Ok(statistics::hc_stat(&two_sample(x, y, false)?).map_err(to_py)?.value)
}

#[pyfunction]
fn wilcoxon_u(x: Vec<f64>, y: Vec<f64>) -> PyResult<u64> {
    Ok(statistics::wilcoxon_u(&two_sample(x, y, false)?).map_err(to_py)?.value as u64)
}

/// Returns `(D, lambda)`.
#[pyfunction]
fn ks_one_sided(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let ks = statistics::ks_one_sided(&two_sample(x, y, false)?).map_err(to_py)?;
    Ok((ks.d, ks.lambda))
}

#[pyfunction]
fn tail_run(x: Vec<f64>, y: Vec<f64>) -> PyResult<u64> {
    Ok(statistics::tail_run(&two_sample(x, y, false)?).map_err(to_py)?.value as u64)
}

#[pyfunction]
fn lrt_stat(y: Vec<f64>, base: &PyGG, alt: &PyMix) -> PyResult<f64> {
    Ok(statistics::lrt_stat(&y, &base.inner, &alt.inner).map_err(to_py)?.value)
}

#[pyfunction]
fn wilcoxon_pvalue(u: u64, m: usize, n: usize) -> PyResult<f64> {
    Ok(calibration::wilcoxon_pvalue(u, m, n).map_err(to_py)?.p)
}

#[pyfunction]
fn ks_pvalue(lam: f64) -> PyResult<f64> {
    Ok(calibration::ks_pvalue(lam).map_err(to_py)?.p)
}

#[pyfunction]
fn tailrun_pvalue(l: usize, m: usize, n: usize) -> PyResult<f64> {
    Ok(calibration::tailrun_pvalue(l, m, n).map_err(to_py)?.p)
}

#[pyfunction]
fn tailrun_pvalue_randomized(l: usize, m: usize, n: usize, u: f64) -> PyResult<f64> {
    Ok(calibration::tailrun_pvalue_randomized(l, m, n, u).map_err(to_py)?.p)
}

#[pyfunction]
fn tailrun_null_pmf(m: usize, n: usize) -> PyResult<Vec<f64>> {
    calibration::tailrun_null_pmf(m, n).map_err(to_py)
}

#[pyfunction]
fn wilcoxon_exact_null(m: usize, n: usize) -> PyResult<Vec<f64>> {
    calibration::wilcoxon_exact_null(m, n).map_err(to_py)
}

/// Sorted Monte Carlo null draws of one statistic.
#[pyclass(name = "NullTable", module = "hcmix", frozen)]
struct PyNullTable {
    inner: calibration::NullTable,
}

#[pymethods]
impl PyNullTable {
    /// Simulates a table; the LRT needs `base` and `alt`.
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (statistic, m, n, reps, seed = 0, base = None, alt = None))]
    fn simulate(
        py: Python<'_>,
        statistic: &str,
        m: usize,
        n: usize,
        reps: usize,
        seed: u64,
        base: Option<PyRef<'_, PyGG>>,
        alt: Option<PyRef<'_, PyMix>>,
    ) -> PyResult<Self> {
        let kind = kind(statistic)?;
        let model = match (base, alt) {
            (Some(b), Some(a)) => Some(LrtModel {
                base: b.inner,
                alt: a.inner,
            }),
            _ => None,
        };
        let inner = py
            .detach(|| calibration::mc_null_table(kind, m, n, reps, seed, model))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: calibration::NullTable::load(path.as_ref()).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn statistic(&self) -> String {
        self.inner.statistic.to_string()
    }

    #[getter]
    fn reps(&self) -> usize {
        self.inner.reps()
    }

    #[getter]
    fn draws(&self) -> Vec<f64> {
        self.inner.draws.clone()
    }

    fn quantile(&self, q: f64) -> f64 {
        self.inner.quantile(q)
    }

    fn pvalue(&self, value: f64) -> f64 {
        calibration::mc_pvalue(value, &self.inner).p
    }
}

#[pyfunction]
fn detection_boundary_sparse(beta: f64, gamma: f64) -> f64 {
    theory::detection_boundary_sparse(&BoundaryQuery { beta, gamma })
}

#[pyfunction]
fn detection_boundary_dense(beta: f64, gamma: f64) -> f64 {
    theory::detection_boundary_dense(beta, gamma)
}

#[pyfunction]
fn lower_bound_integral(x_upper: f64, base: &PyGG, mu: f64) -> PyResult<f64> {
    theory::lower_bound_integral(x_upper, &base.inner, mu).map_err(to_py)
}

fn report<'py>(py: Python<'py>, r: &ConditionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("lhs", r.lhs)?;
    d.set_item("scale", r.scale)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("satisfied", format!("{:?}", r.satisfied).to_lowercase())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (t, n, base, alt, eta = 0.5))]
fn hc_conditions<'py>(py: Python<'py>, t: f64, n: f64, base: &PyGG, alt: &PyMix, eta: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    theory::hc_conditions(t, n, &base.inner, &alt.inner, eta)
        .map_err(to_py)?
        .iter()
        .map(|r| report(py, r))
        .collect()
}

#[pyfunction]
fn wilcoxon_condition<'py>(py: Python<'py>, n: f64, base: &PyGG, alt: &PyMix) -> PyResult<Bound<'py, PyDict>> {
    report(py, &theory::wilcoxon_condition(n, &base.inner, &alt.inner).map_err(to_py)?)
}

#[pyfunction]
fn ks_condition<'py>(py: Python<'py>, n: f64, base: &PyGG, alt: &PyMix) -> PyResult<Bound<'py, PyDict>> {
    report(py, &theory::ks_condition(n, &base.inner, &alt.inner).map_err(to_py)?)
}

/// TOML scenario for a figure preset.
#[pyfunction]
#[pyo3(signature = (name, scale = 0.1))]
fn preset_config(name: &str, scale: f64) -> PyResult<String> {
    let fig: Figure = name.parse().map_err(to_py)?;
    fig.config(scale).and_then(|c| c.to_toml()).map_err(to_py)
}

/// Runs a power grid from a TOML scenario; returns `(csv, json)`.
#[pyfunction]
#[pyo3(signature = (config_toml, threads = 0))]
fn run_power_grid(py: Python<'_>, config_toml: &str, threads: usize) -> PyResult<(String, String)> {
    let cfg = ScenarioConfig::from_toml(config_toml).map_err(to_py)?;
    let opts = RunOptions { threads, cache_dir: None };
    py.detach(|| {
        let curve = experiments::run_power_grid(&cfg, &opts)?;
        Ok((curve.to_csv(), curve.to_json()?))
    })
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "hcmix")]
fn hcmix_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGG>()?;
    m.add_class::<PyMix>()?;
    m.add_class::<PyNullTable>()?;
    m.add_function(wrap_pyfunction!(sparse_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(dense_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(rank_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(hc_stat, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_u, m)?)?;
    m.add_function(wrap_pyfunction!(ks_one_sided, m)?)?;
    m.add_function(wrap_pyfunction!(tail_run, m)?)?;
    m.add_function(wrap_pyfunction!(lrt_stat, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(ks_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(tailrun_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(tailrun_pvalue_randomized, m)?)?;
    m.add_function(wrap_pyfunction!(tailrun_null_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_exact_null, m)?)?;
    m.add_function(wrap_pyfunction!(detection_boundary_sparse, m)?)?;
    m.add_function(wrap_pyfunction!(detection_boundary_dense, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_integral, m)?)?;
    m.add_function(wrap_pyfunction!(hc_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_condition, m)?)?;
    m.add_function(wrap_pyfunction!(ks_condition, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_power_grid, m)?)?;
    Ok(())
}
