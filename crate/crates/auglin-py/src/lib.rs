//! Python bindings: the main types (spectra, augmentations) and operations
//! (sampling, estimators, metrics, bound evaluators, presets) as a native
//! extension module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nalgebra::{DMatrix, DVector};

use auglin::augment;
use auglin::bounds;
use auglin::estimate;
use auglin::exp;
use auglin::metrics;
use auglin::model;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("matrix needs at least one row"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn to_vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

/// Diagonal data covariance as a descending eigenvalue sequence.
#[pyclass(name = "Spectrum")]
#[derive(Clone)]
struct PySpectrum {
    inner: model::Spectrum,
}

#[pymethods]
impl PySpectrum {
    #[staticmethod]
    fn isotropic(p: usize) -> PyResult<Self> {
        Ok(Self { inner: model::Spectrum::isotropic(p).map_err(err)? })
    }

    #[staticmethod]
    fn geometric(gamma: f64, p: usize) -> PyResult<Self> {
        Ok(Self { inner: model::Spectrum::geometric(gamma, p).map_err(err)? })
    }

    #[staticmethod]
    fn geometric_with_ratio(ratio: f64, p: usize) -> PyResult<Self> {
        Ok(Self { inner: model::Spectrum::geometric_with_ratio(ratio, p).map_err(err)? })
    }

    #[staticmethod]
    fn bilevel(a: f64, b: f64, split: usize, p: usize) -> PyResult<Self> {
        Ok(Self { inner: model::Spectrum::bilevel(a, b, split, p).map_err(err)? })
    }

    #[staticmethod]
    fn explicit(eigenvalues: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: model::Spectrum::explicit(eigenvalues).map_err(err)? })
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(p={}, top={:.4})", self.inner.dim(), self.inner.eigenvalues()[0])
    }
}

/// An augmentation family with parameters.
#[pyclass(name = "Augmentation")]
#[derive(Clone)]
struct PyAugmentation {
    inner: augment::Augmentation,
}

#[pymethods]
impl PyAugmentation {
    #[staticmethod]
    fn gaussian_noise(variance: f64) -> Self {
        Self { inner: augment::Augmentation::gaussian_noise(variance) }
    }

    #[staticmethod]
    fn correlated_noise(w: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::correlated_noise(to_matrix(w)?).map_err(err)? })
    }

    #[staticmethod]
    fn mask_unbiased(beta: f64) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::mask_unbiased(beta).map_err(err)? })
    }

    #[staticmethod]
    fn mask_biased(beta: f64) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::mask_biased(beta).map_err(err)? })
    }

    #[staticmethod]
    fn mask_nonuniform(betas: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::mask_nonuniform(betas).map_err(err)? })
    }

    #[staticmethod]
    fn cutout(k: usize) -> Self {
        Self { inner: augment::Augmentation::cutout(k) }
    }

    #[staticmethod]
    #[pyo3(signature = (beta, variance, mu = 0.0))]
    fn salt_pepper(beta: f64, variance: f64, mu: f64) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::salt_pepper(beta, mu, variance).map_err(err)? })
    }

    #[staticmethod]
    fn rotation(angle_deg: f64) -> PyResult<Self> {
        Ok(Self { inner: augment::Augmentation::rotation(angle_deg).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (spectrum = None))]
    fn group_mix(spectrum: Option<PySpectrum>) -> Self {
        Self { inner: augment::Augmentation::group_mix(spectrum.map(|s| s.inner)) }
    }

    #[getter]
    fn is_unbiased(&self) -> bool {
        self.inner.is_unbiased()
    }

    fn __repr__(&self) -> String {
        format!("Augmentation({})", self.inner.label())
    }
}

#[pyfunction]
#[pyo3(signature = (spectrum, n, seed, latent = "gaussian"))]
fn sample_covariates(spectrum: &PySpectrum, n: usize, seed: u64, latent: &str) -> PyResult<Vec<Vec<f64>>> {
    let latent = match latent {
        "gaussian" => model::LatentDistribution::Gaussian,
        "rademacher" => model::LatentDistribution::Rademacher,
        "uniform" => model::LatentDistribution::UniformScaled,
        other => return Err(PyValueError::new_err(format!("unknown latent family '{other}'"))),
    };
    Ok(from_matrix(&model::sample_covariates(&spectrum.inner, latent, n, seed)))
}

#[pyfunction]
fn regression_labels(x: Vec<Vec<f64>>, theta_star: Vec<f64>, sigma_eps: f64, seed: u64) -> PyResult<Vec<f64>> {
    let x = to_matrix(x)?;
    let y = model::gen_regression_labels(
        &x,
        &to_vector(theta_star),
        sigma_eps,
        model::LatentDistribution::Gaussian,
        seed,
    );
    Ok(y.iter().cloned().collect())
}

#[pyfunction]
fn classification_labels(x: Vec<Vec<f64>>, theta_star: Vec<f64>, nu_star: f64, seed: u64) -> PyResult<Vec<f64>> {
    let x = to_matrix(x)?;
    let y = model::gen_classification_labels(&x, &to_vector(theta_star), nu_star, seed).map_err(err)?;
    Ok(y.iter().cloned().collect())
}

#[pyfunction]
fn sparse_signal(spectrum: &PySpectrum, t: usize) -> PyResult<Vec<f64>> {
    let sig = model::make_sparse_signal(&spectrum.inner, t).map_err(err)?;
    Ok(sig.theta.iter().cloned().collect())
}

#[pyfunction]
fn isotropic_signal(p: usize, seed: u64) -> Vec<f64> {
    model::SignalModel::isotropic_random(p, seed).theta.iter().cloned().collect()
}

#[pyfunction]
fn draw_augmented(aug: &PyAugmentation, x: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let gx = augment::draw_augmented(&aug.inner, &to_matrix(x)?, seed).map_err(err)?;
    Ok(from_matrix(&gx))
}

#[pyfunction]
fn empirical_cov_operator(aug: &PyAugmentation, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_matrix(&augment::empirical_cov_operator(&aug.inner, &to_matrix(x)?).map_err(err)?))
}

#[pyfunction]
fn expected_cov_operator(aug: &PyAugmentation, spectrum: &PySpectrum) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_matrix(&augment::expected_cov_operator(&aug.inner, &spectrum.inner).map_err(err)?))
}

#[pyfunction]
fn delta_g(aug: &PyAugmentation, x: Vec<Vec<f64>>, spectrum: &PySpectrum) -> PyResult<f64> {
    augment::delta_g(&aug.inner, &to_matrix(x)?, &spectrum.inner).map_err(err)
}

#[pyfunction]
fn solve_aerm(x: Vec<Vec<f64>>, y: Vec<f64>, aug: &PyAugmentation) -> PyResult<Vec<f64>> {
    let est = estimate::solve_aerm(&to_matrix(x)?, &to_vector(y), &aug.inner).map_err(err)?;
    Ok(est.theta.iter().cloned().collect())
}

#[pyfunction]
fn solve_aerm_deterministic(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    aug: &PyAugmentation,
    spectrum: &PySpectrum,
) -> PyResult<Vec<f64>> {
    let est = estimate::solve_aerm_deterministic(&to_matrix(x)?, &to_vector(y), &aug.inner, &spectrum.inner)
        .map_err(err)?;
    Ok(est.theta.iter().cloned().collect())
}

#[pyfunction]
fn solve_ridge(x: Vec<Vec<f64>>, y: Vec<f64>, lambda: f64) -> PyResult<Vec<f64>> {
    let est = estimate::solve_ridge(&to_matrix(x)?, &to_vector(y), lambda).map_err(err)?;
    Ok(est.theta.iter().cloned().collect())
}

#[pyfunction]
fn min_norm_lsq(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    let est = estimate::solve_min_norm(&to_matrix(x)?, &to_vector(y)).map_err(err)?;
    Ok(est.theta.iter().cloned().collect())
}

#[pyfunction]
fn solve_precomputed(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    aug: &PyAugmentation,
    copies: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let est =
        estimate::solve_precomputed(&to_matrix(x)?, &to_vector(y), &aug.inner, copies, seed).map_err(err)?;
    Ok(est.theta.iter().cloned().collect())
}

#[pyfunction]
fn mse(theta_hat: Vec<f64>, theta_star: Vec<f64>, spectrum: &PySpectrum) -> f64 {
    metrics::mse(&to_vector(theta_hat), &to_vector(theta_star), &spectrum.inner)
}

#[pyfunction]
fn decompose_mse<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    theta_star: Vec<f64>,
    spectrum: &PySpectrum,
    aug: &PyAugmentation,
) -> PyResult<Bound<'py, PyDict>> {
    let d = metrics::decompose_mse(&to_matrix(x)?, &to_vector(y), &to_vector(theta_star), &spectrum.inner, &aug.inner)
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("bias", d.bias)?;
    out.set_item("variance", d.variance)?;
    out.set_item("approx_error", d.approx_error)?;
    out.set_item("total_mse", d.total_mse)?;
    Ok(out)
}

#[pyfunction]
fn survival_contamination(theta_hat: Vec<f64>, spectrum: &PySpectrum, t: usize) -> (f64, f64) {
    metrics::survival_contamination(&to_vector(theta_hat), &spectrum.inner, t)
}

#[pyfunction]
fn poe_closed_form(theta_hat: Vec<f64>, spectrum: &PySpectrum, t: usize) -> PyResult<f64> {
    metrics::poe_closed_form(&to_vector(theta_hat), &spectrum.inner, t).map_err(err)
}

#[pyfunction]
fn poe_monte_carlo(
    theta_hat: Vec<f64>,
    theta_star: Vec<f64>,
    spectrum: &PySpectrum,
    n_test: usize,
    seed: u64,
) -> f64 {
    metrics::poe_monte_carlo(
        &to_vector(theta_hat),
        &to_vector(theta_star),
        &spectrum.inner,
        model::LatentDistribution::Gaussian,
        n_test,
        seed,
    )
}

#[pyfunction]
fn effective_ranks(eigenvalues: Vec<f64>, c: f64, n: usize, k: usize) -> PyResult<(f64, f64)> {
    metrics::effective_ranks(&eigenvalues, c, n, k).map_err(err)
}

#[pyfunction]
fn aug_transformed<'py>(
    py: Python<'py>,
    spectrum: &PySpectrum,
    theta_star: Vec<f64>,
    aug: &PyAugmentation,
) -> PyResult<Bound<'py, PyDict>> {
    let at = metrics::aug_transformed(&spectrum.inner, &to_vector(theta_star), &aug.inner).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("lambda_aug", at.lambda_aug)?;
    out.set_item("theta_aug_sorted", at.theta_aug_sorted.iter().cloned().collect::<Vec<f64>>())?;
    out.set_item("perm", at.perm)?;
    out.set_item("sigma_bar", at.sigma_bar)?;
    out.set_item("kappa", at.kappa)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (spectrum, theta_star, aug, n, delta_g, sigma_eps, k1 = None, k2 = None))]
#[allow(clippy::too_many_arguments)]
fn regression_bound<'py>(
    py: Python<'py>,
    spectrum: &PySpectrum,
    theta_star: Vec<f64>,
    aug: &PyAugmentation,
    n: usize,
    delta_g: f64,
    sigma_eps: f64,
    k1: Option<usize>,
    k2: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let theta = to_vector(theta_star);
    let at = metrics::aug_transformed(&spectrum.inner, &theta, &aug.inner).map_err(err)?;
    let report = bounds::regression_bound(
        &at,
        n,
        k1,
        k2,
        delta_g,
        spectrum.inner.weighted_norm(&theta),
        sigma_eps,
        &bounds::CondNumbers::Unit,
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("bias_bound", report.bias_bound)?;
    out.set_item("variance_bound", report.variance_bound)?;
    out.set_item("approx_bound", report.approx_bound)?;
    out.set_item("k1", report.k1)?;
    out.set_item("k2", report.k2)?;
    out.set_item("constants_note", report.constants_note)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (spectrum, theta_star, aug, t, n, nu_star, k = None, l = 1.0, sigma_z = 1.0))]
#[allow(clippy::too_many_arguments)]
fn classification_bounds<'py>(
    py: Python<'py>,
    spectrum: &PySpectrum,
    theta_star: Vec<f64>,
    aug: &PyAugmentation,
    t: usize,
    n: usize,
    nu_star: f64,
    k: Option<usize>,
    l: f64,
    sigma_z: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let theta = to_vector(theta_star);
    let at = metrics::aug_transformed(&spectrum.inner, &theta, &aug.inner).map_err(err)?;
    let report = bounds::classification_bounds(&at, t, k, n, nu_star, l, sigma_z).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("su_lower", report.su_lower)?;
    out.set_item("su_upper", report.su_upper)?;
    out.set_item("cn_lower", report.cn_lower)?;
    out.set_item("cn_upper", report.cn_upper)?;
    out.set_item("k", report.k)?;
    out.set_item("poe_bound", report.poe_bound)?;
    Ok(out)
}

#[pyfunction]
fn list_presets() -> Vec<(String, String)> {
    exp::list_presets().into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[pyfunction]
#[pyo3(signature = (name, seed = 0, overrides = None))]
fn run_preset(
    py: Python<'_>,
    name: &str,
    seed: u64,
    overrides: Option<Vec<(String, String)>>,
) -> PyResult<(Vec<String>, Vec<Vec<PyObject>>)> {
    let table = exp::run_preset(name, &overrides.unwrap_or_default(), seed).map_err(err)?;
    let rows = table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| -> PyResult<PyObject> {
                    Ok(match cell {
                        exp::Cell::Num(v) => v.into_pyobject(py)?.into_any().unbind(),
                        exp::Cell::Text(s) => s.into_pyobject(py)?.into_any().unbind(),
                    })
                })
                .collect::<PyResult<Vec<_>>>()
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((table.columns.clone(), rows))
}

#[pymodule]
fn auglin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyAugmentation>()?;
    m.add_function(wrap_pyfunction!(sample_covariates, m)?)?;
    m.add_function(wrap_pyfunction!(regression_labels, m)?)?;
    m.add_function(wrap_pyfunction!(classification_labels, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_signal, m)?)?;
    m.add_function(wrap_pyfunction!(isotropic_signal, m)?)?;
    m.add_function(wrap_pyfunction!(draw_augmented, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_cov_operator, m)?)?;
    m.add_function(wrap_pyfunction!(expected_cov_operator, m)?)?;
    m.add_function(wrap_pyfunction!(delta_g, m)?)?;
    m.add_function(wrap_pyfunction!(solve_aerm, m)?)?;
    m.add_function(wrap_pyfunction!(solve_aerm_deterministic, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(min_norm_lsq, m)?)?;
    m.add_function(wrap_pyfunction!(solve_precomputed, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_mse, m)?)?;
    m.add_function(wrap_pyfunction!(survival_contamination, m)?)?;
    m.add_function(wrap_pyfunction!(poe_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(poe_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(effective_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(aug_transformed, m)?)?;
    m.add_function(wrap_pyfunction!(regression_bound, m)?)?;
    m.add_function(wrap_pyfunction!(classification_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    Ok(())
}
