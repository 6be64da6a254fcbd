//! Python bindings: ensembles, Haar sampling, Fourier blocks, moment-operator gaps and the
//! purity probe. Matrices cross the boundary as nested lists of Python complex numbers and
//! structured results as plain dicts.

use haarflow::ensemble::{load_ensemble, EnsembleDocument, GateEnsemble, LocalRule};
use haarflow::haar;
use haarflow::moments::{self, MomentOptions, DEFAULT_MOMENT_SAMPLES};
use haarflow::numkernel::{Complex64, ComplexMatrix, SeededRng, UnitaryMatrix};
use haarflow::peterweyl::{self, FourierMethod, Spin, DEFAULT_RESOLUTION};
use haarflow::probes::{self, ProbeOptions, DEFAULT_BASELINE_SAMPLES};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pythonize::{depythonize, pythonize};
use serde::Serialize;

create_exception!(
    haarflow,
    HaarflowError,
    PyException,
    "Any failure reported by the library."
);
create_exception!(
    haarflow,
    NumericalError,
    HaarflowError,
    "Non-convergence or insufficient signal."
);

struct Failure(haarflow::Error);

impl From<haarflow::Error> for Failure {
    fn from(e: haarflow::Error) -> Self {
        Self(e)
    }
}

impl From<Failure> for PyErr {
    fn from(Failure(e): Failure) -> Self {
        if e.is_numerical() {
            NumericalError::new_err(e.to_string())
        } else {
            HaarflowError::new_err(e.to_string())
        }
    }
}

type PyResultOf<T> = Result<T, Failure>;

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    Ok(pythonize(py, value)?.unbind())
}

fn rows_of(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResultOf<ComplexMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(haarflow::Error::Shape("matrix rows have different lengths".into()).into());
    }
    Ok(ComplexMatrix::from_vec(n, cols, rows.into_iter().flatten().collect())?)
}

fn spin(twice_j: u32) -> Spin {
    Spin::from_twice(twice_j)
}

/// A probability measure on U(D).
#[pyclass(name = "Ensemble", module = "haarflow", frozen)]
struct PyEnsemble(GateEnsemble);

#[pymethods]
impl PyEnsemble {
    /// Parses an ensemble JSON document.
    #[staticmethod]
    fn from_json(document: &str) -> PyResultOf<Self> {
        Ok(Self(load_ensemble(document)?))
    }

    /// Builds an ensemble from a document given as a dict.
    #[staticmethod]
    fn from_dict(document: &Bound<'_, PyAny>) -> PyResult<Self> {
        let doc: EnsembleDocument = depythonize(document)?;
        Ok(Self(GateEnsemble::from_document(&doc).map_err(Failure)?))
    }

    /// Finite ensemble from `(weight, matrix)` pairs.
    #[staticmethod]
    fn discrete(atoms: Vec<(f64, Vec<Vec<Complex64>>)>) -> PyResultOf<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(w, rows)| Ok((w, UnitaryMatrix::try_new(matrix_from_rows(rows)?, 1e-9)?)))
            .collect::<PyResultOf<Vec<_>>>()?;
        Ok(Self(GateEnsemble::from_atoms(atoms)?))
    }

    #[staticmethod]
    fn haar(dim: usize) -> Self {
        Self(GateEnsemble::haar(dim))
    }

    #[staticmethod]
    fn gaussian_packet(sigma: f64) -> PyResultOf<Self> {
        Ok(Self(GateEnsemble::gaussian_packet(sigma)?))
    }

    /// Random two-qubit gates on `qubits` qubits; `rule` is `haar_su4`, `cnot_plus_su2` or `diagonal_phase`.
    #[staticmethod]
    fn two_local(qubits: usize, rule: &Bound<'_, PyAny>) -> PyResult<Self> {
        let rule: LocalRule = depythonize(rule)?;
        Ok(Self(GateEnsemble::two_local(qubits, rule).map_err(Failure)?))
    }

    /// Ensemble closed under inversion: each atom paired with its adjoint at half weight.
    fn symmetrized(&self) -> PyResultOf<Self> {
        Ok(Self(self.0.symmetrize()?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_document()).map_err(|e| HaarflowError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn is_inverse_closed(&self) -> bool {
        self.0.is_inverse_closed()
    }

    /// Product of `depth` sampled gates, newest gate on the left.
    fn sample_circuit(&self, depth: usize, seed: u64) -> Vec<Vec<Complex64>> {
        rows_of(&self.0.sample_circuit(depth, &mut SeededRng::new(seed, 0)).product)
    }

    fn __repr__(&self) -> String {
        format!("Ensemble({})", self.0.descriptor())
    }
}

/// Haar-random unitary of dimension `dim`.
#[pyfunction]
#[pyo3(signature = (dim, seed=0))]
fn sample_haar(dim: usize, seed: u64) -> PyResultOf<Vec<Vec<Complex64>>> {
    if dim == 0 {
        return Err(haarflow::Error::Usage("dimension must be positive".into()).into());
    }
    Ok(rows_of(haar::sample_haar(dim, &mut SeededRng::new(seed, 0)).matrix()))
}

/// Wigner matrix D^j(g) for a 2×2 unitary `g`, with j = twice_j / 2.
#[pyfunction]
fn wigner_d(twice_j: u32, g: Vec<Vec<Complex64>>) -> PyResultOf<Vec<Vec<Complex64>>> {
    Ok(rows_of(&peterweyl::wigner_d(spin(twice_j), &matrix_from_rows(g)?)?))
}

/// Dimension of the U(D) irrep labelled by (k, l).
#[pyfunction]
fn irrep_dim(d: u64, k: u64, l: u64) -> PyResultOf<u64> {
    Ok(peterweyl::irrep_dim(d, k, l)?)
}

/// Fourier blocks up to spin `twice_jmax / 2`. `method` is `finite_sum`, `quadrature` or `monte_carlo`.
#[pyfunction]
#[pyo3(signature = (ensemble, twice_jmax, method="finite_sum", samples=DEFAULT_MOMENT_SAMPLES, depth=1, seed=0, resolution=DEFAULT_RESOLUTION))]
#[allow(clippy::too_many_arguments)]
fn fourier_blocks(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    twice_jmax: u32,
    method: &str,
    samples: usize,
    depth: usize,
    seed: u64,
    resolution: usize,
) -> PyResult<Py<PyAny>> {
    let method = match method {
        "finite_sum" => FourierMethod::FiniteSum,
        "quadrature" => FourierMethod::Quadrature { resolution },
        "monte_carlo" => FourierMethod::MonteCarlo { samples, depth, seed },
        other => return Err(HaarflowError::new_err(format!("unknown method `{other}`"))),
    };
    let labels: Vec<Spin> = Spin::up_to(spin(twice_jmax)).collect();
    let blocks = peterweyl::fourier_blocks(&ensemble.0, &labels, method).map_err(Failure)?;
    let list = pyo3::types::PyList::empty(py);
    for b in &blocks {
        let entry = pyo3::types::PyDict::new(py);
        entry.set_item("twice_j", b.label.twice_j)?;
        entry.set_item("matrix", rows_of(&b.matrix))?;
        entry.set_item("norm_ratio", peterweyl::norm_ratio(b).map_err(Failure)?)?;
        entry.set_item("std_error", b.std_error)?;
        list.append(entry)?;
    }
    Ok(list.into_any().unbind())
}

/// Deflated norm and asymptotic rate of the t-th moment operator.
#[pyfunction]
#[pyo3(signature = (ensemble, t, samples=DEFAULT_MOMENT_SAMPLES, seed=0))]
fn spectral_gap(py: Python<'_>, ensemble: &PyEnsemble, t: usize, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let m = moments::build_moment_operator(&ensemble.0, t, &MomentOptions { samples, seed }).map_err(Failure)?;
    to_py(py, &moments::spectral_gap(&m).map_err(Failure)?)
}

/// `(m, ‖M^m − P‖)` for each depth.
#[pyfunction]
#[pyo3(signature = (ensemble, t, depths, samples=DEFAULT_MOMENT_SAMPLES, seed=0))]
fn distance_to_haar(
    ensemble: &PyEnsemble,
    t: usize,
    depths: Vec<usize>,
    samples: usize,
    seed: u64,
) -> PyResultOf<Vec<(usize, f64)>> {
    let m = moments::build_moment_operator(&ensemble.0, t, &MomentOptions { samples, seed })?;
    Ok(moments::distance_to_haar(&m, &depths)?)
}

/// Subsystem purity of circuit-evolved |0…0⟩ kept on `cut`, with its Haar baseline and fit.
#[pyfunction]
#[pyo3(signature = (ensemble, qubits, cut, depths, trials, seed=0, baseline_samples=DEFAULT_BASELINE_SAMPLES))]
#[allow(clippy::too_many_arguments)]
fn purity_probe(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    qubits: usize,
    cut: Vec<usize>,
    depths: Vec<usize>,
    trials: usize,
    seed: u64,
    baseline_samples: usize,
) -> PyResult<Py<PyAny>> {
    let opts = ProbeOptions {
        trials,
        seed,
        baseline_samples,
    };
    let series = probes::purity_probe(&ensemble.0, qubits, &cut, &depths, &opts).map_err(Failure)?;
    let out = to_py(py, &series)?;
    let fit = series.fit().ok();
    out.bind(py).set_item("fit", to_py(py, &fit)?)?;
    Ok(out)
}

/// Log-linear fit of `(m, value, stderr)` triples; returns rate, offset, r_squared and window.
#[pyfunction]
fn fit_exponential(py: Python<'_>, points: Vec<(usize, f64, f64)>) -> PyResult<Py<PyAny>> {
    to_py(py, &probes::fit_exponential(&points).map_err(Failure)?)
}

#[pymodule(name = "haarflow")]
fn haarflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", haarflow::report::VERSION)?;
    m.add("HaarflowError", m.py().get_type::<HaarflowError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(sample_haar, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_d, m)?)?;
    m.add_function(wrap_pyfunction!(irrep_dim, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(distance_to_haar, m)?)?;
    m.add_function(wrap_pyfunction!(purity_probe, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    Ok(())
}
