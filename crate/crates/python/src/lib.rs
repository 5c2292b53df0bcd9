//! Python bindings.

use enclosure_atlas_core::decomposition::{decompose as core_decompose, verify_decomposition, DecompositionReport};
use enclosure_atlas_core::identifiability::{nondegeneracy_check, uniqueness_cross_check};
use enclosure_atlas_core::io::{self, ModelFile, ReportFile};
use enclosure_atlas_core::linalg::{CMatrix, C64};
use enclosure_atlas_core::oqrw::{verify_oqrw_theorem, RateMatrix};
use enclosure_atlas_core::semigroup::{Dynamics, KrausChannel, LindbladModel};
use enclosure_atlas_core::{fixtures, identifiability::QndModel, Error, ErrorKind, Tolerances};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Analysis => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<C64>>, field: &str) -> PyResult<CMatrix> {
    io::MatrixData(rows).to_matrix(field).map_err(py_err)
}

fn from_matrix(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn tolerances(rank_tol: Option<f64>, residual_tol: Option<f64>) -> PyResult<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(t) = rank_tol {
        tol.rank_tol = t;
    }
    if let Some(t) = residual_tol {
        tol.residual_tol = t;
    }
    tol.validate().map_err(py_err)?;
    Ok(tol)
}

/// A Lindblad model, Kraus channel, rate matrix, or QND model.
#[pyclass(module = "enclosure_atlas", frozen)]
struct Model(io::Model);

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (hamiltonian, jumps))]
    fn lindblad(hamiltonian: Vec<Vec<C64>>, jumps: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let h = to_matrix(hamiltonian, "hamiltonian")?;
        let jumps = jumps
            .into_iter()
            .enumerate()
            .map(|(k, l)| to_matrix(l, &format!("jumps[{k}]")))
            .collect::<PyResult<Vec<_>>>()?;
        let m = LindbladModel::new(h, jumps, &Tolerances::default()).map_err(py_err)?;
        Ok(Self(io::Model::Lindblad(m)))
    }

    #[staticmethod]
    fn kraus(operators: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let ops = operators
            .into_iter()
            .enumerate()
            .map(|(k, v)| to_matrix(v, &format!("kraus[{k}]")))
            .collect::<PyResult<Vec<_>>>()?;
        let c = KrausChannel::checked(ops, &Tolerances::default()).map_err(py_err)?;
        Ok(Self(io::Model::Kraus(c)))
    }

    #[staticmethod]
    fn rates(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let q = RateMatrix::from_rows(&rows, &Tolerances::default()).map_err(py_err)?;
        Ok(Self(io::Model::Rates(q)))
    }

    /// `amplitudes[j][a]` is the eigenvalue of jump `j` on pointer state `a`;
    /// the first `diffusive` channels are read out diffusively.
    #[staticmethod]
    #[pyo3(signature = (energies, amplitudes, diffusive = 0))]
    fn qnd(energies: Vec<f64>, amplitudes: Vec<Vec<C64>>, diffusive: usize) -> PyResult<Self> {
        let q = QndModel::new(energies, amplitudes, diffusive).map_err(py_err)?;
        Ok(Self(io::Model::Qnd(q)))
    }

    /// Parses a model file.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = ModelFile::parse(text).map_err(py_err)?;
        let tol = file.tolerances.unwrap_or_default();
        Ok(Self(file.to_model(&tol).map_err(py_err)?))
    }

    /// One of the built-in examples.
    #[staticmethod]
    fn example(name: &str) -> PyResult<Self> {
        Self::from_json(&example_json(name)?)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match &self.0 {
            io::Model::Lindblad(_) => "lindblad",
            io::Model::Kraus(_) => "kraus",
            io::Model::Rates(_) => "rates",
            io::Model::Qnd(_) => "qnd",
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        match &self.0 {
            io::Model::Lindblad(m) => m.dim(),
            io::Model::Kraus(c) => c.dim(),
            io::Model::Rates(q) => q.n(),
            io::Model::Qnd(q) => q.pointers(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Model(mode={:?}, dim={})", self.mode(), self.dim())
    }
}

impl Model {
    fn dynamics(&self) -> PyResult<Dynamics> {
        match &self.0 {
            io::Model::Lindblad(m) => Ok(Dynamics::Continuous(m.clone())),
            io::Model::Kraus(c) => Ok(Dynamics::Discrete(c.clone())),
            io::Model::Qnd(q) => Ok(Dynamics::Continuous(q.to_lindblad())),
            io::Model::Rates(_) => Err(PyValueError::new_err(
                "rate matrices are analyzed through verify_oqrw",
            )),
        }
    }
}

/// Enclosure decomposition of a model.
#[pyclass(module = "enclosure_atlas", frozen)]
struct Decomposition {
    report: DecompositionReport,
    dynamics: Dynamics,
}

#[pymethods]
impl Decomposition {
    #[getter]
    fn dim(&self) -> usize {
        self.report.dim
    }

    #[getter]
    fn shape(&self) -> String {
        self.report.shape()
    }

    #[getter]
    fn is_unique(&self) -> bool {
        self.report.is_unique
    }

    #[getter]
    fn transient_rank(&self) -> usize {
        self.report.transient.rank()
    }

    #[getter]
    fn recurrent_rank(&self) -> usize {
        self.report.recurrent.rank()
    }

    #[getter]
    fn transient_projector(&self) -> Vec<Vec<C64>> {
        from_matrix(self.report.transient.matrix())
    }

    #[getter]
    fn recurrent_projector(&self) -> Vec<Vec<C64>> {
        from_matrix(self.report.recurrent.matrix())
    }

    /// Dimensions of every minimal enclosure, singles first, then family members.
    #[getter]
    fn dimensions(&self) -> Vec<usize> {
        self.report.all_enclosures().iter().map(|e| e.dimension).collect()
    }

    /// Projectors of every minimal enclosure, in the order of `dimensions`.
    fn projectors(&self) -> Vec<Vec<Vec<C64>>> {
        self.report.all_enclosures().iter().map(|e| from_matrix(e.projector.matrix())).collect()
    }

    /// Extremal invariant states, in the order of `dimensions`.
    fn extremal_states(&self) -> Vec<Vec<Vec<C64>>> {
        self.report
            .all_enclosures()
            .iter()
            .map(|e| from_matrix(e.extremal_state.matrix()))
            .collect()
    }

    /// Number of enclosures in each degenerate family.
    #[getter]
    fn families(&self) -> Vec<usize> {
        self.report.families.iter().map(|f| f.members.len()).collect()
    }

    /// Partial isometry from member `source` to member `target` of family `family`.
    fn isometry(&self, family: usize, source: usize, target: usize) -> PyResult<Vec<Vec<C64>>> {
        self.report
            .families
            .get(family)
            .and_then(|f| f.isometry(source, target))
            .map(|i| from_matrix(&i.q))
            .ok_or_else(|| PyValueError::new_err("no such family member pair"))
    }

    #[getter]
    fn residuals(&self) -> std::collections::BTreeMap<String, f64> {
        self.report.residuals.clone()
    }

    /// Checks the block relations of the semigroup on random invariant states.
    fn verify(&self) -> PyResult<bool> {
        let v = verify_decomposition(&self.report, &self.dynamics, &self.report.tolerances).map_err(py_err)?;
        Ok(v.passed)
    }

    fn to_json(&self) -> String {
        let mut file = ReportFile::new("analyze", &self.report.tolerances, self.report.seed);
        file.decomposition = Some((&self.report).into());
        file.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Decomposition({})", self.report.shape())
    }
}

#[pyfunction]
#[pyo3(signature = (model, seed = 0, rank_tol = None, residual_tol = None))]
fn decompose(model: &Model, seed: u64, rank_tol: Option<f64>, residual_tol: Option<f64>) -> PyResult<Decomposition> {
    let tol = tolerances(rank_tol, residual_tol)?;
    let dynamics = model.dynamics()?;
    let report = core_decompose(&dynamics, seed, &tol).map_err(py_err)?;
    Ok(Decomposition { report, dynamics })
}

/// Compares the minimal open quantum random walk of a rate matrix with the
/// chain; returns `(passed, closed_classes, invariant_measures)`.
#[pyfunction]
#[pyo3(signature = (model, seed = 0))]
fn verify_oqrw(model: &Model, seed: u64) -> PyResult<(bool, Vec<Vec<usize>>, Vec<Vec<f64>>)> {
    let io::Model::Rates(q) = &model.0 else {
        return Err(PyValueError::new_err("verify_oqrw needs a rate matrix"));
    };
    let (cmp, _) = verify_oqrw_theorem(q, seed, &Tolerances::default()).map_err(py_err)?;
    Ok((cmp.passed, cmp.classes, cmp.measures))
}

/// Identifiability report as JSON. QND models use the non-degeneracy
/// criterion, Lindblad models the continuous one, channels the word search.
#[pyfunction]
#[pyo3(signature = (model, max_len = 6, seed = 0))]
fn identifiability(model: &Model, max_len: usize, seed: u64) -> PyResult<String> {
    let tol = Tolerances::default();
    let mut file = ReportFile::new("identifiability", &tol, seed);
    if let io::Model::Qnd(q) = &model.0 {
        let r = nondegeneracy_check(q, &tol);
        file.passed = r.overall;
        file.identifiability = Some(r);
        return Ok(file.to_json());
    }
    let (record, report) = uniqueness_cross_check(&model.dynamics()?, seed, max_len, &tol).map_err(py_err)?;
    file.passed = record.identifiability.overall;
    file.identifiability = Some(record.identifiability.clone());
    file.cross_check = Some(record);
    file.decomposition = Some((&report).into());
    Ok(file.to_json())
}

/// Names of the built-in examples.
#[pyfunction]
fn examples() -> Vec<&'static str> {
    fixtures::NAMES.to_vec()
}

/// Model file of a built-in example.
#[pyfunction]
fn example_json(name: &str) -> PyResult<String> {
    fixtures::fixture(name).map(|f| f.to_json()).ok_or_else(|| {
        PyValueError::new_err(format!("unknown example {name:?}; available: {}", fixtures::NAMES.join(", ")))
    })
}

#[pymodule]
fn enclosure_atlas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Model>()?;
    m.add_class::<Decomposition>()?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(verify_oqrw, m)?)?;
    m.add_function(wrap_pyfunction!(identifiability, m)?)?;
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(example_json, m)?)?;
    Ok(())
}
