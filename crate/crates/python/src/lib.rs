use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dodlab::analysis::{self, CflSearch, LambdaChoice, MeshLayout, OptimizerGrid};
use dodlab::norms;
use dodlab::{AdvectionConfig, CutMesh, Error, GlobalOperator, NodeKind, PenaltyConfig, RKMethod};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::InvalidMesh(_) | Error::InvalidRule(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn kind(s: &str) -> PyResult<NodeKind> {
    s.parse().map_err(to_py)
}

fn penalty(lambda_c: Option<f64>) -> PyResult<PenaltyConfig> {
    match lambda_c {
        Some(l) => PenaltyConfig::new(l).map_err(to_py),
        None => Ok(PenaltyConfig::disabled()),
    }
}

#[pyclass(name = "QuadratureRule", frozen)]
struct PyRule {
    inner: dodlab::QuadratureRule,
}

#[pymethods]
impl PyRule {
    #[new]
    fn new(kind_name: &str, p: usize) -> PyResult<Self> {
        let inner = dodlab::QuadratureRule::new(kind(kind_name)?, p).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().tag()
    }

    fn __repr__(&self) -> String {
        format!("QuadratureRule('{}', {})", self.inner.kind().tag(), self.inner.degree())
    }
}

/// Assembled semidiscrete operator on `(0, 1)`.
///
/// `alpha=None` gives the uncut mesh with `n_background` cells and
/// `lambda_c=None` switches the stabilization off.
#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: GlobalOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (kind_name, p, alpha=None, lambda_c=Some(1.0), n_background=50, cut_cell=25, speed=1.0))]
    fn new(
        kind_name: &str,
        p: usize,
        alpha: Option<f64>,
        lambda_c: Option<f64>,
        n_background: usize,
        cut_cell: usize,
        speed: f64,
    ) -> PyResult<Self> {
        let rule = dodlab::QuadratureRule::for_scheme(kind(kind_name)?, p).map_err(to_py)?;
        let mesh = match alpha {
            Some(a) => CutMesh::new((0.0, 1.0), n_background, cut_cell, a),
            None => CutMesh::uniform((0.0, 1.0), n_background),
        }
        .map_err(to_py)?;
        let adv = AdvectionConfig::new(speed).map_err(to_py)?;
        let inner = GlobalOperator::assemble(&mesh, &rule, adv, penalty(lambda_c)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.inner.n_dofs()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.mass().to_vec()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.mesh().mapped_nodes(self.inner.rule())
    }

    fn apply(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&u).map_err(to_py)
    }

    /// Row-major dense matrix.
    fn dense(&self) -> PyResult<Vec<Vec<f64>>> {
        let d = self.inner.dense().map_err(to_py)?;
        Ok(d.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// `‖L‖_M`.
    fn norm(&self) -> PyResult<f64> {
        norms::global_operator_norm(&self.inner).map_err(to_py)
    }

    fn block_norms(&self) -> PyResult<HashMap<String, f64>> {
        let rep = norms::block_norm_report(&self.inner).map_err(to_py)?;
        Ok(rep.entries.into_iter().collect())
    }

    /// `(max eigenvalue of ML + LᵀM, ‖ML‖)`.
    fn semiboundedness(&self) -> PyResult<(f64, f64)> {
        let s = norms::semiboundedness(&self.inner).map_err(to_py)?;
        Ok((s.max_eigenvalue, s.scale))
    }

    /// Integrates to `t_final` and returns `(times, energies, final_state)`.
    #[pyo3(signature = (u0, dt, t_final, method="ssprk33", record_every=1))]
    fn evolve(
        &self,
        u0: Vec<f64>,
        dt: f64,
        t_final: f64,
        method: &str,
        record_every: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let m: RKMethod = method.parse().map_err(to_py)?;
        let tr = dodlab::evolve(&m, &self.inner, &u0.into(), dt, t_final, record_every).map_err(to_py)?;
        Ok((tr.times, tr.energies, tr.final_state.into_vec()))
    }
}

#[pyfunction]
fn eta(alpha: f64, lambda_c: f64) -> PyResult<f64> {
    Ok(PenaltyConfig::new(lambda_c).map_err(to_py)?.eta(alpha))
}

#[pyfunction]
fn optimized_lambda(kind_name: &str, p: usize) -> PyResult<Option<f64>> {
    Ok(analysis::optimized_lambda(kind(kind_name)?, p))
}

/// Returns `(lambda_star, worst_alpha, minmax_norm)`.
#[pyfunction]
#[pyo3(signature = (kind_name, p, n_lambda=51, n_alpha=51))]
fn optimize_lambda(py: Python<'_>, kind_name: &str, p: usize, n_lambda: usize, n_alpha: usize) -> PyResult<(f64, f64, f64)> {
    let k = kind(kind_name)?;
    let grid = OptimizerGrid {
        n_lambda,
        n_alpha,
        ..OptimizerGrid::default()
    };
    let r = py.detach(|| analysis::optimize_lambda(k, p, &grid)).map_err(to_py)?;
    Ok((r.lambda_star, r.worst_alpha, r.minmax_norm))
}

/// Returns `(sharp_cfl, unstable_cfl)`.
#[pyfunction]
#[pyo3(signature = (method, kind_name, p, alpha, lambda_c="1.0", t_final=100.0, lo=0.01, hi=2.0, rel_tol=1e-3))]
#[allow(clippy::too_many_arguments)]
fn sharp_cfl_search(
    py: Python<'_>,
    method: &str,
    kind_name: &str,
    p: usize,
    alpha: f64,
    lambda_c: &str,
    t_final: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> PyResult<(f64, f64)> {
    let m: RKMethod = method.parse().map_err(to_py)?;
    let l: LambdaChoice = lambda_c.parse().map_err(to_py)?;
    let mut s = CflSearch::new(m, kind(kind_name)?, p, alpha, l);
    s.t_final = t_final;
    s.bracket = (lo, hi);
    s.rel_tol = rel_tol;
    s.layout = MeshLayout::default();
    let r = py.detach(|| analysis::sharp_cfl_search(&s)).map_err(to_py)?;
    Ok((r.sharp_cfl, r.unstable_cfl))
}

#[pymodule]
fn dodlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRule>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(optimized_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_cfl_search, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
