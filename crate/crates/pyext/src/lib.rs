//! Python bindings for the crobstruct engine: exact Gaussian-rational
//! arithmetic, surface parsing, Segre graph solving, marked-tree
//! enumeration, and the obstruction certificates. Report-producing methods
//! return JSON strings matching the CLI's `--output json` payloads.

use crobstruct::exactnum::GaussianRational as GqInner;
use crobstruct::frontend::{self, certificate_json, parse_surface};
use crobstruct::obstruction::{
    algdep_scan, certify_nonembeddability, degree_certificate, determinant_criterion,
    invariant_lower_bound, low_order_obstruction, q_name,
};
use crobstruct::segre::{IndexSubset, SurfaceSpec};
use crobstruct::series::multiindex_total;
use crobstruct::trees::enumerate_marked_trees;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::json;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An exact element of Q(i), the coefficient field of the engine.
#[pyclass(name = "GaussianRational", from_py_object)]
#[derive(Clone)]
struct PyGq {
    inner: GqInner,
}

#[pymethods]
impl PyGq {
    #[new]
    fn new(literal: &str) -> PyResult<Self> {
        Ok(PyGq {
            inner: literal.parse().map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("GaussianRational('{}')", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __add__(&self, rhs: &PyGq) -> PyGq {
        PyGq {
            inner: &self.inner + &rhs.inner,
        }
    }

    fn __sub__(&self, rhs: &PyGq) -> PyGq {
        PyGq {
            inner: &self.inner - &rhs.inner,
        }
    }

    fn __mul__(&self, rhs: &PyGq) -> PyGq {
        PyGq {
            inner: &self.inner * &rhs.inner,
        }
    }

    fn __truediv__(&self, rhs: &PyGq) -> PyResult<PyGq> {
        Ok(PyGq {
            inner: self.inner.checked_div(&rhs.inner).map_err(err)?,
        })
    }

    fn __eq__(&self, rhs: &PyGq) -> bool {
        self.inner == rhs.inner
    }

    fn conj(&self) -> PyGq {
        PyGq {
            inner: self.inner.conj(),
        }
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// A surface loaded from `.srf` text, with the engine's operations.
#[pyclass(name = "Surface")]
struct PySurface {
    spec: SurfaceSpec,
}

fn to_multiindices(alphas: Vec<Vec<u32>>, n: usize) -> PyResult<Vec<Vec<u32>>> {
    for a in &alphas {
        if a.len() != n {
            return Err(PyValueError::new_err(format!(
                "multiindex {a:?} must have {n} components"
            )));
        }
    }
    Ok(alphas)
}

#[pymethods]
impl PySurface {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let file = parse_surface(text).map_err(err)?;
        Ok(PySurface {
            spec: file.to_spec().map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::from_text(&text)
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.blocks.n
    }

    #[getter]
    fn codim(&self) -> usize {
        self.spec.blocks.d
    }

    #[getter]
    fn order(&self) -> u32 {
        self.spec.order
    }

    /// Segre graph components w = Q(z, chi, tau) as display strings.
    fn solve_q(&self) -> PyResult<Vec<String>> {
        let q = self.spec.segre_solve(self.spec.order).map_err(err)?;
        Ok(q.iter().map(|s| s.to_string()).collect())
    }

    /// Jets of Q at 0 on the Segre variety of 0, through the structural
    /// route (tree formula / recursion), as {multiindex: series} JSON.
    fn q_jets(&self, k: u32) -> PyResult<String> {
        let jets = self.spec.q_jets_tree(k, self.spec.order).map_err(err)?;
        let mut obj = serde_json::Map::new();
        for (comp, form) in jets.iter().enumerate() {
            for alpha in crobstruct::segre::multiindices_of_exact_total(self.spec.blocks.n, k) {
                let tuple = crobstruct::multilinear::multiindex_to_tuple(&alpha);
                let series = form.coeff(&tuple);
                obj.insert(
                    q_name(comp, &alpha, self.spec.blocks.d),
                    json!(series.to_string()),
                );
            }
        }
        Ok(serde_json::Value::Object(obj).to_string())
    }

    #[pyo3(signature = (m, alphas, order=None))]
    fn certify(&self, m: usize, alphas: Vec<Vec<u32>>, order: Option<u32>) -> PyResult<String> {
        let alphas = to_multiindices(alphas, self.spec.blocks.n)?;
        let report = certify_nonembeddability(&self.spec, m, &alphas, order).map_err(err)?;
        let runs: Vec<serde_json::Value> = report.runs.iter().map(certificate_json).collect();
        Ok(json!({
            "surface": report.surface,
            "m": report.m,
            "verdict": report.verdict.to_string(),
            "unconditional": report.unconditional,
            "runs": runs,
        })
        .to_string())
    }

    fn degree_certificate(&self, k: u32) -> PyResult<String> {
        let r = degree_certificate(&self.spec, k).map_err(err)?;
        Ok(json!({
            "k": r.k,
            "target_degree": r.target_degree,
            "actual_max_r_degree": r.actual_max_r_degree,
            "coarse_bound": r.coarse_bound.to_string(),
            "certified": r.certified,
        })
        .to_string())
    }

    #[pyo3(signature = (kmax, order=None))]
    fn invariants(&self, kmax: u32, order: Option<u32>) -> PyResult<String> {
        let r = invariant_lower_bound(&self.spec, kmax, order).map_err(err)?;
        let levels: Vec<serde_json::Value> = r
            .levels
            .iter()
            .map(|lv| json!({"k": lv.k, "rtilde_lower_bound": lv.rtilde}))
            .collect();
        Ok(json!({
            "surface": r.surface,
            "levels": levels,
            "sum_lower_bound": r.sum,
            "single_chart": r.single_chart,
        })
        .to_string())
    }

    #[pyo3(signature = (indices, alphas, order=None))]
    fn low_order_obstruction(
        &self,
        indices: Vec<usize>,
        alphas: Vec<Vec<u32>>,
        order: Option<u32>,
    ) -> PyResult<String> {
        let zero_based: Vec<usize> = indices
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| PyValueError::new_err("indices are 1-based"))
            })
            .collect::<PyResult<_>>()?;
        let subset = IndexSubset::new(self.spec.blocks.n, zero_based).map_err(err)?;
        let alphas = to_multiindices(alphas, self.spec.blocks.n)?;
        let cert = low_order_obstruction(&self.spec, &subset, &alphas, order).map_err(err)?;
        Ok(certificate_json(&cert).to_string())
    }

    fn determinant_criterion(
        &self,
        alphas: Vec<Vec<u32>>,
        betas: Vec<Vec<u32>>,
    ) -> PyResult<String> {
        let alphas = to_multiindices(alphas, self.spec.blocks.n)?;
        let betas = to_multiindices(betas, self.spec.blocks.n)?;
        let (det, _) = determinant_criterion(&self.spec, &alphas, &betas).map_err(err)?;
        Ok(json!({"det": det.to_string(), "obstructs": !det.is_zero()}).to_string())
    }

    #[pyo3(signature = (alphas, degree, order=None))]
    fn algdep(&self, alphas: Vec<Vec<u32>>, degree: u32, order: Option<u32>) -> PyResult<String> {
        let alphas = to_multiindices(alphas, self.spec.blocks.n)?;
        let probe = order.unwrap_or(self.spec.order);
        let mut functions = Vec::new();
        for a in &alphas {
            let k = multiindex_total(a).max(1);
            let jets = self.spec.q_jets_from_solver(k, probe).map_err(err)?;
            let series = jets[0].coeff(&crobstruct::multilinear::multiindex_to_tuple(a));
            functions.push((q_name(0, a, self.spec.blocks.d), series));
        }
        let cert = algdep_scan(&functions, degree, order).map_err(err)?;
        Ok(certificate_json(&cert).to_string())
    }
}

/// Marked rooted trees with total mark k: (count, canonical serializations).
#[pyfunction]
fn marked_trees(k: u32) -> PyResult<(usize, Vec<String>)> {
    if k == 0 {
        return Err(PyValueError::new_err("k must be positive"));
    }
    let trees = enumerate_marked_trees(k);
    let ser = trees.iter().map(|t| t.serialize()).collect();
    Ok((trees.len(), ser))
}

/// Runs a CLI command line; returns (exit_code, output).
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String) {
    let r = frontend::run(&args);
    (r.exit_code, r.output)
}

#[pymodule]
fn crobstruct_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGq>()?;
    m.add_class::<PySurface>()?;
    m.add_function(wrap_pyfunction!(marked_trees, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
