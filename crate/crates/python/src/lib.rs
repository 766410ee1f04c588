//! Python bindings. Rationals cross the boundary as `"p/q"` strings and bit
//! strings as `"0101"`.

use std::path::Path;
use std::str::FromStr;

use num::BigRational;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use satlang::bits::BitString;
use satlang::datagen::{gen_hard3sat_seeded, Example};
use satlang::formula::{dimacs_decode, dimacs_encode, enc, random_formula, Cnf3Formula, DimacsOptions, Lambda};
use satlang::language::{self, FormulaClass, SatWeightedLanguage, SeparationProbe};
use satlang::rebm::nce_loss_from_scores;
use satlang::rng::rng_for;
use satlang::seqmodel::{self, load_checkpoint, sat_sequence, AnyModel, ArModel};
use satlang::witness;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits(text: &str) -> PyResult<BitString> {
    BitString::from_str(text).map_err(err)
}

fn rational(text: &str) -> PyResult<BigRational> {
    BigRational::from_str(text.trim()).map_err(err)
}

/// A propositional formula over `A1..Aj`.
#[pyclass(frozen)]
struct Formula {
    inner: satlang::formula::Formula,
}

#[pymethods]
impl Formula {
    /// Random formula mentioning every variable.
    #[staticmethod]
    #[pyo3(signature = (vars, seed, depth=4))]
    fn random(vars: usize, seed: u64, depth: u32) -> Self {
        Self { inner: random_formula(&mut rng_for(seed, &[]), vars, depth) }
    }

    /// Parses the `#`-separated 3-CNF form.
    #[staticmethod]
    #[pyo3(signature = (text, tolerant=false))]
    fn from_dimacs(text: &str, tolerant: bool) -> PyResult<Self> {
        let opts = DimacsOptions { tolerate_duplicates: tolerant, ..Default::default() };
        Ok(Self { inner: dimacs_decode(text, opts).map_err(err)?.to_formula() })
    }

    fn to_dimacs(&self) -> Option<String> {
        Cnf3Formula::from_formula(&self.inner).map(|c| dimacs_encode(&c))
    }

    #[getter]
    fn var_count(&self) -> usize {
        self.inner.var_count()
    }

    fn count_satisfying(&self) -> PyResult<u64> {
        self.inner.count_satisfying().map_err(err)
    }

    fn evaluate(&self, assignment: &str) -> PyResult<bool> {
        self.inner.evaluate(&bits(assignment)?).map_err(err)
    }

    fn add_one(&self) -> Self {
        Self { inner: self.inner.add_one() }
    }

    fn add_one_and_blow_up(&self, k: u32) -> PyResult<Self> {
        Ok(Self { inner: self.inner.add_one_and_blow_up(k).map_err(err)? })
    }

    /// Self-delimiting binary encoding.
    fn enc(&self) -> String {
        enc(&self.inner).to_string()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// Weighted language of encodings followed by satisfying assignments.
#[pyclass(frozen)]
struct Language {
    inner: SatWeightedLanguage,
}

#[pymethods]
impl Language {
    /// `epsilon=None` gives the members-only language.
    #[new]
    #[pyo3(signature = (epsilon=None, cnf3=false))]
    fn new(epsilon: Option<&str>, cnf3: bool) -> PyResult<Self> {
        let lang = match epsilon {
            Some(e) => SatWeightedLanguage::full_support(rational(e)?),
            None => SatWeightedLanguage::members_only(),
        };
        let class = if cnf3 { FormulaClass::Cnf3 } else { FormulaClass::Any };
        Ok(Self { inner: lang.with_class(class) })
    }

    fn is_member(&self, x: &str) -> PyResult<bool> {
        Ok(self.inner.is_member(&bits(x)?))
    }

    fn weight(&self, x: &str) -> PyResult<String> {
        Ok(self.inner.weight(&bits(x)?).to_string())
    }

    fn prefix_mass(&self, prefix: &str) -> PyResult<String> {
        Ok(self.inner.prefix_mass(&bits(prefix)?).map_err(err)?.total.to_string())
    }

    /// `[p(0), p(1), p($)]` after `prefix`.
    fn local_distribution(&self, prefix: &str) -> PyResult<Vec<String>> {
        let d = self.inner.local_distribution(&bits(prefix)?).map_err(err)?;
        Ok(d.iter().map(ToString::to_string).collect())
    }

    /// Local-probability probe after the blow-up, as a dict of strings and
    /// flags. `lambda_squared` is a rational such as `"2"`.
    #[pyo3(signature = (formula, lambda_squared, k=None))]
    fn separation_gap(&self, py: Python<'_>, formula: &Formula, lambda_squared: &str, k: Option<u32>) -> PyResult<Py<PyAny>> {
        let lambda = Lambda::from_square(rational(lambda_squared)?).map_err(err)?;
        let probe = match k {
            Some(k) => SeparationProbe { lambda, k },
            None => SeparationProbe::for_lambda(lambda),
        };
        let g = language::separation_gap(&self.inner, &formula.inner, &probe).map_err(err)?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("k", g.k)?;
        d.set_item("p0", g.p0.to_string())?;
        d.set_item("bound", g.bound.to_string())?;
        d.set_item("unsat_value", g.unsat_value.to_string())?;
        d.set_item("ratio_floor", g.ratio_floor.to_string())?;
        d.set_item("decided_sat", g.decided_sat)?;
        d.set_item("robust", g.robust)?;
        Ok(d.into_any().unbind())
    }
}

/// Rational recurrent network that computes the 3-CNF language weight on
/// strings of one fixed length.
#[pyclass(frozen)]
struct WitnessRnn {
    inner: witness::WitnessRnn,
}

#[pymethods]
impl WitnessRnn {
    #[new]
    fn new(n: usize) -> PyResult<Self> {
        Ok(Self { inner: witness::WitnessRnn::build(n).map_err(err)? })
    }

    fn eval(&self, x: &str) -> PyResult<String> {
        Ok(self.inner.eval(&bits(x)?).map_err(err)?.to_string())
    }
}

/// Hard random 3-CNF in the `#`-separated form.
#[pyfunction]
fn gen_hard3sat(vars: usize, seed: u64) -> PyResult<String> {
    Ok(dimacs_encode(&gen_hard3sat_seeded(vars, seed).map_err(err)?))
}

/// Autoregressive model loaded from a `train-ar` checkpoint.
#[pyclass(frozen)]
struct Model {
    inner: AnyModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: load_checkpoint(Path::new(path)).map_err(err)? })
    }

    /// `log p(target | formula)`, where `target` satisfies `add_one(formula)`:
    /// all zeros, or `1` followed by a satisfier of the formula.
    fn log_prob(&self, dimacs: &str, target: &str) -> PyResult<f64> {
        let cnf = dimacs_decode(dimacs, DimacsOptions::default()).map_err(err)?;
        let count = cnf.count_satisfying().map_err(err)?;
        let e = Example { formula: cnf, target: bits(target)?, count };
        let seq = sat_sequence(&e);
        if seq.context.iter().any(|&t| t as usize >= self.inner.vocab().context) {
            return Err(err("formula uses variables beyond the model vocabulary"));
        }
        Ok(seqmodel::sequence_log_prob(&self.inner, &seq))
    }
}

/// NCE loss `logsumexp(g) - g_data` over the data score and noise scores.
#[pyfunction]
fn nce_loss(g_data: f64, g_noise: Vec<f64>) -> f64 {
    nce_loss_from_scores(g_data, &g_noise)
}

#[pymodule]
#[pyo3(name = "satlang")]
fn satlang_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Formula>()?;
    m.add_class::<Language>()?;
    m.add_class::<WitnessRnn>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(gen_hard3sat, m)?)?;
    m.add_function(wrap_pyfunction!(nce_loss, m)?)?;
    Ok(())
}
