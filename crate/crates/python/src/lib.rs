//! Python bindings: text in, text out, mirroring the CLI verbs.

use matchideal::lasserre::{lasserre_build, verify_numeric_certificate, NumericSosCertificate};
use matchideal::matching::{derive_zero, enumerate_perfect_matchings, DerivationCertificate, Method};
use matchideal::rational::format_rational;
use matchideal::tour::{tour_derive_zero, TourCertificate};
use matchideal::tsp::TspInstance;
use matchideal::{Error, Limits, Permutation, Polynomial};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::InternalInvariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Number of perfect matchings of `K_n`.
#[pyfunction]
fn count_matchings(n: usize) -> PyResult<usize> {
    Ok(enumerate_perfect_matchings(n, &Limits::default()).map_err(err)?.len())
}

/// Certificate text for `poly ≡ 0` over the perfect-matching ideal.
#[pyfunction]
#[pyo3(signature = (poly, n, method = "direct"))]
fn pm_derive(poly: &str, n: usize, method: &str) -> PyResult<String> {
    let f = Polynomial::parse(poly).map_err(err)?;
    let method: Method = method.parse().map_err(err)?;
    Ok(derive_zero(&f, n, method, &Limits::default()).map_err(err)?.to_text())
}

#[pyfunction]
fn pm_verify(cert: &str) -> PyResult<bool> {
    Ok(DerivationCertificate::parse(cert).map_err(err)?.verify())
}

#[pyfunction]
#[pyo3(signature = (poly, n, method = "direct"))]
fn tour_derive(poly: &str, n: usize, method: &str) -> PyResult<String> {
    let f = Polynomial::parse(poly).map_err(err)?;
    let method: Method = method.parse().map_err(err)?;
    Ok(tour_derive_zero(&f, n, method, &Limits::default()).map_err(err)?.to_text())
}

#[pyfunction]
fn tour_verify(cert: &str) -> PyResult<bool> {
    Ok(TourCertificate::parse(cert).map_err(err)?.verify())
}

/// Tour value as an exact rational string; `tour[i]` is the position of vertex `i+1`.
#[pyfunction]
fn tour_value(instance: &str, tour: Vec<usize>) -> PyResult<String> {
    let inst = TspInstance::parse(instance).map_err(err)?;
    let sigma = Permutation::from_images(tour).map_err(err)?;
    if sigma.len() != inst.n() {
        return Err(PyValueError::new_err("tour length differs from n"));
    }
    Ok(format_rational(&inst.tour_value(&sigma)))
}

/// `(basis size, moments, constraints)` of the level-`k` moment program.
#[pyfunction]
fn lasserre_summary(instance: &str, k: usize) -> PyResult<(usize, usize, usize)> {
    let inst = TspInstance::parse(instance).map_err(err)?;
    let prog = lasserre_build(&inst, k, &Limits::default()).map_err(err)?;
    Ok((prog.basis.len(), prog.moments.len(), prog.constraints.len()))
}

/// Checks a numeric SoS certificate; returns `(valid, bound)`.
#[pyfunction]
#[pyo3(signature = (instance, cert, tol = 1e-7))]
fn lasserre_verify(instance: &str, cert: &str, tol: f64) -> PyResult<(bool, String)> {
    let inst = TspInstance::parse(instance).map_err(err)?;
    let cert = NumericSosCertificate::parse(cert).map_err(err)?;
    let report = verify_numeric_certificate(&inst, &cert, tol).map_err(err)?;
    Ok((report.valid, format_rational(&report.bound)))
}

#[pymodule]
fn pymatchideal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(count_matchings, m)?)?;
    m.add_function(wrap_pyfunction!(pm_derive, m)?)?;
    m.add_function(wrap_pyfunction!(pm_verify, m)?)?;
    m.add_function(wrap_pyfunction!(tour_derive, m)?)?;
    m.add_function(wrap_pyfunction!(tour_verify, m)?)?;
    m.add_function(wrap_pyfunction!(tour_value, m)?)?;
    m.add_function(wrap_pyfunction!(lasserre_summary, m)?)?;
    m.add_function(wrap_pyfunction!(lasserre_verify, m)?)?;
    Ok(())
}
