//! Python bindings: states, distances, protocol sessions and experiments.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qbc_core::analysis::{self, Experiment, McParams};
use qbc_core::linalg::{self, CMatrix, DensityMatrix, StateVector};
use qbc_core::protocol::{self as proto, AliceStrategySpec, BobStrategySpec, Knowledge, ProtocolConfig};
use qbc_core::rng::session_rng;
use qbc_core::states::{self, BellLabel, Bit, MeasurementBasis, Sign, Spin};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bit(b: u8) -> PyResult<Bit> {
    Bit::try_from(b).map_err(err)
}

fn spin(s: u8) -> PyResult<Spin> {
    match s {
        0 => Ok(Spin::Up),
        1 => Ok(Spin::Down),
        _ => Err(err(format!("outcome must be 0 (up) or 1 (down), got {s}"))),
    }
}

fn parse_bob(name: &str, k: usize) -> PyResult<BobStrategySpec> {
    Ok(match name {
        "honest" => BobStrategySpec::Honest,
        "guess-test-set" => BobStrategySpec::GuessTestSet,
        "measure-z" => BobStrategySpec::MeasureZ,
        "quantum" => BobStrategySpec::quantum_uniform(k),
        _ => return Err(err(format!("unknown receiver strategy `{name}`"))),
    })
}

fn parse_alice(name: &str, committed: Bit, knowledge: &str) -> PyResult<AliceStrategySpec> {
    let target = committed.flip();
    let knowledge = match knowledge {
        "oracle" => Knowledge::Oracle,
        "blind" => Knowledge::Blind,
        _ => return Err(err(format!("unknown knowledge mode `{knowledge}`"))),
    };
    Ok(match name {
        "honest" => AliceStrategySpec::Honest,
        "relabel" => AliceStrategySpec::ClassicalRelabel { target },
        "purification" => AliceStrategySpec::Purification { target, knowledge },
        _ => return Err(err(format!("unknown committer strategy `{name}`"))),
    })
}

fn square(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Amplitudes of a Bell pair `|b±⟩` in the basis `↑↑, ↑↓, ↓↑, ↓↓`.
#[pyfunction]
fn bell(b: u8, sign: &str) -> PyResult<Vec<Complex64>> {
    let sign = match sign {
        "+" => Sign::Plus,
        "-" => Sign::Minus,
        _ => return Err(err("sign must be '+' or '-'")),
    };
    Ok(states::bell(BellLabel::new(bit(b)?, sign)).amplitudes().iter().copied().collect())
}

/// Trace distance between two density matrices given as nested lists.
#[pyfunction]
fn trace_distance(rho0: Vec<Vec<Complex64>>, rho1: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let a = square(rho0)?;
    let b = square(rho1)?;
    let r0 = DensityMatrix::new(vec![a.nrows()], a).map_err(err)?;
    let r1 = DensityMatrix::new(vec![b.nrows()], b).map_err(err)?;
    linalg::trace_distance(&r0, &r1).map_err(err)
}

/// Unitary on the `cut` factors taking `psi0` to `psi1`.
#[pyfunction]
fn uhlmann_unitary(
    psi0: Vec<Complex64>,
    psi1: Vec<Complex64>,
    dims: Vec<usize>,
    cut: Vec<usize>,
) -> PyResult<Vec<Vec<Complex64>>> {
    let a = StateVector::new(dims.clone(), psi0).map_err(err)?;
    let b = StateVector::new(dims, psi1).map_err(err)?;
    linalg::uhlmann_unitary(&a, &b, &cut).map(|u| rows(&u)).map_err(err)
}

/// Runs one session and returns its transcript as JSON.
#[pyfunction]
#[pyo3(signature = (n, m, b, seed=0, alice="honest", bob="honest", k=2, knowledge="oracle"))]
#[allow(clippy::too_many_arguments)]
fn run_protocol(n: usize, m: usize, b: u8, seed: u64, alice: &str, bob: &str, k: usize, knowledge: &str) -> PyResult<String> {
    let b = bit(b)?;
    let cfg = ProtocolConfig { n, m, b, seed, alice: parse_alice(alice, b, knowledge)?, bob: parse_bob(bob, k)? };
    let t = proto::run_protocol(&cfg).map_err(err)?;
    serde_json::to_string(&t).map_err(err)
}

/// Distance between the receiver's conditional holdings for the two bits,
/// for one draw of his private randomness.
#[pyfunction]
#[pyo3(signature = (n, bob="honest", seed=0, shuffle=true, k=2))]
fn concealing_distance(n: usize, bob: &str, seed: u64, shuffle: bool, k: usize) -> PyResult<f64> {
    let spec = parse_bob(bob, k)?;
    analysis::concealing_check(n, &spec, shuffle, &mut session_rng(seed)).map(|r| r.distance).map_err(err)
}

/// `(trace distance, spin-sum total variation, weight-class spread)` of the
/// permutation-averaged commitments.
#[pyfunction]
fn prelim_one(n: usize) -> PyResult<(f64, f64, f64)> {
    let r = analysis::prelim_one_report(n).map_err(err)?;
    Ok((r.trace_distance_full, r.tv_distance_sz, r.max_class_spread))
}

/// Conditional distance after xy measurements at `thetas` with `outcomes`
/// (0 = up, 1 = down).
#[pyfunction]
fn prelim_two(thetas: Vec<f64>, outcomes: Vec<u8>) -> PyResult<f64> {
    let bases: Vec<MeasurementBasis> = thetas.into_iter().map(MeasurementBasis::xy).collect();
    let outcomes = outcomes.into_iter().map(spin).collect::<PyResult<Vec<_>>>()?;
    analysis::prelim_two_check(&bases, &outcomes).map_err(err)
}

#[pyclass(frozen, get_all, name = "Estimate")]
struct PyEstimate {
    point: f64,
    ci_low: f64,
    ci_high: f64,
    successes: u64,
    trials: u64,
    exact_reference: Option<f64>,
}

#[pymethods]
impl PyEstimate {
    fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    fn __repr__(&self) -> String {
        let reference = self.exact_reference.map_or("None".to_string(), |r| r.to_string());
        format!(
            "Estimate(point={}, ci=[{}, {}], successes={}, trials={}, exact_reference={reference})",
            self.point, self.ci_low, self.ci_high, self.successes, self.trials
        )
    }
}

/// Success rate of a named experiment with its 99% Wilson interval.
#[pyfunction]
#[pyo3(signature = (experiment, n, m, trials, seed=0, jobs=1, b=None))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    py: Python<'_>,
    experiment: &str,
    n: usize,
    m: usize,
    trials: u64,
    seed: u64,
    jobs: usize,
    b: Option<u8>,
) -> PyResult<PyEstimate> {
    let exp: Experiment = experiment.parse().map_err(err)?;
    let params = McParams { b: b.map(bit).transpose()?, ..McParams::new(n, m) };
    let e = py.detach(|| analysis::monte_carlo(exp, &params, trials, seed, jobs)).map_err(err)?;
    Ok(PyEstimate {
        point: e.point,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        successes: e.successes,
        trials: e.trials,
        exact_reference: e.exact_reference,
    })
}

#[pymodule]
fn qbc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(bell, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(uhlmann_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(concealing_distance, m)?)?;
    m.add_function(wrap_pyfunction!(prelim_one, m)?)?;
    m.add_function(wrap_pyfunction!(prelim_two, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names() {
        assert_eq!(parse_bob("quantum", 3).unwrap(), BobStrategySpec::quantum_uniform(3));
        assert_eq!(
            parse_alice("purification", Bit::Zero, "blind").unwrap(),
            AliceStrategySpec::Purification { target: Bit::One, knowledge: Knowledge::Blind }
        );
    }

    #[test]
    fn matrices_round_trip() {
        let m = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)], vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)]];
        assert_eq!(rows(&square(m.clone()).unwrap()), m);
    }
}
