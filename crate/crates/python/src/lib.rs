//! Python module `oflp`: single transfers, launch mass ratios and the
//! scenario pipeline (cost matrix, facility location, refinement).

use std::path::PathBuf;

use oflp_core::elements::{KeplerianElements, UnitSystem, MU_EARTH_KM3_S2};
use oflp_core::launch::{mass_ratio as core_mass_ratio, LaunchParams};
use oflp_core::pipeline::{prepare, Prepared};
use oflp_core::qlaw::{propagate_transfer, QlawParams, Spacecraft};
use oflp_core::scenario::Scenario;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: oflp_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(path: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Prepared> {
    let mut s = Scenario::load(&path).map_err(value_err)?;
    if let Some(dir) = output_dir {
        s.output_dir = dir;
    }
    prepare(&s).map_err(value_err)
}

fn kep(x: [f64; 5]) -> PyResult<KeplerianElements> {
    KeplerianElements::from_degrees(x[0], x[1], x[2], x[3], x[4], 0.0).map_err(value_err)
}

/// Q-law transfer between `(a [DU], e, i, raan, argp)` orbits, angles in degrees.
#[pyfunction]
#[pyo3(signature = (from_oe, to_oe, thrust_n=1.74, isp_s=1790.0, mass_kg=500.0, du_km=26560.0))]
fn transfer<'py>(
    py: Python<'py>,
    from_oe: [f64; 5],
    to_oe: [f64; 5],
    thrust_n: f64,
    isp_s: f64,
    mass_kg: f64,
    du_km: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = Spacecraft::new(thrust_n, isp_s, mass_kg).map_err(value_err)?;
    let units = UnitSystem::new(du_km, MU_EARTH_KM3_S2).map_err(value_err)?;
    let params = QlawParams::with_min_periapsis(units.km_to_du(6878.0));
    let r = propagate_transfer(&kep(from_oe)?, &kep(to_oe)?, &sc, &params, &units).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("tof_days", r.tof_days)?;
    d.set_item("dm_kg", r.dm_kg)?;
    d.set_item("converged", r.converged)?;
    d.set_item("q_history", r.q_history)?;
    Ok(d)
}

/// Launch and insertion mass ratios of a slot with semimajor axis in km.
#[pyfunction]
#[pyo3(signature = (a_km, e, r0_km=6578.0, isp_l_s=457.0, isp_d_s=320.0))]
fn mass_ratio<'py>(py: Python<'py>, a_km: f64, e: f64, r0_km: f64, isp_l_s: f64, isp_d_s: f64) -> PyResult<Bound<'py, PyDict>> {
    let lp = LaunchParams {
        r0_km,
        isp_l_s,
        isp_d_s,
        m_l_max_kg: f64::INFINITY,
        mu_km3_s2: MU_EARTH_KM3_S2,
    };
    let r = core_mass_ratio(a_km, e, &lp).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("z", r.z)?;
    d.set_item("z_d", r.z_d)?;
    d.set_item("z_l", r.z_l)?;
    Ok(d)
}

/// Number of slots the scenario's grid produces.
#[pyfunction]
fn slot_count(scenario: PathBuf) -> PyResult<usize> {
    Ok(Scenario::load(&scenario).map_err(value_err)?.grid.slot_count())
}

/// Round-trip propellant matrix, `None` for infeasible pairs; rows are clients.
#[pyfunction]
#[pyo3(signature = (scenario, workers=1, output_dir=None))]
fn cost_matrix(py: Python<'_>, scenario: PathBuf, workers: usize, output_dir: Option<PathBuf>) -> PyResult<Vec<Vec<Option<f64>>>> {
    let prep = load(scenario, output_dir)?;
    let (m, _) = py.detach(|| prep.cost_matrix(workers)).map_err(value_err)?;
    Ok((0..m.n_clients)
        .map(|i| {
            (0..m.n_slots)
                .map(|j| {
                    let c = m.get(i, j);
                    c.feasible.then_some(c.dm_total)
                })
                .collect()
        })
        .collect())
}

/// Solves the scenario and returns the solution document as a JSON string.
#[pyfunction]
#[pyo3(signature = (scenario, workers=1, output_dir=None))]
fn solve(py: Python<'_>, scenario: PathBuf, workers: usize, output_dir: Option<PathBuf>) -> PyResult<String> {
    let prep = load(scenario, output_dir)?;
    let doc = py
        .detach(|| {
            let (cost, _) = prep.cost_matrix(workers)?;
            let model = prep.model(&cost, prep.scenario.multipliers)?;
            Ok::<_, oflp_core::Error>(prep.solution_document(&cost, &prep.solve(&model)))
        })
        .map_err(|e| PyRuntimeError::new_err(prep.describe_error(&e)))?;
    serde_json::to_string_pretty(&doc).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Adds every function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(transfer, m)?)?;
    m.add_function(wrap_pyfunction!(mass_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(slot_count, m)?)?;
    m.add_function(wrap_pyfunction!(cost_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}

#[pymodule]
fn oflp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
