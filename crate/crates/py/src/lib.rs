//! Python bindings: scenario loading, drops, propagation helpers, single
//! snapshots, campaigns and paired comparisons.
//!
//! Results come back as plain dicts and lists.

// `!(x > y)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use greencell::campaign::{self, CampaignConfig};
use greencell::metrics::{self, CdfPoint, PopulationFilter, RunSummary};
use greencell::powerctl::{PowerControlProblem, PowerControlResult, PowerLimits, SolverOptions};
use greencell::propagation::{self, AntennaPattern};
use greencell::scenario::{
    self as sc, Combining, MobileStation, PathLossModel, Point, ScenarioError, Service,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn combining(name: &str) -> PyResult<Combining> {
    name.parse().map_err(value_err)
}

/// A validated scenario.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: sc::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        sc::load_scenario(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        sc::load_scenario_file(path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn sector_ids(&self) -> Vec<String> {
        self.inner.sectors().map(|(_, s)| s.id.clone()).collect()
    }

    #[getter]
    fn green_ids(&self) -> Vec<String> {
        self.inner.greens.iter().map(|g| g.id.clone()).collect()
    }

    fn without_greens(&self) -> Self {
        Self {
            inner: self.inner.without_greens(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({} sites, {} sectors, {} greens)",
            self.inner.sites.len(),
            self.inner.sector_count(),
            self.inner.greens.len()
        )
    }
}

/// Lists the violations in a scenario document as `(path, message)` pairs;
/// empty when the document is valid.
#[pyfunction]
fn validate(text: &str) -> PyResult<Vec<(String, String)>> {
    match sc::load_scenario(text) {
        Ok(_) => Ok(Vec::new()),
        Err(ScenarioError::Invalid(v)) => Ok(v.into_iter().map(|v| (v.path, v.message)).collect()),
        Err(e) => Err(value_err(e)),
    }
}

fn mobile_dict<'py>(py: Python<'py>, m: &MobileStation) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("id", m.id)?;
    d.set_item("x", m.position.x)?;
    d.set_item("y", m.position.y)?;
    d.set_item("indoor", m.indoor)?;
    d.set_item("building", m.building)?;
    d.set_item(
        "service",
        match m.service {
            Service::Voice => "voice",
            Service::Data => "data",
        },
    )?;
    d.set_item("sinr_target_db", m.sinr_target_db)?;
    Ok(d)
}

#[pyfunction]
fn drop_mobiles<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mobiles = sc::drop_mobiles(&scenario.inner, seed).map_err(value_err)?;
    mobiles.iter().map(|m| mobile_dict(py, m)).collect()
}

/// Log-distance path loss in dB.
#[pyfunction]
#[pyo3(signature = (distance_m, pl0_db=128.1, d0_m=1000.0, exponent=3.76))]
fn path_loss(distance_m: f64, pl0_db: f64, d0_m: f64, exponent: f64) -> f64 {
    propagation::path_loss(
        &PathLossModel {
            pl0_db,
            d0_m,
            exponent,
        },
        distance_m,
    )
}

/// Antenna gain in dBi at `angle_deg` off boresight; omni when
/// `theta_3db_deg` is `None`.
#[pyfunction]
#[pyo3(signature = (angle_deg, gain_dbi=15.0, theta_3db_deg=Some(65.0), front_to_back_db=20.0))]
fn antenna_gain(
    angle_deg: f64,
    gain_dbi: f64,
    theta_3db_deg: Option<f64>,
    front_to_back_db: f64,
) -> f64 {
    let pattern = match theta_3db_deg {
        Some(t) => AntennaPattern::sector(gain_dbi, t, front_to_back_db),
        None => AntennaPattern::omni(gain_dbi),
    };
    propagation::antenna_gain(&pattern, angle_deg)
}

fn result_dict<'py>(py: Python<'py>, r: &PowerControlResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tx_power_dbm", r.tx_power_dbm.clone())?;
    d.set_item("sinr_db", r.sinr_db.clone())?;
    d.set_item("outage", r.outage.clone())?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Solves closed-loop power control on raw gain tables.
#[pyfunction]
#[pyo3(signature = (gain_db, noise_dbm, branches, targets_db, p_min_dbm=-50.0, p_max_dbm=24.0,
                    processing_gain_db=0.0, combining="mrc"))]
#[allow(clippy::too_many_arguments)]
fn solve_power_control<'py>(
    py: Python<'py>,
    gain_db: Vec<Vec<f64>>,
    noise_dbm: Vec<f64>,
    branches: Vec<Vec<usize>>,
    targets_db: Vec<f64>,
    p_min_dbm: f64,
    p_max_dbm: f64,
    processing_gain_db: f64,
    combining: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = self::combining(combining)?;
    let points = noise_dbm.len();
    let shape_ok = gain_db.len() == branches.len()
        && gain_db.len() == targets_db.len()
        && gain_db.iter().all(|row| row.len() == points)
        && branches
            .iter()
            .all(|b| !b.is_empty() && b.iter().all(|r| *r < points));
    if !shape_ok {
        return Err(PyValueError::new_err(
            "gain rows, branch lists and targets must agree with the receive points",
        ));
    }
    if !(p_min_dbm < p_max_dbm) {
        return Err(PyValueError::new_err("p_min_dbm must be below p_max_dbm"));
    }
    let problem = PowerControlProblem::from_parts(
        &gain_db,
        &noise_dbm,
        branches,
        targets_db,
        PowerLimits {
            min_dbm: p_min_dbm,
            max_dbm: p_max_dbm,
        },
        processing_gain_db,
        mode,
    );
    result_dict(py, &problem.solve(&SolverOptions::default()))
}

/// Drops, builds channels and solves one snapshot.
#[pyfunction]
#[pyo3(signature = (scenario, seed, combining=None))]
fn run_snapshot<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: u64,
    combining: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match combining {
        Some(c) => self::combining(c)?,
        None => scenario.inner.radio.combining,
    };
    let snap = py
        .detach(|| campaign::run_snapshot(&scenario.inner, seed, mode, &SolverOptions::default()))
        .map_err(value_err)?;
    let d = result_dict(py, &snap.result)?;
    let mobiles: PyResult<Vec<_>> = snap.mobiles.iter().map(|m| mobile_dict(py, m)).collect();
    d.set_item("mobiles", mobiles?)?;
    d.set_item("serving", snap.association.serving.clone())?;
    Ok(d)
}

fn cdf_pairs(cdf: &[CdfPoint]) -> Vec<(f64, f64)> {
    cdf.iter().map(|p| (p.power_dbm, p.cum_frac)).collect()
}

/// Empirical CDF of transmit powers as `(power_dbm, cum_frac)` pairs.
#[pyfunction]
fn tx_power_cdf(samples: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    metrics::tx_power_cdf(&samples)
        .map(|c| cdf_pairs(&c))
        .map_err(value_err)
}

#[allow(clippy::too_many_arguments)]
fn config(
    scenario: &sc::Scenario,
    seed: u64,
    snapshots: usize,
    combining: Option<&str>,
    target_dbm: f64,
    filter_center: Option<(f64, f64)>,
    filter_radius_m: Option<f64>,
    indoor_only: bool,
) -> PyResult<CampaignConfig> {
    if snapshots == 0 {
        return Err(PyValueError::new_err("snapshots must be at least 1"));
    }
    let filter = match (filter_center, filter_radius_m) {
        (None, None) if !indoor_only => None,
        (center, radius) => Some(PopulationFilter {
            center: center.map_or(Point::new(0.0, 0.0), |(x, y)| Point::new(x, y)),
            radius_m: radius.unwrap_or(if center.is_some() {
                300.0
            } else {
                f64::INFINITY
            }),
            indoor_only,
        }),
    };
    Ok(CampaignConfig {
        seed,
        snapshots,
        combining: match combining {
            Some(c) => self::combining(c)?,
            None => scenario.radio.combining,
        },
        filter,
        target_dbm,
        solver: SolverOptions::default(),
    })
}

fn summary_dict<'py>(py: Python<'py>, s: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("samples", s.samples)?;
    d.set_item("mean_dbm", s.mean_dbm)?;
    d.set_item("median_dbm", s.median_dbm)?;
    d.set_item("target_dbm", s.target_dbm)?;
    d.set_item("frac_below_target", s.frac_below_target)?;
    d.set_item("outage_fraction", s.outage_fraction)?;
    d.set_item("unconverged_snapshots", s.unconverged_snapshots)?;
    d.set_item("snapshots", s.snapshots)?;
    Ok(d)
}

/// Runs a Monte Carlo campaign and returns its summary plus the raw samples.
#[pyfunction]
#[pyo3(signature = (scenario, seed=1, snapshots=10, combining=None, target_dbm=4.0,
                    filter_center=None, filter_radius_m=None, indoor_only=false))]
#[allow(clippy::too_many_arguments)]
fn run_campaign<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: u64,
    snapshots: usize,
    combining: Option<&str>,
    target_dbm: f64,
    filter_center: Option<(f64, f64)>,
    filter_radius_m: Option<f64>,
    indoor_only: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(
        &scenario.inner,
        seed,
        snapshots,
        combining,
        target_dbm,
        filter_center,
        filter_radius_m,
        indoor_only,
    )?;
    let out = py
        .detach(|| campaign::run_campaign(&scenario.inner, &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let d = summary_dict(py, &out.summary)?;
    d.set_item("tx_power_dbm", out.samples)?;
    Ok(d)
}

/// Paired baseline/green comparison over common drops and channels.
#[pyfunction]
#[pyo3(signature = (baseline, green, seed=1, snapshots=10, combining=None, target_dbm=4.0,
                    filter_center=None, filter_radius_m=None, indoor_only=false))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    baseline: &PyScenario,
    green: &PyScenario,
    seed: u64,
    snapshots: usize,
    combining: Option<&str>,
    target_dbm: f64,
    filter_center: Option<(f64, f64)>,
    filter_radius_m: Option<f64>,
    indoor_only: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let center = filter_center.or_else(|| {
        filter_radius_m
            .and(green.inner.greens.first())
            .map(|g| (g.position.x, g.position.y))
    });
    let cfg = config(
        &baseline.inner,
        seed,
        snapshots,
        combining,
        target_dbm,
        center,
        filter_radius_m,
        indoor_only,
    )?;
    let out = py
        .detach(|| campaign::run_paired(&baseline.inner, &green.inner, &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let r = &out.report;
    let d = PyDict::new(py);
    d.set_item("mean_delta_db", r.mean_delta_db)?;
    d.set_item("median_delta_db", r.median_delta_db)?;
    d.set_item("mean_dbm", (r.mean_dbm.baseline, r.mean_dbm.green))?;
    d.set_item("median_dbm", (r.median_dbm.baseline, r.median_dbm.green))?;
    d.set_item(
        "frac_below_target",
        (r.frac_below_target.baseline, r.frac_below_target.green),
    )?;
    d.set_item("samples", r.samples)?;
    d.set_item("cdf_baseline", cdf_pairs(&r.cdf_baseline))?;
    d.set_item("cdf_green", cdf_pairs(&r.cdf_green))?;
    d.set_item("baseline", summary_dict(py, &out.baseline.summary)?)?;
    d.set_item("green", summary_dict(py, &out.green.summary)?)?;
    Ok(d)
}

#[pymodule]
fn greencell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(drop_mobiles, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(antenna_gain, m)?)?;
    m.add_function(wrap_pyfunction!(solve_power_control, m)?)?;
    m.add_function(wrap_pyfunction!(run_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(tx_power_cdf, m)?)?;
    Ok(())
}
