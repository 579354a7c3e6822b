//! Python bindings: run a configuration and query entry counts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use permsym::config::RunConfig;
use permsym::counting::EntryCounts;
use permsym::lindblad::HBAR_EV_FS;
use permsym::runner::{execute, exit_code};

create_exception!(permsym_py, PermsymError, PyException);

fn to_py(err: permsym::Error) -> PyErr {
    PermsymError::new_err((err.to_string(), exit_code(&err)))
}

/// Density-matrix entry counts for `levels`-level emitters and a cavity of
/// dimension `cavity_dim`.
#[pyfunction]
fn dims<'py>(
    py: Python<'py>,
    levels: usize,
    emitters: usize,
    cavity_dim: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let c = EntryCounts::new(levels, emitters, cavity_dim).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("symmetric_axis", c.symmetric_axis)?;
    d.set_item("full_axis", c.full_axis)?;
    d.set_item("symmetric_entries", c.symmetric_entries)?;
    d.set_item("full_entries", c.full_entries)?;
    d.set_item("liouville_entries", c.liouville_entries)?;
    d.set_item("full_over_symmetric", c.full_ratio())?;
    d.set_item("liouville_over_symmetric", c.liouville_ratio())?;
    Ok(d)
}

/// Evolve the configuration given as text. Returns a dict with `times_fs`,
/// `observables` (name to list), `manifest` and, with a reference run,
/// `oracle_max_deviation`.
#[pyfunction]
#[pyo3(signature = (config, strict = false))]
fn run<'py>(py: Python<'py>, config: &str, strict: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::parse(config).map_err(to_py)?;
    let outcome = py.detach(|| execute(&cfg, strict)).map_err(to_py)?;
    let traj = &outcome.trajectory;
    let d = PyDict::new(py);
    d.set_item("times_fs", traj.times_fs.clone())?;
    let obs = PyDict::new(py);
    for (name, series) in traj.names.iter().zip(&traj.series) {
        obs.set_item(name, series.clone())?;
    }
    d.set_item("observables", obs)?;
    d.set_item("emitter_dim", outcome.emitter_dim)?;
    d.set_item("total_dim", outcome.total_dim)?;
    d.set_item("warnings", outcome.warnings.clone())?;
    d.set_item("manifest", outcome.manifest())?;
    if let Some(o) = &outcome.oracle {
        d.set_item("oracle_max_deviation", o.deviation.max())?;
    }
    Ok(d)
}

#[pymodule]
fn permsym_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HBAR_EV_FS", HBAR_EV_FS)?;
    m.add("PermsymError", m.py().get_type::<PermsymError>())?;
    m.add_function(wrap_pyfunction!(dims, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
