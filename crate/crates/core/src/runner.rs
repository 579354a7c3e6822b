//! Batch runs: build the model from a [`RunConfig`], evolve it (and the
//! product-space reference when requested), and write CSV files plus a
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::counting::EntryCounts;
use crate::error::{Error, Result};
use crate::lindblad::{Trajectory, HBAR_EV_FS};
use crate::models::{FullModel, Model};
use crate::oracle::MAX_EVOLVE_DIM;
use crate::sparse::SparseOperator;

/// Process exit status for a failed run.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Guard(_) | Error::BasisTooLarge { .. } => 3,
        Error::StepSizeUnderflow { .. }
        | Error::NonFinite { .. }
        | Error::TooManySteps(_)
        | Error::Leakage { .. }
        | Error::Numerical(_) => 2,
        _ => 1,
    }
}

/// Largest absolute difference per observable between two trajectories on
/// the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub per_observable: Vec<(String, f64)>,
}

impl Deviation {
    pub fn between(a: &Trajectory, b: &Trajectory) -> Result<Self> {
        if a.times_fs != b.times_fs || a.names != b.names {
            return Err(Error::DimensionMismatch {
                context: "trajectories differ in grid or observables".into(),
            });
        }
        let per_observable = a
            .names
            .iter()
            .zip(a.series.iter().zip(&b.series))
            .map(|(name, (x, y))| {
                let d = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                (name.clone(), d)
            })
            .collect();
        Ok(Deviation { per_observable })
    }

    pub fn max(&self) -> f64 {
        self.per_observable.iter().map(|&(_, d)| d).fold(0.0, f64::max)
    }
}

pub struct OracleOutcome {
    pub trajectory: Trajectory,
    pub dim: usize,
    pub deviation: Deviation,
}

pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub emitter_dim: usize,
    pub total_dim: usize,
    pub initial_leakage: f64,
    pub truncation_exact: bool,
    /// Largest `|<sum_a b^dag_a b_a> - N|` over the grid.
    pub emitter_number_error: f64,
    pub oracle: Option<OracleOutcome>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

const EMITTER_NUMBER: &str = "emitter_number";

fn select(
    all: &[(String, SparseOperator)],
    wanted: Option<&[String]>,
) -> Result<Vec<(String, SparseOperator)>> {
    let Some(wanted) = wanted else {
        return Ok(all.to_vec());
    };
    wanted
        .iter()
        .map(|name| {
            all.iter().find(|(n, _)| n == name).cloned().ok_or_else(|| Error::Config {
                line: 0,
                message: format!(
                    "unknown observable {name:?} (available: {})",
                    all.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ")
                ),
            })
        })
        .collect()
}

/// Run the symmetric-sector evolution and, if configured, the reference.
/// With `strict`, warnings become errors.
pub fn execute(cfg: &RunConfig, strict: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    if cfg.oracle {
        let s = &cfg.spec;
        let full = EntryCounts::new(s.emitter_modes(), s.n, s.cavity_dim())?.full_axis;
        if full > MAX_EVOLVE_DIM as u128 {
            return Err(Error::Guard(format!(
                "reference space of dimension {full} exceeds {MAX_EVOLVE_DIM}"
            )));
        }
    }
    let start = Instant::now();
    let model = Model::build(&cfg.spec)?;
    let mut observables = select(&model.observables, cfg.observables.as_deref())?;
    observables.push((EMITTER_NUMBER.into(), model.emitter_number()?));
    let grid = cfg.spec.time_grid();
    let opts = model.options(&cfg.evolve);
    let mut traj = crate::lindblad::evolve_pure(
        &model.system,
        &model.initial_state,
        &grid,
        &observables,
        Some(&model.leakage),
        &opts,
    )?;
    let number = traj.series.pop().expect("emitter number was appended");
    traj.names.pop();
    let n = cfg.spec.n as f64;
    let emitter_number_error = number.iter().map(|v| (v - n).abs()).fold(0.0, f64::max);

    let mut warnings = traj.warnings.clone();
    if traj.diagnostics.max_leakage() > opts.leakage_threshold {
        warnings.push(format!(
            "suggestion: rerun with cavity_dim = {}",
            2 * model.basis.cavity_dim()
        ));
    }
    if emitter_number_error > 1e-8 {
        warnings.push(format!("emitter number drifted by {emitter_number_error:e}"));
    }

    let oracle = if cfg.oracle {
        let full = FullModel::build(&cfg.spec)?;
        let full_obs = select(&full.observables, cfg.observables.as_deref())?;
        let t = crate::oracle::oracle_evolve(
            &full.system,
            &full.full,
            full.cavity_dim,
            &full.initial_state,
            &grid,
            &full_obs,
            Some(&full.leakage),
            &model.options(&cfg.oracle_options()),
        )?;
        warnings.extend(t.warnings.iter().map(|w| format!("reference: {w}")));
        let deviation = Deviation::between(&traj, &t)?;
        Some(OracleOutcome {
            dim: full.dim(),
            trajectory: t,
            deviation,
        })
    } else {
        None
    };
    if strict && !warnings.is_empty() {
        let leak = traj.diagnostics.max_leakage();
        if leak > opts.leakage_threshold {
            return Err(Error::Leakage {
                leakage: leak,
                threshold: opts.leakage_threshold,
            });
        }
        return Err(Error::Numerical(warnings.join("; ")));
    }
    Ok(RunOutcome {
        config: cfg.clone(),
        emitter_dim: model.basis.emitters().len(),
        total_dim: model.dim(),
        initial_leakage: model.initial_leakage,
        truncation_exact: model.truncation_exact,
        emitter_number_error,
        trajectory: traj,
        oracle,
        warnings,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

impl RunOutcome {
    /// Resolved configuration followed by `report.` entries.
    pub fn manifest(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        s.push_str(&self.config.to_text());
        s.push_str("# report\n");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "report.{k} = {v}");
        };
        put("version", env!("CARGO_PKG_VERSION").into());
        put("hbar_ev_fs", format!("{HBAR_EV_FS:?}"));
        put("emitter_modes", self.config.spec.emitter_modes().to_string());
        put("emitter_dim", self.emitter_dim.to_string());
        put("cavity_dim", self.config.spec.cavity_dim().to_string());
        put("total_dim", self.total_dim.to_string());
        if let Ok(c) = EntryCounts::new(
            self.config.spec.emitter_modes(),
            self.config.spec.n,
            self.config.spec.cavity_dim(),
        ) {
            for (k, v) in c.rows().into_iter().skip(3) {
                put(&format!("counts.{k}"), v);
            }
        }
        let d = &self.trajectory.diagnostics;
        let blocks: Vec<String> = d.block_sizes.iter().map(usize::to_string).collect();
        put("sector_blocks", blocks.join(" "));
        put("wall_seconds", format!("{:.3}", self.wall_seconds));
        put("evolve_seconds", format!("{:.3}", d.wall_seconds));
        put("steps_accepted", d.steps.accepted.to_string());
        put("steps_rejected", d.steps.rejected.to_string());
        put("rhs_evaluations", d.steps.rhs_evals.to_string());
        put("min_step_fs", format!("{:?}", d.steps.min_step));
        put("max_step_fs", format!("{:?}", d.steps.max_step));
        put("max_trace_error", format!("{:?}", d.max_trace_error()));
        put("max_hermiticity_error", format!("{:?}", d.max_hermiticity_error()));
        put("min_eigenvalue", format!("{:?}", d.min_eigenvalue()));
        put("max_leakage", format!("{:?}", d.max_leakage()));
        put("max_imag_residue", format!("{:?}", d.max_imag_residue));
        put("max_emitter_number_error", format!("{:?}", self.emitter_number_error));
        put("cavity_truncation_exact", self.truncation_exact.to_string());
        put("initial_truncation_loss", format!("{:?}", self.initial_leakage));
        if let Some(o) = &self.oracle {
            put("oracle.dim", o.dim.to_string());
            put("oracle.evolve_seconds", format!("{:.3}", o.trajectory.diagnostics.wall_seconds));
            put("oracle.max_deviation", format!("{:?}", o.deviation.max()));
            for (name, dev) in &o.deviation.per_observable {
                put(&format!("oracle.deviation.{name}"), format!("{dev:?}"));
            }
        }
        for (k, w) in self.warnings.iter().enumerate() {
            put(&format!("warning.{k}"), w.clone());
        }
        s
    }

    /// Deviation report of the reference comparison.
    pub fn deviation_report(&self) -> Option<String> {
        let o = self.oracle.as_ref()?;
        let mut s = String::from("observable,max_abs_deviation\n");
        for (name, d) in &o.deviation.per_observable {
            let _ = writeln!(s, "{name},{d:?}");
        }
        let _ = writeln!(s, "all,{:?}", o.deviation.max());
        Some(s)
    }

    /// Write all output files into `dir`. Each file appears atomically, and
    /// nothing is written unless every file could be rendered.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let name = self.config.output_name();
        let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
        let mut csv = Vec::new();
        self.trajectory.write_csv(&mut csv)?;
        files.push((dir.join(format!("{name}.csv")), csv));
        if let Some(o) = &self.oracle {
            let mut csv = Vec::new();
            o.trajectory.write_csv(&mut csv)?;
            files.push((dir.join(format!("{name}.oracle.csv")), csv));
            let report = self.deviation_report().unwrap_or_default();
            files.push((dir.join(format!("{name}.deviation.csv")), report.into_bytes()));
        }
        files.push((dir.join(format!("{name}.manifest")), self.manifest().into_bytes()));
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (path, bytes) in files {
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Write through a temporary sibling and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config {
            line: 0,
            message: format!("output path {} has no file name", path.display()),
        })?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_tc() -> RunConfig {
        RunConfig::parse("model = TC\nn = 2\nt_max_fs = 20\nsamples = 11\noracle = true\n").unwrap()
    }

    #[test]
    fn executes_with_reference() {
        let out = execute(&small_tc(), false).unwrap();
        assert_eq!(out.emitter_dim, 3);
        assert_eq!(out.total_dim, 9);
        let o = out.oracle.as_ref().unwrap();
        assert_eq!(o.dim, 12);
        assert!(o.deviation.max() < 1e-8, "{}", o.deviation.max());
        assert!(out.emitter_number_error < 1e-10);
        let manifest = out.manifest();
        assert!(manifest.contains("report.emitter_dim = 3\n"));
        assert!(manifest.contains("report.hbar_ev_fs = 0.6582119569\n"));
        // the manifest reproduces the configuration
        let again = RunConfig::parse(&manifest).unwrap();
        assert_eq!(again.entries(), out.config.entries());
    }

    #[test]
    fn unknown_observable_is_a_config_error() {
        let mut cfg = small_tc();
        cfg.set("observables", "nope").unwrap();
        let err = execute(&cfg, false).err().unwrap();
        assert!(err.to_string().contains("nope"));
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn strict_promotes_leakage() {
        // a two-level cavity cannot hold the photons of three emitters
        let cfg = RunConfig::parse("model = TC\nn = 3\ncavity_dim = 2\nt_max_fs = 30\nsamples = 4\n").unwrap();
        let relaxed = execute(&cfg, false).unwrap();
        assert!(relaxed.warnings.iter().any(|w| w.contains("cavity_dim = 4")));
        let err = execute(&cfg, true).err().unwrap();
        assert!(matches!(err, Error::Leakage { .. }));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Guard("x".into())), 3);
        assert_eq!(exit_code(&Error::TooManySteps(1)), 2);
        assert_eq!(exit_code(&Error::InvalidModel("x".into())), 1);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
