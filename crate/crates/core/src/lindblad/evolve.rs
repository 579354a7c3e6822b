use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;

use super::dopri::{integrate, StepControl, StepStats};
use super::sectors::{self, BlockGenerator, SectorLayout, SectorState};
use super::{DensityMatrix, LindbladSystem, HBAR_EV_FS, POSITIVITY_TOL};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// First trial step in fs.
    pub initial_step_fs: Option<f64>,
    /// Number of evenly spaced grid times at which positivity is checked.
    pub positivity_samples: usize,
    pub leakage_threshold: f64,
    pub hermitize: bool,
    /// Propagate only the reachable diagonal blocks of rho.
    pub use_sectors: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 5_000_000,
            initial_step_fs: None,
            positivity_samples: 10,
            leakage_threshold: 1e-6,
            hermitize: true,
            use_sectors: true,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// `|tr rho - 1|` per grid time.
    pub trace_error: Vec<f64>,
    pub hermiticity_error: Vec<f64>,
    /// Expectation of the leakage operator per grid time (zero if none).
    pub leakage: Vec<f64>,
    /// `(t_fs, lambda_min)` at the sampled times.
    pub min_eigenvalues: Vec<(f64, f64)>,
    /// Largest imaginary part seen in any observable expectation.
    pub max_imag_residue: f64,
    pub steps: StepStats,
    pub block_sizes: Vec<usize>,
    pub wall_seconds: f64,
}

impl Diagnostics {
    pub fn max_trace_error(&self) -> f64 {
        self.trace_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.hermiticity_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times_fs: Vec<f64>,
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    pub final_state: SectorState,
}

pub const DIAGNOSTIC_COLUMNS: [&str; 3] = ["trace_error", "hermiticity_error", "leakage"];

impl Trajectory {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.series[k].as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["time_fs"];
        header.extend(self.names.iter().map(String::as_str));
        header.extend(DIAGNOSTIC_COLUMNS);
        writeln!(w, "{}", header.join(","))?;
        let d = &self.diagnostics;
        for (k, t) in self.times_fs.iter().enumerate() {
            write!(w, "{t:?}")?;
            for s in &self.series {
                write!(w, ",{:?}", s[k])?;
            }
            writeln!(
                w,
                ",{:?},{:?},{:?}",
                d.trace_error[k], d.hermiticity_error[k], d.leakage[k]
            )?;
        }
        Ok(())
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::InvalidTimeGrid("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::InvalidTimeGrid(format!(
                "time grid must start at 0, got {t0}"
            )))
        }
        _ => {}
    }
    if let Some(w) = t_grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTimeGrid(format!(
            "time grid not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn check_dims(sys: &LindbladSystem, ops: &[(String, SparseOperator)], leak: Option<&SparseOperator>) -> Result<()> {
    let dim = sys.dim();
    for (name, op) in ops {
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("observable {name} is {}x{}, system is {dim}", op.nrows(), op.ncols()),
            });
        }
    }
    if let Some(op) = leak {
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("leakage operator is {}x{}, system is {dim}", op.nrows(), op.ncols()),
            });
        }
    }
    Ok(())
}

/// Evolve a density matrix and record observables on `t_grid` (fs).
pub fn evolve(
    sys: &LindbladSystem,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    observables: &[(String, SparseOperator)],
    leakage: Option<&SparseOperator>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("initial state {} vs system {}", rho0.dim(), sys.dim()),
        });
    }
    check_dims(sys, observables, leakage)?;
    rho0.validate()?;
    let m = rho0.matrix();
    let layout = if opts.use_sectors {
        let support: Vec<_> = (0..m.ncols())
            .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != C64::new(0.0, 0.0))
            .collect();
        SectorLayout::detect(sys, &support)?
    } else {
        SectorLayout::dense(sys.dim())
    };
    let layout = Arc::new(layout);
    let state = SectorState::from_dense(layout.clone(), m);
    run(sys, layout, state, t_grid, observables, leakage, opts)
}

/// Evolve the pure state `|psi><psi|` (normalized here) without forming the
/// dense initial matrix.
pub fn evolve_pure(
    sys: &LindbladSystem,
    psi: &[C64],
    t_grid: &[f64],
    observables: &[(String, SparseOperator)],
    leakage: Option<&SparseOperator>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    if psi.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("initial state {} vs system {}", psi.len(), sys.dim()),
        });
    }
    check_dims(sys, observables, leakage)?;
    let nz: Vec<usize> = (0..psi.len()).filter(|&i| psi[i] != C64::new(0.0, 0.0)).collect();
    let Some(&first) = nz.first() else {
        return Err(Error::InvalidState("state vector has zero norm".into()));
    };
    let layout = if opts.use_sectors {
        let support: Vec<_> = nz.iter().map(|&i| (first, i)).collect();
        SectorLayout::detect(sys, &support)?
    } else {
        SectorLayout::dense(sys.dim())
    };
    let layout = Arc::new(layout);
    let state = SectorState::from_pure(layout.clone(), psi)?;
    run(sys, layout, state, t_grid, observables, leakage, opts)
}

fn sample_indices(len: usize, samples: usize) -> Vec<usize> {
    match samples {
        0 => Vec::new(),
        1 => vec![len - 1],
        k => {
            let mut idx: Vec<usize> = (0..k)
                .map(|s| ((s * (len - 1)) as f64 / (k - 1) as f64).round() as usize)
                .collect();
            idx.dedup();
            idx
        }
    }
}

fn run(
    sys: &LindbladSystem,
    layout: Arc<SectorLayout>,
    state: SectorState,
    t_grid: &[f64],
    observables: &[(String, SparseOperator)],
    leakage: Option<&SparseOperator>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let start = Instant::now();
    let compiled: Vec<_> = observables.iter().map(|(_, op)| layout.compile(op)).collect();
    let leak = leakage.map(|op| layout.compile(op));
    let samples = sample_indices(t_grid.len(), opts.positivity_samples);

    let n_out = t_grid.len();
    let mut series = vec![Vec::with_capacity(n_out); observables.len()];
    let mut diag = Diagnostics {
        block_sizes: layout.block_sizes(),
        ..Default::default()
    };

    let mut generator = BlockGenerator::new(sys, layout.clone())?;
    let outputs: Vec<f64> = t_grid.iter().map(|t| t / HBAR_EV_FS).collect();
    let ctl = StepControl {
        rtol: opts.rtol,
        atol: opts.atol,
        initial_step: opts.initial_step_fs.map(|h| h / HBAR_EV_FS),
        max_steps: opts.max_steps,
        ..Default::default()
    };
    let mut out_index = 0;
    let mut final_data = Vec::new();
    let hermitize = opts.hermitize;
    let step_layout = layout.clone();

    let stats = integrate(
        |_, y, dy| generator.apply(y, dy),
        0.0,
        state.data.clone(),
        &outputs,
        &ctl,
        |_, y| {
            let t_fs = t_grid[out_index];
            for (s, list) in series.iter_mut().zip(&compiled) {
                let v = layout.evaluate(list, y);
                diag.max_imag_residue = diag.max_imag_residue.max(v.im.abs());
                s.push(v.re);
            }
            diag.trace_error
                .push((sectors::trace(&layout, y) - C64::new(1.0, 0.0)).norm());
            diag.hermiticity_error
                .push(sectors::hermiticity_error(&layout, y));
            let l = leak
                .as_ref()
                .map(|list| layout.evaluate(list, y).re)
                .unwrap_or(0.0);
            diag.leakage.push(l);
            if samples.binary_search(&out_index).is_ok() {
                let s = SectorState::new(layout.clone(), y.to_vec());
                diag.min_eigenvalues.push((t_fs, s.min_eigenvalue()));
            }
            out_index += 1;
            if out_index == n_out {
                final_data = y.to_vec();
            }
            Ok(())
        },
        |y| {
            if hermitize {
                sectors::hermitize(&step_layout, y);
            }
        },
    )
    .map_err(|e| match e {
        Error::StepSizeUnderflow { t_fs, h } => Error::StepSizeUnderflow {
            t_fs: t_fs * HBAR_EV_FS,
            h: h * HBAR_EV_FS,
        },
        Error::NonFinite { t_fs } => Error::NonFinite {
            t_fs: t_fs * HBAR_EV_FS,
        },
        other => other,
    })?;
    diag.steps = StepStats {
        min_step: stats.min_step * HBAR_EV_FS,
        max_step: stats.max_step * HBAR_EV_FS,
        ..stats
    };
    diag.wall_seconds = start.elapsed().as_secs_f64();

    let mut warnings = Vec::new();
    let max_leak = diag.max_leakage();
    if max_leak > opts.leakage_threshold {
        warnings.push(format!(
            "cavity truncation leakage {max_leak:e} exceeds threshold {:e}; increase the cavity dimension",
            opts.leakage_threshold
        ));
    }
    let min_eig = diag.min_eigenvalue();
    if min_eig < POSITIVITY_TOL {
        warnings.push(format!("density matrix eigenvalue {min_eig:e} below {POSITIVITY_TOL:e}"));
    }

    Ok(Trajectory {
        times_fs: t_grid.to_vec(),
        names: observables.iter().map(|(n, _)| n.clone()).collect(),
        series,
        diagnostics: diag,
        warnings,
        final_state: SectorState::new(layout, final_data),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::boson_mode;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn rabi_oscillation() {
        // two-level emitter (as a 2-state boson) coupled to a 2-state cavity
        let g = 0.05;
        let (s, s_dag, sn) = boson_mode(2);
        let (a, a_dag, n) = boson_mode(2);
        let id = SparseOperator::identity(2);
        let h = sn
            .kron(&id)
            .add(&id.kron(&n))
            .unwrap()
            .add(&s.kron(&a_dag).add(&s_dag.kron(&a)).unwrap().scale_real(g))
            .unwrap();
        let sys = LindbladSystem::new(h, vec![]).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[2] = C64::new(1.0, 0.0);
        let period = std::f64::consts::PI * HBAR_EV_FS / g;
        let ts = vec![0.0, period / 4.0, period / 8.0 * 3.0, period / 2.0];
        let obs = vec![("excited".to_string(), sn.kron(&id))];
        let traj = evolve_pure(&sys, &psi, &ts, &obs, None, &EvolveOptions::default()).unwrap();
        for (t, v) in ts.iter().zip(traj.observable("excited").unwrap()) {
            let expect = (g * t / HBAR_EV_FS).cos().powi(2);
            assert!((v - expect).abs() < 1e-7, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn zero_system_is_constant() {
        let sys = LindbladSystem::new(SparseOperator::zeros(3, 3), vec![]).unwrap();
        let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let traj = evolve(&sys, &rho0, &grid(10.0, 5), &[], None, &EvolveOptions::default()).unwrap();
        let diff = (traj.final_state.to_dense() - rho0.matrix()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn cavity_decay() {
        let gamma: f64 = 0.01;
        let (a, _, n) = boson_mode(2);
        let sys = LindbladSystem::new(SparseOperator::zeros(2, 2), vec![a.scale_real(gamma.sqrt())]).unwrap();
        let ts = grid(200.0, 10);
        let obs = vec![("n".to_string(), n.clone())];
        let traj = evolve_pure(
            &sys,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            &ts,
            &obs,
            Some(&n),
            &EvolveOptions::default(),
        )
        .unwrap();
        for (t, v) in ts.iter().zip(&traj.series[0]) {
            assert!((v - (-gamma * t / HBAR_EV_FS).exp()).abs() < 1e-8);
        }
        assert_eq!(traj.diagnostics.block_sizes, vec![1, 1]);
        // top-level population starts at one
        assert_eq!(traj.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        let sys = LindbladSystem::new(SparseOperator::zeros(1, 1), vec![]).unwrap();
        let psi = [C64::new(1.0, 0.0)];
        let o = EvolveOptions::default();
        for bad in [vec![], vec![1.0, 2.0], vec![0.0, 1.0, 1.0]] {
            assert!(matches!(
                evolve_pure(&sys, &psi, &bad, &[], None, &o),
                Err(Error::InvalidTimeGrid(_))
            ));
        }
    }

    #[test]
    fn sampling_spans_grid() {
        assert_eq!(sample_indices(101, 10).first(), Some(&0));
        assert_eq!(sample_indices(101, 10).last(), Some(&100));
        assert_eq!(sample_indices(3, 10), vec![0, 1, 2]);
        assert!(sample_indices(5, 0).is_empty());
    }

    #[test]
    fn csv_layout() {
        let sys = LindbladSystem::new(SparseOperator::zeros(1, 1), vec![]).unwrap();
        let obs = vec![("one".to_string(), SparseOperator::identity(1))];
        let traj = evolve_pure(&sys, &[C64::new(1.0, 0.0)], &[0.0, 0.5], &obs, None, &EvolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_fs,one,trace_error,hermiticity_error,leakage\n0.0,1.0,0.0,0.0,0.0\n0.5,1.0,0.0,0.0,0.0\n"
        );
    }
}
