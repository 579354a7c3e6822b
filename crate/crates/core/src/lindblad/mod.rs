//! Lindblad master equation with a static Hamiltonian and collective
//! collapse operators.
//!
//! Energies are in eV. Time is exposed in femtoseconds; internally the
//! equation is integrated with hbar = 1 (time in hbar/eV).

mod dopri;
mod evolve;
mod sectors;

pub use dopri::{integrate, StepControl, StepStats};
pub use evolve::{evolve, evolve_pure, Diagnostics, EvolveOptions, Trajectory};
pub use sectors::{SectorLayout, SectorState};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::{SparseOperator, HERMITIAN_TOL};

/// Reduced Planck constant in eV fs.
pub const HBAR_EV_FS: f64 = 0.6582119569;

/// Tolerances a density matrix has to respect.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
    time_fs: f64,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidState(format!(
                "{}x{} is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityMatrix {
            matrix,
            time_fs: 0.0,
        })
    }

    /// `|psi><psi|` for a normalized copy of `psi`.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let n = psi.len();
        let m = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::new(m)
    }

    pub fn with_time(mut self, time_fs: f64) -> Self {
        self.time_fs = time_fs;
        self
    }

    pub fn time_fs(&self) -> f64 {
        self.time_fs
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.matrix)
    }

    /// Hermitian, unit trace and positive within the module tolerances.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |rho - rho^dag| = {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lmin:e}"
            )));
        }
        Ok(())
    }
}

pub(crate) fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Hamiltonian plus collapse operators, with `C^dag C` cached.
#[derive(Clone, Debug)]
pub struct LindbladSystem {
    hamiltonian: SparseOperator,
    collapses: Vec<SparseOperator>,
    jump_products: Vec<SparseOperator>,
}

impl LindbladSystem {
    pub fn new(hamiltonian: SparseOperator, collapses: Vec<SparseOperator>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                context: "Hamiltonian is not square".into(),
            });
        }
        let herm = hamiltonian.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let dim = hamiltonian.nrows();
        for (k, c) in collapses.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "collapse operator {k} is {}x{}, Hamiltonian is {dim}x{dim}",
                        c.nrows(),
                        c.ncols()
                    ),
                });
            }
        }
        let jump_products = collapses
            .iter()
            .map(|c| c.adjoint().matmul(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(LindbladSystem {
            hamiltonian,
            collapses,
            jump_products,
        })
    }

    /// Same dynamics with `H - shift * I`; the shift drops out of `[H, rho]`.
    pub fn with_energy_shift(&self, shift: f64) -> Result<Self> {
        let id = SparseOperator::identity(self.dim()).scale_real(shift);
        Self::new(self.hamiltonian.sub(&id)?, self.collapses.clone())
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    pub fn collapses(&self) -> &[SparseOperator] {
        &self.collapses
    }

    pub fn jump_products(&self) -> &[SparseOperator] {
        &self.jump_products
    }

    /// Non-Hermitian generator `-i H - 1/2 sum C^dag C`, so that
    /// `d rho/dt = A rho + rho A^dag + sum C rho C^dag` (hbar = 1).
    pub(crate) fn effective_generator(&self) -> Result<SparseOperator> {
        let mut a = self.hamiltonian.scale(C64::new(0.0, -1.0));
        for cdc in &self.jump_products {
            a = a.add(&cdc.scale_real(-0.5))?;
        }
        Ok(a)
    }
}

/// `d rho / dt` in 1/fs for a dense density matrix.
pub fn rhs(sys: &LindbladSystem, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
    if rho.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("state of dimension {} for a system of {}", rho.dim(), sys.dim()),
        });
    }
    let r = rho.matrix();
    let h = &sys.hamiltonian;
    let h_rho = h.mul_dense(r)?;
    // rho H = (H rho^dag)^dag
    let rho_h = h.mul_dense(&r.adjoint())?.adjoint();
    let mut out = (h_rho - rho_h) * C64::new(0.0, -1.0);
    for (c, cdc) in sys.collapses.iter().zip(&sys.jump_products) {
        let c_rho = c.mul_dense(r)?;
        let c_rho_cdag = c.mul_dense(&c_rho.adjoint())?.adjoint();
        let cdc_rho = cdc.mul_dense(r)?;
        let rho_cdc = cdc.mul_dense(&r.adjoint())?.adjoint();
        out += c_rho_cdag - (cdc_rho + rho_cdc) * C64::new(0.5, 0.0);
    }
    Ok(out / C64::new(HBAR_EV_FS, 0.0))
}

/// Real part of `tr(O rho)` with the imaginary residue kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imag: f64,
}

pub fn expectation(op: &SparseOperator, rho: &DensityMatrix) -> Result<Expectation> {
    if op.nrows() != rho.dim() || op.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "observable {}x{} on a state of dimension {}",
                op.nrows(),
                op.ncols(),
                rho.dim()
            ),
        });
    }
    let r = rho.matrix();
    let v: C64 = op.triplets().map(|(i, j, o)| o * r[(j, i)]).sum();
    Ok(Expectation {
        value: v.re,
        imag: v.im,
    })
}
