//! Second-quantized emitter operators, truncated boson modes and composite
//! (emitter x subsystem) products.
//!
//! Mode indices are zero based. An M-body operator is given by its raw
//! coefficient tensor `V[betas][alphas]`; the `1/M!` prefactor is applied by
//! [`second_quantize`] (and by the first-quantized builder in `oracle`).

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{CompositeBasis, FockBasis};
use crate::sparse::SparseOperator;

/// One entry `V^{betas}_{alphas}` of an M-body coefficient tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct MBodyTerm {
    pub creations: Vec<usize>,
    pub annihilations: Vec<usize>,
    pub value: C64,
}

/// Sparse M-body coefficient tensor over `modes` single-emitter levels.
#[derive(Clone, Debug, PartialEq)]
pub struct MBodyCoefficients {
    order: usize,
    modes: usize,
    terms: Vec<MBodyTerm>,
}

impl MBodyCoefficients {
    pub fn new(order: usize, modes: usize) -> Self {
        MBodyCoefficients {
            order,
            modes,
            terms: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> &[MBodyTerm] {
        &self.terms
    }

    pub fn push(&mut self, creations: &[usize], annihilations: &[usize], value: C64) -> Result<()> {
        if creations.len() != annihilations.len() {
            return Err(Error::Unbalanced {
                creations: creations.len(),
                annihilations: annihilations.len(),
            });
        }
        if creations.len() != self.order {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{}-body term pushed into order-{} coefficients",
                    creations.len(),
                    self.order
                ),
            });
        }
        check_modes(creations.iter().chain(annihilations), self.modes)?;
        if value != C64::new(0.0, 0.0) {
            self.terms.push(MBodyTerm {
                creations: creations.to_vec(),
                annihilations: annihilations.to_vec(),
                value,
            });
        }
        Ok(())
    }

    /// One-body coefficients `V^b_a = m[(b, a)]`, i.e. `sum_j sum_ab m_ba |b><a|_j`.
    pub fn one_body(m: &DMatrix<C64>) -> Self {
        let mut v = Self::new(1, m.nrows());
        for b in 0..m.nrows() {
            for a in 0..m.ncols() {
                v.push(&[b], &[a], m[(b, a)]).expect("indices within the matrix");
            }
        }
        v
    }

    /// Two-body coefficients `V^{b1 b2}_{a1 a2} = scale * x[(b1, a1)] * y[(b2, a2)]`.
    pub fn two_body_product(x: &DMatrix<C64>, y: &DMatrix<C64>, scale: C64) -> Self {
        let d = x.nrows();
        let mut v = Self::new(2, d);
        for b1 in 0..d {
            for a1 in 0..d {
                let xv = x[(b1, a1)];
                if xv == C64::new(0.0, 0.0) {
                    continue;
                }
                for b2 in 0..d {
                    for a2 in 0..d {
                        v.push(&[b1, b2], &[a1, a2], scale * xv * y[(b2, a2)])
                            .expect("indices within the matrix");
                    }
                }
            }
        }
        v
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.value *= factor;
        }
        out.terms.retain(|t| t.value != C64::new(0.0, 0.0));
        out
    }

    /// Coefficients of the adjoint operator.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::new(self.order, self.modes);
        out.terms = self
            .terms
            .iter()
            .map(|t| MBodyTerm {
                creations: t.annihilations.clone(),
                annihilations: t.creations.clone(),
                value: t.value.conj(),
            })
            .collect();
        out
    }

    /// `V^{b}_{a} = conj(V^{a}_{b})` within `tol`.
    pub fn is_hermitian_generating(&self, tol: f64) -> bool {
        let mut table: HashMap<(Vec<usize>, Vec<usize>), C64> = HashMap::new();
        for t in &self.terms {
            *table
                .entry((t.creations.clone(), t.annihilations.clone()))
                .or_default() += t.value;
        }
        table.iter().all(|((b, a), v)| {
            let mirror = table
                .get(&(a.clone(), b.clone()))
                .copied()
                .unwrap_or_default();
            (v - mirror.conj()).norm() <= tol
        })
    }
}

fn check_modes<'a>(modes: impl Iterator<Item = &'a usize>, d: usize) -> Result<()> {
    for &m in modes {
        if m >= d {
            return Err(Error::ModeOutOfRange { mode: m, modes: d });
        }
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Apply `b^dag_{c_1} ... b^dag_{c_M} b_{a_1} ... b_{a_M}` to `occ` in place,
/// rightmost factor first. Returns the amplitude, or `None` if annihilated.
fn apply_string(occ: &mut [u32], creations: &[usize], annihilations: &[usize]) -> Option<f64> {
    // product of occupation factors is an exact integer; take one root
    let mut amp2 = 1.0f64;
    for &a in annihilations.iter().rev() {
        if occ[a] == 0 {
            return None;
        }
        amp2 *= occ[a] as f64;
        occ[a] -= 1;
    }
    for &c in creations.iter().rev() {
        occ[c] += 1;
        amp2 *= occ[c] as f64;
    }
    Some(amp2.sqrt())
}

/// Matrix of the normal-ordered string `b^dag_{c_1}..b^dag_{c_M} b_{a_1}..b_{a_M}`
/// on a fixed-N sector.
pub fn normal_ordered_string(
    basis: &FockBasis,
    creations: &[usize],
    annihilations: &[usize],
) -> Result<SparseOperator> {
    if creations.len() != annihilations.len() {
        return Err(Error::Unbalanced {
            creations: creations.len(),
            annihilations: annihilations.len(),
        });
    }
    check_modes(creations.iter().chain(annihilations), basis.modes())?;
    let mut triplets = Vec::new();
    let mut occ = vec![0u32; basis.modes()];
    for (j, s) in basis.states().iter().enumerate() {
        occ.copy_from_slice(s.occ());
        if let Some(amp) = apply_string(&mut occ, creations, annihilations) {
            let i = basis
                .rank_occ(&occ)
                .expect("balanced strings stay in the sector");
            triplets.push((i, j, C64::new(amp, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.len(), basis.len(), triplets)
}

/// `(1/M!) sum V^{betas}_{alphas} b^dag_{beta_1}..b^dag_{beta_M} b_{alpha_1}..b_{alpha_M}`.
///
/// Strings with more annihilators than particles vanish, so `M > N` yields
/// the zero matrix.
pub fn second_quantize(basis: &FockBasis, coeffs: &MBodyCoefficients) -> Result<SparseOperator> {
    if coeffs.modes() != basis.modes() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{}-mode coefficients on a {}-mode sector",
                coeffs.modes(),
                basis.modes()
            ),
        });
    }
    let prefactor = 1.0 / factorial(coeffs.order());
    let mut triplets = Vec::new();
    let mut occ = vec![0u32; basis.modes()];
    for (j, s) in basis.states().iter().enumerate() {
        for t in coeffs.terms() {
            occ.copy_from_slice(s.occ());
            if let Some(amp) = apply_string(&mut occ, &t.creations, &t.annihilations) {
                let i = basis
                    .rank_occ(&occ)
                    .expect("balanced strings stay in the sector");
                triplets.push((i, j, t.value * (amp * prefactor)));
            }
        }
    }
    SparseOperator::from_triplets(basis.len(), basis.len(), triplets)
}

/// Sum of several M-body parts (e.g. one-body plus two-body).
pub fn second_quantize_sum(
    basis: &FockBasis,
    parts: &[MBodyCoefficients],
) -> Result<SparseOperator> {
    let mut acc = SparseOperator::zeros(basis.len(), basis.len());
    for p in parts {
        acc = acc.add(&second_quantize(basis, p)?)?;
    }
    Ok(acc)
}

/// Total emitter number `sum_a b^dag_a b_a`.
pub fn emitter_number(basis: &FockBasis) -> SparseOperator {
    SparseOperator::diagonal(&vec![
        C64::new(basis.particles() as f64, 0.0);
        basis.len()
    ])
}

/// Truncated ladder operators `(a, a^dag, a^dag a)` on `dim` levels.
pub fn boson_mode(dim: usize) -> (SparseOperator, SparseOperator, SparseOperator) {
    let triplets = (1..dim)
        .map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))
        .collect();
    let a = SparseOperator::from_triplets(dim, dim, triplets).expect("ladder entries in range");
    let a_dag = a.adjoint();
    let number = SparseOperator::diagonal(
        &(0..dim)
            .map(|n| C64::new(n as f64, 0.0))
            .collect::<Vec<_>>(),
    );
    (a, a_dag, number)
}

/// Projector onto the top level of a truncated mode.
pub fn top_level_projector(dim: usize) -> SparseOperator {
    let mut diag = vec![C64::new(0.0, 0.0); dim];
    diag[dim - 1] = C64::new(1.0, 0.0);
    SparseOperator::diagonal(&diag)
}

/// `A (x) B` on a composite basis. Rows and columns outside a restricted
/// basis are projected out without forming the unrestricted product.
pub fn kron(
    emitter_op: &SparseOperator,
    subsystem_op: &SparseOperator,
    basis: &CompositeBasis,
) -> Result<SparseOperator> {
    let ne = basis.emitters().len();
    let nc = basis.cavity_dim();
    if emitter_op.nrows() != ne || emitter_op.ncols() != ne {
        return Err(Error::DimensionMismatch {
            context: format!(
                "emitter operator {}x{} on a sector of size {ne}",
                emitter_op.nrows(),
                emitter_op.ncols()
            ),
        });
    }
    if subsystem_op.nrows() != nc || subsystem_op.ncols() != nc {
        return Err(Error::DimensionMismatch {
            context: format!(
                "subsystem operator {}x{} on a mode of dimension {nc}",
                subsystem_op.nrows(),
                subsystem_op.ncols()
            ),
        });
    }
    let mut triplets = Vec::new();
    for r in 0..basis.len() {
        let (e, c) = basis.components(r);
        for (e2, va) in emitter_op.row(e) {
            for (c2, vb) in subsystem_op.row(c) {
                if let Some(col) = basis.index(e2, c2) {
                    triplets.push((r, col, va * vb));
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.len(), basis.len(), triplets)
}

/// Emitter operator extended by the subsystem identity.
pub fn on_emitters(op: &SparseOperator, basis: &CompositeBasis) -> Result<SparseOperator> {
    kron(op, &SparseOperator::identity(basis.cavity_dim()), basis)
}

/// Subsystem operator extended by the emitter identity.
pub fn on_subsystem(op: &SparseOperator, basis: &CompositeBasis) -> Result<SparseOperator> {
    kron(&SparseOperator::identity(basis.emitters().len()), op, basis)
}
