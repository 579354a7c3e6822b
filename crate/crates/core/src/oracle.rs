//! Brute-force reference on the distinguishable-emitter product space.
//!
//! Product states `|s_0 s_1 .. s_{N-1}>` are indexed with site 0 slowest. A
//! truncated cavity, when present, is tensored on the right.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::lindblad::{evolve_pure, EvolveOptions, LindbladSystem, Trajectory};
use crate::operators::MBodyCoefficients;
use crate::sparse::SparseOperator;

/// Largest product space on which operators are built.
pub const MAX_FULL_DIM: usize = 1 << 20;
/// Largest `d^N * N_c` accepted by [`oracle_evolve`].
pub const MAX_EVOLVE_DIM: usize = 5000;
/// Largest `N` for which the symmetrizer enumerates all permutations.
pub const MAX_SYMMETRIZER_SITES: usize = 8;

/// Product basis of `n` distinguishable `d`-level sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FullBasis {
    d: usize,
    n: usize,
    dim: usize,
}

impl FullBasis {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("site dimension must be positive".into()));
        }
        let dim = u32::try_from(n)
            .ok()
            .and_then(|e| d.checked_pow(e))
            .filter(|&dim| dim <= MAX_FULL_DIM)
            .ok_or_else(|| {
                Error::Guard(format!(
                    "full space d^N = {d}^{n} exceeds the limit of {MAX_FULL_DIM} states"
                ))
            })?;
        Ok(FullBasis { d, n, dim })
    }

    pub fn site_dim(&self) -> usize {
        self.d
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Site levels of product state `index`.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut s = vec![0; self.n];
        for slot in s.iter_mut().rev() {
            *slot = index % self.d;
            index /= self.d;
        }
        s
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &s| acc * self.d + s)
    }

    /// Occupation numbers of product state `index`.
    pub fn occupations(&self, index: usize) -> Vec<u32> {
        let mut occ = vec![0u32; self.d];
        for s in self.digits(index) {
            occ[s] += 1;
        }
        occ
    }
}

fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// `P_pi`: moves the content of site `j` to site `perm[j]`, so that
/// `P_pi P_sigma = P_{pi o sigma}`.
pub fn permutation_operator(basis: &FullBasis, perm: &[usize]) -> Result<SparseOperator> {
    if perm.len() != basis.n {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    check_permutation(perm)?;
    let mut target = vec![0; basis.n];
    let triplets = (0..basis.dim)
        .map(|j| {
            for (site, s) in basis.digits(j).into_iter().enumerate() {
                target[perm[site]] = s;
            }
            (basis.index(&target), j, C64::new(1.0, 0.0))
        })
        .collect();
    SparseOperator::from_triplets(basis.dim, basis.dim, triplets)
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// `S = (1/N!) sum_pi P_pi`.
pub fn symmetrizer(basis: &FullBasis) -> Result<SparseOperator> {
    if basis.n > MAX_SYMMETRIZER_SITES {
        return Err(Error::Guard(format!(
            "symmetrizer sums N! = {}! permutations; limit is N <= {MAX_SYMMETRIZER_SITES}",
            basis.n
        )));
    }
    let perms = permutations(basis.n);
    let w = C64::new(1.0 / perms.len() as f64, 0.0);
    let mut triplets = Vec::with_capacity(perms.len() * basis.dim);
    let mut target = vec![0; basis.n];
    for j in 0..basis.dim {
        let digits = basis.digits(j);
        for perm in &perms {
            for (site, &s) in digits.iter().enumerate() {
                target[perm[site]] = s;
            }
            triplets.push((basis.index(&target), j, w));
        }
    }
    SparseOperator::from_triplets(basis.dim, basis.dim, triplets)
}

/// `I (x) .. (x) op (x) .. (x) I` with `op` on `site` (0-based).
pub fn lift_local(basis: &FullBasis, op: &DMatrix<C64>, site: usize) -> Result<SparseOperator> {
    if site >= basis.n {
        return Err(Error::SiteOutOfRange {
            site,
            sites: basis.n,
        });
    }
    if op.nrows() != basis.d || op.ncols() != basis.d {
        return Err(Error::DimensionMismatch {
            context: format!("{}x{} local operator on {}-level sites", op.nrows(), op.ncols(), basis.d),
        });
    }
    let local = SparseOperator::from_dense(op);
    let left = SparseOperator::identity(basis.d.pow(site as u32));
    let right = SparseOperator::identity(basis.d.pow((basis.n - site - 1) as u32));
    Ok(left.kron(&local).kron(&right))
}

/// `sum_j lift_local(op, j)`.
pub fn collective(basis: &FullBasis, op: &DMatrix<C64>) -> Result<SparseOperator> {
    let mut acc = SparseOperator::zeros(basis.dim, basis.dim);
    for site in 0..basis.n {
        acc = acc.add(&lift_local(basis, op, site)?)?;
    }
    Ok(acc)
}

/// `(1/M!) sum' V^{c_1..c_M}_{a_1..a_M} sigma^{i_1}_{c_1 a_1} .. sigma^{i_M}_{c_M a_M}`
/// over tuples of distinct sites.
pub fn mbody_first_quantized(coeffs: &MBodyCoefficients, basis: &FullBasis) -> Result<SparseOperator> {
    if coeffs.modes() != basis.d {
        return Err(Error::DimensionMismatch {
            context: format!(
                "coefficients over {} modes on {}-level sites",
                coeffs.modes(),
                basis.d
            ),
        });
    }
    let m = coeffs.order();
    let dim = basis.dim;
    if m > basis.n {
        return Ok(SparseOperator::zeros(dim, dim));
    }
    let norm = 1.0 / (1..=m).map(|k| k as f64).product::<f64>();
    let mut triplets = Vec::new();
    let mut sites = Vec::with_capacity(m);
    for j in 0..dim {
        let digits = basis.digits(j);
        for term in coeffs.terms() {
            let value = term.value * norm;
            distinct_tuples(&digits, &term.annihilations, &mut sites, &mut |sites| {
                let mut out = digits.clone();
                for (k, &site) in sites.iter().enumerate() {
                    out[site] = term.creations[k];
                }
                triplets.push((basis.index(&out), j, value));
            });
        }
    }
    SparseOperator::from_triplets(dim, dim, triplets)
}

/// Visit every tuple of distinct sites whose levels equal `levels`.
fn distinct_tuples(
    digits: &[usize],
    levels: &[usize],
    sites: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let k = sites.len();
    if k == levels.len() {
        visit(sites);
        return;
    }
    for (site, &s) in digits.iter().enumerate() {
        if s == levels[k] && !sites.contains(&site) {
            sites.push(site);
            distinct_tuples(digits, levels, sites, visit);
            sites.pop();
        }
    }
}

/// Isometry from the Fock sector into the product space.
#[derive(Clone, Debug)]
pub struct Isometry {
    full: FullBasis,
    matrix: SparseOperator,
}

impl Isometry {
    pub fn full_basis(&self) -> &FullBasis {
        &self.full
    }

    /// `d^N x C(N+d-1, N)` matrix whose columns are normalized symmetric states.
    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    /// `T (x) I_c`.
    pub fn with_subsystem(&self, cavity_dim: usize) -> SparseOperator {
        self.matrix.kron(&SparseOperator::identity(cavity_dim))
    }

    /// `T^dag O T` for an operator on the product space (times cavity).
    pub fn conjugate(&self, op: &SparseOperator, cavity_dim: usize) -> Result<SparseOperator> {
        let t = self.with_subsystem(cavity_dim);
        t.adjoint().matmul(&op.matmul(&t)?)
    }

    /// `T psi` for a state on the Fock sector (times cavity).
    pub fn embed(&self, psi: &[C64], cavity_dim: usize) -> Result<Vec<C64>> {
        self.with_subsystem(cavity_dim).mul_vec(psi)
    }
}

/// Columns are `sqrt(prod n_a! / N!) sum |s>` over the distinct site
/// assignments `s` with occupations `n`.
pub fn build_isometry(fock: &FockBasis) -> Result<Isometry> {
    let full = FullBasis::new(fock.modes(), fock.particles())?;
    let factorial = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let n_fact = factorial(fock.particles() as u32);
    let mut triplets = Vec::with_capacity(full.dim);
    for j in 0..full.dim {
        let occ = full.occupations(j);
        let col = fock.rank_occ(&occ).expect("product state occupations lie in the sector");
        let count = n_fact / occ.iter().map(|&n| factorial(n)).product::<f64>();
        triplets.push((j, col, C64::new(1.0 / count.sqrt(), 0.0)));
    }
    Ok(Isometry {
        full,
        matrix: SparseOperator::from_triplets(full.dim, fock.len(), triplets)?,
    })
}

/// Largest deviation of `psi` from invariance under adjacent site swaps.
pub fn symmetry_violation(full: &FullBasis, cavity_dim: usize, psi: &[C64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..full.n.saturating_sub(1) {
        let mut perm: Vec<usize> = (0..full.n).collect();
        perm.swap(k, k + 1);
        let p = permutation_operator(full, &perm)?.kron(&SparseOperator::identity(cavity_dim));
        let moved = p.mul_vec(psi)?;
        for (a, b) in moved.iter().zip(psi) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(worst)
}

/// Evolve a totally symmetric pure state on the product space.
pub fn oracle_evolve(
    sys: &LindbladSystem,
    full: &FullBasis,
    cavity_dim: usize,
    psi: &[C64],
    t_grid: &[f64],
    observables: &[(String, SparseOperator)],
    leakage: Option<&SparseOperator>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let total = full.dim * cavity_dim;
    if total > MAX_EVOLVE_DIM {
        return Err(Error::Guard(format!(
            "oracle space d^N * N_c = {}^{} * {cavity_dim} = {total} exceeds {MAX_EVOLVE_DIM}",
            full.d, full.n
        )));
    }
    if sys.dim() != total || psi.len() != total {
        return Err(Error::DimensionMismatch {
            context: format!(
                "oracle space has dimension {total}, system {} and state {}",
                sys.dim(),
                psi.len()
            ),
        });
    }
    let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let violation = symmetry_violation(full, cavity_dim, psi)?;
    if violation > 1e-12 * norm.max(1.0) {
        return Err(Error::InvalidState(format!(
            "initial state is not permutation symmetric (deviation {violation:e})"
        )));
    }
    evolve_pure(sys, psi, t_grid, observables, leakage, opts)
}
