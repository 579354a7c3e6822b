//! Tavis-Cummings, Holstein-Tavis-Cummings, equally spaced multi-level and
//! vibrational strong coupling models.
//!
//! Each model is described once as sums of `(emitter M-body part) x (cavity
//! operator)` terms. The description is then realized either on the bosonic
//! Fock sector ([`Model`]) or on the distinguishable product space
//! ([`FullModel`]).

mod franck_condon;
mod spec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use franck_condon::{franck_condon, franck_condon_table};
pub use spec::{ModelKind, ModelSpec};

use crate::error::{Error, Result};
use crate::fock::{restrict_composite, CompositeBasis, FockBasis};
use crate::lindblad::{evolve_pure, EvolveOptions, LindbladSystem, Trajectory};
use crate::operators::{boson_mode, kron, second_quantize, top_level_projector, MBodyCoefficients};
use crate::oracle::{self, build_isometry, FullBasis, Isometry};
use crate::sparse::SparseOperator;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `|b><a|` on one emitter.
fn sigma(d: usize, b: usize, a: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    m[(b, a)] = c(1.0);
    m
}

enum EmitterPart {
    Identity,
    Body(MBodyCoefficients),
}

struct Term {
    emitter: EmitterPart,
    cavity: SparseOperator,
}

/// Sum of `emitter (x) cavity` terms.
#[derive(Default)]
struct OperatorDesc {
    terms: Vec<Term>,
}

impl OperatorDesc {
    fn cavity(mut self, op: SparseOperator) -> Self {
        self.terms.push(Term {
            emitter: EmitterPart::Identity,
            cavity: op,
        });
        self
    }

    fn emitter(mut self, body: MBodyCoefficients, cavity_dim: usize) -> Self {
        self.terms.push(Term {
            emitter: EmitterPart::Body(body),
            cavity: SparseOperator::identity(cavity_dim),
        });
        self
    }

    fn coupled(mut self, body: MBodyCoefficients, cavity: SparseOperator) -> Self {
        self.terms.push(Term {
            emitter: EmitterPart::Body(body),
            cavity,
        });
        self
    }

    fn on_fock(&self, basis: &CompositeBasis) -> Result<SparseOperator> {
        let mut acc = SparseOperator::zeros(basis.len(), basis.len());
        for t in &self.terms {
            let e = match &t.emitter {
                EmitterPart::Identity => SparseOperator::identity(basis.emitters().len()),
                EmitterPart::Body(v) => second_quantize(basis.emitters(), v)?,
            };
            acc = acc.add(&kron(&e, &t.cavity, basis)?)?;
        }
        Ok(acc)
    }

    fn on_full(&self, full: &FullBasis, cavity_dim: usize) -> Result<SparseOperator> {
        let dim = full.dim() * cavity_dim;
        let mut acc = SparseOperator::zeros(dim, dim);
        for t in &self.terms {
            let e = match &t.emitter {
                EmitterPart::Identity => SparseOperator::identity(full.dim()),
                EmitterPart::Body(v) => oracle::mbody_first_quantized(v, full)?,
            };
            acc = acc.add(&e.kron(&t.cavity))?;
        }
        Ok(acc)
    }
}

/// Model-independent description shared by both realizations.
struct Description {
    modes: usize,
    mode_labels: Vec<String>,
    cavity_dim: usize,
    excitation_weights: Option<Vec<u32>>,
    max_excitation: Option<u32>,
    hamiltonian: OperatorDesc,
    collapses: Vec<OperatorDesc>,
    observables: Vec<(String, OperatorDesc)>,
    /// Every emitter starts in this single-particle state.
    emitter_state: Vec<C64>,
    cavity_level: usize,
    /// Weight lost when truncating the emitter state (before renormalizing).
    initial_leakage: f64,
    /// Excitations of the initial state when the Hamiltonian conserves them
    /// and the collapses only remove them.
    excitations: Option<usize>,
}

/// Second-quantized model on the symmetric sector.
pub struct Model {
    pub spec: ModelSpec,
    pub basis: CompositeBasis,
    pub system: LindbladSystem,
    /// Initial pure state in the composite basis.
    pub initial_state: Vec<C64>,
    /// Named observables in declaration order.
    pub observables: Vec<(String, SparseOperator)>,
    /// Population of the top cavity level.
    pub leakage: SparseOperator,
    pub initial_leakage: f64,
    pub mode_labels: Vec<String>,
    /// The cavity can hold every excitation, so the top level is physical
    /// and not a truncation artifact.
    pub truncation_exact: bool,
}

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let desc = describe(spec)?;
        let emitters = FockBasis::enumerate(desc.modes, spec.n)?;
        let mut basis = CompositeBasis::new(emitters, desc.cavity_dim)?;
        if let Some(w) = &desc.excitation_weights {
            basis = basis.with_excitation_limit(w.clone(), desc.max_excitation)?;
            basis = restrict_composite(&basis)?;
        }
        let mut h = desc.hamiltonian.on_fock(&basis)?;
        if spec.energy_shift != 0.0 {
            h = h.add(&SparseOperator::identity(basis.len()).scale_real(spec.energy_shift))?;
        }
        let collapses = desc
            .collapses
            .iter()
            .map(|op| op.on_fock(&basis))
            .collect::<Result<Vec<_>>>()?;
        let system = LindbladSystem::new(h, collapses)?;
        let observables = desc
            .observables
            .iter()
            .map(|(name, op)| Ok((name.clone(), op.on_fock(&basis)?)))
            .collect::<Result<Vec<_>>>()?;
        let leakage = kron(
            &SparseOperator::identity(basis.emitters().len()),
            &top_level_projector(desc.cavity_dim),
            &basis,
        )?;
        let initial_state = fock_product_state(&basis, &desc.emitter_state, desc.cavity_level)?;
        Ok(Model {
            spec: spec.clone(),
            basis,
            system,
            initial_state,
            observables,
            leakage,
            initial_leakage: desc.initial_leakage,
            mode_labels: desc.mode_labels,
            truncation_exact: desc.excitations.is_some_and(|k| desc.cavity_dim > k),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Total emitter number `sum_a b^dag_a b_a`, extended to the composite basis.
    pub fn emitter_number(&self) -> Result<SparseOperator> {
        let d = self.basis.emitters().modes();
        OperatorDesc::default()
            .emitter(one_body(&DMatrix::identity(d, d)), self.basis.cavity_dim())
            .on_fock(&self.basis)
    }

    /// Options with the leakage threshold lifted when the truncation is exact.
    pub fn options(&self, opts: &EvolveOptions) -> EvolveOptions {
        let mut o = opts.clone();
        if self.truncation_exact {
            o.leakage_threshold = f64::INFINITY;
        }
        o
    }

    pub fn evolve(&self, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
        evolve_pure(
            &self.system,
            &self.initial_state,
            t_grid,
            &self.observables,
            Some(&self.leakage),
            &self.options(opts),
        )
    }
}

/// `sqrt(N! / prod n!) prod c_a^{n_a}` on every Fock state, cavity in `level`.
fn fock_product_state(basis: &CompositeBasis, phi: &[C64], level: usize) -> Result<Vec<C64>> {
    let n = basis.emitters().particles();
    let log_fact = |k: u32| (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let mut psi = vec![c(0.0); basis.len()];
    for (e, state) in basis.emitters().states().iter().enumerate() {
        let Some(idx) = basis.index(e, level) else { continue };
        let mut amp = c(1.0);
        let mut log_mult = log_fact(n as u32);
        for (a, &k) in state.occ().iter().enumerate() {
            if k > 0 {
                amp *= phi[a].powu(k);
                log_mult -= log_fact(k);
            }
        }
        psi[idx] = amp * (0.5 * log_mult).exp();
    }
    if psi.iter().all(|v| *v == c(0.0)) {
        return Err(Error::InvalidState("initial state has zero norm in the basis".into()));
    }
    Ok(psi)
}

/// The same model on the full product space `d^N (x) N_c`.
pub struct FullModel {
    pub full: FullBasis,
    pub cavity_dim: usize,
    pub system: LindbladSystem,
    pub initial_state: Vec<C64>,
    pub observables: Vec<(String, SparseOperator)>,
    pub leakage: SparseOperator,
}

impl FullModel {
    /// Build on the product space. Excitation restrictions are not applied.
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let desc = describe(spec)?;
        let full = FullBasis::new(desc.modes, spec.n)?;
        let nc = desc.cavity_dim;
        let mut h = desc.hamiltonian.on_full(&full, nc)?;
        if spec.energy_shift != 0.0 {
            h = h.add(&SparseOperator::identity(h.nrows()).scale_real(spec.energy_shift))?;
        }
        let collapses = desc
            .collapses
            .iter()
            .map(|op| op.on_full(&full, nc))
            .collect::<Result<Vec<_>>>()?;
        let observables = desc
            .observables
            .iter()
            .map(|(name, op)| Ok((name.clone(), op.on_full(&full, nc)?)))
            .collect::<Result<Vec<_>>>()?;
        let leakage = SparseOperator::identity(full.dim()).kron(&top_level_projector(nc));
        let mut psi = vec![c(1.0)];
        for _ in 0..spec.n {
            psi = psi
                .iter()
                .flat_map(|&x| desc.emitter_state.iter().map(move |&y| x * y))
                .collect();
        }
        let mut cavity = vec![c(0.0); nc];
        cavity[desc.cavity_level] = c(1.0);
        let initial_state = psi
            .iter()
            .flat_map(|&x| cavity.iter().map(move |&y| x * y))
            .collect();
        Ok(FullModel {
            full,
            cavity_dim: nc,
            system: LindbladSystem::new(h, collapses)?,
            initial_state,
            observables,
            leakage,
        })
    }

    pub fn dim(&self) -> usize {
        self.full.dim() * self.cavity_dim
    }

    pub fn isometry(&self, spec: &ModelSpec) -> Result<Isometry> {
        build_isometry(&FockBasis::enumerate(self.full.site_dim(), spec.n)?)
    }

    pub fn evolve(&self, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
        oracle::oracle_evolve(
            &self.system,
            &self.full,
            self.cavity_dim,
            &self.initial_state,
            t_grid,
            &self.observables,
            Some(&self.leakage),
            opts,
        )
    }
}

fn describe(spec: &ModelSpec) -> Result<Description> {
    match spec.kind {
        ModelKind::TavisCummings => Ok(tavis_cummings(spec)),
        ModelKind::HolsteinTavisCummings => holstein_tavis_cummings(spec),
        ModelKind::ThreeLevel => Ok(equally_spaced(spec)),
        ModelKind::Vsc => Ok(vsc(spec)),
    }
}

fn one_body(m: &DMatrix<C64>) -> MBodyCoefficients {
    MBodyCoefficients::one_body(m)
}

/// Modes `(g, e)`.
fn tavis_cummings(spec: &ModelSpec) -> Description {
    let nc = spec.cavity_dim();
    let (a, a_dag, n_c) = boson_mode(nc);
    let half = 0.5 * spec.omega_0;
    let mut h0 = DMatrix::zeros(2, 2);
    h0[(0, 0)] = c(-half);
    h0[(1, 1)] = c(half);
    let raise = one_body(&sigma(2, 1, 0));
    let lower = one_body(&sigma(2, 0, 1));
    let g = spec.g();
    let hamiltonian = OperatorDesc::default()
        .emitter(one_body(&h0), nc)
        .cavity(n_c.scale_real(spec.omega_c()))
        .coupled(raise.scaled(c(g)), a.clone())
        .coupled(lower.scaled(c(g)), a_dag);
    let mut collapses = Vec::new();
    if spec.gamma_c > 0.0 {
        collapses.push(OperatorDesc::default().cavity(a.scale_real(spec.gamma_c.sqrt())));
    }
    let (_, _, n_cav) = boson_mode(nc);
    Description {
        modes: 2,
        mode_labels: vec!["g".into(), "e".into()],
        cavity_dim: nc,
        excitation_weights: None,
        max_excitation: None,
        hamiltonian,
        collapses,
        observables: vec![
            ("cavity_population".into(), OperatorDesc::default().cavity(n_cav)),
            (
                "excited_population".into(),
                OperatorDesc::default().emitter(one_body(&sigma(2, 1, 1)), nc),
            ),
        ],
        emitter_state: vec![c(0.0), c(1.0)],
        cavity_level: 0,
        initial_leakage: 0.0,
        excitations: Some(spec.n),
    }
}

/// Modes `(g, 0..vg)` then `(e, 0..ve)`.
fn holstein_tavis_cummings(spec: &ModelSpec) -> Result<Description> {
    let (vg, ve) = (spec.vib_ground, spec.vib_excited);
    let d = vg + ve;
    let nc = spec.cavity_dim();
    let n = spec.n as f64;
    let (a, a_dag, n_c) = boson_mode(nc);
    let reorg = spec.lambda_v * spec.lambda_v / spec.omega_v;
    let mut h0 = DMatrix::zeros(d, d);
    for nu in 0..vg {
        h0[(nu, nu)] = c(spec.omega_v * nu as f64);
    }
    for nu in 0..ve {
        h0[(vg + nu, vg + nu)] = c(spec.omega_e + spec.omega_v * nu as f64 - reorg);
    }
    let fc = franck_condon_table(spec.lambda_v, spec.omega_v, ve, vg);
    // sum F[nu, nu'] |e,nu><g,nu'|
    let mut raise = DMatrix::zeros(d, d);
    for nu in 0..ve {
        for nu_p in 0..vg {
            raise[(vg + nu, nu_p)] = c(fc[(nu, nu_p)]);
        }
    }
    let g = spec.g();
    let hamiltonian = OperatorDesc::default()
        .emitter(one_body(&h0), nc)
        .cavity(n_c.scale_real(spec.omega_c()))
        .coupled(one_body(&raise).scaled(c(g)), a.clone())
        .coupled(one_body(&raise.adjoint()).scaled(c(g)), a_dag);
    let mut collapses = Vec::new();
    if spec.gamma_c > 0.0 {
        collapses.push(OperatorDesc::default().cavity(a.scale_real(spec.gamma_c.sqrt())));
    }
    let mut excited = DMatrix::zeros(d, d);
    for nu in 0..ve {
        excited[(vg + nu, vg + nu)] = c(1.0 / n);
    }
    let (_, _, n_cav) = boson_mode(nc);

    // vertical excitation of the vibrational ground state
    let overlaps = franck_condon_table(spec.lambda_v, spec.omega_v, ve, 1);
    let kept: f64 = overlaps.iter().map(|x| x * x).sum();
    if kept <= 0.0 {
        return Err(Error::InvalidState(
            "Franck-Condon weight of the retained excited levels is zero".into(),
        ));
    }
    let mut phi = vec![c(0.0); d];
    for nu in 0..ve {
        phi[vg + nu] = c(overlaps[(nu, 0)] / kept.sqrt());
    }
    let mut labels: Vec<String> = (0..vg).map(|nu| format!("g{nu}")).collect();
    labels.extend((0..ve).map(|nu| format!("e{nu}")));
    Ok(Description {
        modes: d,
        mode_labels: labels,
        cavity_dim: nc,
        excitation_weights: None,
        max_excitation: None,
        hamiltonian,
        collapses,
        observables: vec![
            (
                "cavity_population".into(),
                OperatorDesc::default().cavity(n_cav.scale_real(1.0 / n)),
            ),
            (
                "excited_population".into(),
                OperatorDesc::default().emitter(one_body(&excited), nc),
            ),
        ],
        emitter_state: phi,
        cavity_level: 0,
        initial_leakage: 1.0 - kept,
        excitations: Some(spec.n),
    })
}

/// Levels `1..=d` (mode index `nu - 1`), energies `nu * omega_e`.
fn equally_spaced(spec: &ModelSpec) -> Description {
    let d = spec.levels;
    let nc = spec.cavity_dim();
    let (a, a_dag, n_c) = boson_mode(nc);
    let mut h0 = DMatrix::zeros(d, d);
    for k in 0..d {
        h0[(k, k)] = c(spec.omega_e * (k + 1) as f64);
    }
    // sum_nu |nu><nu+1|
    let mut lower = DMatrix::zeros(d, d);
    for k in 0..d - 1 {
        lower[(k, k + 1)] = c(1.0);
    }
    let mu = &lower + lower.adjoint();
    let g = spec.g();
    let mut hamiltonian = OperatorDesc::default()
        .emitter(one_body(&h0), nc)
        .cavity(n_c.scale_real(spec.omega_c()))
        .coupled(one_body(&lower).scaled(c(g)), a_dag)
        .coupled(one_body(&lower.adjoint()).scaled(c(g)), a.clone());
    if spec.dipole != 0.0 {
        // (1/2!) sum' 2D mu_i mu_j = D sum_{i != j} mu_i mu_j
        let dd = MBodyCoefficients::two_body_product(&mu, &mu, c(2.0 * spec.dipole));
        hamiltonian = hamiltonian.emitter(dd, nc);
    }
    let mut collapses = Vec::new();
    if spec.gamma_c > 0.0 {
        collapses.push(OperatorDesc::default().cavity(a.scale_real(spec.gamma_c.sqrt())));
    }
    if spec.gamma_down > 0.0 {
        for k in 0..d - 1 {
            collapses.push(
                OperatorDesc::default()
                    .emitter(one_body(&sigma(d, k, k + 1)).scaled(c(spec.gamma_down.sqrt())), nc),
            );
        }
    }
    let mut observables: Vec<(String, OperatorDesc)> = (0..d)
        .map(|k| {
            (
                format!("population_{}", k + 1),
                OperatorDesc::default().emitter(one_body(&sigma(d, k, k)), nc),
            )
        })
        .collect();
    let (_, _, n_cav) = boson_mode(nc);
    observables.push(("cavity_population".into(), OperatorDesc::default().cavity(n_cav)));
    if spec.n > 1 {
        let pairs = (spec.n * (spec.n - 1)) as f64;
        let v = MBodyCoefficients::two_body_product(&mu, &mu, c(2.0 / pairs));
        observables.push(("dipole_pair".into(), OperatorDesc::default().emitter(v, nc)));
    }
    let mut phi = vec![c(0.0); d];
    phi[d - 1] = c(1.0);
    Description {
        modes: d,
        mode_labels: (1..=d).map(|nu| format!("level{nu}")).collect(),
        cavity_dim: nc,
        excitation_weights: None,
        max_excitation: None,
        hamiltonian,
        collapses,
        observables,
        emitter_state: phi,
        cavity_level: 0,
        initial_leakage: 0.0,
        excitations: (spec.dipole == 0.0).then_some(spec.n * (d - 1)),
    }
}

/// Vibrational levels `0..L` of each molecule, one photon initially.
fn vsc(spec: &ModelSpec) -> Description {
    let l = spec.vib_levels;
    let nc = spec.cavity_dim();
    let (a, a_dag, n_c) = boson_mode(nc);
    let mut h0 = DMatrix::zeros(l, l);
    let mut raise = DMatrix::zeros(l, l);
    for k in 0..l {
        h0[(k, k)] = c(spec.omega_v * k as f64);
        if k + 1 < l {
            raise[(k + 1, k)] = c(((k + 1) as f64).sqrt());
        }
    }
    let g = spec.g();
    let hamiltonian = OperatorDesc::default()
        .emitter(one_body(&h0), nc)
        .cavity(n_c.scale_real(spec.omega_c()))
        .coupled(one_body(&raise).scaled(c(g)), a.clone())
        .coupled(one_body(&raise.adjoint()).scaled(c(g)), a_dag);
    let mut collapses = Vec::new();
    if spec.gamma_c > 0.0 {
        collapses.push(OperatorDesc::default().cavity(a.scale_real(spec.gamma_c.sqrt())));
    }
    let mut quanta = DMatrix::zeros(l, l);
    for k in 0..l {
        quanta[(k, k)] = c(k as f64 / spec.n as f64);
    }
    let (_, _, n_cav) = boson_mode(nc);
    let mut phi = vec![c(0.0); l];
    phi[0] = c(1.0);
    Description {
        modes: l,
        mode_labels: (0..l).map(|k| format!("v{k}")).collect(),
        cavity_dim: nc,
        excitation_weights: Some((0..l as u32).collect()),
        max_excitation: spec.max_excitation,
        hamiltonian,
        collapses,
        observables: vec![
            ("cavity_population".into(), OperatorDesc::default().cavity(n_cav)),
            (
                "vibrational_quanta".into(),
                OperatorDesc::default().emitter(one_body(&quanta), nc),
            ),
        ],
        emitter_state: phi,
        cavity_level: 1.min(nc - 1),
        initial_leakage: 0.0,
        excitations: Some(1),
    }
}
