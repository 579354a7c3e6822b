//! Bosonic Fock sectors realizing the totally symmetric subspace.
//!
//! A sector with `d` modes and `N` particles holds every occupation vector
//! `(n_1, ..., n_d)` with `sum n_a = N`; there are `C(N + d - 1, N)` of them.
//! States are stored in lexicographically descending order, so the first state
//! is `(N, 0, ..., 0)` and the last one is the fully inverted `(0, ..., 0, N)`.
//! Ranking uses the combinadic (hockey-stick) formula and is `O(d)`.

use std::fmt;

use crate::error::{Error, Result};

/// Occupation vector of the emitter modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState(Vec<u32>);

impl FockState {
    pub fn new(occ: Vec<u32>) -> Self {
        FockState(occ)
    }

    pub fn occ(&self) -> &[u32] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn particles(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl From<Vec<u32>> for FockState {
    fn from(occ: Vec<u32>) -> Self {
        FockState(occ)
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Binomial coefficient with overflow detection.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of states in the sector with `d` modes and `n` particles.
pub fn sector_size(d: usize, n: usize) -> Option<u128> {
    if d == 0 {
        return Some(if n == 0 { 1 } else { 0 });
    }
    binomial((n + d - 1) as u64, n as u64)
}

/// All weak compositions of `N` into `d` parts, with an `O(d)` rank map.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    particles: usize,
    states: Vec<FockState>,
    // tails[k - 1][m] = C(m + k, k): weak compositions of m into k + 1 parts
    tails: Vec<Vec<usize>>,
}

impl FockBasis {
    /// Enumerate the sector with `d >= 1` modes and `n` particles.
    pub fn enumerate(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("a Fock sector needs at least one mode".into()));
        }
        let size = sector_size(d, n)
            .and_then(|s| usize::try_from(s).ok())
            .filter(|&s| s.checked_mul(d).is_some())
            .ok_or(Error::BasisTooLarge { d, n })?;

        let mut tails = Vec::with_capacity(d.saturating_sub(1));
        for k in 1..d {
            let row = (0..n.max(1))
                .map(|m| {
                    binomial((m + k) as u64, k as u64)
                        .and_then(|c| usize::try_from(c).ok())
                        .ok_or(Error::BasisTooLarge { d, n })
                })
                .collect::<Result<Vec<_>>>()?;
            tails.push(row);
        }

        let mut states = Vec::with_capacity(size);
        let mut occ = vec![0u32; d];
        fill_descending(&mut occ, 0, n as u32, &mut states);
        debug_assert_eq!(states.len(), size);

        Ok(FockBasis {
            modes: d,
            particles: n,
            states,
            tails,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn unrank(&self, index: usize) -> Result<&FockState> {
        self.states.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.states.len(),
        })
    }

    /// Index of `state` in this basis.
    pub fn rank(&self, state: &FockState) -> Result<usize> {
        self.rank_occ(state.occ()).ok_or_else(|| Error::NotInSector {
            state: state.occ().to_vec(),
            modes: self.modes,
            particles: self.particles,
        })
    }

    /// Rank of a raw occupation slice; `None` when it is not in the sector.
    pub fn rank_occ(&self, occ: &[u32]) -> Option<usize> {
        if occ.len() != self.modes {
            return None;
        }
        let mut remaining = self.particles as u64;
        let mut index = 0usize;
        for (alpha, &n) in occ.iter().enumerate() {
            let n = n as u64;
            if n > remaining {
                return None;
            }
            let parts_after = self.modes - alpha - 1;
            if parts_after == 0 {
                if n != remaining {
                    return None;
                }
                break;
            }
            if remaining > n {
                let m = (remaining - n - 1) as usize;
                index += self.tails[parts_after - 1][m];
            }
            remaining -= n;
        }
        Some(index)
    }

    /// Index of the fully inverted state `(0, ..., 0, N)`.
    pub fn fully_inverted(&self) -> usize {
        self.states.len() - 1
    }
}

fn fill_descending(occ: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<FockState>) {
    if pos + 1 == occ.len() {
        occ[pos] = remaining;
        out.push(FockState(occ.to_vec()));
        return;
    }
    for v in (0..=remaining).rev() {
        occ[pos] = v;
        fill_descending(occ, pos + 1, remaining - v, out);
    }
    occ[pos] = 0;
}

const NOT_RETAINED: usize = usize::MAX;

/// Emitter Fock sector tensored with a truncated bosonic subsystem.
///
/// Composite index of `(emitter e, cavity c)` is `e * cavity_dim + c` (emitter
/// index slowest). When an excitation limit is applied, only states with
/// `sum_a w_a n_a + c <= max_excitation` are kept, in the same relative order.
#[derive(Clone, Debug)]
pub struct CompositeBasis {
    emitters: FockBasis,
    cavity_dim: usize,
    excitation_weights: Option<Vec<u32>>,
    max_excitation: Option<u32>,
    retained: Option<Vec<usize>>,
    lookup: Option<Vec<usize>>,
}

impl CompositeBasis {
    pub fn new(emitters: FockBasis, cavity_dim: usize) -> Result<Self> {
        if cavity_dim == 0 {
            return Err(Error::InvalidModel("cavity dimension must be at least 1".into()));
        }
        emitters
            .len()
            .checked_mul(cavity_dim)
            .ok_or(Error::BasisTooLarge {
                d: emitters.modes(),
                n: emitters.particles(),
            })?;
        Ok(CompositeBasis {
            emitters,
            cavity_dim,
            excitation_weights: None,
            max_excitation: None,
            retained: None,
            lookup: None,
        })
    }

    /// Attach an excitation constraint; `restrict_composite` applies it.
    pub fn with_excitation_limit(
        mut self,
        weights: Vec<u32>,
        max_excitation: Option<u32>,
    ) -> Result<Self> {
        if weights.len() != self.emitters.modes() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} excitation weights for {} emitter modes",
                    weights.len(),
                    self.emitters.modes()
                ),
            });
        }
        self.excitation_weights = Some(weights);
        self.max_excitation = max_excitation;
        Ok(self)
    }

    pub fn emitters(&self) -> &FockBasis {
        &self.emitters
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim
    }

    pub fn excitation_weights(&self) -> Option<&[u32]> {
        self.excitation_weights.as_deref()
    }

    pub fn max_excitation(&self) -> Option<u32> {
        self.max_excitation
    }

    /// Size of the unrestricted product `|emitters| * cavity_dim`.
    pub fn full_len(&self) -> usize {
        self.emitters.len() * self.cavity_dim
    }

    pub fn len(&self) -> usize {
        match &self.retained {
            Some(r) => r.len(),
            None => self.full_len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_restricted(&self) -> bool {
        self.retained.is_some()
    }

    /// Unrestricted indices of the retained states, if restricted.
    pub fn retained(&self) -> Option<&[usize]> {
        self.retained.as_deref()
    }

    /// Restricted index of the product state `(emitter, cavity)`.
    pub fn index(&self, emitter: usize, cavity: usize) -> Option<usize> {
        if emitter >= self.emitters.len() || cavity >= self.cavity_dim {
            return None;
        }
        let full = emitter * self.cavity_dim + cavity;
        match &self.lookup {
            Some(l) => Some(l[full]).filter(|&i| i != NOT_RETAINED),
            None => Some(full),
        }
    }

    /// `(emitter index, cavity level)` of restricted index `i`.
    pub fn components(&self, i: usize) -> (usize, usize) {
        let full = match &self.retained {
            Some(r) => r[i],
            None => i,
        };
        (full / self.cavity_dim, full % self.cavity_dim)
    }

    /// Weighted excitation `sum_a w_a n_a + c` of restricted index `i`.
    pub fn excitation(&self, i: usize) -> Option<u64> {
        let weights = self.excitation_weights.as_ref()?;
        let (e, c) = self.components(i);
        Some(weighted_excitation(self.emitters.states[e].occ(), weights) + c as u64)
    }
}

fn weighted_excitation(occ: &[u32], weights: &[u32]) -> u64 {
    occ.iter()
        .zip(weights)
        .map(|(&n, &w)| n as u64 * w as u64)
        .sum()
}

/// Keep exactly the composite states whose weighted excitation is at most
/// `max_excitation`. Without a limit the basis is returned unchanged.
pub fn restrict_composite(basis: &CompositeBasis) -> Result<CompositeBasis> {
    let (weights, limit) = match (&basis.excitation_weights, basis.max_excitation) {
        (Some(w), Some(m)) => (w.clone(), m as u64),
        (Some(_), None) => return Ok(basis.clone()),
        (None, _) => {
            return Err(Error::InvalidModel(
                "restrict_composite requires excitation weights".into(),
            ))
        }
    };
    let nc = basis.cavity_dim;
    let candidates: Box<dyn Iterator<Item = usize>> = match &basis.retained {
        Some(r) => Box::new(r.iter().copied()),
        None => Box::new(0..basis.full_len()),
    };
    let retained: Vec<usize> = candidates
        .filter(|&full| {
            let (e, c) = (full / nc, full % nc);
            weighted_excitation(basis.emitters.states[e].occ(), &weights) + c as u64 <= limit
        })
        .collect();
    let mut lookup = vec![NOT_RETAINED; basis.full_len()];
    for (i, &full) in retained.iter().enumerate() {
        lookup[full] = i;
    }
    Ok(CompositeBasis {
        emitters: basis.emitters.clone(),
        cavity_dim: nc,
        excitation_weights: Some(weights),
        max_excitation: basis.max_excitation,
        retained: Some(retained),
        lookup: Some(lookup),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sector_sizes() {
        assert_eq!(FockBasis::enumerate(3, 2).unwrap().len(), 6);
        assert_eq!(FockBasis::enumerate(10, 3).unwrap().len(), 220);
        let b = FockBasis::enumerate(10, 5).unwrap();
        assert_eq!(b.len(), 2002);
        assert_eq!(CompositeBasis::new(b, 6).unwrap().len(), 12012);
    }

    #[test]
    fn ordering_is_descending_lex() {
        let b = FockBasis::enumerate(3, 2).unwrap();
        let occs: Vec<Vec<u32>> = b.states().iter().map(|s| s.occ().to_vec()).collect();
        assert_eq!(
            occs,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
        assert_eq!(b.rank(&b.states()[0]).unwrap(), 0);
    }

    #[test]
    fn stars_and_bars_counts() {
        for d in 1..=6 {
            for n in 0..=20 {
                let b = FockBasis::enumerate(d, n).unwrap();
                assert_eq!(b.len() as u128, binomial((n + d - 1) as u64, n as u64).unwrap());
                assert!(b.states().iter().all(|s| s.particles() == n));
            }
        }
    }

    #[test]
    fn fully_inverted_rank_matches_linear_scan() {
        for (d, n) in [(2, 5), (3, 17), (4, 3), (10, 5)] {
            let b = FockBasis::enumerate(d, n).unwrap();
            let mut occ = vec![0u32; d];
            occ[d - 1] = n as u32;
            let target = FockState::new(occ);
            let scanned = b.states().iter().position(|s| *s == target).unwrap();
            assert_eq!(b.rank(&target).unwrap(), scanned);
            assert_eq!(b.fully_inverted(), scanned);
        }
    }

    #[test]
    fn rank_unrank_sweep() {
        let b = FockBasis::enumerate(4, 3).unwrap();
        for k in 0..b.len() {
            assert_eq!(b.rank(b.unrank(k).unwrap()).unwrap(), k);
        }
    }

    #[test]
    fn rank_rejects_foreign_states() {
        let b = FockBasis::enumerate(3, 2).unwrap();
        assert!(matches!(
            b.rank(&FockState::new(vec![1, 1, 1])),
            Err(Error::NotInSector { .. })
        ));
        assert!(b.rank(&FockState::new(vec![2, 0])).is_err());
        assert!(b.unrank(6).is_err());
        assert!(FockBasis::enumerate(0, 1).is_err());
    }

    #[test]
    fn oversized_sector_is_an_error() {
        assert!(matches!(
            FockBasis::enumerate(200, 200),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn zero_particles() {
        let b = FockBasis::enumerate(3, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.rank(&FockState::new(vec![0, 0, 0])).unwrap(), 0);
    }

    fn vsc_basis(n_exc: Option<u32>) -> CompositeBasis {
        let fock = FockBasis::enumerate(3, 2).unwrap();
        CompositeBasis::new(fock, 2)
            .unwrap()
            .with_excitation_limit(vec![0, 1, 2], n_exc)
            .unwrap()
    }

    #[test]
    fn restriction_matches_brute_force_filter() {
        let base = vsc_basis(Some(1));
        let restricted = restrict_composite(&base).unwrap();
        // brute force over the distinguishable product of two 3-level molecules
        // and a 2-level cavity; symmetric classes are sorted level tuples
        let mut classes = std::collections::BTreeSet::new();
        for v1 in 0..3u32 {
            for v2 in 0..3u32 {
                for c in 0..2u32 {
                    if v1 + v2 + c <= 1 {
                        classes.insert((v1.min(v2), v1.max(v2), c));
                    }
                }
            }
        }
        assert_eq!(restricted.len(), classes.len());
        // |2,0,0>|0>, |2,0,0>|1>, |1,1,0>|0>
        assert_eq!(restricted.len(), 3);
        for i in 0..restricted.len() {
            assert!(restricted.excitation(i).unwrap() <= 1);
        }
        // order is preserved
        let r = restricted.retained().unwrap();
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unlimited_restriction_is_identity() {
        let base = vsc_basis(None);
        let r = restrict_composite(&base).unwrap();
        assert!(!r.is_restricted());
        assert_eq!(r.len(), base.len());
    }

    #[test]
    fn restriction_needs_weights() {
        let b = CompositeBasis::new(FockBasis::enumerate(2, 1).unwrap(), 2).unwrap();
        assert!(restrict_composite(&b).is_err());
        assert!(CompositeBasis::new(FockBasis::enumerate(2, 1).unwrap(), 0).is_err());
    }

    proptest! {
        #[test]
        fn rank_is_a_bijection(d in 1usize..6, n in 0usize..9) {
            let b = FockBasis::enumerate(d, n).unwrap();
            for (k, s) in b.states().iter().enumerate() {
                prop_assert_eq!(b.rank(s).unwrap(), k);
            }
        }

        #[test]
        fn restriction_idempotent_and_monotone(limit in 0u32..6, extra in 0u32..3) {
            let fock = FockBasis::enumerate(3, 3).unwrap();
            let base = CompositeBasis::new(fock, 4).unwrap();
            let small = restrict_composite(
                &base.clone().with_excitation_limit(vec![0, 1, 2], Some(limit)).unwrap(),
            ).unwrap();
            let twice = restrict_composite(&small).unwrap();
            prop_assert_eq!(small.retained(), twice.retained());
            let large = restrict_composite(
                &base.with_excitation_limit(vec![0, 1, 2], Some(limit + extra)).unwrap(),
            ).unwrap();
            let big: std::collections::HashSet<_> = large.retained().unwrap().iter().collect();
            prop_assert!(small.retained().unwrap().iter().all(|i| big.contains(i)));
        }
    }
}
