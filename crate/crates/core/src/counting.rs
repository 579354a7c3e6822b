//! Density-matrix entry counts for the symmetric sector, the product space
//! and the permutation-symmetrized Liouville space.

use crate::error::{Error, Result};
use crate::fock::binomial;

#[derive(Clone, Debug, PartialEq)]
pub struct EntryCounts {
    pub levels: usize,
    pub emitters: usize,
    pub cavity_dim: usize,
    /// Dimension of the symmetric sector including the cavity.
    pub symmetric_axis: u128,
    /// Dimension of the product space including the cavity.
    pub full_axis: u128,
    pub symmetric_entries: u128,
    pub full_entries: u128,
    /// Symmetrized Liouville space `C(N + d^2 - 1, N) N_c^2`.
    pub liouville_entries: u128,
}

impl EntryCounts {
    pub fn new(levels: usize, emitters: usize, cavity_dim: usize) -> Result<Self> {
        let overflow = || {
            Error::Guard(format!(
                "entry counts for d = {levels}, N = {emitters}, N_c = {cavity_dim} overflow 128 bits"
            ))
        };
        let (d, n, nc) = (levels as u128, emitters as u128, cavity_dim as u128);
        let choose = |top: u128, k: u128| {
            binomial(u64::try_from(top).ok()?, u64::try_from(k).ok()?)
        };
        if d == 0 || nc == 0 {
            return Err(Error::InvalidModel(
                "levels and cavity dimension must be positive".into(),
            ));
        }
        let sym = choose(n + d - 1, n).ok_or_else(overflow)?;
        let symmetric_axis = sym.checked_mul(nc).ok_or_else(overflow)?;
        let full_axis = u32::try_from(n)
            .ok()
            .and_then(|e| d.checked_pow(e))
            .and_then(|p| p.checked_mul(nc))
            .ok_or_else(overflow)?;
        let liouville_entries = choose(n + d * d - 1, n)
            .and_then(|l| l.checked_mul(nc * nc))
            .ok_or_else(overflow)?;
        Ok(EntryCounts {
            levels,
            emitters,
            cavity_dim,
            symmetric_axis,
            full_axis,
            symmetric_entries: symmetric_axis.checked_mul(symmetric_axis).ok_or_else(overflow)?,
            full_entries: full_axis.checked_mul(full_axis).ok_or_else(overflow)?,
            liouville_entries,
        })
    }

    pub fn full_ratio(&self) -> f64 {
        self.full_entries as f64 / self.symmetric_entries as f64
    }

    pub fn liouville_ratio(&self) -> f64 {
        self.liouville_entries as f64 / self.symmetric_entries as f64
    }

    /// `(name, value)` rows in report order.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("levels", self.levels.to_string()),
            ("emitters", self.emitters.to_string()),
            ("cavity_dim", self.cavity_dim.to_string()),
            ("symmetric_axis", self.symmetric_axis.to_string()),
            ("full_axis", self.full_axis.to_string()),
            ("symmetric_entries", self.symmetric_entries.to_string()),
            ("full_entries", self.full_entries.to_string()),
            ("liouville_entries", self.liouville_entries.to_string()),
            ("full_over_symmetric", format!("{:?}", self.full_ratio())),
            ("liouville_over_symmetric", format!("{:?}", self.liouville_ratio())),
        ]
    }
}
