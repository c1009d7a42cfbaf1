//! Occupation-number states of a few photons over a handful of modes.
//!
//! A mode is the triple (spatial port, polarization, internal label). The
//! internal label is a two-level stand-in for every degree of freedom that
//! makes photons distinguishable (arrival time, spectrum). Linear optical
//! elements never touch it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::qcore::linalg::{CMatrix, C64, ONE, ZERO};

use super::OpticsError;

/// Photon-number ceiling of the engine.
pub const MAX_PHOTONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    /// Logical qubit value carried by the polarization: `H = 0`, `V = 1`.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Polarization::V
        } else {
            Polarization::H
        }
    }

    pub fn both() -> [Polarization; 2] {
        [Polarization::H, Polarization::V]
    }
}

/// Flat index of `(spatial, polarization, label)`.
pub fn mode_index(spatial: usize, pol: Polarization, label: usize) -> usize {
    (spatial * 2 + pol.index()) * 2 + label
}

/// Number of flat modes for `spatial` ports.
pub fn mode_count(spatial: usize) -> usize {
    spatial * 4
}

/// Inverse of [`mode_index`].
pub fn mode_parts(index: usize) -> (usize, Polarization, usize) {
    let label = index % 2;
    let pol = if (index / 2).is_multiple_of(2) {
        Polarization::H
    } else {
        Polarization::V
    };
    (index / 4, pol, label)
}

type Occupation = Vec<u8>;

/// Superposition of Fock basis states with a fixed number of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    terms: BTreeMap<Occupation, C64>,
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

impl FockState {
    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            terms: BTreeMap::from([(vec![0; modes], ONE)]),
        }
    }

    /// Normalized single Fock term with the given photon modes (repeats allowed).
    pub fn from_photons(modes: usize, photons: &[usize]) -> Result<Self, OpticsError> {
        let mut state = Self::vacuum(modes);
        for &m in photons {
            state = state.create(m, ONE)?;
        }
        Ok(state.normalized())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], C64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn amplitude(&self, occupation: &[u8]) -> C64 {
        self.terms.get(occupation).copied().unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in self.terms.values_mut() {
                *a /= n;
            }
        }
        self
    }

    pub fn photon_number(&self) -> usize {
        self.terms
            .keys()
            .map(|k| k.iter().map(|&n| n as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Applies `weight * c_mode^dagger` (unnormalized).
    pub fn create(&self, mode: usize, weight: C64) -> Result<Self, OpticsError> {
        if mode >= self.modes {
            return Err(OpticsError::ModeOutOfRange {
                mode,
                modes: self.modes,
            });
        }
        if self.photon_number() + 1 > MAX_PHOTONS {
            return Err(OpticsError::PhotonOverflow);
        }
        let mut terms = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let mut next = occ.clone();
            next[mode] += 1;
            let factor = (next[mode] as f64).sqrt();
            *terms.entry(next).or_insert(ZERO) += amp * weight * factor;
        }
        Ok(Self {
            modes: self.modes,
            terms,
        })
    }

    /// Applies `sum_m coeffs[m] c_m^dagger`, i.e. creates one photon in a
    /// superposition of modes.
    pub fn create_superposition(&self, coeffs: &[(usize, C64)]) -> Result<Self, OpticsError> {
        let mut out = Self {
            modes: self.modes,
            terms: BTreeMap::new(),
        };
        for &(m, w) in coeffs {
            out.add_assign(&self.create(m, w)?);
        }
        Ok(out)
    }

    fn add_assign(&mut self, other: &Self) {
        for (occ, amp) in &other.terms {
            *self.terms.entry(occ.clone()).or_insert(ZERO) += amp;
        }
    }

    /// Transforms every creation operator as `c_i^dagger -> sum_j U[j,i] c_j^dagger`.
    pub fn apply_unitary(&self, u: &CMatrix) -> Result<Self, OpticsError> {
        if u.nrows() != self.modes || u.ncols() != self.modes {
            return Err(OpticsError::ModeOutOfRange {
                mode: u.nrows().max(u.ncols()),
                modes: self.modes,
            });
        }
        let columns: Vec<Vec<(usize, C64)>> = (0..self.modes)
            .map(|i| {
                (0..self.modes)
                    .filter_map(|j| {
                        let v = u[(j, i)];
                        (v.norm_sqr() > 1e-30).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        let mut terms: BTreeMap<Occupation, C64> = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let photons: Vec<usize> = occ
                .iter()
                .enumerate()
                .flat_map(|(m, &n)| std::iter::repeat_n(m, n as usize))
                .collect();
            let in_norm: f64 = occ.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
            let mut out = vec![0u8; self.modes];
            expand(&photons, &columns, &mut out, *amp / in_norm, &mut terms);
        }
        terms.retain(|_, a| a.norm_sqr() > 1e-30);
        Ok(Self {
            modes: self.modes,
            terms,
        })
    }

    /// Keeps only terms satisfying `keep` (unnormalized).
    pub fn filter<F: Fn(&[u8]) -> bool>(&self, keep: F) -> Self {
        Self {
            modes: self.modes,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

fn expand(
    photons: &[usize],
    columns: &[Vec<(usize, C64)>],
    out: &mut Occupation,
    amp: C64,
    acc: &mut BTreeMap<Occupation, C64>,
) {
    match photons.split_first() {
        None => {
            let out_norm: f64 = out.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
            *acc.entry(out.clone()).or_insert(ZERO) += amp * out_norm;
        }
        Some((&first, rest)) => {
            for &(j, u) in &columns[first] {
                out[j] += 1;
                expand(rest, columns, out, amp * u, acc);
                out[j] -= 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::c;

    #[test]
    fn mode_index_round_trips() {
        for i in 0..mode_count(3) {
            let (s, p, l) = mode_parts(i);
            assert_eq!(mode_index(s, p, l), i);
        }
    }

    #[test]
    fn double_occupation_is_normalized() {
        let s = FockState::from_photons(2, &[0, 0]).unwrap();
        assert_eq!(s.amplitude(&[2, 0]), ONE);
    }

    #[test]
    fn overflow_is_reported() {
        let s = FockState::from_photons(1, &[0; MAX_PHOTONS]).unwrap();
        assert_eq!(s.create(0, ONE), Err(OpticsError::PhotonOverflow));
    }

    #[test]
    fn balanced_splitter_bunches_two_photons() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(-h, 0.0), c(h, 0.0), c(h, 0.0)]);
        let out = FockState::from_photons(2, &[0, 1]).unwrap().apply_unitary(&u).unwrap();
        assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
        assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-12);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
