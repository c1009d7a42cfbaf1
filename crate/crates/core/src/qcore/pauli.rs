//! Conjugating gates past Pauli pads by exact matrix algebra.
//!
//! This is the reference every key-update rule in the crate is checked
//! against: given a gate `G` and a pad `W = (x) Z^a X^b`, find `W'`, a residual
//! `R` and a phase such that `G W = phase * W' R G`.

use serde::{Deserialize, Serialize};

use super::gate::{Gate, GateKind};
use super::linalg::{self, CMatrix, C64};
use super::QcoreError;

/// Exponents of a single-qubit pad `Z^z X^x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PauliBits {
    pub z: bool,
    pub x: bool,
}

impl PauliBits {
    pub const fn new(z: bool, x: bool) -> Self {
        Self { z, x }
    }

    /// All four pads in the order `(0,0), (0,1), (1,0), (1,1)`.
    pub fn all() -> [PauliBits; 4] {
        [
            Self::new(false, false),
            Self::new(false, true),
            Self::new(true, false),
            Self::new(true, true),
        ]
    }

    /// `Z^z X^x` as a 2x2 matrix.
    pub fn matrix(self) -> CMatrix {
        let mut m = linalg::identity(2);
        if self.z {
            m = GateKind::Z.matrix().unwrap() * m;
        }
        if self.x {
            m *= GateKind::X.matrix().unwrap();
        }
        m
    }
}

/// Tensor product of the pads of a word, qubit 0 leftmost.
pub fn word_matrix(word: &[PauliBits]) -> CMatrix {
    word.iter()
        .fold(CMatrix::identity(1, 1), |acc, p| linalg::kron(&acc, &p.matrix()))
}

/// Every word of length `len`, in lexicographic order.
pub fn all_words(len: usize) -> Vec<Vec<PauliBits>> {
    (0..1usize << (2 * len))
        .map(|bits| {
            (0..len)
                .map(|q| {
                    let pair = (bits >> (2 * (len - 1 - q))) & 0b11;
                    PauliBits::new(pair & 0b10 != 0, pair & 0b01 != 0)
                })
                .collect()
        })
        .collect()
}

/// Result of pushing a pad through a gate.
#[derive(Debug, Clone)]
pub struct Conjugation {
    pub word: Vec<PauliBits>,
    /// Extra gate left between the new pad and `G`. Identity for Cliffords,
    /// the phase gate `P` for `T` acting on an X-padded qubit.
    pub residual: Gate,
    pub global_phase: C64,
}

impl Conjugation {
    pub fn residual_is_identity(&self) -> bool {
        let r = self.residual.matrix();
        linalg::max_abs_diff(r, &linalg::identity(r.nrows())) < 1e-12
    }
}

/// Finds `W'`, residual and phase with `G W = phase W' R G`. The pad word is
/// indexed by the gate's own targets (length = gate arity). Only Clifford gates
/// and `T` are supported.
pub fn conjugate_pauli(gate: &Gate, word: &[PauliBits]) -> Result<Conjugation, QcoreError> {
    let k = gate.targets().len();
    if word.len() != k {
        return Err(QcoreError::WordLength {
            expected: k,
            got: word.len(),
        });
    }
    let candidates: Vec<Gate> = match gate.kind() {
        GateKind::T => vec![Gate::i(0), Gate::p(0)],
        GateKind::Custom => return Err(QcoreError::UnsupportedGate(gate.kind().name())),
        _ => vec![identity_gate(k)],
    };
    let g = gate.matrix();
    let conjugated = g * word_matrix(word) * g.adjoint();
    for residual in candidates {
        let n = &conjugated * residual.matrix().adjoint();
        if let Some((new_word, phase)) = match_word(&n, k) {
            let residual = residual
                .retarget(&gate.targets()[..residual.targets().len()])
                .expect("residual fits the gate's targets");
            return Ok(Conjugation {
                word: new_word,
                residual,
                global_phase: phase,
            });
        }
    }
    Err(QcoreError::UnsupportedGate(gate.kind().name()))
}

fn identity_gate(k: usize) -> Gate {
    let targets: Vec<usize> = (0..k).collect();
    Gate::custom(linalg::identity(1 << k), &targets)
        .map(|g| if k == 1 { Gate::i(0) } else { g })
        .expect("identity is unitary")
}

/// If `n` is proportional to a Pauli word with a unit-modulus factor, returns
/// that word and factor.
fn match_word(n: &CMatrix, k: usize) -> Option<(Vec<PauliBits>, C64)> {
    let dim = (1usize << k) as f64;
    all_words(k).into_iter().find_map(|w| {
        let wm = word_matrix(&w);
        let phase = linalg::trace(&(wm.adjoint() * n)) / dim;
        let ok = (phase.norm() - 1.0).abs() < 1e-10 && linalg::max_abs_diff(n, &wm.map(|x| x * phase)) < 1e-10;
        ok.then_some((w, phase))
    })
}

/// Checks `G W = phase W' R G` with explicit matrices; used by tests.
pub fn verify_conjugation(gate: &Gate, word: &[PauliBits], result: &Conjugation) -> bool {
    let g = gate.matrix();
    let lhs = g * word_matrix(word);
    let residual = local_residual(result, gate.targets().len());
    let rhs = word_matrix(&result.word).map(|x| x * result.global_phase) * residual * g;
    linalg::max_abs_diff(&lhs, &rhs) < 1e-10
}

fn local_residual(result: &Conjugation, k: usize) -> CMatrix {
    let r = result.residual.matrix();
    if r.nrows() == 1 << k {
        r.clone()
    } else {
        // single-qubit residual on the first target of a k-qubit gate
        linalg::kron(r, &linalg::identity(1 << (k - 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::ONE;

    #[test]
    fn hadamard_swaps_z_and_x() {
        let r = conjugate_pauli(&Gate::h(0), &[PauliBits::new(true, false)]).unwrap();
        assert_eq!(r.word, vec![PauliBits::new(false, true)]);
        assert!(r.residual_is_identity());
    }

    #[test]
    fn t_without_x_pad_commutes() {
        let r = conjugate_pauli(&Gate::t(0), &[PauliBits::new(false, false)]).unwrap();
        assert_eq!(r.word, vec![PauliBits::new(false, false)]);
        assert!(r.residual_is_identity());
        assert!((r.global_phase - ONE).norm() < 1e-12);
    }

    #[test]
    fn t_with_x_pad_leaves_phase_residual() {
        for z in [false, true] {
            let w = [PauliBits::new(z, true)];
            let r = conjugate_pauli(&Gate::t(0), &w).unwrap();
            assert_eq!(r.residual.kind(), GateKind::P);
            assert!(r.word[0].x);
            assert!(verify_conjugation(&Gate::t(0), &w, &r));
        }
    }

    #[test]
    fn t_times_x_is_x_pdg_t_up_to_phase() {
        // T X = e^{i pi/4} X P^dagger T, the identity behind the residual.
        let t = GateKind::T.matrix().unwrap();
        let x = GateKind::X.matrix().unwrap();
        let pdg = GateKind::Pdg.matrix().unwrap();
        let lhs = &t * &x;
        let rhs = (&x * &pdg * &t).map(|v| v * linalg::cis(std::f64::consts::FRAC_PI_4));
        assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn every_clifford_and_pad_verifies() {
        let gates = [
            Gate::i(0),
            Gate::x(0),
            Gate::y(0),
            Gate::z(0),
            Gate::h(0),
            Gate::p(0),
            Gate::pdg(0),
            Gate::cnot(0, 1),
            Gate::cnot(1, 0),
            Gate::cz(0, 1),
        ];
        for g in &gates {
            for w in all_words(g.targets().len()) {
                let r = conjugate_pauli(g, &w).unwrap();
                assert!(r.residual_is_identity(), "{:?}", g.kind());
                assert!(verify_conjugation(g, &w, &r));
            }
        }
    }

    #[test]
    fn custom_gate_is_unsupported() {
        let g = Gate::custom(GateKind::T.matrix().unwrap(), &[0]).unwrap();
        assert!(matches!(
            conjugate_pauli(&g, &[PauliBits::default()]),
            Err(QcoreError::UnsupportedGate(_))
        ));
    }
}
