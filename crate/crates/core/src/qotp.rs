//! Quantum one-time pad and the affine GF(2) key algebra tracked during
//! evaluation.
//!
//! A data qubit `|phi>` is encrypted as `Z^a X^b |phi>`. As gates are applied,
//! the pad moves to `Z^{a'} X^{b'}` where each exponent is an affine function
//! of the hidden bits. [`KeyExpr`] represents such a function symbolically so
//! the evaluating party can track *which* bits form the key without knowing
//! their values.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{self, ApplyGate, DensityMatrix, Gate, GateKind, PauliBits, PureState, QcoreError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QotpError {
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error("gate `{0}` has no Pauli key-update rule")]
    NotClifford(&'static str),
    #[error("expected {expected} key pairs, got {got}")]
    KeyCount { expected: usize, got: usize },
}

/// Pad bits for one data qubit: the qubit is encrypted as `Z^a X^b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PadKey {
    pub a: bool,
    pub b: bool,
}

impl PadKey {
    pub const fn new(a: bool, b: bool) -> Self {
        Self { a, b }
    }

    /// Uniformly random pad.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            a: rng.random(),
            b: rng.random(),
        }
    }

    pub fn all() -> [PadKey; 4] {
        [
            Self::new(false, false),
            Self::new(false, true),
            Self::new(true, false),
            Self::new(true, true),
        ]
    }
}

impl From<PadKey> for PauliBits {
    fn from(k: PadKey) -> Self {
        PauliBits::new(k.a, k.b)
    }
}

impl From<PauliBits> for PadKey {
    fn from(p: PauliBits) -> Self {
        PadKey::new(p.z, p.x)
    }
}

fn apply_pad(state: &PureState, qubit: usize, key: PadKey) -> Result<PureState, QcoreError> {
    let mut s = state.clone();
    if key.b {
        s = s.apply_gate(&Gate::x(qubit))?;
    }
    if key.a {
        s = s.apply_gate(&Gate::z(qubit))?;
    }
    Ok(s)
}

/// `Z^a X^b |phi>` on a single qubit.
pub fn encrypt(plaintext: &PureState, key: PadKey) -> Result<PureState, QotpError> {
    if plaintext.num_qubits() != 1 {
        return Err(QcoreError::BadDimension { len: plaintext.dim() }.into());
    }
    Ok(apply_pad(plaintext, 0, key)?)
}

/// Inverse of [`encrypt`]: `X^b Z^a |psi>`.
pub fn decrypt(ciphertext: &PureState, key: PadKey) -> Result<PureState, QotpError> {
    if ciphertext.num_qubits() != 1 {
        return Err(QcoreError::BadDimension { len: ciphertext.dim() }.into());
    }
    Ok(unpad(ciphertext, 0, key)?)
}

fn unpad(state: &PureState, qubit: usize, key: PadKey) -> Result<PureState, QcoreError> {
    let mut s = state.clone();
    if key.a {
        s = s.apply_gate(&Gate::z(qubit))?;
    }
    if key.b {
        s = s.apply_gate(&Gate::x(qubit))?;
    }
    Ok(s)
}

/// Pads every qubit of a register with its own key.
pub fn encrypt_register(plaintext: &PureState, keys: &[PadKey]) -> Result<PureState, QotpError> {
    check_keys(plaintext, keys)?;
    keys.iter()
        .enumerate()
        .try_fold(plaintext.clone(), |s, (q, &k)| apply_pad(&s, q, k))
        .map_err(Into::into)
}

pub fn decrypt_register(ciphertext: &PureState, keys: &[PadKey]) -> Result<PureState, QotpError> {
    check_keys(ciphertext, keys)?;
    keys.iter()
        .enumerate()
        .try_fold(ciphertext.clone(), |s, (q, &k)| unpad(&s, q, k))
        .map_err(Into::into)
}

fn check_keys(state: &PureState, keys: &[PadKey]) -> Result<(), QotpError> {
    if keys.len() != state.num_qubits() {
        return Err(QotpError::KeyCount {
            expected: state.num_qubits(),
            got: keys.len(),
        });
    }
    Ok(())
}

/// Average of the four padded projectors of `plaintext`. Equals `I/2` for
/// every single-qubit input.
pub fn pad_twirl_check(plaintext: &PureState) -> Result<DensityMatrix, QotpError> {
    let mut acc = qcore::linalg::CMatrix::zeros(2, 2);
    for key in PadKey::all() {
        acc += encrypt(plaintext, key)?.to_density().matrix();
    }
    Ok(DensityMatrix::new(acc.scale(0.25))?)
}

/// A hidden bit that can appear in a key expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "wire", rename_all = "lowercase")]
pub enum Symbol {
    /// Z-pad bit of a wire.
    A(usize),
    /// X-pad bit of a wire.
    B(usize),
    /// Mask bit of the `xi_a` ancilla of a wire.
    Q(usize),
    /// Mask bit of the `xi_b` ancilla of a wire.
    R(usize),
    /// Product `a AND b` of a wire's pad bits, pre-encrypted by the key owner.
    Ab(usize),
    /// A measurement outcome, identified by its position in a transcript.
    Outcome(usize),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::A(w) => write!(f, "a{w}"),
            Symbol::B(w) => write!(f, "b{w}"),
            Symbol::Q(w) => write!(f, "q{w}"),
            Symbol::R(w) => write!(f, "r{w}"),
            Symbol::Ab(w) => write!(f, "ab{w}"),
            Symbol::Outcome(k) => write!(f, "k{k}"),
        }
    }
}

/// Affine function over GF(2): `constant + sum of symbols`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct KeyExpr {
    pub constant: bool,
    pub symbols: BTreeSet<Symbol>,
}

impl KeyExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(bit: bool) -> Self {
        Self {
            constant: bit,
            symbols: BTreeSet::new(),
        }
    }

    pub fn symbol(s: Symbol) -> Self {
        Self {
            constant: false,
            symbols: BTreeSet::from([s]),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The same expression with the constant term dropped.
    pub fn linear_part(&self) -> Self {
        Self {
            constant: false,
            symbols: self.symbols.clone(),
        }
    }

    /// `self` if `bit`, else zero. Used to multiply by known bits.
    pub fn times(&self, bit: bool) -> Self {
        if bit {
            self.clone()
        } else {
            Self::zero()
        }
    }

    pub fn evaluate<F: Fn(Symbol) -> bool>(&self, value: F) -> bool {
        self.symbols.iter().fold(self.constant, |acc, &s| acc ^ value(s))
    }
}

impl BitXor for &KeyExpr {
    type Output = KeyExpr;
    fn bitxor(self, rhs: &KeyExpr) -> KeyExpr {
        let symbols = self.symbols.symmetric_difference(&rhs.symbols).copied().collect();
        KeyExpr {
            constant: self.constant ^ rhs.constant,
            symbols,
        }
    }
}

impl BitXor for KeyExpr {
    type Output = KeyExpr;
    fn bitxor(self, rhs: KeyExpr) -> KeyExpr {
        &self ^ &rhs
    }
}

impl BitXorAssign<&KeyExpr> for KeyExpr {
    fn bitxor_assign(&mut self, rhs: &KeyExpr) {
        *self = &*self ^ rhs;
    }
}

impl BitXorAssign<bool> for KeyExpr {
    fn bitxor_assign(&mut self, rhs: bool) {
        self.constant ^= rhs;
    }
}

impl fmt::Display for KeyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
        if self.constant || parts.is_empty() {
            parts.push(if self.constant { "1" } else { "0" }.to_string());
        }
        f.write_str(&parts.join("+"))
    }
}

/// Symbolic pad `Z^z X^x` of one wire.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WireKey {
    pub z: KeyExpr,
    pub x: KeyExpr,
}

impl WireKey {
    /// The fresh pad `(a_w, b_w)` of wire `w`.
    pub fn fresh(wire: usize) -> Self {
        Self {
            z: KeyExpr::symbol(Symbol::A(wire)),
            x: KeyExpr::symbol(Symbol::B(wire)),
        }
    }

    pub fn evaluate<F: Fn(Symbol) -> bool + Copy>(&self, value: F) -> PadKey {
        PadKey::new(self.z.evaluate(value), self.x.evaluate(value))
    }
}

/// Pushes a Clifford gate through the symbolic pads of the wires it touches.
/// `keys` is indexed by wire; the gate's targets are wire indices.
pub fn key_update(gate: &Gate, keys: &mut [WireKey]) -> Result<(), QotpError> {
    if let Some(&t) = gate.targets().iter().find(|&&t| t >= keys.len()) {
        return Err(QcoreError::QubitOutOfRange {
            qubit: t,
            num_qubits: keys.len(),
        }
        .into());
    }
    let t = gate.targets();
    match gate.kind() {
        GateKind::I | GateKind::X | GateKind::Y | GateKind::Z => {}
        GateKind::H => {
            let k = &mut keys[t[0]];
            std::mem::swap(&mut k.z, &mut k.x);
        }
        GateKind::P | GateKind::Pdg => {
            let k = &mut keys[t[0]];
            let x = k.x.clone();
            k.z ^= &x;
        }
        GateKind::Cnot => {
            let (c, tg) = (t[0], t[1]);
            let zt = keys[tg].z.clone();
            let xc = keys[c].x.clone();
            keys[c].z ^= &zt;
            keys[tg].x ^= &xc;
        }
        GateKind::Cz => {
            let (p, q) = (t[0], t[1]);
            let xp = keys[p].x.clone();
            let xq = keys[q].x.clone();
            keys[p].z ^= &xq;
            keys[q].z ^= &xp;
        }
        GateKind::T | GateKind::Custom => {
            return Err(QotpError::NotClifford(gate.kind().name()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::conjugate_pauli;
    use crate::qcore::linalg::c;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn encrypt_examples() {
        let k = |a, b| PadKey::new(a, b);
        assert!(encrypt(&PureState::zero(), k(false, false))
            .unwrap()
            .approx_eq(&PureState::zero()));
        assert!(encrypt(&PureState::zero(), k(false, true))
            .unwrap()
            .approx_eq(&PureState::one()));
        assert!(encrypt(&PureState::plus(), k(true, false))
            .unwrap()
            .approx_eq(&PureState::minus()));
    }

    #[test]
    fn decrypt_round_trips_every_key() {
        let t_state = PureState::equatorial(std::f64::consts::FRAC_PI_4);
        for key in PadKey::all() {
            for s in [PureState::zero(), t_state.clone()] {
                let back = decrypt(&encrypt(&s, key).unwrap(), key).unwrap();
                assert!(back.approx_eq(&s));
            }
        }
    }

    #[test]
    fn wrong_key_flips_plus_to_minus() {
        let ct = encrypt(&PureState::plus(), PadKey::new(false, false)).unwrap();
        let wrong = decrypt(&ct, PadKey::new(true, false)).unwrap();
        assert!(wrong.approx_eq(&PureState::minus()));
        assert!(!wrong.approx_eq(&PureState::plus()));
    }

    #[test]
    fn twirl_of_examples_is_maximally_mixed() {
        let theta = 0.3f64;
        for s in [
            PureState::zero(),
            PureState::plus(),
            PureState::qubit(c(theta.cos(), 0.0), c(theta.sin(), 0.0)),
        ] {
            let rho = pad_twirl_check(&s).unwrap();
            assert!(rho.approx_eq(&DensityMatrix::maximally_mixed(1), 1e-12));
        }
    }

    #[test]
    fn twirl_of_haar_states() {
        let mut rng = substream(99, 0);
        for _ in 0..20 {
            let s = PureState::random(1, &mut rng);
            let rho = pad_twirl_check(&s).unwrap();
            assert!(rho.approx_eq(&DensityMatrix::maximally_mixed(1), 1e-12));
        }
    }

    fn assignment(bits: u32) -> impl Fn(Symbol) -> bool + Copy {
        // wire 0 (a,b) from bits 0-1, wire 1 from bits 2-3
        move |s| match s {
            Symbol::A(w) => bits >> (2 * w) & 1 == 1,
            Symbol::B(w) => bits >> (2 * w + 1) & 1 == 1,
            _ => false,
        }
    }

    /// For every supported Clifford and every concrete pad, the symbolic update
    /// evaluates to the word found by explicit matrix conjugation.
    #[test]
    fn key_update_agrees_with_conjugation_oracle() {
        let gates = [
            Gate::i(0),
            Gate::x(0),
            Gate::y(1),
            Gate::z(0),
            Gate::h(0),
            Gate::h(1),
            Gate::p(0),
            Gate::pdg(1),
            Gate::cnot(0, 1),
            Gate::cnot(1, 0),
            Gate::cz(0, 1),
        ];
        for g in &gates {
            let mut keys = vec![WireKey::fresh(0), WireKey::fresh(1)];
            key_update(g, &mut keys).unwrap();
            for bits in 0..16u32 {
                let val = assignment(bits);
                let before: Vec<PauliBits> = (0..2).map(|w| WireKey::fresh(w).evaluate(val).into()).collect();
                let local: Vec<PauliBits> = g.targets().iter().map(|&t| before[t]).collect();
                let oracle = conjugate_pauli(g, &local).unwrap();
                assert!(oracle.residual_is_identity());
                let mut expected = before.clone();
                for (j, &t) in g.targets().iter().enumerate() {
                    expected[t] = oracle.word[j];
                }
                let got: Vec<PauliBits> = keys.iter().map(|k| k.evaluate(val).into()).collect();
                assert_eq!(got, expected, "gate {:?} bits {bits:04b}", g.kind());
            }
        }
    }

    #[test]
    fn named_examples() {
        let mut k = vec![WireKey::fresh(0)];
        key_update(&Gate::h(0), &mut k).unwrap();
        assert_eq!(k[0].z, KeyExpr::symbol(Symbol::B(0)));
        assert_eq!(k[0].x, KeyExpr::symbol(Symbol::A(0)));

        let mut k = vec![WireKey::fresh(0)];
        key_update(&Gate::p(0), &mut k).unwrap();
        assert_eq!(k[0].z, KeyExpr::symbol(Symbol::A(0)) ^ KeyExpr::symbol(Symbol::B(0)));
        assert_eq!(k[0].x, KeyExpr::symbol(Symbol::B(0)));

        let mut k = vec![WireKey::fresh(0), WireKey::fresh(1)];
        key_update(&Gate::cnot(0, 1), &mut k).unwrap();
        assert_eq!(k[0].z.to_string(), "a0+a1");
        assert_eq!(k[1].x.to_string(), "b0+b1");
        assert_eq!(k[0].x.to_string(), "b0");
        assert_eq!(k[1].z.to_string(), "a1");
    }

    #[test]
    fn single_qubit_cliffords_keep_x_key_canonical() {
        // Every word over {H, P} up to length 6 leaves b' in {a, b, a+b}.
        let canon = [
            KeyExpr::symbol(Symbol::A(0)),
            KeyExpr::symbol(Symbol::B(0)),
            KeyExpr::symbol(Symbol::A(0)) ^ KeyExpr::symbol(Symbol::B(0)),
        ];
        for len in 0..=6u32 {
            for word in 0..(1u32 << len) {
                let mut k = vec![WireKey::fresh(0)];
                for i in 0..len {
                    let g = if word >> i & 1 == 1 { Gate::h(0) } else { Gate::p(0) };
                    key_update(&g, &mut k).unwrap();
                }
                assert!(canon.contains(&k[0].x.linear_part()));
            }
        }
    }

    #[test]
    fn t_has_no_clifford_rule() {
        let mut k = vec![WireKey::fresh(0)];
        assert!(matches!(
            key_update(&Gate::t(0), &mut k),
            Err(QotpError::NotClifford("t"))
        ));
    }

    #[test]
    fn register_pad_matches_word_matrix() {
        let keys = [PadKey::new(true, false), PadKey::new(true, true)];
        let s = PureState::random(2, &mut substream(4, 4));
        let enc = encrypt_register(&s, &keys).unwrap();
        let words: Vec<PauliBits> = keys.iter().map(|&k| k.into()).collect();
        let m = crate::qcore::pauli::word_matrix(&words);
        let direct = PureState::normalized((m * s.to_vector()).iter().copied().collect()).unwrap();
        assert!(enc.approx_eq(&direct));
        assert!(decrypt_register(&enc, &keys).unwrap().approx_eq(&s));
    }

    fn arb_expr() -> impl Strategy<Value = KeyExpr> {
        (any::<bool>(), prop::collection::btree_set(0usize..6, 0..6)).prop_map(|(c, set)| KeyExpr {
            constant: c,
            symbols: set
                .into_iter()
                .map(|i| match i % 3 {
                    0 => Symbol::A(i / 3),
                    1 => Symbol::B(i / 3),
                    _ => Symbol::Q(i / 3),
                })
                .collect(),
        })
    }

    proptest! {
        #[test]
        fn xor_is_commutative_and_associative(x in arb_expr(), y in arb_expr(), z in arb_expr()) {
            prop_assert_eq!(&x ^ &y, &y ^ &x);
            prop_assert_eq!(&(&x ^ &y) ^ &z, &x ^ &(&y ^ &z));
            prop_assert!((&x ^ &x) == KeyExpr::zero());
        }

        #[test]
        fn evaluation_is_a_homomorphism(x in arb_expr(), y in arb_expr(), bits in 0u32..64) {
            let val = |s: Symbol| {
                let i = match s {
                    Symbol::A(w) => 3 * w,
                    Symbol::B(w) => 3 * w + 1,
                    Symbol::Q(w) => 3 * w + 2,
                    _ => 0,
                };
                bits >> i & 1 == 1
            };
            prop_assert_eq!((&x ^ &y).evaluate(val), x.evaluate(val) ^ y.evaluate(val));
        }
    }
}
