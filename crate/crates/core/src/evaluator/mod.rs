//! The homomorphic scheme: Alice prepares a padded ciphertext and an
//! evaluation key, Bob evaluates a circuit on it, Alice decrypts.
//!
//! # T-gadget wiring
//!
//! All conventions for the non-Clifford step live here.
//!
//! 1. Bob applies `T` to a wire padded by `Z^z X^x`. This leaves
//!    `Z^{z+x} X^x P^x T`, so the z-key picks up `x` and a residual `P^x`
//!    must be cancelled.
//! 2. Write `x = e + c` with `e` the symbolic part and `c` a known constant.
//!    Alice's ancilla `Z^mu P^e |+>` is consumed by a CNOT with the data wire
//!    as control and the ancilla as target; the ancilla is then measured in
//!    the computational basis with outcome `m`. The data wire receives
//!    `Z^{mu + m e} P^e`, which cancels the residual when `c = 0`.
//! 3. When `c = 1` Bob follows with `P^dagger`, which updates the key like any
//!    Clifford (`z += x`).
//! 4. `e` must be `a_v`, `b_v` or `a_v + b_v` for a single wire `v`. The first
//!    two use `xi_a = Z^q P^a |+>` or `xi_b = Z^r P^b |+>` directly. The third
//!    first merges both ancillas with the phase-add step:
//!    * qubit backend: CNOT from `xi_a` to `xi_b`, measure `xi_b` as `m'`,
//!      leaving `Z^{q + r + ab + m' b} P^{a+b} |+>`;
//!    * optics backend: polarizing beamsplitter plus half-wave plate with a
//!      herald `k1` (`V -> 0`, `H -> 1`), leaving `Z^{q + r + ab + k1} P^{a+b} |+>`.
//!
//!    The `ab` term comes from `i * i = -1`. It is not affine in the pad bits,
//!    so Alice also encrypts `a AND b` for each wire.
//! 5. Each wire's ancilla pair serves one gadget. A second gadget drawing on the
//!    same wire's keys fails with [`EvalError::AncillasExhausted`].

mod bob;
pub mod circuit;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fhe::{self, CipherBit, FheError, FheKeyPair, FheParams, PublicKey};
use crate::qcore::{PureState, QcoreError};
use crate::qotp::{self, PadKey, QotpError, Symbol, WireKey};

pub use bob::{evaluate, plan_gadgets, t_gadget, Backend, GadgetCase, GadgetOutput, OpticalGates};
pub use circuit::{CanonicalCircuit, Circuit, GateSpec, MAX_WIRES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error(transparent)]
    Qotp(#[from] QotpError),
    #[error(transparent)]
    Fhe(#[from] FheError),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{0}` is neither Clifford nor T")]
    UnsupportedGate(&'static str),
    #[error("circuit has T-depth {0}; only T-depth one is supported")]
    TDepth(usize),
    #[error("circuit needs {got} wires; at most {max} are supported")]
    WireCount { max: usize, got: usize },
    #[error("x-key `{key}` of wire {wire} is not a, b or a+b of a single wire")]
    NonCanonicalKey { wire: usize, key: String },
    #[error("the ancilla pair of wire {0} was already consumed")]
    AncillasExhausted(usize),
    #[error("evaluation key has no {0}")]
    MissingResource(String),
    #[error("post-selection failed at {0}")]
    PostSelectionFailed(&'static str),
}

impl EvalError {
    /// Whether rerunning with fresh pads can succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, EvalError::PostSelectionFailed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaKind {
    /// `Z^q P^a |+>`.
    XiA,
    /// `Z^r P^b |+>`.
    XiB,
}

/// The equatorial state `Z^mask P^phase |+>`.
pub fn ancilla_state(phase: bool, mask: bool) -> PureState {
    let quarter = std::f64::consts::FRAC_PI_2;
    let phi = quarter * phase as u8 as f64 + std::f64::consts::PI * mask as u8 as f64;
    PureState::equatorial(phi)
}

/// Alice's private ancilla masks for one wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MaskBits {
    pub q: bool,
    pub r: bool,
}

/// Everything Alice keeps: pads, ancilla masks and the FHE key pair.
#[derive(Debug, Clone)]
pub struct AliceSecret {
    pub pads: Vec<PadKey>,
    pub masks: Vec<MaskBits>,
    pub fhe: FheKeyPair,
}

impl AliceSecret {
    /// Plaintext value of a hidden symbol. Outcome symbols are not hidden and
    /// have no value here.
    pub fn value(&self, symbol: Symbol) -> Option<bool> {
        match symbol {
            Symbol::A(w) => self.pads.get(w).map(|p| p.a),
            Symbol::B(w) => self.pads.get(w).map(|p| p.b),
            Symbol::Q(w) => self.masks.get(w).map(|m| m.q),
            Symbol::R(w) => self.masks.get(w).map(|m| m.r),
            Symbol::Ab(w) => self.pads.get(w).map(|p| p.a && p.b),
            Symbol::Outcome(_) => None,
        }
    }
}

/// Encrypted hidden bits of one wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptedWireBits {
    pub a: CipherBit,
    pub b: CipherBit,
    pub q: CipherBit,
    pub r: CipherBit,
    pub ab: CipherBit,
}

/// Ancillas and encrypted bits handed to Bob with the ciphertext. Nothing in
/// it depends on the circuit Bob will run.
#[derive(Debug, Clone)]
pub struct EvaluationKey {
    pub xi_a: Vec<PureState>,
    pub xi_b: Vec<PureState>,
    pub encrypted: Vec<EncryptedWireBits>,
    pub public: PublicKey,
}

impl EvaluationKey {
    /// Canonical byte encoding, used to compare keys.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for s in self.xi_a.iter().chain(&self.xi_b) {
            for a in s.amplitudes() {
                out.extend(a.re.to_le_bytes());
                out.extend(a.im.to_le_bytes());
            }
        }
        for e in &self.encrypted {
            for c in [&e.a, &e.b, &e.q, &e.r, &e.ab] {
                out.extend(c.to_bytes());
            }
        }
        out.extend(self.public.to_bytes());
        out
    }
}

/// What an evaluator may touch: ancillas, encrypted bits and the public key.
pub trait EvaluationResources {
    fn wires(&self) -> usize;
    fn ancilla(&self, wire: usize, kind: AncillaKind) -> Option<&PureState>;
    fn encrypted_bit(&self, symbol: Symbol) -> Option<&CipherBit>;
    fn public_key(&self) -> &PublicKey;
}

impl EvaluationResources for EvaluationKey {
    fn wires(&self) -> usize {
        self.encrypted.len()
    }

    fn ancilla(&self, wire: usize, kind: AncillaKind) -> Option<&PureState> {
        match kind {
            AncillaKind::XiA => self.xi_a.get(wire),
            AncillaKind::XiB => self.xi_b.get(wire),
        }
    }

    fn encrypted_bit(&self, symbol: Symbol) -> Option<&CipherBit> {
        match symbol {
            Symbol::A(w) => self.encrypted.get(w).map(|e| &e.a),
            Symbol::B(w) => self.encrypted.get(w).map(|e| &e.b),
            Symbol::Q(w) => self.encrypted.get(w).map(|e| &e.q),
            Symbol::R(w) => self.encrypted.get(w).map(|e| &e.r),
            Symbol::Ab(w) => self.encrypted.get(w).map(|e| &e.ab),
            Symbol::Outcome(_) => None,
        }
    }

    fn public_key(&self) -> &PublicKey {
        &self.public
    }
}

/// Pads `plaintext` (one pad per qubit), prepares the ancilla pair of every
/// wire, and encrypts all hidden bits under a fresh FHE key pair.
pub fn prepare<R: Rng + ?Sized>(
    plaintext: &PureState,
    params: &FheParams,
    rng: &mut R,
) -> Result<(PureState, EvaluationKey, AliceSecret), EvalError> {
    let keys = fhe::keygen(params, rng)?;
    prepare_with_keys(plaintext, keys, rng)
}

/// [`prepare`] with an existing key pair.
pub fn prepare_with_keys<R: Rng + ?Sized>(
    plaintext: &PureState,
    keys: FheKeyPair,
    rng: &mut R,
) -> Result<(PureState, EvaluationKey, AliceSecret), EvalError> {
    let n = plaintext.num_qubits();
    if n > MAX_WIRES {
        return Err(EvalError::WireCount { max: MAX_WIRES, got: n });
    }
    let pads: Vec<PadKey> = (0..n).map(|_| PadKey::random(rng)).collect();
    let masks: Vec<MaskBits> = (0..n)
        .map(|_| MaskBits {
            q: rng.random(),
            r: rng.random(),
        })
        .collect();
    prepare_with_bits(plaintext, pads, masks, keys, rng)
}

/// [`prepare`] with chosen hidden bits. Used to sweep every assignment.
pub fn prepare_with_bits<R: Rng + ?Sized>(
    plaintext: &PureState,
    pads: Vec<PadKey>,
    masks: Vec<MaskBits>,
    keys: FheKeyPair,
    rng: &mut R,
) -> Result<(PureState, EvaluationKey, AliceSecret), EvalError> {
    let n = plaintext.num_qubits();
    if n > MAX_WIRES || pads.len() != n || masks.len() != n {
        return Err(EvalError::WireCount { max: MAX_WIRES, got: n });
    }
    let ciphertext = qotp::encrypt_register(plaintext, &pads)?;
    let xi_a = pads.iter().zip(&masks).map(|(p, m)| ancilla_state(p.a, m.q)).collect();
    let xi_b = pads.iter().zip(&masks).map(|(p, m)| ancilla_state(p.b, m.r)).collect();
    let mut enc = |bit: bool| fhe::enc(bit, &keys.public, rng);
    let encrypted = pads
        .iter()
        .zip(&masks)
        .map(|(p, m)| EncryptedWireBits {
            a: enc(p.a),
            b: enc(p.b),
            q: enc(m.q),
            r: enc(m.r),
            ab: enc(p.a && p.b),
        })
        .collect();
    let key = EvaluationKey {
        xi_a,
        xi_b,
        encrypted,
        public: keys.public.clone(),
    };
    Ok((ciphertext, key, AliceSecret { pads, masks, fhe: keys }))
}

/// One classical bit Bob measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub label: String,
    pub bit: bool,
}

/// Encrypted final pad `Z^z X^x` of one wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptedPad {
    pub z: CipherBit,
    pub x: CipherBit,
}

pub const TRANSCRIPT_VERSION: u32 = 1;

/// Everything Bob returns to Alice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTranscript {
    pub version: u32,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub gates: Vec<GateSpec>,
    /// Outcome symbol `k<i>` in a key refers to entry `i`.
    pub measurement_bits: Vec<MeasurementRecord>,
    /// Bob's symbolic view of each wire's final pad.
    pub final_keys: Vec<WireKey>,
    pub final_encrypted_keys: Vec<EncryptedPad>,
    pub output_state: PureState,
}

impl EvalTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Decrypts the final pads with Alice's FHE secret and removes them.
pub fn decrypt_output(transcript: &EvalTranscript, secret: &AliceSecret) -> Result<PureState, EvalError> {
    let pads: Vec<PadKey> = transcript
        .final_encrypted_keys
        .iter()
        .map(|p| PadKey::new(fhe::dec(&p.z, &secret.fhe.secret), fhe::dec(&p.x, &secret.fhe.secret)))
        .collect();
    Ok(qotp::decrypt_register(&transcript.output_state, &pads)?)
}
