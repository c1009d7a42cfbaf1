//! Classical XOR-homomorphic encryption of single bits.
//!
//! Two interchangeable backends sit behind one API:
//!
//! * [`FheScheme::Mock`]: the bit is stored in the clear next to a key
//!   fingerprint. Perfectly correct, zero security. Decrypting under a
//!   different secret yields a pseudorandom bit derived from that secret and
//!   the ciphertext nonce.
//! * [`FheScheme::LweAdditive`]: a Regev-style public-key scheme over `Z_q`
//!   with the message in the high bit. Ciphertexts add homomorphically; noise
//!   grows linearly with the number of additions. The desk-scale parameters
//!   used here are **not** secure.
//!
//! Only XOR is offered. Every key update needed at T-depth one is affine over
//! GF(2).

mod lwe;
mod mock;
pub mod selftest;
pub mod wire;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use wire::WireError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FheError {
    #[error("inconsistent FHE parameters: {0}")]
    InvalidParams(String),
    #[error("noise level {level} exceeds the budget of {budget}")]
    BudgetExceeded { level: u32, budget: u32 },
    #[error("ciphertexts were produced under different keys or schemes")]
    KeyMismatch,
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FheScheme {
    Mock,
    LweAdditive,
}

impl FheScheme {
    pub(crate) fn tag(self) -> u8 {
        match self {
            FheScheme::Mock => 0,
            FheScheme::LweAdditive => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FheScheme::Mock),
            1 => Some(FheScheme::LweAdditive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FheParams {
    pub scheme: FheScheme,
    /// LWE secret dimension; also the number of public samples.
    pub lwe_dimension: usize,
    pub noise_stddev: f64,
    /// Ciphertext modulus; must be even.
    pub modulus: u64,
}

impl FheParams {
    pub fn mock() -> Self {
        Self {
            scheme: FheScheme::Mock,
            lwe_dimension: 0,
            noise_stddev: 0.0,
            modulus: 0,
        }
    }

    pub fn lwe(lwe_dimension: usize, modulus: u64, noise_stddev: f64) -> Self {
        Self {
            scheme: FheScheme::LweAdditive,
            lwe_dimension,
            noise_stddev,
            modulus,
        }
    }

    /// Default LWE parameters: room for thousands of XORs.
    pub fn lwe_default() -> Self {
        Self::lwe(64, 1 << 26, 3.2)
    }

    /// Largest per-sample error magnitude; samples are truncated here.
    pub(crate) fn error_bound(&self) -> u64 {
        (6.0 * self.noise_stddev).ceil().max(1.0) as u64
    }

    /// Worst-case error of a fresh ciphertext (sum over all public samples).
    pub fn fresh_noise_bound(&self) -> u64 {
        self.lwe_dimension as u64 * self.error_bound()
    }

    /// Highest `noise_level` a ciphertext may carry and still decrypt
    /// correctly: `(level + 1) * fresh_bound < modulus / 4`.
    pub fn xor_budget(&self) -> Result<u32, FheError> {
        match self.scheme {
            FheScheme::Mock => Ok(u32::MAX / 2),
            FheScheme::LweAdditive => {
                if self.lwe_dimension == 0 {
                    return Err(FheError::InvalidParams("LWE dimension must be positive".into()));
                }
                if self.modulus < 4 || !self.modulus.is_multiple_of(2) || self.modulus > 1 << 62 {
                    return Err(FheError::InvalidParams(format!(
                        "modulus {} must be even and in [4, 2^62]",
                        self.modulus
                    )));
                }
                if !(self.noise_stddev.is_finite() && self.noise_stddev > 0.0) {
                    return Err(FheError::InvalidParams("noise stddev must be positive".into()));
                }
                let quarter = self.modulus / 4;
                let fresh = self.fresh_noise_bound();
                if fresh >= quarter {
                    return Err(FheError::InvalidParams(format!(
                        "fresh noise bound {fresh} leaves no budget below modulus/4 = {quarter}"
                    )));
                }
                let max_terms = (quarter - 1) / fresh;
                if max_terms < 2 {
                    return Err(FheError::InvalidParams(format!(
                        "fresh noise bound {fresh} leaves no room for a single XOR below modulus/4 = {quarter}"
                    )));
                }
                Ok((max_terms - 1).min(u32::MAX as u64 / 2) as u32)
            }
        }
    }
}

/// 8-byte fingerprint binding ciphertexts to the key pair that produced them.
pub type KeyId = [u8; 8];

fn fingerprint(bytes: &[u8]) -> KeyId {
    let digest = Sha256::digest(bytes);
    let mut id = [0u8; 8];
    id.copy_from_slice(&digest[..8]);
    id
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SecretBody {
    Mock { seed: [u8; 32] },
    Lwe { s: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PublicBody {
    Mock,
    Lwe { samples: Vec<(Vec<u64>, u64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    params: FheParams,
    key_id: KeyId,
    body: SecretBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    params: FheParams,
    key_id: KeyId,
    budget: u32,
    body: PublicBody,
}

impl SecretKey {
    pub fn params(&self) -> &FheParams {
        &self.params
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    /// Opaque serialized form.
    pub fn to_bytes(&self) -> Vec<u8> {
        match &self.body {
            SecretBody::Mock { seed } => seed.to_vec(),
            SecretBody::Lwe { s } => s.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }
}

impl PublicKey {
    pub fn params(&self) -> &FheParams {
        &self.params
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    /// Opaque serialized form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.key_id.to_vec();
        if let PublicBody::Lwe { samples } = &self.body {
            for (a, b) in samples {
                out.extend(a.iter().flat_map(|v| v.to_le_bytes()));
                out.extend(b.to_le_bytes());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FheKeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl FheKeyPair {
    pub fn params(&self) -> &FheParams {
        &self.public.params
    }
}

/// A homomorphically encrypted bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherBit {
    pub(crate) scheme: FheScheme,
    pub(crate) key_id: KeyId,
    pub(crate) noise_level: u32,
    pub(crate) budget: u32,
    pub(crate) payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Payload {
    Mock { nonce: u64, bit: bool },
    Lwe { modulus: u64, a: Vec<u64>, b: u64 },
}

impl CipherBit {
    pub fn scheme(&self) -> FheScheme {
        self.scheme
    }

    /// Number of homomorphic XORs absorbed so far.
    pub fn noise_level(&self) -> u32 {
        self.noise_level
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }
}

/// Generates a key pair. Deterministic in the stream.
pub fn keygen<R: Rng + ?Sized>(params: &FheParams, rng: &mut R) -> Result<FheKeyPair, FheError> {
    let budget = params.xor_budget()?;
    let (secret_body, public_body) = match params.scheme {
        FheScheme::Mock => mock::keygen(rng),
        FheScheme::LweAdditive => lwe::keygen(params, rng),
    };
    let secret = SecretKey {
        params: *params,
        key_id: [0; 8],
        body: secret_body,
    };
    let key_id = fingerprint(&secret.to_bytes());
    Ok(FheKeyPair {
        secret: SecretKey { key_id, ..secret },
        public: PublicKey {
            params: *params,
            key_id,
            budget,
            body: public_body,
        },
    })
}

/// Encrypts one bit. Encryption is randomized for both backends.
pub fn enc<R: Rng + ?Sized>(bit: bool, public: &PublicKey, rng: &mut R) -> CipherBit {
    let payload = match &public.body {
        PublicBody::Mock => mock::encrypt(bit, rng),
        PublicBody::Lwe { samples } => lwe::encrypt(bit, samples, public.params.modulus, rng),
    };
    CipherBit {
        scheme: public.params.scheme,
        key_id: public.key_id,
        noise_level: 0,
        budget: public.budget,
        payload,
    }
}

/// Decrypts a bit. A ciphertext produced under a different key pair decrypts
/// to an arbitrary bit; this is not an error.
pub fn dec(cipher: &CipherBit, secret: &SecretKey) -> bool {
    match (&cipher.payload, &secret.body) {
        (Payload::Mock { nonce, bit }, SecretBody::Mock { seed }) => {
            if cipher.key_id == secret.key_id {
                *bit
            } else {
                mock::foreign_bit(seed, *nonce)
            }
        }
        (Payload::Lwe { modulus, a, b }, SecretBody::Lwe { s }) if a.len() == s.len() => {
            lwe::decrypt(*modulus, a, *b, s)
        }
        _ => {
            // Scheme or shape mismatch: derive a bit from both operands.
            let mut h = Sha256::new();
            h.update(secret.to_bytes());
            h.update(wire::to_bytes(cipher));
            h.finalize()[0] & 1 == 1
        }
    }
}

/// Homomorphic XOR. The result's noise level is `x + y + 1`.
pub fn hxor(x: &CipherBit, y: &CipherBit) -> Result<CipherBit, FheError> {
    if x.scheme != y.scheme || x.key_id != y.key_id {
        return Err(FheError::KeyMismatch);
    }
    let level = x.noise_level.saturating_add(y.noise_level).saturating_add(1);
    let budget = x.budget.min(y.budget);
    if level > budget {
        return Err(FheError::BudgetExceeded { level, budget });
    }
    let payload = match (&x.payload, &y.payload) {
        (Payload::Mock { nonce: n1, bit: b1 }, Payload::Mock { nonce: n2, bit: b2 }) => Payload::Mock {
            nonce: mock::combine_nonces(*n1, *n2),
            bit: b1 ^ b2,
        },
        (
            Payload::Lwe {
                modulus: q1,
                a: a1,
                b: b1,
            },
            Payload::Lwe {
                modulus: q2,
                a: a2,
                b: b2,
            },
        ) if q1 == q2 && a1.len() == a2.len() => lwe::add(*q1, a1, *b1, a2, *b2),
        _ => return Err(FheError::KeyMismatch),
    };
    Ok(CipherBit {
        scheme: x.scheme,
        key_id: x.key_id,
        noise_level: level,
        budget,
        payload,
    })
}

/// XOR with a known plaintext bit. Noise is unchanged on both backends.
pub fn hxor_const(x: &CipherBit, c: bool) -> CipherBit {
    let mut out = x.clone();
    if c {
        out.payload = match &x.payload {
            Payload::Mock { nonce, bit } => Payload::Mock {
                nonce: *nonce,
                bit: !bit,
            },
            Payload::Lwe { modulus, a, b } => Payload::Lwe {
                modulus: *modulus,
                a: a.clone(),
                b: (b + modulus / 2) % modulus,
            },
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::stats::fair_coin_p_value;

    fn both_backends() -> [FheParams; 2] {
        [FheParams::mock(), FheParams::lwe_default()]
    }

    #[test]
    fn mock_round_trip() {
        let kp = keygen(&FheParams::mock(), &mut substream(1, 0)).unwrap();
        let mut rng = substream(1, 1);
        for bit in [false, true] {
            assert_eq!(dec(&enc(bit, &kp.public, &mut rng), &kp.secret), bit);
        }
    }

    #[test]
    fn small_lwe_round_trips_1000_trials() {
        let params = FheParams::lwe(32, 2048, 1.0);
        let mut rng = substream(2, 0);
        for trial in 0..1000 {
            let kp = keygen(&params, &mut rng).unwrap();
            let bit = trial % 2 == 1;
            assert_eq!(dec(&enc(bit, &kp.public, &mut rng), &kp.secret), bit);
        }
    }

    #[test]
    fn keygen_is_deterministic() {
        for p in both_backends() {
            let a = keygen(&p, &mut substream(3, 0)).unwrap();
            let b = keygen(&p, &mut substream(3, 0)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.secret.to_bytes(), b.secret.to_bytes());
            assert_eq!(a.public.to_bytes(), b.public.to_bytes());
        }
    }

    #[test]
    fn zero_budget_params_are_rejected() {
        let p = FheParams::lwe(512, 2048, 3.0);
        assert!(matches!(
            keygen(&p, &mut substream(0, 0)),
            Err(FheError::InvalidParams(_))
        ));
        assert!(FheParams::lwe(16, 2047, 1.0).xor_budget().is_err());
    }

    #[test]
    fn lwe_encryption_is_randomized() {
        let kp = keygen(&FheParams::lwe_default(), &mut substream(4, 0)).unwrap();
        let mut rng = substream(4, 1);
        let c1 = enc(true, &kp.public, &mut rng);
        let c2 = enc(true, &kp.public, &mut rng);
        assert_ne!(c1, c2);
    }

    #[test]
    fn hxor_truth_table_both_backends() {
        for p in both_backends() {
            let kp = keygen(&p, &mut substream(5, 0)).unwrap();
            let mut rng = substream(5, 1);
            for m1 in [false, true] {
                for m2 in [false, true] {
                    let x = enc(m1, &kp.public, &mut rng);
                    let y = enc(m2, &kp.public, &mut rng);
                    let z = hxor(&x, &y).unwrap();
                    assert_eq!(dec(&z, &kp.secret), m1 ^ m2);
                    assert_eq!(z.noise_level(), 1);
                }
            }
        }
    }

    #[test]
    fn hxor_const_examples() {
        for p in both_backends() {
            let kp = keygen(&p, &mut substream(6, 0)).unwrap();
            let mut rng = substream(6, 1);
            let zero = enc(false, &kp.public, &mut rng);
            let one = enc(true, &kp.public, &mut rng);
            assert!(dec(&hxor_const(&zero, true), &kp.secret));
            assert!(!dec(&hxor_const(&one, true), &kp.secret));
            assert!(dec(&hxor_const(&one, false), &kp.secret));
            assert_eq!(hxor_const(&one, true).noise_level(), 0);
        }
    }

    #[test]
    fn chain_of_100_xors_stays_in_budget() {
        for p in both_backends() {
            let kp = keygen(&p, &mut substream(7, 0)).unwrap();
            let mut rng = substream(7, 1);
            let mut acc = enc(true, &kp.public, &mut rng);
            for _ in 0..100 {
                let next = hxor(&acc, &enc(true, &kp.public, &mut rng)).unwrap();
                assert!(next.noise_level() >= acc.noise_level());
                acc = next;
            }
            // 101 encryptions of one
            assert!(dec(&acc, &kp.secret));
            let acc = hxor(&acc, &enc(true, &kp.public, &mut rng)).unwrap();
            assert!(!dec(&acc, &kp.secret));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let p = FheParams::lwe(32, 2048, 1.0);
        let kp = keygen(&p, &mut substream(8, 0)).unwrap();
        let mut rng = substream(8, 1);
        let budget = p.xor_budget().unwrap();
        let mut acc = enc(true, &kp.public, &mut rng);
        let mut result = Ok(acc.clone());
        for _ in 0..=budget {
            result = hxor(&acc, &enc(false, &kp.public, &mut rng));
            match &result {
                Ok(c) => acc = c.clone(),
                Err(_) => break,
            }
        }
        assert!(matches!(result, Err(FheError::BudgetExceeded { .. })));
        assert!(dec(&acc, &kp.secret));
    }

    #[test]
    fn mixing_keys_is_refused() {
        let k1 = keygen(&FheParams::mock(), &mut substream(9, 0)).unwrap();
        let k2 = keygen(&FheParams::mock(), &mut substream(9, 1)).unwrap();
        let mut rng = substream(9, 2);
        let x = enc(true, &k1.public, &mut rng);
        let y = enc(true, &k2.public, &mut rng);
        assert_eq!(hxor(&x, &y), Err(FheError::KeyMismatch));
    }

    #[test]
    fn wrong_key_decryption_looks_like_a_fair_coin() {
        for p in both_backends() {
            let k1 = keygen(&p, &mut substream(10, 0)).unwrap();
            let k2 = keygen(&p, &mut substream(10, 1)).unwrap();
            let mut rng = substream(10, 2);
            for plain in [false, true] {
                let ones = (0..1000)
                    .filter(|_| dec(&enc(plain, &k1.public, &mut rng), &k2.secret))
                    .count();
                let pv = fair_coin_p_value(ones, 1000);
                assert!(pv > 0.01, "{:?} plain={plain} ones={ones} p={pv}", p.scheme);
            }
        }
    }
}
