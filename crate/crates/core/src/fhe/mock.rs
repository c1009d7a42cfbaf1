//! Insecure reference backend: the bit travels in the clear, tagged with the
//! fingerprint of the key pair that produced it.

use rand::Rng;
use sha2::{Digest, Sha256};

use super::{Payload, PublicBody, SecretBody};

pub(super) fn keygen<R: Rng + ?Sized>(rng: &mut R) -> (SecretBody, PublicBody) {
    let mut seed = [0u8; 32];
    rng.fill(&mut seed);
    (SecretBody::Mock { seed }, PublicBody::Mock)
}

pub(super) fn encrypt<R: Rng + ?Sized>(bit: bool, rng: &mut R) -> Payload {
    Payload::Mock {
        nonce: rng.random(),
        bit,
    }
}

/// What a foreign secret "decrypts" a ciphertext to: a pseudorandom bit keyed
/// by that secret and the ciphertext nonce.
pub(super) fn foreign_bit(seed: &[u8; 32], nonce: u64) -> bool {
    let mut h = Sha256::new();
    h.update(seed);
    h.update(nonce.to_le_bytes());
    h.finalize()[0] & 1 == 1
}

pub(super) fn combine_nonces(n1: u64, n2: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(n1.to_le_bytes());
    h.update(n2.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
