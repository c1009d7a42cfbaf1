//! Regev-style public-key encryption of a bit in the high half of `Z_q`.
//!
//! Secret `s` is uniform in `Z_q^n`. The public key holds `n` samples
//! `(a_i, <a_i, s> + e_i)` with `e_i` a rounded Gaussian truncated at
//! six standard deviations. Encryption sums a random subset of samples and
//! adds `bit * q/2`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{FheParams, Payload, PublicBody, SecretBody};

fn mul_mod(x: u64, y: u64, q: u64) -> u64 {
    ((x as u128 * y as u128) % q as u128) as u64
}

fn dot_mod(a: &[u64], s: &[u64], q: u64) -> u64 {
    a.iter().zip(s).fold(0u64, |acc, (&x, &y)| (acc + mul_mod(x, y, q)) % q)
}

fn sample_error<R: Rng + ?Sized>(params: &FheParams, rng: &mut R) -> i64 {
    let bound = params.error_bound() as i64;
    let normal = Normal::new(0.0, params.noise_stddev).expect("validated stddev");
    loop {
        let e = normal.sample(rng).round() as i64;
        if e.abs() <= bound {
            return e;
        }
    }
}

pub(super) fn keygen<R: Rng + ?Sized>(params: &FheParams, rng: &mut R) -> (SecretBody, PublicBody) {
    let n = params.lwe_dimension;
    let q = params.modulus;
    let s: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
    let samples = (0..n)
        .map(|_| {
            let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
            let e = sample_error(params, rng);
            let b = (dot_mod(&a, &s, q) as i64 + e).rem_euclid(q as i64) as u64;
            (a, b)
        })
        .collect();
    (SecretBody::Lwe { s }, PublicBody::Lwe { samples })
}

pub(super) fn encrypt<R: Rng + ?Sized>(bit: bool, samples: &[(Vec<u64>, u64)], q: u64, rng: &mut R) -> Payload {
    let n = samples.first().map_or(0, |s| s.0.len());
    let mut a = vec![0u64; n];
    let mut b = if bit { q / 2 } else { 0 };
    for (ai, bi) in samples {
        if rng.random::<bool>() {
            for (acc, x) in a.iter_mut().zip(ai) {
                *acc = (*acc + x) % q;
            }
            b = (b + bi) % q;
        }
    }
    Payload::Lwe { modulus: q, a, b }
}

pub(super) fn decrypt(q: u64, a: &[u64], b: u64, s: &[u64]) -> bool {
    let d = (b + q - dot_mod(a, s, q)) % q;
    d > q / 4 && d < q - q / 4
}

pub(super) fn add(q: u64, a1: &[u64], b1: u64, a2: &[u64], b2: u64) -> Payload {
    Payload::Lwe {
        modulus: q,
        a: a1.iter().zip(a2).map(|(x, y)| (x + y) % q).collect(),
        b: (b1 + b2) % q,
    }
}
