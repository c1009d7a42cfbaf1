//! Functional checks of an FHE configuration: round trips, the homomorphic
//! XOR truth table, the noise budget, and wrong-key randomness.

use serde::{Deserialize, Serialize};

use super::{dec, enc, hxor, hxor_const, keygen, FheError, FheParams};
use crate::rng::substream;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub params: FheParams,
    pub samples: usize,
    pub roundtrip_failures: usize,
    /// `[x][y]` failures of `dec(hxor(enc x, enc y)) == x ^ y`.
    pub xor_failures: [[usize; 2]; 2],
    pub const_xor_failures: usize,
    /// Longest XOR chain that still decrypted correctly, capped at 64.
    pub chain_length: u32,
    pub budget: u32,
    /// Ones among wrong-key decryptions of random ciphertexts.
    pub wrong_key_ones: usize,
    pub wrong_key_p_value: f64,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.roundtrip_failures == 0
            && self.xor_failures.iter().flatten().all(|&f| f == 0)
            && self.const_xor_failures == 0
            && self.chain_length == self.budget.min(64)
            && self.wrong_key_p_value > 0.01
    }
}

pub fn self_test(params: &FheParams, samples: usize, seed: u64) -> Result<SelfTestReport, FheError> {
    let mut rng = substream(seed, 0);
    let keys = keygen(params, &mut rng)?;
    let other = keygen(params, &mut rng)?;
    let budget = keys.public.budget();

    let mut roundtrip_failures = 0;
    let mut const_xor_failures = 0;
    let mut wrong_key_ones = 0;
    for i in 0..samples {
        let bit = i % 2 == 1;
        let c = enc(bit, &keys.public, &mut rng);
        roundtrip_failures += (dec(&c, &keys.secret) != bit) as usize;
        const_xor_failures += (dec(&hxor_const(&c, true), &keys.secret) == bit) as usize;
        wrong_key_ones += dec(&c, &other.secret) as usize;
    }

    let mut xor_failures = [[0; 2]; 2];
    for x in [false, true] {
        for y in [false, true] {
            for _ in 0..samples.div_ceil(4) {
                let cx = enc(x, &keys.public, &mut rng);
                let cy = enc(y, &keys.public, &mut rng);
                let ok = dec(&hxor(&cx, &cy)?, &keys.secret) == (x ^ y);
                xor_failures[x as usize][y as usize] += (!ok) as usize;
            }
        }
    }

    let mut acc = enc(false, &keys.public, &mut rng);
    let mut expected = false;
    let mut chain_length = 0;
    while chain_length < budget.min(64) {
        let bit = chain_length % 3 == 0;
        match hxor(&acc, &enc(bit, &keys.public, &mut rng)) {
            Ok(next) => acc = next,
            Err(FheError::BudgetExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
        expected ^= bit;
        if dec(&acc, &keys.secret) != expected {
            break;
        }
        chain_length += 1;
    }

    Ok(SelfTestReport {
        params: *params,
        samples,
        roundtrip_failures,
        xor_failures,
        const_xor_failures,
        chain_length,
        budget,
        wrong_key_ones,
        wrong_key_p_value: stats::fair_coin_p_value(wrong_key_ones, samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_backends_pass() {
        for params in [FheParams::mock(), FheParams::lwe_default()] {
            let r = self_test(&params, 1000, 3).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }
}
