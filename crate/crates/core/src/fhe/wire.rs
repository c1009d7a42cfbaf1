//! Byte layout of a [`CipherBit`].
//!
//! All integers little-endian:
//!
//! | field        | size |
//! |--------------|------|
//! | version (=1) | 1    |
//! | scheme tag   | 1    |
//! | key id       | 8    |
//! | noise level  | 4    |
//! | budget       | 4    |
//! | payload len  | 4    |
//! | payload      | len  |
//!
//! Mock payload: nonce `u64`, bit `u8`.
//! LWE payload: modulus `u64`, dimension `u32`, `a` as `u64`s, `b` as `u64`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{CipherBit, FheScheme, Payload};

pub const WIRE_VERSION: u8 = 1;
const HEADER_LEN: usize = 1 + 1 + 8 + 4 + 4 + 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("ciphertext truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unsupported ciphertext version {0}")]
    Version(u8),
    #[error("unknown scheme tag {0}")]
    SchemeTag(u8),
    #[error("malformed payload: {0}")]
    Payload(&'static str),
    #[error("invalid hex: {0}")]
    Hex(String),
}

pub fn to_bytes(c: &CipherBit) -> Vec<u8> {
    let mut payload = Vec::new();
    match &c.payload {
        Payload::Mock { nonce, bit } => {
            payload.extend(nonce.to_le_bytes());
            payload.push(*bit as u8);
        }
        Payload::Lwe { modulus, a, b } => {
            payload.extend(modulus.to_le_bytes());
            payload.extend((a.len() as u32).to_le_bytes());
            for x in a {
                payload.extend(x.to_le_bytes());
            }
            payload.extend(b.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(WIRE_VERSION);
    out.push(c.scheme.tag());
    out.extend(c.key_id);
    out.extend(c.noise_level.to_le_bytes());
    out.extend(c.budget.to_le_bytes());
    out.extend((payload.len() as u32).to_le_bytes());
    out.extend(payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(WireError::Truncated {
                need: end,
                have: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<CipherBit, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    let tag = r.u8()?;
    let scheme = FheScheme::from_tag(tag).ok_or(WireError::SchemeTag(tag))?;
    let key_id: [u8; 8] = r.take(8)?.try_into().expect("8 bytes");
    let noise_level = r.u32()?;
    let budget = r.u32()?;
    let len = r.u32()? as usize;
    let body = r.take(len)?;
    if r.pos != bytes.len() {
        return Err(WireError::Payload("trailing bytes"));
    }
    let mut p = Reader { bytes: body, pos: 0 };
    let payload = match scheme {
        FheScheme::Mock => {
            let nonce = p.u64()?;
            let bit = match p.u8()? {
                0 => false,
                1 => true,
                _ => return Err(WireError::Payload("mock bit must be 0 or 1")),
            };
            Payload::Mock { nonce, bit }
        }
        FheScheme::LweAdditive => {
            let modulus = p.u64()?;
            let n = p.u32()? as usize;
            if body.len() != 8 + 4 + 8 * n + 8 {
                return Err(WireError::Payload("LWE payload length disagrees with dimension"));
            }
            let a = (0..n).map(|_| p.u64()).collect::<Result<Vec<_>, _>>()?;
            let b = p.u64()?;
            if modulus == 0 || b >= modulus || a.iter().any(|&x| x >= modulus) {
                return Err(WireError::Payload("LWE coefficient outside the modulus"));
            }
            Payload::Lwe { modulus, a, b }
        }
    };
    if p.pos != body.len() {
        return Err(WireError::Payload("payload has trailing bytes"));
    }
    Ok(CipherBit {
        scheme,
        key_id,
        noise_level,
        budget,
        payload,
    })
}

impl CipherBit {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        from_bytes(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, WireError> {
        let bytes = hex::decode(s).map_err(|e| WireError::Hex(e.to_string()))?;
        from_bytes(&bytes)
    }
}

/// JSON form is the hex string of the byte layout.
impl Serialize for CipherBit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CipherBit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CipherBit::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhe::{dec, enc, hxor, keygen, FheParams};
    use crate::rng::substream;

    #[test]
    fn round_trip_both_backends() {
        for p in [FheParams::mock(), FheParams::lwe(32, 2048, 1.0)] {
            let kp = keygen(&p, &mut substream(1, 0)).unwrap();
            let mut rng = substream(1, 1);
            let x = enc(true, &kp.public, &mut rng);
            let y = enc(false, &kp.public, &mut rng);
            let z = hxor(&x, &y).unwrap();
            let bytes = z.to_bytes();
            assert_eq!(bytes[0], WIRE_VERSION);
            assert_eq!(bytes[1], p.scheme.tag());
            let back = CipherBit::from_bytes(&bytes).unwrap();
            assert_eq!(back, z);
            assert!(dec(&back, &kp.secret));
            let json = serde_json::to_string(&z).unwrap();
            assert_eq!(serde_json::from_str::<CipherBit>(&json).unwrap(), z);
        }
    }

    #[test]
    fn mock_layout_is_fixed() {
        let c = CipherBit {
            scheme: FheScheme::Mock,
            key_id: [1, 2, 3, 4, 5, 6, 7, 8],
            noise_level: 2,
            budget: 9,
            payload: Payload::Mock {
                nonce: 0x0102,
                bit: true,
            },
        };
        let expected = "01\
                        00\
                        0102030405060708\
                        02000000\
                        09000000\
                        09000000\
                        0201000000000000\
                        01";
        assert_eq!(c.to_hex(), expected);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let kp = keygen(&FheParams::mock(), &mut substream(2, 0)).unwrap();
        let bytes = enc(true, &kp.public, &mut substream(2, 1)).to_bytes();
        assert!(matches!(from_bytes(&bytes[..10]), Err(WireError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = 7;
        assert_eq!(from_bytes(&bad), Err(WireError::Version(7)));
        let mut bad = bytes.clone();
        bad[1] = 9;
        assert_eq!(from_bytes(&bad), Err(WireError::SchemeTag(9)));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(from_bytes(&bad).is_err());
        assert!(CipherBit::from_hex("zz").is_err());
    }
}
