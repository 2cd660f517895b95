//! Fixed-width identifiers shared by every layer of the chain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Sha3_256};

/// SHA3-256 (FIPS 202) over `data`.
pub fn sha3(data: &[u8]) -> Hash32 {
    Hash32(Sha3_256::digest(data).into())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseHexError {
    #[error("invalid hex: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
}

macro_rules! fixed_bytes {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, ParseHexError> {
                let arr: [u8; $len] =
                    bytes.try_into().map_err(|_| ParseHexError::Length { expected: $len, got: bytes.len() })?;
                Ok(Self(arr))
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            /// The trailing eight bytes read as a big-endian machine word.
            pub fn to_word(&self) -> u64 {
                let mut w = [0u8; 8];
                w.copy_from_slice(&self.0[$len - 8..]);
                u64::from_be_bytes(w)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(0x{})", stringify!($name), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = ParseHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.strip_prefix("0x").unwrap_or(s);
                Self::from_slice(&hex::decode(s)?)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(Address, 20);
fixed_bytes!(Hash32, 32);

/// Transaction hashes are plain 32-byte digests.
pub type TxHash = Hash32;

impl Address {
    /// Deterministic address for a named actor, used by scenarios and tests.
    pub fn from_label(label: &str) -> Self {
        let h = sha3(label.as_bytes());
        let mut a = [0u8; 20];
        a.copy_from_slice(&h.0[12..]);
        Address(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha3_256_known_vector() {
        // FIPS 202 SHA3-256 of the empty string; Keccak-256 would give c5d2...a470.
        assert_eq!(sha3(b"").to_hex(), "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a");
    }

    #[test]
    fn hex_roundtrip_and_prefix() {
        let a = Address::from_label("deployer");
        let parsed: Address = format!("0x{a}").parse().unwrap();
        assert_eq!(a, parsed);
        assert!("abcd".parse::<Address>().is_err());
    }

    #[test]
    fn word_is_trailing_bytes() {
        let mut h = [0u8; 32];
        h[31] = 7;
        h[24] = 1;
        assert_eq!(Hash32(h).to_word(), (1u64 << 56) | 7);
    }
}
