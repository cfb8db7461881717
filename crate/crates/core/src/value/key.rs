use std::fmt;
use std::str::FromStr;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of hex digits after the leading `x`.
const KEY_HEX_LEN: usize = 19;

/// A temporary key naming one session: `x` followed by 19 lowercase hex
/// digits (76 random bits). Knowing the key is what grants access.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SessionKey(String);

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("'{0}' is not a session key")]
    Malformed(String),
    #[error("entropy source unavailable: {0}")]
    Entropy(String),
}

impl SessionKey {
    pub fn parse(text: &str) -> Result<SessionKey, KeyError> {
        if Self::is_well_formed(text) {
            Ok(SessionKey(text.to_string()))
        } else {
            Err(KeyError::Malformed(text.to_string()))
        }
    }

    /// Matches `^x[0-9a-f]{19}$`.
    pub fn is_well_formed(text: &str) -> bool {
        let b = text.as_bytes();
        b.len() == KEY_HEX_LEN + 1
            && b[0] == b'x'
            && b[1..].iter().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f'))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn from_hex(hex: &str) -> SessionKey {
        SessionKey(format!("x{}", &hex[..KEY_HEX_LEN]))
    }
}

impl fmt::Display for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for SessionKey {
    type Err = KeyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SessionKey::parse(s)
    }
}

impl TryFrom<String> for SessionKey {
    type Error = KeyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        SessionKey::parse(&s)
    }
}

impl From<SessionKey> for String {
    fn from(k: SessionKey) -> String {
        k.0
    }
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Source of fresh session keys.
pub enum KeyGenerator {
    /// Operating-system CSPRNG. The only mode a server should use.
    Os,
    /// Reproducible splitmix64 stream for tests: each key consumes two
    /// outputs, hex-encoded and truncated to 19 digits.
    Seeded(Mutex<u64>),
}

impl KeyGenerator {
    pub fn seeded(seed: u64) -> KeyGenerator {
        KeyGenerator::Seeded(Mutex::new(seed))
    }

    pub fn next_key(&self) -> Result<SessionKey, KeyError> {
        match self {
            KeyGenerator::Os => {
                let mut buf = [0u8; 10];
                getrandom::fill(&mut buf).map_err(|e| KeyError::Entropy(e.to_string()))?;
                Ok(SessionKey::from_hex(&hex::encode(buf)))
            }
            KeyGenerator::Seeded(state) => {
                let mut s = state.lock();
                let a = splitmix64(&mut s);
                let b = splitmix64(&mut s);
                Ok(SessionKey::from_hex(&format!("{a:016x}{b:016x}")))
            }
        }
    }

    /// A 53-bit seed for requests that did not choose one.
    pub fn next_seed(&self) -> Result<u64, KeyError> {
        let raw = match self {
            KeyGenerator::Os => {
                let mut buf = [0u8; 8];
                getrandom::fill(&mut buf).map_err(|e| KeyError::Entropy(e.to_string()))?;
                u64::from_le_bytes(buf)
            }
            KeyGenerator::Seeded(state) => splitmix64(&mut state.lock()),
        };
        Ok(raw >> 11)
    }
}

impl fmt::Debug for KeyGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyGenerator::Os => f.write_str("KeyGenerator::Os"),
            KeyGenerator::Seeded(_) => f.write_str("KeyGenerator::Seeded"),
        }
    }
}
