//! Domain value types. Types that carry secret bytes redact them from
//! Debug output and zero them on drop.

use crate::error::CoreError;

pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len() / 2)
        .map(|i| u8::from_str_radix(&s[i * 2..i * 2 + 2], 16).ok())
        .collect()
}

/// Overwrite secret bytes in a way the optimizer cannot elide.
pub fn wipe(bytes: &mut [u8]) {
    for b in bytes.iter_mut() {
        // Volatile store; each byte is individually forced to memory.
        unsafe { std::ptr::write_volatile(b, 0) };
    }
    std::sync::atomic::compiler_fence(std::sync::atomic::Ordering::SeqCst);
}

/// 128-bit content key identifier. Public, printable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyId(pub [u8; 16]);

impl KeyId {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Debug for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyId({})", to_hex(&self.0))
    }
}

impl std::fmt::Display for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&to_hex(&self.0))
    }
}

/// 30-byte publisher key seed; root secret of all content keys.
#[derive(Clone, PartialEq, Eq)]
pub struct KeySeed([u8; 30]);

impl KeySeed {
    pub const LEN: usize = 30;

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CoreError> {
        let arr: [u8; 30] = bytes
            .try_into()
            .map_err(|_| CoreError::SeedLength(bytes.len()))?;
        Ok(KeySeed(arr))
    }

    pub fn generate(rng: &mut dyn rand_core::CryptoRngCore) -> Self {
        let mut arr = [0u8; 30];
        rng.fill_bytes(&mut arr);
        KeySeed(arr)
    }

    pub fn as_bytes(&self) -> &[u8; 30] {
        &self.0
    }
}

impl std::fmt::Debug for KeySeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("KeySeed(<redacted>)")
    }
}

impl Drop for KeySeed {
    fn drop(&mut self) {
        wipe(&mut self.0);
    }
}

/// A content key with its identifier and rotation period. Key bytes are
/// private and never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct ContentKey {
    pub key_id: KeyId,
    pub period: u32,
    key: [u8; 16],
}

impl ContentKey {
    pub fn new(key_id: KeyId, period: u32, key: [u8; 16]) -> Self {
        ContentKey {
            key_id,
            period,
            key,
        }
    }

    pub fn key_bytes(&self) -> &[u8; 16] {
        &self.key
    }
}

impl std::fmt::Debug for ContentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ContentKey {{ key_id: {}, period: {}, key: <redacted> }}",
            self.key_id, self.period
        )
    }
}

impl Drop for ContentKey {
    fn drop(&mut self) {
        wipe(&mut self.key);
    }
}

/// Robustness tier of a client implementation. Order matters: later
/// variants satisfy earlier floors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u16)]
pub enum SecurityLevel {
    Dev = 0,
    Software = 1,
    Hardware = 2,
}

impl SecurityLevel {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(SecurityLevel::Dev),
            1 => Some(SecurityLevel::Software),
            2 => Some(SecurityLevel::Hardware),
            _ => None,
        }
    }

    pub fn as_u16(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        match self {
            SecurityLevel::Dev => "dev",
            SecurityLevel::Software => "software",
            SecurityLevel::Hardware => "hardware",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dev" => Some(SecurityLevel::Dev),
            "software" => Some(SecurityLevel::Software),
            "hardware" => Some(SecurityLevel::Hardware),
            _ => None,
        }
    }
}

/// Device identifier: hash of the device public keys. Devices in the same
/// domain share keys and therefore share a DeviceId.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub [u8; 32]);

impl DeviceId {
    pub fn short_hex(&self) -> String {
        to_hex(&self.0[..8])
    }
}

impl std::fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DeviceId({}…)", self.short_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip() {
        let v = [0x00u8, 0x7f, 0xff, 0x10];
        assert_eq!(to_hex(&v), "007fff10");
        assert_eq!(from_hex("007fff10").unwrap(), v);
        assert!(from_hex("0g").is_none());
        assert!(from_hex("abc").is_none());
    }

    #[test]
    fn secrets_redacted_in_debug() {
        let seed = KeySeed::from_bytes(&[0xAB; 30]).unwrap();
        let dbg = format!("{seed:?}");
        assert!(!dbg.contains("ab"), "seed bytes leaked: {dbg}");
        let ck = ContentKey::new(KeyId([1; 16]), 0, [0xCD; 16]);
        let dbg = format!("{ck:?}");
        assert!(!dbg.contains("cd"), "key bytes leaked: {dbg}");
        assert!(dbg.contains("01010101"), "key id should be printable");
    }

    #[test]
    fn seed_length_enforced() {
        assert!(matches!(
            KeySeed::from_bytes(&[0; 29]),
            Err(CoreError::SeedLength(29))
        ));
        assert!(matches!(
            KeySeed::from_bytes(&[0; 31]),
            Err(CoreError::SeedLength(31))
        ));
        assert!(KeySeed::from_bytes(&[0; 30]).is_ok());
    }

    #[test]
    fn level_ordering() {
        assert!(SecurityLevel::Hardware > SecurityLevel::Software);
        assert!(SecurityLevel::Software > SecurityLevel::Dev);
        assert_eq!(SecurityLevel::from_u16(3), None);
    }
}
