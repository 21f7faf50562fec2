//! Reference implementations of the primitives the main crates rely on,
//! written from the standards documents with no shared code or dependencies.
//!
//! These exist so tests can check the production crypto path against an
//! independent second implementation. They are not constant-time and must
//! never be used outside of tests.

pub mod aes;
pub mod gcm;
pub mod sha256;

pub use gcm::{gcm_open, gcm_seal};
pub use sha256::sha256;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_abc_vector() {
        // FIPS 180-4 example vector.
        let d = sha256(b"abc");
        let expect = [
            0xba, 0x78, 0x16, 0xbf, 0x8f, 0x01, 0xcf, 0xea, 0x41, 0x41, 0x40, 0xde, 0x5d, 0xae,
            0x22, 0x23, 0xb0, 0x03, 0x61, 0xa3, 0x96, 0x17, 0x7a, 0x9c, 0xb4, 0x10, 0xff, 0x61,
            0xf2, 0x00, 0x15, 0xad,
        ];
        assert_eq!(d, expect);
    }

    #[test]
    fn sha256_empty_vector() {
        let d = sha256(b"");
        let expect = [
            0xe3, 0xb0, 0xc4, 0x42, 0x98, 0xfc, 0x1c, 0x14, 0x9a, 0xfb, 0xf4, 0xc8, 0x99, 0x6f,
            0xb9, 0x24, 0x27, 0xae, 0x41, 0xe4, 0x64, 0x9b, 0x93, 0x4c, 0xa4, 0x95, 0x99, 0x1b,
            0x78, 0x52, 0xb8, 0x55,
        ];
        assert_eq!(d, expect);
    }

    #[test]
    fn aes128_fips_vector() {
        // FIPS 197 appendix C.1.
        let key: [u8; 16] = [
            0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d,
            0x0e, 0x0f,
        ];
        let pt: [u8; 16] = [
            0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd,
            0xee, 0xff,
        ];
        let expect: [u8; 16] = [
            0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4,
            0xc5, 0x5a,
        ];
        let ks = aes::Aes128::new(&key);
        assert_eq!(ks.encrypt_block(&pt), expect);
    }

    #[test]
    fn gcm_roundtrip_and_tamper() {
        let key = [0x42u8; 16];
        let nonce = [7u8; 12];
        let aad = b"header";
        let pt = b"the quick brown fox jumps over the lazy dog";
        let ct = gcm_seal(&key, &nonce, aad, pt);
        assert_eq!(ct.len(), pt.len() + 16);
        assert_eq!(gcm_open(&key, &nonce, aad, &ct).as_deref(), Some(&pt[..]));
        let mut bad = ct.clone();
        bad[3] ^= 1;
        assert_eq!(gcm_open(&key, &nonce, aad, &bad), None);
        assert_eq!(gcm_open(&key, &nonce, b"other", &ct), None);
    }

    #[test]
    fn gcm_empty_plaintext() {
        let key = [1u8; 16];
        let nonce = [2u8; 12];
        let ct = gcm_seal(&key, &nonce, b"", b"");
        assert_eq!(ct.len(), 16);
        assert_eq!(gcm_open(&key, &nonce, b"", &ct), Some(vec![]));
    }
}
