//! Device and server certificates. A certificate is the root-signed
//! binding of a role, a suite, public keys, and a security level. The
//! signed bytes are kept verbatim so verification is over exactly what
//! the issuer signed.

use crate::derive::device_id;
use crate::error::{CoreError, WireError};
use crate::suite::{CryptoSuite, KemPublicKey, Signature, SigningKey, VerifyingKey};
use crate::types::{DeviceId, SecurityLevel};
use crate::wire::{read_array, read_str, read_u16, tag, BodyCursor, FieldWriter, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum CertRole {
    Client = 0,
    Server = 1,
}

impl CertRole {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(CertRole::Client),
            1 => Some(CertRole::Server),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateBody {
    pub suite_id: String,
    pub role: CertRole,
    pub sig_pk: VerifyingKey,
    pub kem_pk: KemPublicKey,
    pub security_level: SecurityLevel,
    pub device_id: DeviceId,
}

impl WireMessage for CertificateBody {
    const TYPE_TAG: u16 = tag::CERT_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_u16(2, self.role as u16);
        w.put_bytes(3, self.sig_pk.as_bytes());
        w.put_bytes(4, self.kem_pk.as_bytes());
        w.put_u16(5, self.security_level.as_u16());
        w.put_bytes(6, &self.device_id.0);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(CertificateBody {
            suite_id: read_str(1, c.require(1)?)?,
            role: CertRole::from_u16(read_u16(2, c.require(2)?)?)
                .ok_or(WireError::BadValue(2, "unknown certificate role"))?,
            sig_pk: VerifyingKey(c.require(3)?.to_vec()),
            kem_pk: KemPublicKey(c.require(4)?.to_vec()),
            security_level: SecurityLevel::from_u16(read_u16(5, c.require(5)?)?)
                .ok_or(WireError::BadValue(5, "unknown security level"))?,
            device_id: DeviceId(read_array(6, c.require(6)?)?),
        })
    }
}

/// Issued certificate: the exact signed body bytes plus the issuer
/// signature, with the parsed body alongside for field access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub body: CertificateBody,
    pub body_bytes: Vec<u8>,
    pub signature: Signature,
}

impl Certificate {
    pub fn issue(
        suite: &dyn CryptoSuite,
        issuer_sk: &SigningKey,
        body: CertificateBody,
    ) -> Result<Certificate, CoreError> {
        let body_bytes = body.encode();
        let signature = suite.sign(issuer_sk, &body_bytes)?;
        Ok(Certificate {
            body,
            body_bytes,
            signature,
        })
    }

    /// Full validity check: issuer signature over the stored bytes, suite
    /// agreement, and device id consistency with the embedded keys.
    pub fn verify(&self, suite: &dyn CryptoSuite, issuer_vk: &VerifyingKey) -> Result<(), CoreError> {
        if !suite.verify(issuer_vk, &self.body_bytes, &self.signature) {
            return Err(CoreError::BadSignature);
        }
        if self.body.suite_id != suite.id() {
            return Err(CoreError::KeyMaterial("certificate suite mismatch"));
        }
        let expect = device_id(
            suite,
            self.body.sig_pk.as_bytes(),
            self.body.kem_pk.as_bytes(),
        );
        if expect != self.body.device_id {
            return Err(CoreError::KeyMaterial("certificate device id mismatch"));
        }
        Ok(())
    }
}

impl WireMessage for Certificate {
    const TYPE_TAG: u16 = tag::CERTIFICATE;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let body_bytes = c.require(1)?.to_vec();
        let signature = Signature(c.require(2)?.to_vec());
        let body = CertificateBody::decode(&body_bytes)?;
        Ok(Certificate {
            body,
            body_bytes,
            signature,
        })
    }
}
