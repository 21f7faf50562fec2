//! Identity files: the on-disk key material for each deployment role.
//! Client and vault identities are the same shape; the vault holds the
//! device keys, and "client" additionally implies a root-issued
//! certificate at provisioning time.

use std::path::Path;

use crate::cert::{CertRole, Certificate, CertificateBody};
use crate::derive::device_id;
use crate::error::{CoreError, WireError};
use crate::suite::{
    AeadKey, CryptoSuite, KemPublicKey, KemSecretKey, SigningKey, VerifyingKey,
};
use crate::types::SecurityLevel;
use crate::wire::{read_array, read_str, read_u16, tag, BodyCursor, FieldWriter, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum KeyRole {
    Root = 0,
    Publisher = 1,
    Server = 2,
    Client = 3,
    Vault = 4,
    Transport = 5,
}

impl KeyRole {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(KeyRole::Root),
            1 => Some(KeyRole::Publisher),
            2 => Some(KeyRole::Server),
            3 => Some(KeyRole::Client),
            4 => Some(KeyRole::Vault),
            5 => Some(KeyRole::Transport),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KeyRole::Root => "root",
            KeyRole::Publisher => "publisher",
            KeyRole::Server => "server",
            KeyRole::Client => "client",
            KeyRole::Vault => "vault",
            KeyRole::Transport => "transport",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(KeyRole::Root),
            "publisher" => Some(KeyRole::Publisher),
            "server" => Some(KeyRole::Server),
            "client" => Some(KeyRole::Client),
            "vault" => Some(KeyRole::Vault),
            "transport" => Some(KeyRole::Transport),
            _ => None,
        }
    }

    /// Identity files that may stand in for a device identity.
    pub fn is_device(self) -> bool {
        matches!(self, KeyRole::Client | KeyRole::Vault)
    }
}

/// Key material for one role. Field presence depends on the role: signing
/// roles carry sig keys, device and server roles add a KEM keypair, the
/// transport role is a bare AEAD key.
#[derive(Clone)]
pub struct Identity {
    pub suite_id: String,
    pub role: KeyRole,
    pub sig_sk: Option<SigningKey>,
    pub sig_pk: Option<VerifyingKey>,
    pub kem_sk: Option<KemSecretKey>,
    pub kem_pk: Option<KemPublicKey>,
    pub aead_key: Option<AeadKey>,
    pub security_level: Option<SecurityLevel>,
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Identity {{ suite: {:?}, role: {}, secrets: <redacted> }}",
            self.suite_id,
            self.role.name()
        )
    }
}

impl Identity {
    pub fn generate(
        suite: &dyn CryptoSuite,
        role: KeyRole,
        level: SecurityLevel,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> Identity {
        let mut id = Identity {
            suite_id: suite.id().to_string(),
            role,
            sig_sk: None,
            sig_pk: None,
            kem_sk: None,
            kem_pk: None,
            aead_key: None,
            security_level: None,
        };
        match role {
            KeyRole::Root | KeyRole::Publisher => {
                let (sk, pk) = suite.gen_signing_keypair(rng);
                id.sig_sk = Some(sk);
                id.sig_pk = Some(pk);
            }
            KeyRole::Server | KeyRole::Client | KeyRole::Vault => {
                let (sk, pk) = suite.gen_signing_keypair(rng);
                let (ksk, kpk) = suite.gen_kem_keypair(rng);
                id.sig_sk = Some(sk);
                id.sig_pk = Some(pk);
                id.kem_sk = Some(ksk);
                id.kem_pk = Some(kpk);
                id.security_level = Some(level);
            }
            KeyRole::Transport => {
                let mut key = [0u8; 16];
                rng.fill_bytes(&mut key);
                id.aead_key = Some(AeadKey(key));
            }
        }
        id
    }

    pub fn require_sig_sk(&self) -> Result<&SigningKey, CoreError> {
        self.sig_sk
            .as_ref()
            .ok_or(CoreError::KeyMaterial("identity has no signing key"))
    }

    pub fn require_sig_pk(&self) -> Result<&VerifyingKey, CoreError> {
        self.sig_pk
            .as_ref()
            .ok_or(CoreError::KeyMaterial("identity has no verifying key"))
    }

    pub fn require_kem_sk(&self) -> Result<&KemSecretKey, CoreError> {
        self.kem_sk
            .as_ref()
            .ok_or(CoreError::KeyMaterial("identity has no KEM secret key"))
    }

    pub fn require_kem_pk(&self) -> Result<&KemPublicKey, CoreError> {
        self.kem_pk
            .as_ref()
            .ok_or(CoreError::KeyMaterial("identity has no KEM public key"))
    }

    pub fn require_aead_key(&self) -> Result<&AeadKey, CoreError> {
        self.aead_key
            .as_ref()
            .ok_or(CoreError::KeyMaterial("identity has no symmetric key"))
    }

    pub fn require_level(&self) -> Result<SecurityLevel, CoreError> {
        self.security_level
            .ok_or(CoreError::KeyMaterial("identity has no security level"))
    }

    /// Issue the certificate binding this identity's public keys.
    pub fn certify(
        &self,
        suite: &dyn CryptoSuite,
        cert_role: CertRole,
        root: &Identity,
    ) -> Result<Certificate, CoreError> {
        let sig_pk = self.require_sig_pk()?.clone();
        let kem_pk = self.require_kem_pk()?.clone();
        let body = CertificateBody {
            suite_id: self.suite_id.clone(),
            role: cert_role,
            device_id: device_id(suite, sig_pk.as_bytes(), kem_pk.as_bytes()),
            security_level: self.require_level()?,
            sig_pk,
            kem_pk,
        };
        Certificate::issue(suite, root.require_sig_sk()?, body)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.encode())?;
        // Identity files carry secrets; owner-only on unix.
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Identity, CoreError> {
        let bytes = std::fs::read(path)
            .map_err(|_| CoreError::KeyMaterial("identity file unreadable"))?;
        Ok(Identity::decode(&bytes)?)
    }
}

impl WireMessage for Identity {
    const TYPE_TAG: u16 = tag::KEYPAIR;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_u16(2, self.role as u16);
        if let Some(k) = &self.sig_sk {
            w.put_bytes(3, k.as_bytes());
        }
        if let Some(k) = &self.sig_pk {
            w.put_bytes(4, k.as_bytes());
        }
        if let Some(k) = &self.kem_sk {
            w.put_bytes(5, k.as_bytes());
        }
        if let Some(k) = &self.kem_pk {
            w.put_bytes(6, k.as_bytes());
        }
        if let Some(k) = &self.aead_key {
            w.put_bytes(7, &k.0);
        }
        if let Some(l) = self.security_level {
            w.put_u16(8, l.as_u16());
        }
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let suite_id = read_str(1, c.require(1)?)?;
        let role = KeyRole::from_u16(read_u16(2, c.require(2)?)?)
            .ok_or(WireError::BadValue(2, "unknown key role"))?;
        let sig_sk = c.optional(3)?.map(|v| SigningKey(v.to_vec()));
        let sig_pk = c.optional(4)?.map(|v| VerifyingKey(v.to_vec()));
        let kem_sk = c.optional(5)?.map(|v| KemSecretKey(v.to_vec()));
        let kem_pk = c.optional(6)?.map(|v| KemPublicKey(v.to_vec()));
        let aead_key = c
            .optional(7)?
            .map(|v| read_array::<16>(7, v).map(AeadKey))
            .transpose()?;
        let security_level = c
            .optional(8)?
            .map(|v| {
                read_u16(8, v).and_then(|raw| {
                    SecurityLevel::from_u16(raw)
                        .ok_or(WireError::BadValue(8, "unknown security level"))
                })
            })
            .transpose()?;
        Ok(Identity {
            suite_id,
            role,
            sig_sk,
            sig_pk,
            kem_sk,
            kem_pk,
            aead_key,
            security_level,
        })
    }
}
