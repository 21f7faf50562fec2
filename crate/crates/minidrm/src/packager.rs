//! Content packager. Splits media into fixed-size segments, derives one
//! content key per rotation period from the publisher key seed, seals
//! every segment, and emits a signed manifest plus a transport-sealed key
//! registry for delivery to the license server.
//!
//! Segment nonces are structural (period ‖ index) and the segment AD
//! binds content id, index, and key id, so a sealed segment opens in
//! exactly one position of exactly one content under exactly one key.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use minidrm_core::derive::{derive_content_key, derive_key_id};
use minidrm_core::error::{CoreError, WireError};
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::messages::{
    registry_ad, segment_ad, InitData, KeyRegistry, Manifest, SealedRegistry, SegmentRecord,
    SignedManifest,
};
use minidrm_core::suite::{AeadKey, AeadNonce, CryptoSuite, Signature, VerifyingKey, AEAD_TAG_LEN};
use minidrm_core::types::KeySeed;
use minidrm_core::wire::WireMessage;
use thiserror::Error;

pub const REGISTRY_TRANSPORT_LABEL: &[u8] = b"minidrm/registry/v1";

pub const MANIFEST_FILE: &str = "manifest.mdrm";
pub const REGISTRY_FILE: &str = "registry.sealed";
pub const SEGMENT_DIR: &str = "seg";

#[derive(Debug, Error)]
pub enum PackagerError {
    #[error("{0}")]
    Content(&'static str),
    #[error("wire: {0}")]
    Wire(#[from] WireError),
    #[error("crypto: {0}")]
    Crypto(#[from] CoreError),
    #[error("manifest signature rejected")]
    BadSignature,
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Deliberate weakenings for conformance fixtures. Default is hardened.
#[derive(Debug, Clone, Copy, Default)]
pub struct PackagerFixtures {
    /// Seal segments with the unauthenticated stream cipher. A zeroed
    /// 16-byte tag slot keeps the manifest length arithmetic unchanged.
    pub plain_segment_cipher: bool,
    /// Emit the manifest with an empty signature.
    pub unsigned_manifest: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct PackageOptions {
    pub segment_size: u32,
    pub rotation_period: u32,
}

impl Default for PackageOptions {
    fn default() -> Self {
        PackageOptions {
            segment_size: 64 * 1024,
            rotation_period: 4,
        }
    }
}

pub struct Package {
    pub manifest: Manifest,
    /// Encoded SignedManifest, exactly what ships.
    pub signed_manifest_bytes: Vec<u8>,
    pub registry: KeyRegistry,
    /// Sealed segment bodies in index order.
    pub segments: Vec<Vec<u8>>,
}

/// Package a single piece of content. Deterministic given (seed,
/// content, options): keys derive from the seed, nonces from position.
pub fn package(
    suite: &'static dyn CryptoSuite,
    seed: &KeySeed,
    content_id: &str,
    content: &[u8],
    opts: &PackageOptions,
    publisher: &Identity,
    fixtures: &PackagerFixtures,
) -> Result<Package, PackagerError> {
    if content.is_empty() {
        return Err(PackagerError::Content("content must be non-empty"));
    }
    if content_id.is_empty() {
        return Err(PackagerError::Content("content id must be non-empty"));
    }
    if opts.segment_size == 0 {
        return Err(PackagerError::Content("segment size must be positive"));
    }
    if opts.rotation_period == 0 {
        return Err(PackagerError::Content("rotation period must be positive"));
    }
    if publisher.role != KeyRole::Publisher {
        return Err(PackagerError::Content("signing identity must be a publisher"));
    }
    if publisher.suite_id != suite.id() {
        return Err(PackagerError::Content("publisher identity suite mismatch"));
    }
    let sig_sk = publisher.require_sig_sk()?;

    let chunks: Vec<&[u8]> = content.chunks(opts.segment_size as usize).collect();
    let period_count = (chunks.len() - 1) / opts.rotation_period as usize + 1;

    let mut key_ids_per_period = Vec::with_capacity(period_count);
    let mut entries = Vec::with_capacity(period_count);
    for period in 0..period_count as u32 {
        let kid = derive_key_id(suite, content_id, period);
        key_ids_per_period.push((period, kid));
        entries.push(derive_content_key(suite, seed, kid, period));
    }

    let mut segments = Vec::with_capacity(chunks.len());
    let mut records = Vec::with_capacity(chunks.len());
    for (i, chunk) in chunks.iter().enumerate() {
        let index = i as u64;
        let period = (index / opts.rotation_period as u64) as u32;
        let (kid, entry) = {
            let e = &entries[period as usize];
            (e.key_id, e)
        };
        let key = AeadKey(*entry.key_bytes());
        let nonce = AeadNonce::for_segment(period, index);
        let ad = segment_ad(content_id, index, kid);
        let sealed = if fixtures.plain_segment_cipher {
            let mut buf = chunk.to_vec();
            suite.stream_xor(&key, &nonce, &mut buf);
            buf.extend_from_slice(&[0u8; AEAD_TAG_LEN]);
            buf
        } else {
            suite.seal(&key, &nonce, &ad, chunk)
        };
        records.push(SegmentRecord {
            index,
            period,
            key_id: kid,
            uri: format!("{SEGMENT_DIR}/{index}.bin"),
            sealed_len: sealed.len() as u64,
            sealed_digest: suite.hash(&sealed),
        });
        segments.push(sealed);
    }

    let manifest = Manifest {
        suite_id: suite.id().to_string(),
        content_id: content_id.to_string(),
        total_len: content.len() as u64,
        segment_size: opts.segment_size,
        rotation_period: opts.rotation_period,
        key_ids_per_period,
        segments: records,
        init_data: InitData {
            content_id: content_id.to_string(),
            key_ids: entries.iter().map(|e| e.key_id).collect(),
        },
    };
    manifest.validate()?;

    let manifest_bytes = manifest.encode();
    let signature = if fixtures.unsigned_manifest {
        Signature(Vec::new())
    } else {
        suite.sign(sig_sk, &manifest_bytes)?
    };
    let signed_manifest_bytes = SignedManifest {
        manifest_bytes,
        signature,
    }
    .encode();

    let registry = KeyRegistry {
        suite_id: suite.id().to_string(),
        content_id: content_id.to_string(),
        entries,
    };

    Ok(Package {
        manifest,
        signed_manifest_bytes,
        registry,
        segments,
    })
}

/// Verify and decode a shipped manifest: publisher signature over the
/// exact manifest bytes, then structural validation.
pub fn verify_manifest(
    suite: &dyn CryptoSuite,
    signed_bytes: &[u8],
    publisher_vk: &VerifyingKey,
) -> Result<Manifest, PackagerError> {
    let signed = SignedManifest::decode(signed_bytes)?;
    if !suite.verify(publisher_vk, &signed.manifest_bytes, &signed.signature) {
        return Err(PackagerError::BadSignature);
    }
    let manifest = Manifest::decode(&signed.manifest_bytes)?;
    manifest.validate()?;
    Ok(manifest)
}

/// Decode without checking the signature. Fixture path only; still
/// enforces structural validity.
pub fn decode_manifest_unverified(signed_bytes: &[u8]) -> Result<Manifest, PackagerError> {
    let signed = SignedManifest::decode(signed_bytes)?;
    let manifest = Manifest::decode(&signed.manifest_bytes)?;
    manifest.validate()?;
    Ok(manifest)
}

/// Seal a registry for transport to the license server under the shared
/// transport key.
pub fn seal_registry(
    suite: &dyn CryptoSuite,
    registry: &KeyRegistry,
    transport_key: &AeadKey,
    rng: &mut dyn rand_core::CryptoRngCore,
) -> SealedRegistry {
    let nonce = AeadNonce::random(rng);
    let ad = registry_ad(REGISTRY_TRANSPORT_LABEL, &registry.content_id);
    let sealed = suite.seal(transport_key, &nonce, &ad, &registry.encode());
    SealedRegistry {
        content_id: registry.content_id.clone(),
        nonce: nonce.0,
        sealed,
    }
}

pub fn open_registry(
    suite: &dyn CryptoSuite,
    sealed: &SealedRegistry,
    transport_key: &AeadKey,
) -> Result<KeyRegistry, PackagerError> {
    let ad = registry_ad(REGISTRY_TRANSPORT_LABEL, &sealed.content_id);
    let plain = suite.open(transport_key, &AeadNonce(sealed.nonce), &ad, &sealed.sealed)?;
    let registry = KeyRegistry::decode(&plain)?;
    if registry.content_id != sealed.content_id {
        return Err(PackagerError::Content("registry content id mismatch"));
    }
    Ok(registry)
}

/// Write a package to disk:
/// `<dir>/manifest.mdrm`, `<dir>/seg/<index>.bin`, `<dir>/registry.sealed`.
/// When `plaintext_registry` is set (fixture) the registry file holds raw
/// unencrypted registry bytes.
pub fn write_package(
    suite: &dyn CryptoSuite,
    pkg: &Package,
    transport_key: &AeadKey,
    rng: &mut dyn rand_core::CryptoRngCore,
    out_dir: &Path,
    plaintext_registry: bool,
) -> Result<(), PackagerError> {
    fs::create_dir_all(out_dir.join(SEGMENT_DIR))?;
    fs::write(out_dir.join(MANIFEST_FILE), &pkg.signed_manifest_bytes)?;
    for (record, sealed) in pkg.manifest.segments.iter().zip(&pkg.segments) {
        fs::write(out_dir.join(&record.uri), sealed)?;
    }
    let registry_bytes = if plaintext_registry {
        pkg.registry.encode()
    } else {
        seal_registry(suite, &pkg.registry, transport_key, rng).encode()
    };
    fs::write(out_dir.join(REGISTRY_FILE), registry_bytes)?;
    Ok(())
}

/// Load a registry file written by `write_package`. `plaintext` must
/// match how it was written.
pub fn load_registry_file(
    suite: &dyn CryptoSuite,
    path: &Path,
    transport_key: &AeadKey,
    plaintext: bool,
) -> Result<KeyRegistry, PackagerError> {
    let bytes = fs::read(path)?;
    if plaintext {
        Ok(KeyRegistry::decode(&bytes)?)
    } else {
        let sealed = SealedRegistry::decode(&bytes)?;
        open_registry(suite, &sealed, transport_key)
    }
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

pub fn registry_path(dir: &Path) -> PathBuf {
    dir.join(REGISTRY_FILE)
}
