//! Offline (persistent) license store. A stored license is the vault's
//! device-bound sealed record written to the hashed-data-store directory;
//! resuming re-opens it inside the vault and re-verifies the embedded
//! manifest, so an offline start is held to the same checks as an online
//! one.

use std::fs;
use std::path::{Path, PathBuf};

use minidrm_core::derive::secure_content_id;
use minidrm_core::messages::OfflineRecord;
use minidrm_core::types::to_hex;
use minidrm_core::wire::WireMessage;

use super::{ClientError, DrmClient, License, OpenContent};

/// Record file name: hashed content id, so the store leaks no catalog
/// names.
fn record_path(client: &DrmClient, hds_dir: &Path, content_id: &str) -> PathBuf {
    let scid = secure_content_id(client.suite, content_id);
    hds_dir.join(format!("{}.rec", to_hex(&scid[..12])))
}

/// Persist a license for offline playback. Requires a persistent policy
/// and refuses to overwrite an existing record.
pub fn store(
    client: &DrmClient,
    content: &OpenContent,
    license: &License,
    hds_dir: &Path,
) -> Result<PathBuf, ClientError> {
    if !license.policy.persistent {
        return Err(ClientError::NotPersistent);
    }
    let path = record_path(client, hds_dir, &license.content_id);
    if path.exists() {
        return Err(ClientError::AlreadyInstalled);
    }
    let record = client.vault.seal_offline_record(
        &license.content_id,
        &content.signed_manifest_bytes,
        &license.policy,
        &license.key_ids,
        client.clock.now(),
    )?;
    fs::create_dir_all(hds_dir).map_err(|e| ClientError::Io(e.to_string()))?;
    fs::write(&path, record.encode()).map_err(|e| ClientError::Io(e.to_string()))?;
    Ok(path)
}

/// Reopen a stored license. The embedded manifest is re-verified and the
/// policy expiry is checked against the current clock before any key
/// becomes usable for a new session.
pub fn resume(
    client: &DrmClient,
    content_id: &str,
    hds_dir: &Path,
) -> Result<(OpenContent, License), ClientError> {
    let path = record_path(client, hds_dir, content_id);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ClientError::RecordMissing)
        }
        Err(e) => return Err(ClientError::Io(e.to_string())),
    };
    let record = OfflineRecord::decode(&bytes)
        .map_err(|e| ClientError::Verification(format!("offline record: {e}")))?;
    if record.content_id != content_id {
        return Err(ClientError::Verification("offline record content mismatch".into()));
    }
    let restored = client.vault.open_offline_record(&record)?;
    if client.clock.now() >= restored.policy.expiry {
        return Err(ClientError::Expired);
    }
    let content = client.open_content(&restored.signed_manifest)?;
    if content.manifest.content_id != content_id {
        return Err(ClientError::Verification("embedded manifest content mismatch".into()));
    }
    let license = License {
        content_id: content_id.to_string(),
        key_ids: restored.key_ids,
        policy: restored.policy,
        lease_token: None,
        server: None,
    };
    Ok((content, license))
}
