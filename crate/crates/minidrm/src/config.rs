//! Deployment configuration: a single static TOML file loaded at serve
//! time. Relative paths resolve against the config file's directory.
//! Anything missing or non-positive is rejected on load, before the
//! service binds.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use minidrm_core::messages::PolicyMode;
use minidrm_core::types::SecurityLevel;
use serde::Deserialize;
use thiserror::Error;

use crate::server::ContentPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServerConfig {
    bind_addr: String,
    suite: Option<String>,
    version_floor: Option<u16>,
    replay_window_secs: Option<u64>,
    rate_limit_per_sec: Option<u32>,
    workers: Option<usize>,
    state_dir: Option<String>,
    identity: String,
    certificate: String,
    root_pub: String,
    transport_key: String,
    #[serde(default)]
    auth_tokens: Vec<RawAuthToken>,
    #[serde(default)]
    contents: Vec<RawContent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAuthToken {
    token: String,
    account: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContent {
    content_id: String,
    registry: String,
    mode: String,
    #[serde(default)]
    rental_duration: u64,
    #[serde(default)]
    lease_duration: u64,
    #[serde(default)]
    max_concurrent: u32,
    min_level: Option<String>,
    /// Negative-fixture switch: the registry file is unsealed.
    #[serde(default)]
    plaintext_registry: bool,
}

#[derive(Debug, Clone)]
pub struct ContentEntry {
    pub content_id: String,
    pub registry: PathBuf,
    pub policy: ContentPolicy,
    pub plaintext_registry: bool,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind_addr: String,
    pub suite_id: String,
    pub version_floor: u16,
    pub replay_window_secs: u64,
    pub rate_limit_per_sec: Option<u32>,
    pub workers: usize,
    pub state_dir: Option<PathBuf>,
    pub identity: PathBuf,
    pub certificate: PathBuf,
    pub root_pub: PathBuf,
    pub transport_key: PathBuf,
    pub auth_tokens: HashMap<String, String>,
    pub contents: Vec<ContentEntry>,
}

pub fn parse_level(s: &str) -> Result<SecurityLevel, ConfigError> {
    match s {
        "dev" => Ok(SecurityLevel::Dev),
        "software" => Ok(SecurityLevel::Software),
        "hardware" => Ok(SecurityLevel::Hardware),
        other => Err(invalid(format!("unknown security level {other:?}"))),
    }
}

fn parse_mode(s: &str) -> Result<PolicyMode, ConfigError> {
    match s {
        "rental" => Ok(PolicyMode::Rental),
        "lease" => Ok(PolicyMode::Lease),
        "persistent" => Ok(PolicyMode::Persistent),
        other => Err(invalid(format!("unknown policy mode {other:?}"))),
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn must_exist(path: &Path, what: &str) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(invalid(format!("{what} file not found: {}", path.display())))
    }
}

pub fn load_server_config(path: &Path) -> Result<ServerConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawServerConfig =
        toml::from_str(&text).map_err(|e| invalid(format!("parse error: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let suite_id = raw.suite.unwrap_or_else(|| "classic-x25519".to_string());
    minidrm_core::suite::suite_by_id(&suite_id)
        .map_err(|_| invalid(format!("unknown crypto suite {suite_id:?}")))?;

    let replay_window_secs = raw.replay_window_secs.unwrap_or(60);
    if replay_window_secs == 0 {
        return Err(invalid("replay_window_secs must be positive"));
    }
    let version_floor = raw
        .version_floor
        .unwrap_or(minidrm_core::CURRENT_PROTOCOL_VERSION);
    if !minidrm_core::SUPPORTED_PROTOCOL_VERSIONS.contains(&version_floor) {
        return Err(invalid(format!(
            "version_floor {version_floor} outside supported versions"
        )));
    }
    if raw.rate_limit_per_sec == Some(0) {
        return Err(invalid("rate_limit_per_sec must be positive when set"));
    }

    let identity = resolve(&base, &raw.identity);
    let certificate = resolve(&base, &raw.certificate);
    let root_pub = resolve(&base, &raw.root_pub);
    let transport_key = resolve(&base, &raw.transport_key);
    must_exist(&identity, "identity")?;
    must_exist(&certificate, "certificate")?;
    must_exist(&root_pub, "root public key")?;
    must_exist(&transport_key, "transport key")?;

    let mut auth_tokens = HashMap::new();
    for t in raw.auth_tokens {
        if t.token.is_empty() || t.account.is_empty() {
            return Err(invalid("auth token entries need token and account"));
        }
        if auth_tokens.insert(t.token.clone(), t.account).is_some() {
            return Err(invalid(format!("duplicate auth token {:?}", t.token)));
        }
    }

    let mut contents = Vec::with_capacity(raw.contents.len());
    let mut seen = std::collections::HashSet::new();
    for c in raw.contents {
        if !seen.insert(c.content_id.clone()) {
            return Err(invalid(format!("duplicate content_id {:?}", c.content_id)));
        }
        let mode = parse_mode(&c.mode)?;
        match mode {
            PolicyMode::Rental | PolicyMode::Persistent => {
                if c.rental_duration == 0 {
                    return Err(invalid(format!(
                        "content {:?}: rental_duration must be positive",
                        c.content_id
                    )));
                }
            }
            PolicyMode::Lease => {
                if c.lease_duration == 0 || c.max_concurrent == 0 {
                    return Err(invalid(format!(
                        "content {:?}: lease mode needs positive lease_duration and max_concurrent",
                        c.content_id
                    )));
                }
            }
        }
        let registry = resolve(&base, &c.registry);
        must_exist(&registry, "registry")?;
        let min_level = parse_level(c.min_level.as_deref().unwrap_or("software"))?;
        contents.push(ContentEntry {
            content_id: c.content_id,
            registry,
            policy: ContentPolicy {
                mode,
                rental_duration: c.rental_duration,
                lease_duration: c.lease_duration,
                max_concurrent: c.max_concurrent,
                min_level,
            },
            plaintext_registry: c.plaintext_registry,
        });
    }

    Ok(ServerConfig {
        bind_addr: raw.bind_addr,
        suite_id,
        version_floor,
        replay_window_secs,
        rate_limit_per_sec: raw.rate_limit_per_sec,
        workers: raw.workers.unwrap_or(4).max(1),
        state_dir: raw.state_dir.map(|s| resolve(&base, &s)),
        identity,
        certificate,
        root_pub,
        transport_key,
        auth_tokens,
        contents,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConformConfig {
    suite: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConformConfig {
    pub suite_id: String,
}

pub fn load_conform_config(path: &Path) -> Result<ConformConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawConformConfig =
        toml::from_str(&text).map_err(|e| invalid(format!("parse error: {e}")))?;
    let suite_id = raw.suite.unwrap_or_else(|| "classic-x25519".to_string());
    minidrm_core::suite::suite_by_id(&suite_id)
        .map_err(|_| invalid(format!("unknown crypto suite {suite_id:?}")))?;
    Ok(ConformConfig { suite_id })
}
