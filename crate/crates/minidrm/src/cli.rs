//! Command-line surface: pack, serve, play, resume, keygen, conform.
//! Each subcommand is a single invocation; the long-running serve loop
//! drains in-flight requests on SIGINT.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use minidrm_core::cert::{CertRole, Certificate};
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::suite::{suite_by_id, CryptoSuite};
use minidrm_core::time::SystemClock;
use minidrm_core::types::{to_hex, KeySeed};
use minidrm_core::wire::WireMessage;
use rand_core::{OsRng, RngCore};

use crate::client::transport::{HttpTransport, LicenseTransport, TransportError};
use crate::client::{offline, ClientError, ClientFixtures, DirSegmentSource, DrmClient};
use crate::config::{self, ConfigError};
use crate::conformance::{self, Fixture, HarnessConfig};
use crate::packager::{self, PackageOptions, PackagerFixtures};
use crate::server::http::HttpServer;
use crate::server::{LicenseService, ServerOptions};
use crate::vault::{TeeVault, VaultOptions};

#[derive(Parser)]
#[command(
    name = "minidrm",
    version,
    about = "Desk-scale OTT DRM pipeline: packager, license server, client, conformance"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an identity (and, for client/server, a root-signed certificate).
    Keygen {
        /// One of: root, publisher, server, client, vault, transport.
        #[arg(long)]
        role: String,
        /// Output path for the identity; `<out>.pub` and `<out>.cert` land beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "classic-x25519")]
        suite: String,
        /// Device security level for client/server/vault roles.
        #[arg(long, default_value = "hardware")]
        level: String,
        /// Root identity used to sign client/server certificates.
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Package a content file into sealed segments plus manifest and registry.
    Pack {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "content-id")]
        content_id: String,
        #[arg(long = "segment-size", default_value_t = 65536)]
        segment_size: u32,
        #[arg(long, default_value_t = 4)]
        rotation: u32,
        /// Key seed file (30 raw bytes). With --gen-seed, created if absent.
        #[arg(long = "seed-file")]
        seed_file: PathBuf,
        /// Publisher identity used to sign the manifest.
        #[arg(long = "sign-key")]
        sign_key: PathBuf,
        /// Transport key sealing the registry for the license server.
        #[arg(long = "transport-key")]
        transport_key: PathBuf,
        #[arg(long = "gen-seed", default_value_t = false)]
        gen_seed: bool,
    },
    /// Run the license server described by a config file.
    Serve {
        /// Defaults to $MINIDRM_SERVER_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fetch a license and play content through the vault sink.
    Play {
        #[arg(long)]
        manifest: PathBuf,
        /// License server base URL.
        #[arg(long)]
        server: String,
        /// Client identity file.
        #[arg(long)]
        identity: PathBuf,
        /// Client certificate file.
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        token: String,
        /// Publisher public identity for manifest verification.
        #[arg(long = "publisher-pub")]
        publisher_pub: PathBuf,
        /// Root public identity for server certificate verification.
        #[arg(long = "root-pub")]
        root_pub: PathBuf,
        /// Segment directory; defaults to the manifest's directory.
        #[arg(long = "seg-dir")]
        seg_dir: Option<PathBuf>,
        /// Persist the license for offline playback ($MINIDRM_HDS_DIR).
        #[arg(long = "offline-store", default_value_t = false)]
        offline_store: bool,
    },
    /// Resume offline playback from the persistent license store.
    Resume {
        #[arg(long = "content-id")]
        content_id: String,
        #[arg(long)]
        identity: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long = "publisher-pub")]
        publisher_pub: PathBuf,
        #[arg(long = "root-pub")]
        root_pub: PathBuf,
        #[arg(long = "seg-dir")]
        seg_dir: PathBuf,
    },
    /// Run the 21-property conformance suite and emit a report.
    Conform {
        #[arg(long)]
        config: PathBuf,
        /// Negative fixture name; omit for the unmodified deployment.
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit codes follow the client contract: 0 ok, 2 denied/expired, 3
/// verification/vault, 4 transport/io; 1 is config or usage.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("minidrm: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Client(e) => e.exit_code(),
            CliError::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(format!("CONFIG: {e}"))
    }
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Keygen {
            role,
            out,
            suite,
            level,
            root,
        } => keygen(&role, &out, &suite, &level, root.as_deref()),
        Command::Pack {
            input,
            out,
            content_id,
            segment_size,
            rotation,
            seed_file,
            sign_key,
            transport_key,
            gen_seed,
        } => pack(
            &input,
            &out,
            &content_id,
            segment_size,
            rotation,
            &seed_file,
            &sign_key,
            &transport_key,
            gen_seed,
        ),
        Command::Serve { config } => serve(config),
        Command::Play {
            manifest,
            server,
            identity,
            certificate,
            token,
            publisher_pub,
            root_pub,
            seg_dir,
            offline_store,
        } => play(
            &manifest,
            &server,
            &identity,
            &certificate,
            &token,
            &publisher_pub,
            &root_pub,
            seg_dir.as_deref(),
            offline_store,
        ),
        Command::Resume {
            content_id,
            identity,
            certificate,
            publisher_pub,
            root_pub,
            seg_dir,
        } => resume(
            &content_id,
            &identity,
            &certificate,
            &publisher_pub,
            &root_pub,
            &seg_dir,
        ),
        Command::Conform {
            config,
            fixture,
            seed,
            out,
        } => conform(&config, fixture.as_deref(), seed, &out),
    }
}

fn load_suite(id: &str) -> Result<&'static dyn CryptoSuite, CliError> {
    suite_by_id(id).map_err(|_| cfg_err(format!("CONFIG: unknown crypto suite {id:?}")))
}

fn load_identity(path: &Path, what: &str) -> Result<Identity, CliError> {
    Identity::load(path).map_err(|e| cfg_err(format!("CONFIG: {what} at {}: {e}", path.display())))
}

fn public_only(id: &Identity) -> Identity {
    Identity {
        sig_sk: None,
        kem_sk: None,
        aead_key: None,
        ..id.clone()
    }
}

fn keygen(
    role: &str,
    out: &Path,
    suite_id: &str,
    level: &str,
    root: Option<&Path>,
) -> Result<(), CliError> {
    let suite = load_suite(suite_id)?;
    let level = config::parse_level(level).map_err(|e| cfg_err(format!("CONFIG: {e}")))?;
    let key_role = match role {
        "root" => KeyRole::Root,
        "publisher" => KeyRole::Publisher,
        "server" => KeyRole::Server,
        "client" => KeyRole::Client,
        "vault" => KeyRole::Vault,
        "transport" => KeyRole::Transport,
        other => return Err(cfg_err(format!("CONFIG: unknown role {other:?}"))),
    };
    let identity = Identity::generate(suite, key_role, level, &mut OsRng);
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    identity.save(out)?;
    println!("wrote identity {}", out.display());

    if key_role != KeyRole::Transport {
        let pub_path = out.with_extension("pub");
        public_only(&identity).save(&pub_path)?;
        println!("wrote public identity {}", pub_path.display());
    }

    if matches!(key_role, KeyRole::Client | KeyRole::Server) {
        let root_path = root.ok_or_else(|| {
            cfg_err("ROOT_MISSING: client and server roles need --root to sign the certificate")
        })?;
        let root_id = load_identity(root_path, "root identity")?;
        let cert_role = if key_role == KeyRole::Client {
            CertRole::Client
        } else {
            CertRole::Server
        };
        let cert = identity
            .certify(suite, cert_role, &root_id)
            .map_err(|e| cfg_err(format!("CONFIG: certify: {e}")))?;
        let cert_path = out.with_extension("cert");
        std::fs::write(&cert_path, cert.encode())?;
        println!("wrote certificate {}", cert_path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pack(
    input: &Path,
    out: &Path,
    content_id: &str,
    segment_size: u32,
    rotation: u32,
    seed_file: &Path,
    sign_key: &Path,
    transport_key: &Path,
    gen_seed: bool,
) -> Result<(), CliError> {
    let publisher = load_identity(sign_key, "publisher identity")?;
    let suite = load_suite(&publisher.suite_id)?;
    let transport = load_identity(transport_key, "transport key")?;
    let transport_key = transport
        .require_aead_key()
        .map_err(|e| cfg_err(format!("CONFIG: transport key: {e}")))?;

    let seed = if seed_file.exists() {
        let bytes = std::fs::read(seed_file)?;
        KeySeed::from_bytes(&bytes)
            .map_err(|e| cfg_err(format!("CONFIG: seed file: {e}")))?
    } else if gen_seed {
        let seed = KeySeed::generate(&mut OsRng);
        std::fs::write(seed_file, seed.as_bytes())?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(seed_file, std::fs::Permissions::from_mode(0o600))?;
        }
        println!("wrote key seed {}", seed_file.display());
        seed
    } else {
        return Err(cfg_err(format!(
            "CONFIG: seed file not found: {} (pass --gen-seed to create)",
            seed_file.display()
        )));
    };

    let content = std::fs::read(input)?;
    let opts = PackageOptions {
        segment_size,
        rotation_period: rotation,
    };
    let package = packager::package(
        suite,
        &seed,
        content_id,
        &content,
        &opts,
        &publisher,
        &PackagerFixtures::default(),
    )
    .map_err(|e| cfg_err(format!("CONFIG: pack: {e}")))?;
    packager::write_package(suite, &package, transport_key, &mut OsRng, out, false)
        .map_err(|e| cfg_err(format!("pack write: {e}")))?;
    println!(
        "packaged {} bytes into {} segments over {} crypto-periods at {}",
        content.len(),
        package.manifest.segments.len(),
        package.manifest.key_ids_per_period.len(),
        out.display()
    );
    Ok(())
}

fn serve(config: Option<PathBuf>) -> Result<(), CliError> {
    let path = config
        .or_else(|| std::env::var_os("MINIDRM_SERVER_CONFIG").map(PathBuf::from))
        .ok_or_else(|| cfg_err("CONFIG: pass --config or set MINIDRM_SERVER_CONFIG"))?;
    let cfg = config::load_server_config(&path)?;
    let suite = load_suite(&cfg.suite_id)?;
    let identity = load_identity(&cfg.identity, "server identity")?;
    let certificate = Certificate::decode(&std::fs::read(&cfg.certificate)?)
        .map_err(|e| cfg_err(format!("CONFIG: certificate: {e}")))?;
    let root_pub = load_identity(&cfg.root_pub, "root public identity")?;
    let root_vk = root_pub
        .require_sig_pk()
        .map_err(|e| cfg_err(format!("CONFIG: root public identity: {e}")))?
        .clone();
    let transport = load_identity(&cfg.transport_key, "transport key")?;
    let transport_key = transport
        .require_aead_key()
        .map_err(|e| cfg_err(format!("CONFIG: transport key: {e}")))?;

    let opts = ServerOptions {
        version_floor: cfg.version_floor,
        replay_window: cfg.replay_window_secs,
        rate_limit_per_sec: cfg.rate_limit_per_sec,
        replay_ledger: true,
        plain_license: false,
    };
    let service = Arc::new(
        LicenseService::new(
            suite,
            &identity,
            certificate,
            root_vk,
            Arc::new(SystemClock),
            cfg.auth_tokens.clone(),
            opts,
            OsRng.next_u64(),
        )
        .map_err(|e| cfg_err(format!("CONFIG: {e}")))?,
    );
    for entry in &cfg.contents {
        let registry = packager::load_registry_file(
            suite,
            &entry.registry,
            transport_key,
            entry.plaintext_registry,
        )
        .map_err(|e| cfg_err(format!("CONFIG: registry {:?}: {e}", entry.content_id)))?;
        service
            .install_content(registry, entry.policy)
            .map_err(|e| cfg_err(format!("CONFIG: content {:?}: {e}", entry.content_id)))?;
        log::info!("installed content {}", entry.content_id);
    }
    if let Some(dir) = &cfg.state_dir {
        std::fs::create_dir_all(dir)?;
        let n = service
            .persist_keydb(dir)
            .map_err(|e| cfg_err(format!("state dir: {e}")))?;
        log::info!("persisted {n} sealed registries to the key database");
    }

    let server = HttpServer::start(Arc::clone(&service), &cfg.bind_addr, cfg.workers)
        .map_err(|e| cfg_err(format!("BIND_FAILED: {e}")))?;
    println!("minidrm serve: listening on http://{}", server.addr());

    let (tx, rx) = std::sync::mpsc::channel::<()>();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .map_err(|e| cfg_err(format!("signal handler: {e}")))?;
    let _ = rx.recv();
    log::info!("shutdown signal received; draining");
    server.stop();
    println!("minidrm serve: stopped");
    Ok(())
}

struct NullTransport;

impl LicenseTransport for NullTransport {
    fn server_certificate(&self) -> Result<Vec<u8>, TransportError> {
        Err(TransportError::Io("offline mode".into()))
    }
    fn license(&self, _spc: &[u8]) -> Result<Vec<u8>, TransportError> {
        Err(TransportError::Io("offline mode".into()))
    }
    fn renew(&self, _req: &[u8]) -> Result<Vec<u8>, TransportError> {
        Err(TransportError::Io("offline mode".into()))
    }
    fn release(&self, _req: &[u8]) -> Result<Vec<u8>, TransportError> {
        Err(TransportError::Io("offline mode".into()))
    }
}

fn build_client(
    identity_path: &Path,
    certificate: &Path,
    publisher_pub: &Path,
    root_pub: &Path,
    token: &str,
    transport: Box<dyn LicenseTransport>,
) -> Result<(DrmClient, Arc<TeeVault>), CliError> {
    let identity = load_identity(identity_path, "client identity")?;
    let suite = load_suite(&identity.suite_id)?;
    let certificate = Certificate::decode(&std::fs::read(certificate)?)
        .map_err(|e| cfg_err(format!("CONFIG: certificate: {e}")))?;
    let publisher = load_identity(publisher_pub, "publisher public identity")?;
    let publisher_vk = publisher
        .require_sig_pk()
        .map_err(|e| cfg_err(format!("CONFIG: publisher public identity: {e}")))?
        .clone();
    let root = load_identity(root_pub, "root public identity")?;
    let root_vk = root
        .require_sig_pk()
        .map_err(|e| cfg_err(format!("CONFIG: root public identity: {e}")))?
        .clone();
    let vault = Arc::new(
        TeeVault::new(suite, &identity, VaultOptions::default(), OsRng.next_u64())
            .map_err(|e| cfg_err(format!("CONFIG: vault: {e}")))?,
    );
    let client = DrmClient::new(
        suite,
        Arc::new(SystemClock),
        publisher_vk,
        root_vk,
        transport,
        Arc::clone(&vault),
        certificate,
        token.to_string(),
        ClientFixtures::default(),
        OsRng.next_u64(),
    )
    .map_err(|e| cfg_err(format!("CONFIG: client: {e}")))?;
    Ok((client, vault))
}

fn hds_dir() -> PathBuf {
    std::env::var_os("MINIDRM_HDS_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("./minidrm-hds"))
}

#[allow(clippy::too_many_arguments)]
fn play(
    manifest: &Path,
    server: &str,
    identity: &Path,
    certificate: &Path,
    token: &str,
    publisher_pub: &Path,
    root_pub: &Path,
    seg_dir: Option<&Path>,
    offline_store: bool,
) -> Result<(), CliError> {
    let transport = Box::new(HttpTransport::new(server));
    let (client, _vault) =
        build_client(identity, certificate, publisher_pub, root_pub, token, transport)?;
    let manifest_bytes = std::fs::read(manifest)?;
    let content = client.open_content(&manifest_bytes)?;
    let license = client.request_license(&content)?;
    log::info!("license acquired for {}", content.manifest.content_id);

    let default_dir = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let source = DirSegmentSource::new(seg_dir.unwrap_or(&default_dir));
    let mut session = client.start_playback(&content, &license)?;
    let report = session.play_to_end(&source)?;
    println!(
        "played {} segments ({} bytes); sink digest {}",
        report.delivered_segments,
        report.delivered_bytes,
        to_hex(&report.sink_digest)
    );
    if report.expired_during_play {
        println!("note: license expired during playback; this session was allowed to finish");
    }

    if offline_store {
        let dir = hds_dir();
        let path = offline::store(&client, &content, &license, &dir)?;
        println!("stored offline license {}", path.display());
    }
    Ok(())
}

fn resume(
    content_id: &str,
    identity: &Path,
    certificate: &Path,
    publisher_pub: &Path,
    root_pub: &Path,
    seg_dir: &Path,
) -> Result<(), CliError> {
    let (client, _vault) = build_client(
        identity,
        certificate,
        publisher_pub,
        root_pub,
        "",
        Box::new(NullTransport),
    )?;
    let (content, license) = offline::resume(&client, content_id, &hds_dir())?;
    let source = DirSegmentSource::new(seg_dir);
    let mut session = client.start_playback(&content, &license)?;
    let report = session.play_to_end(&source)?;
    println!(
        "resumed {}: {} segments ({} bytes); sink digest {}",
        content_id,
        report.delivered_segments,
        report.delivered_bytes,
        to_hex(&report.sink_digest)
    );
    Ok(())
}

fn conform(config: &Path, fixture: Option<&str>, seed: u64, out: &Path) -> Result<(), CliError> {
    let cfg = config::load_conform_config(config)
        .map_err(|e| cfg_err(format!("HARNESS_SETUP: {e}")))?;
    let fixture = match fixture {
        None => None,
        Some(name) => Some(Fixture::parse(name).ok_or_else(|| {
            let known: Vec<&str> = Fixture::ALL.iter().map(|f| f.name()).collect();
            cfg_err(format!(
                "HARNESS_SETUP: unknown fixture {name:?} (known: {})",
                known.join(", ")
            ))
        })?),
    };
    let harness = HarnessConfig {
        suite_id: cfg.suite_id,
        seed,
        fixture,
    };
    let report = conformance::run_suite(&harness)
        .map_err(|e| cfg_err(format!("HARNESS_SETUP: {e}")))?;
    std::fs::write(out, report.encode())?;
    print!("{}", conformance::report::render(&report));
    println!("wrote report {}", out.display());
    Ok(())
}
