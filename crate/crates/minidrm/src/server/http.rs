//! Thin HTTP face over the license service. Bodies are raw wire messages
//! both ways; a denial is HTTP 400 carrying an encoded ErrorEnvelope.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use minidrm_core::error::ErrorCode;
use minidrm_core::messages::ErrorEnvelope;
use minidrm_core::wire::WireMessage;
use tiny_http::{Header, Method, Request, Response, Server};

use super::LicenseService;

/// Requests larger than this are rejected unread.
const MAX_BODY: usize = 1 << 20;

pub struct HttpServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl HttpServer {
    /// Bind and start worker threads. `bind` may use port 0 to pick a
    /// free port; `addr()` reports the bound address.
    pub fn start(
        service: Arc<LicenseService>,
        bind: &str,
        workers: usize,
    ) -> std::io::Result<HttpServer> {
        let server = Arc::new(
            Server::http(bind).map_err(|e| std::io::Error::other(e.to_string()))?,
        );
        let addr = match server.server_addr() {
            tiny_http::ListenAddr::IP(a) => a,
            #[allow(unreachable_patterns)]
            _ => return Err(std::io::Error::other("unsupported listen address")),
        };
        let shutdown = Arc::new(AtomicBool::new(false));
        let mut handles = Vec::with_capacity(workers.max(1));
        for _ in 0..workers.max(1) {
            let server = Arc::clone(&server);
            let service = Arc::clone(&service);
            let shutdown = Arc::clone(&shutdown);
            handles.push(std::thread::spawn(move || {
                while !shutdown.load(Ordering::Relaxed) {
                    match server.recv_timeout(Duration::from_millis(100)) {
                        Ok(Some(request)) => handle(&service, request),
                        Ok(None) => continue,
                        Err(_) => break,
                    }
                }
            }));
        }
        Ok(HttpServer {
            addr,
            shutdown,
            workers: handles,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Signal and join all workers.
    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

fn octet_stream() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/octet-stream"[..]).unwrap()
}

fn respond_bytes(request: Request, status: u16, bytes: Vec<u8>) {
    let response = Response::from_data(bytes)
        .with_status_code(status)
        .with_header(octet_stream());
    let _ = request.respond(response);
}

fn respond_error(request: Request, envelope: &ErrorEnvelope) {
    respond_bytes(request, 400, envelope.encode());
}

fn read_body(request: &mut Request) -> Result<Vec<u8>, ErrorEnvelope> {
    let declared = request.body_length().unwrap_or(0);
    if declared > MAX_BODY {
        return Err(ErrorEnvelope {
            code: ErrorCode::Malformed,
            message: "request body too large".into(),
        });
    }
    let mut body = Vec::with_capacity(declared);
    let mut limited = request.as_reader().take(MAX_BODY as u64 + 1);
    limited.read_to_end(&mut body).map_err(|_| ErrorEnvelope {
        code: ErrorCode::Malformed,
        message: "request body unreadable".into(),
    })?;
    if body.len() > MAX_BODY {
        return Err(ErrorEnvelope {
            code: ErrorCode::Malformed,
            message: "request body too large".into(),
        });
    }
    Ok(body)
}

/// One structured line per protocol request: operation, outcome, and the
/// request transcript digest. Never any payload or key material.
fn log_outcome(service: &LicenseService, op: &str, body: &[u8], result: &Result<Vec<u8>, ErrorEnvelope>) {
    let digest = service.suite().hash(body);
    match result {
        Ok(_) => log::info!(
            "op={op} outcome=ok transcript={}",
            minidrm_core::types::to_hex(&digest)
        ),
        Err(e) => log::info!(
            "op={op} outcome={:?} transcript={}",
            e.code,
            minidrm_core::types::to_hex(&digest)
        ),
    }
}

fn handle(service: &LicenseService, mut request: Request) {
    let method = request.method().clone();
    let url = request.url().to_string();
    log::debug!("{} {}", method, url);
    match (method, url.as_str()) {
        (Method::Post, "/v1/license") => match read_body(&mut request) {
            Ok(body) => {
                let result = service.handle_license(&body);
                log_outcome(service, "license", &body, &result);
                match result {
                    Ok(ckc) => respond_bytes(request, 200, ckc),
                    Err(e) => respond_error(request, &e),
                }
            }
            Err(e) => respond_error(request, &e),
        },
        (Method::Post, "/v1/lease/renew") => match read_body(&mut request) {
            Ok(body) => {
                let result = service.handle_renew(&body);
                log_outcome(service, "renew", &body, &result);
                match result {
                    Ok(resp) => respond_bytes(request, 200, resp),
                    Err(e) => respond_error(request, &e),
                }
            }
            Err(e) => respond_error(request, &e),
        },
        (Method::Post, "/v1/lease/release") => match read_body(&mut request) {
            Ok(body) => {
                let result = service.handle_release(&body);
                log_outcome(service, "release", &body, &result);
                match result {
                    Ok(resp) => respond_bytes(request, 200, resp),
                    Err(e) => respond_error(request, &e),
                }
            }
            Err(e) => respond_error(request, &e),
        },
        (Method::Get, "/v1/cert") => {
            respond_bytes(request, 200, service.certificate_bytes());
        }
        (Method::Get, "/v1/health") => {
            respond_bytes(request, 200, b"ok".to_vec());
        }
        (Method::Get, path) if path.starts_with("/v1/metering/") => {
            let account = &path["/v1/metering/".len()..];
            if account.is_empty() {
                respond_error(
                    request,
                    &ErrorEnvelope {
                        code: ErrorCode::Malformed,
                        message: "missing account".into(),
                    },
                );
                return;
            }
            respond_bytes(request, 200, service.metering_report(account).encode());
        }
        _ => {
            let body = ErrorEnvelope {
                code: ErrorCode::Malformed,
                message: "no such endpoint".into(),
            }
            .encode();
            let response = Response::from_data(body)
                .with_status_code(404)
                .with_header(octet_stream());
            let _ = request.respond(response);
        }
    }
}
