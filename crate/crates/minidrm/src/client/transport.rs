//! License delivery transports. The in-process transport wires a client
//! directly to a service instance for tests and the conformance harness;
//! the HTTP transport speaks to a served deployment. Both carry raw wire
//! messages; a denial surfaces as the decoded ErrorEnvelope.

use std::io::Read;
use std::sync::Arc;

use minidrm_core::messages::ErrorEnvelope;
use minidrm_core::wire::WireMessage;

use crate::server::LicenseService;

#[derive(Debug)]
pub enum TransportError {
    /// The server processed the request and refused it.
    Server(ErrorEnvelope),
    /// The request never completed.
    Io(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Server(e) => write!(f, "server denial: {e}"),
            TransportError::Io(e) => write!(f, "transport: {e}"),
        }
    }
}

pub trait LicenseTransport: Send + Sync {
    /// Encoded server Certificate.
    fn server_certificate(&self) -> Result<Vec<u8>, TransportError>;
    fn license(&self, spc: &[u8]) -> Result<Vec<u8>, TransportError>;
    fn renew(&self, req: &[u8]) -> Result<Vec<u8>, TransportError>;
    fn release(&self, req: &[u8]) -> Result<Vec<u8>, TransportError>;
}

pub struct InProcessTransport {
    service: Arc<LicenseService>,
}

impl InProcessTransport {
    pub fn new(service: Arc<LicenseService>) -> InProcessTransport {
        InProcessTransport { service }
    }
}

impl LicenseTransport for InProcessTransport {
    fn server_certificate(&self) -> Result<Vec<u8>, TransportError> {
        Ok(self.service.certificate_bytes())
    }

    fn license(&self, spc: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.service.handle_license(spc).map_err(TransportError::Server)
    }

    fn renew(&self, req: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.service.handle_renew(req).map_err(TransportError::Server)
    }

    fn release(&self, req: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.service.handle_release(req).map_err(TransportError::Server)
    }
}

pub struct HttpTransport {
    agent: ureq::Agent,
    base: String,
}

impl HttpTransport {
    pub fn new(base_url: &str) -> HttpTransport {
        HttpTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(10))
                .build(),
            base: base_url.trim_end_matches('/').to_string(),
        }
    }

    fn get(&self, path: &str) -> Result<Vec<u8>, TransportError> {
        let resp = self
            .agent
            .get(&format!("{}{}", self.base, path))
            .call()
            .map_err(classify)?;
        read_response(resp)
    }

    fn post(&self, path: &str, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let resp = self
            .agent
            .post(&format!("{}{}", self.base, path))
            .set("Content-Type", "application/octet-stream")
            .send_bytes(body)
            .map_err(classify)?;
        read_response(resp)
    }
}

fn read_response(resp: ureq::Response) -> Result<Vec<u8>, TransportError> {
    let mut bytes = Vec::new();
    resp.into_reader()
        .take(1 << 24)
        .read_to_end(&mut bytes)
        .map_err(|e| TransportError::Io(e.to_string()))?;
    Ok(bytes)
}

/// HTTP 400 bodies are encoded ErrorEnvelopes; anything else is an IO
/// level failure.
fn classify(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::Status(_, resp) => match read_response(resp) {
            Ok(bytes) => match ErrorEnvelope::decode(&bytes) {
                Ok(envelope) => TransportError::Server(envelope),
                Err(_) => TransportError::Io("unparseable error response".to_string()),
            },
            Err(e) => e,
        },
        ureq::Error::Transport(t) => TransportError::Io(t.to_string()),
    }
}

impl LicenseTransport for HttpTransport {
    fn server_certificate(&self) -> Result<Vec<u8>, TransportError> {
        self.get("/v1/cert")
    }

    fn license(&self, spc: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.post("/v1/license", spc)
    }

    fn renew(&self, req: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.post("/v1/lease/renew", req)
    }

    fn release(&self, req: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.post("/v1/lease/release", req)
    }
}
