//! HTTP transport for remote planners: `{request_id, prompt}` in, `{text}` out.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::agent::{BackendError, ModelBackend, ModelReply, ModelRequest};

fn default_backoff() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub endpoint: String,
    /// Per-attempt timeout, seconds.
    pub timeout: f64,
    pub max_retries: u32,
    /// Environment variable holding a bearer token.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    /// Pause between attempts, seconds.
    #[serde(default = "default_backoff")]
    pub backoff: f64,
}

impl GatewayConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        GatewayConfig { endpoint: endpoint.into(), timeout: 60.0, max_retries: 2, auth_token_env: None, backoff: default_backoff() }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(GatewayError::Config(format!("timeout must be > 0, got {}", self.timeout)));
        }
        if !(self.backoff >= 0.0 && self.backoff.is_finite()) {
            return Err(GatewayError::Config("backoff must be >= 0".into()));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(GatewayError::Config(format!("endpoint `{}` is not an http(s) URL", self.endpoint)));
        }
        Ok(())
    }

    fn token(&self) -> Result<Option<String>, GatewayError> {
        match &self.auth_token_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| GatewayError::Config(format!("environment variable `{var}` is not set"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExchange {
    pub request_id: String,
    pub prompt: String,
    pub response: String,
    pub attempts: u32,
    /// Successful attempt plus backoff, seconds.
    pub latency: f64,
    pub http_status: u16,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server answered {0}")]
    BadStatus(u16),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
}

impl GatewayError {
    fn retryable(&self) -> bool {
        match self {
            GatewayError::Timeout => true,
            GatewayError::BadStatus(code) => *code >= 500,
            _ => false,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    request_id: &'a str,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct WireReply {
    text: String,
}

fn attempt(agent: &ureq::Agent, cfg: &GatewayConfig, token: Option<&str>, body: &WireRequest<'_>) -> Result<(u16, String), GatewayError> {
    let mut req = agent.post(&cfg.endpoint).header("Content-Type", "application/json");
    if let Some(t) = token {
        req = req.header("Authorization", format!("Bearer {t}"));
    }
    let mut resp = req.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => GatewayError::Timeout,
        other => GatewayError::Transport(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(GatewayError::BadStatus(status));
    }
    let text = resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        other => GatewayError::Transport(other.to_string()),
    })?;
    let reply: WireReply = serde_json::from_str(&text).map_err(|e| GatewayError::MalformedReply(e.to_string()))?;
    Ok((status, reply.text))
}

/// Posts one prompt, retrying 5xx replies and timeouts with a fixed backoff.
pub fn send_query(cfg: &GatewayConfig, prompt: &str) -> Result<ModelExchange, GatewayError> {
    cfg.validate()?;
    let token = cfg.token()?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.timeout)))
        .http_status_as_error(false)
        .build()
        .into();
    let request_id = uuid::Uuid::new_v4().to_string();
    let body = WireRequest { request_id: &request_id, prompt };
    let mut backoff_total = 0.0;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let t0 = Instant::now();
        match attempt(&agent, cfg, token.as_deref(), &body) {
            Ok((http_status, response)) => {
                return Ok(ModelExchange {
                    request_id,
                    prompt: prompt.to_string(),
                    response,
                    attempts,
                    latency: t0.elapsed().as_secs_f64() + backoff_total,
                    http_status,
                })
            }
            Err(e) if e.retryable() && attempts <= cfg.max_retries => {
                std::thread::sleep(Duration::from_secs_f64(cfg.backoff));
                backoff_total += cfg.backoff;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Planner backend that forwards every prompt through the gateway.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub config: GatewayConfig,
    pub exchanges: Vec<ModelExchange>,
}

impl RemoteBackend {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(RemoteBackend { config, exchanges: Vec::new() })
    }
}

impl ModelBackend for RemoteBackend {
    fn query(&mut self, req: &ModelRequest<'_>) -> Result<ModelReply, BackendError> {
        match send_query(&self.config, req.prompt) {
            Ok(ex) => {
                let reply = ModelReply { text: ex.response.clone(), latency: ex.latency };
                self.exchanges.push(ex);
                Ok(reply)
            }
            Err(GatewayError::Timeout) => Err(BackendError::Timeout),
            Err(e) => Err(BackendError::Unavailable(e.to_string())),
        }
    }
}

/// Minimal scripted HTTP server for exercising the gateway without a network.
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;
    use std::time::Duration;

    #[derive(Debug, Clone)]
    pub struct StubReply {
        pub status: u16,
        pub body: String,
        /// Delay before answering.
        pub delay: Duration,
    }

    impl StubReply {
        pub fn ok_text(text: &str) -> Self {
            StubReply { status: 200, body: serde_json::json!({ "text": text }).to_string(), delay: Duration::ZERO }
        }

        pub fn status(status: u16) -> Self {
            StubReply { status, body: "{}".into(), delay: Duration::ZERO }
        }
    }

    #[derive(Debug, Clone, Default)]
    pub struct Received {
        pub body: String,
        pub authorization: Option<String>,
    }

    /// Serves the scripted replies in order, one per connection, then stops.
    pub struct StubServer {
        pub url: String,
        pub received: Arc<Mutex<Vec<Received>>>,
        handle: Option<JoinHandle<()>>,
    }

    fn serve(mut stream: TcpStream, reply: &StubReply) -> std::io::Result<Received> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut len = 0usize;
        let mut rec = Received::default();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                match k.trim().to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap_or(0),
                    "authorization" => rec.authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body)?;
        rec.body = String::from_utf8_lossy(&body).into_owned();
        std::thread::sleep(reply.delay);
        let head = format!(
            "HTTP/1.1 {} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            reply.status,
            reply.body.len()
        );
        // The client may have given up already.
        let _ = stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(reply.body.as_bytes()));
        Ok(rec)
    }

    impl StubServer {
        pub fn start(replies: Vec<StubReply>) -> std::io::Result<Self> {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let url = format!("http://{}/query", listener.local_addr()?);
            let received = Arc::new(Mutex::new(Vec::new()));
            let log = Arc::clone(&received);
            let handle = std::thread::spawn(move || {
                for reply in &replies {
                    let Ok((stream, _)) = listener.accept() else { return };
                    if let Ok(r) = serve(stream, reply) {
                        log.lock().expect("stub log").push(r);
                    }
                }
            });
            Ok(StubServer { url, received, handle: Some(handle) })
        }

        pub fn requests(&self) -> Vec<Received> {
            self.received.lock().expect("stub log").clone()
        }

        /// Waits until every scripted reply was served.
        pub fn join(mut self) -> Vec<Received> {
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
            self.requests()
        }
    }
}
