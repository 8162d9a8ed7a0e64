use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Method, Request, Response, Server};

use super::protocol::{
    ErrorResponse, MetaResponse, PredictRequest, PredictResponse, META_PATH, PREDICT_PATH,
};
use crate::error::{Error, Result};
use crate::types::Predictor;

const POLL: Duration = Duration::from_millis(50);

/// Serves a [`Predictor`] over the wire protocol until dropped.
pub struct ModelServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl std::fmt::Debug for ModelServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelServer")
            .field("addr", &self.addr)
            .finish()
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(
            Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        )
}

fn error_response(status: u16, message: impl Into<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::to_string(&ErrorResponse {
        error: message.into(),
    })
    .expect("string serializes");
    json_response(status, body)
}

fn handle(
    request: &mut Request,
    predictor: &dyn Predictor,
    max_batch: usize,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let path = request
        .url()
        .split('?')
        .next()
        .unwrap_or_default()
        .to_string();
    match (request.method(), path.as_str()) {
        (Method::Get, META_PATH) => {
            let h = predictor.handle();
            let meta = MetaResponse {
                name: h.name.clone(),
                labels: h.label_set.names(),
                mask_token: h.mask_token.clone(),
                max_batch,
            };
            json_response(200, serde_json::to_string(&meta).expect("meta serializes"))
        }
        (Method::Post, PREDICT_PATH) => {
            let mut body = String::new();
            if let Err(e) = request.as_reader().read_to_string(&mut body) {
                return error_response(400, format!("unreadable body: {e}"));
            }
            let req: PredictRequest = match serde_json::from_str(&body) {
                Ok(r) => r,
                Err(e) => {
                    return error_response(400, format!("expected {{\"texts\": [...]}}: {e}"))
                }
            };
            if req.texts.len() > max_batch {
                return error_response(
                    413,
                    format!("batch of {} exceeds max_batch {max_batch}", req.texts.len()),
                );
            }
            match predictor.predict_batch(&req.texts) {
                Ok(dists) => {
                    let probs = dists.into_iter().map(|d| d.into_inner()).collect();
                    json_response(
                        200,
                        serde_json::to_string(&PredictResponse { probs })
                            .expect("floats serialize"),
                    )
                }
                Err(e) => error_response(500, e.to_string()),
            }
        }
        (_, META_PATH | PREDICT_PATH) => {
            error_response(405, format!("method not allowed on {path}"))
        }
        _ => error_response(404, format!("no route for {path}")),
    }
}

impl ModelServer {
    /// Binds `addr` (port 0 picks a free port) and starts `workers` threads.
    pub fn bind(
        addr: &str,
        predictor: Arc<dyn Predictor>,
        max_batch: usize,
        workers: usize,
    ) -> Result<Self> {
        if max_batch == 0 {
            return Err(Error::invalid("max_batch must be at least 1"));
        }
        let server =
            Server::http(addr).map_err(|e| Error::invalid(format!("cannot bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::invalid(format!("{addr} is not an IP address")))?;
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let stop = Arc::clone(&stop);
                let predictor = Arc::clone(&predictor);
                thread::spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        let mut request = match server.recv_timeout(POLL) {
                            Ok(Some(r)) => r,
                            Ok(None) => continue,
                            Err(_) => break,
                        };
                        let response = handle(&mut request, predictor.as_ref(), max_batch);
                        let _ = request.respond(response);
                    }
                })
            })
            .collect();
        Ok(Self {
            addr,
            stop,
            workers,
        })
    }

    /// Loopback server on a free port.
    pub fn loopback(predictor: Arc<dyn Predictor>, max_batch: usize) -> Result<Self> {
        Self::bind("127.0.0.1:0", predictor, max_batch, 4)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the worker threads exit.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ModelServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
