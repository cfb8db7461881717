//! The axum service around a [`Gateway`].
//!
//! Every request is handled on the blocking pool, whose threads get large
//! stacks for deeply nested user code. A watchdog answers 503 once an RPC
//! overruns its deadline by [`WATCHDOG_GRACE`] and cancels the evaluation.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, HeaderName, HeaderValue, Request, StatusCode};
use axum::response::Response;
use axum::Router;
use tokio::sync::oneshot;

use super::{ApiRequest, ApiResponse, Gateway, Method};

pub const WATCHDOG_GRACE: Duration = Duration::from_millis(500);
pub const THREAD_STACK: usize = 32 * 1024 * 1024;

fn to_response(r: ApiResponse) -> Response {
    let mut out = Response::new(Body::from(r.body));
    *out.status_mut() = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    for (k, v) in r.headers {
        if let (Ok(k), Ok(v)) = (HeaderName::try_from(k), HeaderValue::try_from(v)) {
            out.headers_mut().append(k, v);
        }
    }
    out
}

async fn handle(gateway: Arc<Gateway>, req: Request<Body>) -> Response {
    let (parts, body) = req.into_parts();
    let bytes = match axum::body::to_bytes(body, gateway.config().max_body).await {
        Ok(b) => b,
        Err(_) => {
            return to_response(ApiResponse::text(
                413,
                &format!("request body exceeds the limit of {} bytes", gateway.config().max_body),
            ))
        }
    };
    let api_req = ApiRequest {
        method: Method::parse(parts.method.as_str()),
        path: parts.uri.path().to_string(),
        query: parts.uri.query().map(str::to_string),
        content_type: parts
            .headers
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        body: bytes.to_vec(),
    };
    let cancel = Arc::new(AtomicBool::new(false));
    let limit = gateway.config().timeout + WATCHDOG_GRACE;
    let flag = cancel.clone();
    let task = tokio::task::spawn_blocking(move || gateway.handle_with_cancel(&api_req, Some(flag)));
    let resp = match tokio::time::timeout(limit, task).await {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => {
            log::error!("request handler failed: {e}");
            ApiResponse::text(503, "server failure: the evaluator crashed")
        }
        Err(_) => {
            cancel.store(true, Ordering::Relaxed);
            ApiResponse::text(
                503,
                &format!("deadline exceeded: request exceeded the {} s limit", limit.as_secs_f64()),
            )
        }
    };
    to_response(resp)
}

/// Builds the router. Exposed for embedding in another server.
pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new().fallback(move |req: Request<Body>| handle(gateway.clone(), req))
}

/// A server running on its own runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting requests and waits for in-flight ones.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop()
    }

    /// Blocks until the server exits on its own.
    pub fn wait(mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn stop(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds `addr` and serves on a background thread. With `until_ctrl_c`,
/// an interrupt also shuts the server down.
pub fn start(gateway: Gateway, addr: &str, until_ctrl_c: bool) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .thread_stack_size(THREAD_STACK)
        .build()?;
    let (tx, rx) = oneshot::channel::<()>();
    let gateway = Arc::new(gateway);
    let thread = std::thread::Builder::new().name("statgate-server".into()).spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            let store = gateway.store().clone();
            let every = gateway.config().evict_interval;
            let evictor = tokio::spawn(async move {
                let mut tick = tokio::time::interval(every);
                loop {
                    tick.tick().await;
                    let s = store.clone();
                    let removed = tokio::task::spawn_blocking(move || s.evict_expired(s.now())).await.unwrap_or(0);
                    if removed > 0 {
                        log::info!("evicted {removed} sessions");
                    }
                }
            });
            let stop = async move {
                if until_ctrl_c {
                    tokio::select! {
                        _ = rx => {}
                        _ = tokio::signal::ctrl_c() => log::info!("interrupted, shutting down"),
                    }
                } else {
                    let _ = rx.await;
                }
            };
            let result = axum::serve(listener, router(gateway)).with_graceful_shutdown(stop).await;
            evictor.abort();
            result
        })
    })?;
    Ok(ServerHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
