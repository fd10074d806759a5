//! Loopback fixtures for tests and demos: a static website server, a forwarding
//! proxy, a fixed-response HTTP server and a stub DNS responder.

mod dns;
mod proxy;

pub use dns::StubDns;
pub use proxy::{FixedResponder, ForwarderConfig, ForwardingProxy};

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

#[derive(Clone)]
struct SiteState {
    pages: Arc<HashMap<String, String>>,
    requests: Arc<Mutex<Vec<String>>>,
}

/// Serves a fixed map of `path -> html` and records every request as `host path`.
pub struct SiteServer {
    pub addr: SocketAddr,
    requests: Arc<Mutex<Vec<String>>>,
    handle: JoinHandle<()>,
}

impl SiteServer {
    pub async fn start(pages: HashMap<String, String>) -> std::io::Result<SiteServer> {
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let state = SiteState {
            pages: Arc::new(pages),
            requests: Arc::new(Mutex::new(Vec::new())),
        };
        let requests = state.requests.clone();
        let app = Router::new().fallback(serve).with_state(state);
        let handle = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(SiteServer {
            addr,
            requests,
            handle,
        })
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().expect("request log").clone()
    }
}

impl Drop for SiteServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

async fn serve(State(state): State<SiteState>, headers: HeaderMap, uri: Uri) -> Response {
    let host = headers
        .get(header::HOST)
        .and_then(|h| h.to_str().ok())
        .unwrap_or("")
        .to_string();
    let path = uri
        .path_and_query()
        .map(|p| p.as_str().to_string())
        .unwrap_or_else(|| "/".into());
    state
        .requests
        .lock()
        .expect("request log")
        .push(format!("{host} {path}"));
    match state.pages.get(&path) {
        Some(html) => (
            [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
            html.clone(),
        )
            .into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

/// A site of `n` pages: the homepage links to `/p1`, and page `i` links to `i+1`,
/// to the homepage, and to one external domain.
pub fn chain_site(n: usize, external: &str) -> HashMap<String, String> {
    let mut pages = HashMap::new();
    for i in 0..n {
        let path = if i == 0 { "/".to_string() } else { format!("/p{i}") };
        let next = if i + 1 < n {
            format!("<a href=\"/p{}\">next</a>", i + 1)
        } else {
            String::new()
        };
        pages.insert(
            path,
            format!(
                "<html><head><title>Page {i}</title></head><body><p>page {i}</p>{next}\
                 <a href=\"/\">home</a><a href=\"http://{external}/x{i}\">partner</a></body></html>"
            ),
        );
    }
    pages
}
