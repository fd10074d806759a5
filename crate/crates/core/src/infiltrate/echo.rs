use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::{ConnectInfo, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use chrono::{DateTime, SecondsFormat, Utc};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EchoRecord {
    pub at: DateTime<Utc>,
    pub client: IpAddr,
    pub token: String,
}

#[derive(Default)]
struct EchoLog {
    file: Option<File>,
    records: Vec<EchoRecord>,
}

type Shared = Arc<Mutex<EchoLog>>;

/// Answers `GET /probe?token=T` with `<peer ip>\n<T>\n` and logs each hit.
pub struct EchoServer {
    pub addr: SocketAddr,
    log: Shared,
    handle: Option<JoinHandle<()>>,
}

impl EchoServer {
    /// Binds `bind`; when `log_path` is given every hit is appended there as
    /// `timestamp<TAB>client<TAB>token`.
    pub async fn start(bind: SocketAddr, log_path: Option<&Path>) -> Result<EchoServer> {
        let file = match log_path {
            Some(p) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::path_io(p, e))?,
            ),
            None => None,
        };
        let log: Shared = Arc::new(Mutex::new(EchoLog {
            file,
            records: Vec::new(),
        }));
        let listener = TcpListener::bind(bind)
            .await
            .map_err(|e| Error::Config(format!("echo server cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr()?;
        let app = Router::new()
            .route("/probe", get(probe))
            .with_state(log.clone())
            .into_make_service_with_connect_info::<SocketAddr>();
        let handle = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(EchoServer {
            addr,
            log,
            handle: Some(handle),
        })
    }

    pub fn records(&self) -> Vec<EchoRecord> {
        self.log.lock().expect("echo log").records.clone()
    }

    pub fn probe_url(&self) -> url::Url {
        format!("http://{}/probe", self.addr).parse().expect("valid echo url")
    }

    /// Runs until the task is aborted or the process exits.
    pub async fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.await;
        }
    }
}

impl Drop for EchoServer {
    fn drop(&mut self) {
        if let Some(h) = &self.handle {
            h.abort();
        }
    }
}

async fn probe(
    State(log): State<Shared>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let Some(token) = q.get("token").filter(|t| !t.is_empty()) else {
        return (StatusCode::BAD_REQUEST, "missing token\n").into_response();
    };
    let client = peer.ip().to_canonical();
    let rec = EchoRecord {
        at: Utc::now(),
        client,
        token: token.clone(),
    };
    {
        let mut g = log.lock().expect("echo log");
        if let Some(f) = g.file.as_mut() {
            let line = format!(
                "{}\t{}\t{}\n",
                rec.at.to_rfc3339_opts(SecondsFormat::Millis, true),
                rec.client,
                rec.token.replace(['\t', '\n'], " ")
            );
            if let Err(e) = f.write_all(line.as_bytes()) {
                log::error!("echo log write failed: {e}");
            }
        }
        g.records.push(rec);
    }
    (
        [(header::CONTENT_TYPE, "text/plain")],
        format!("{client}\n{token}\n"),
    )
        .into_response()
}
