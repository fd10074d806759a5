use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use url::Url;

use super::DirectResipEntry;
use crate::infiltrate::{send_probe, FailureClass, ProbeSpec, ProxyProtocol};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyResult {
    pub ok: bool,
    pub exit_ip: Option<IpAddr>,
    pub failure: Option<FailureClass>,
}

/// Relays exactly one echo probe through the entry. Authentic direct proxies
/// egress from their own address.
pub async fn verify_direct(entry: &DirectResipEntry, echo: &Url, timeout: Duration) -> VerifyResult {
    let spec = ProbeSpec {
        service: entry.service.clone(),
        gateway: SocketAddr::new(entry.ip, entry.port).to_string(),
        proxy_protocol: entry.proxy_protocol.unwrap_or(ProxyProtocol::Http),
        credentials: entry.credentials.clone(),
        target: echo.clone(),
        token: format!(
            "verify.{}.{}.{}.{}",
            entry.service,
            entry.ip,
            entry.port,
            entry.fetched_at.timestamp_millis()
        ),
        timeout,
    };
    let obs = send_probe(&spec).await;
    if !obs.success {
        let failure = match obs.failure {
            Some(FailureClass::GatewayUnreachable) => FailureClass::ConnectionRefused,
            Some(f) => f,
            None => FailureClass::RelayError,
        };
        return VerifyResult {
            ok: false,
            exit_ip: obs.exit_ip,
            failure: Some(failure),
        };
    }
    let ok = obs.exit_ip == Some(entry.ip);
    VerifyResult {
        ok,
        exit_ip: obs.exit_ip,
        failure: (!ok).then_some(FailureClass::RelayMismatch),
    }
}

/// Verifies entries with at most `concurrency` addresses in flight and no more
/// than one probe per second to any one address. Results keep input order.
pub async fn verify_many(
    entries: &[DirectResipEntry],
    echo: &Url,
    timeout: Duration,
    concurrency: usize,
) -> Vec<VerifyResult> {
    let mut by_ip: BTreeMap<IpAddr, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_ip.entry(e.ip).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = by_ip.into_values().collect();
    let done: Vec<Vec<(usize, VerifyResult)>> = stream::iter(groups)
        .map(|idx| async move {
            let mut out = Vec::with_capacity(idx.len());
            for (n, i) in idx.into_iter().enumerate() {
                if n > 0 {
                    tokio::time::sleep(Duration::from_secs(1)).await;
                }
                out.push((i, verify_direct(&entries[i], echo, timeout).await));
            }
            out
        })
        .buffer_unordered(concurrency.max(1))
        .collect()
        .await;
    let mut results: Vec<Option<VerifyResult>> = vec![None; entries.len()];
    for (i, r) in done.into_iter().flatten() {
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("every entry verified")).collect()
}
