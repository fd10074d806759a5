use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use chrono::Utc;
use hickory_proto::op::{Message, MessageType, OpCode, Query, ResponseCode};
use hickory_proto::rr::{Name, RData, RecordType};
use tokio::net::UdpSocket;

use super::{DirectResipEntry, EntrySource};
use crate::error::{Error, Result};
use crate::patterns::PatternSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DnsOutcome {
    Answered(Vec<IpAddr>),
    /// Name exists but holds no record of the asked type.
    NoData,
    NxDomain,
    Timeout,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsAnswer {
    pub name: String,
    pub record_type: RecordType,
    pub outcome: DnsOutcome,
}

#[derive(Debug, Clone)]
pub struct DnsScanOptions {
    pub resolver: SocketAddr,
    pub timeout: Duration,
    pub attempts: u32,
}

impl DnsScanOptions {
    pub fn new(resolver: SocketAddr) -> Self {
        DnsScanOptions {
            resolver,
            timeout: Duration::from_secs(2),
            attempts: 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DnsScan {
    pub entries: Vec<DirectResipEntry>,
    pub answers: Vec<DnsAnswer>,
}

async fn exchange(resolver: SocketAddr, query: &[u8], id: u16, timeout: Duration) -> std::io::Result<Option<Message>> {
    let bind: SocketAddr = if resolver.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("valid");
    let sock = UdpSocket::bind(bind).await?;
    sock.connect(resolver).await?;
    sock.send(query).await?;
    let mut buf = vec![0u8; 4096];
    let deadline = tokio::time::Instant::now() + timeout;
    loop {
        let n = match tokio::time::timeout_at(deadline, sock.recv(&mut buf)).await {
            Ok(r) => r?,
            Err(_) => return Ok(None),
        };
        match Message::from_vec(&buf[..n]) {
            Ok(m) if m.id() == id && m.message_type() == MessageType::Response => return Ok(Some(m)),
            _ => continue,
        }
    }
}

/// One A or AAAA lookup over UDP.
pub async fn dns_query(resolver: SocketAddr, name: &str, rtype: RecordType, timeout: Duration, attempts: u32) -> DnsOutcome {
    let qname = match Name::from_ascii(name) {
        Ok(mut n) => {
            n.set_fqdn(true);
            n
        }
        Err(e) => return DnsOutcome::Failed(e.to_string()),
    };
    let id: u16 = rand::random();
    let mut msg = Message::new();
    msg.set_id(id)
        .set_message_type(MessageType::Query)
        .set_op_code(OpCode::Query)
        .set_recursion_desired(true)
        .add_query(Query::query(qname, rtype));
    let wire = match msg.to_vec() {
        Ok(w) => w,
        Err(e) => return DnsOutcome::Failed(e.to_string()),
    };
    for _ in 0..attempts.max(1) {
        match exchange(resolver, &wire, id, timeout).await {
            Ok(Some(resp)) => {
                return match resp.response_code() {
                    ResponseCode::NoError => {
                        let ips: Vec<IpAddr> = resp
                            .answers()
                            .iter()
                            .filter_map(|r| match r.data() {
                                RData::A(a) if rtype == RecordType::A => Some(IpAddr::V4(a.0)),
                                RData::AAAA(a) if rtype == RecordType::AAAA => Some(IpAddr::V6(a.0)),
                                _ => None,
                            })
                            .collect();
                        if ips.is_empty() {
                            DnsOutcome::NoData
                        } else {
                            DnsOutcome::Answered(ips)
                        }
                    }
                    ResponseCode::NXDomain => DnsOutcome::NxDomain,
                    other => DnsOutcome::Failed(other.to_string()),
                };
            }
            Ok(None) => continue,
            Err(e) => return DnsOutcome::Failed(e.to_string()),
        }
    }
    DnsOutcome::Timeout
}

/// Resolves every configured name of every service for A and AAAA. Failures are
/// recorded per name and the scan continues.
pub async fn resolve_dns_resips(patterns: &PatternSet, opts: &DnsScanOptions) -> Result<DnsScan> {
    let mut scan = DnsScan::default();
    for svc in &patterns.services {
        if svc.names.is_empty() {
            continue;
        }
        let port = svc
            .port
            .ok_or_else(|| Error::Config(format!("service {} lists names but no port", svc.id)))?;
        for name in &svc.names {
            for rtype in [RecordType::A, RecordType::AAAA] {
                let outcome = dns_query(opts.resolver, name, rtype, opts.timeout, opts.attempts).await;
                if let DnsOutcome::Answered(ips) = &outcome {
                    let fetched_at = Utc::now();
                    for ip in ips {
                        scan.entries.push(DirectResipEntry {
                            service: svc.id.clone(),
                            ip: *ip,
                            port,
                            proxy_protocol: svc.protocol,
                            credentials: None,
                            fetched_at,
                            source: EntrySource::Dns,
                            subdomain: Some(name.trim_end_matches('.').to_ascii_lowercase()),
                        });
                    }
                } else if !matches!(outcome, DnsOutcome::NoData) {
                    log::info!("{name} {rtype}: {outcome:?}");
                }
                scan.answers.push(DnsAnswer {
                    name: name.clone(),
                    record_type: rtype,
                    outcome,
                });
            }
        }
    }
    Ok(scan)
}
