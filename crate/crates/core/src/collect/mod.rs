//! Direct RESIP collection from service APIs and live DNS, plus direct-relay verification.

mod api;
mod dns;
mod verify;

use std::collections::HashSet;
use std::fmt;
use std::io::Write as _;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infiltrate::{Credentials, ProxyProtocol};
use crate::types::ServiceId;

pub use api::{
    fetch_api_resips, map_response, poll_endpoints, ApiEndpointConfig, ApiPoll, FieldMapping, MappedResponse, PollReport,
};
pub use dns::{dns_query, resolve_dns_resips, DnsAnswer, DnsOutcome, DnsScan, DnsScanOptions};
pub use verify::{verify_direct, verify_many, VerifyResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySource {
    Api,
    Dns,
}

impl fmt::Display for EntrySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntrySource::Api => "api",
            EntrySource::Dns => "dns",
        })
    }
}

impl FromStr for EntrySource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "api" => Ok(EntrySource::Api),
            "dns" => Ok(EntrySource::Dns),
            _ => Err(Error::Config(format!("unknown entry source `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectResipEntry {
    pub service: ServiceId,
    pub ip: IpAddr,
    pub port: u16,
    pub proxy_protocol: Option<ProxyProtocol>,
    /// Passed through opaquely; never written to the store.
    pub credentials: Option<Credentials>,
    pub fetched_at: DateTime<Utc>,
    pub source: EntrySource,
    /// Resolved name for DNS-sourced entries.
    pub subdomain: Option<String>,
}

pub const ENTRY_HEADER: &str = "# service\tip\tport\tprotocol\tsource\tsubdomain\tfetched_at\n";

impl DirectResipEntry {
    pub fn key(&self) -> (ServiceId, IpAddr, u16) {
        (self.service.clone(), self.ip, self.port)
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.service,
            self.ip,
            self.port,
            self.proxy_protocol.map_or_else(|| "-".to_string(), |p| p.to_string()),
            self.source,
            self.subdomain.as_deref().unwrap_or("-"),
            self.fetched_at.to_rfc3339_opts(SecondsFormat::Millis, true)
        )
    }

    pub fn parse_line(line: &str) -> Option<DirectResipEntry> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if f.len() != 7 {
            return None;
        }
        let port: u16 = f[2].parse().ok()?;
        if port == 0 {
            return None;
        }
        Some(DirectResipEntry {
            service: f[0].parse().ok()?,
            ip: f[1].parse().ok()?,
            port,
            proxy_protocol: match f[3] {
                "-" => None,
                s => Some(s.parse().ok()?),
            },
            credentials: None,
            source: f[4].parse().ok()?,
            subdomain: match f[5] {
                "-" => None,
                s => Some(s.to_string()),
            },
            fetched_at: DateTime::parse_from_rfc3339(f[6]).ok()?.with_timezone(&Utc),
        })
    }
}

/// Append-only entry file. Rows are unique on (service, ip, port, fetched_at).
pub struct EntryStore {
    path: PathBuf,
    rows: HashSet<(ServiceId, IpAddr, u16, DateTime<Utc>)>,
    distinct: HashSet<(ServiceId, IpAddr, u16)>,
}

impl EntryStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<EntryStore> {
        let path = path.into();
        let mut store = EntryStore {
            path,
            rows: HashSet::new(),
            distinct: HashSet::new(),
        };
        if store.path.exists() {
            let (entries, bad) = read_entries(&store.path)?;
            if bad > 0 {
                log::warn!("{}: skipped {bad} malformed rows", store.path.display());
            }
            for e in entries {
                store.remember(&e);
            }
        }
        Ok(store)
    }

    fn remember(&mut self, e: &DirectResipEntry) -> bool {
        self.distinct.insert(e.key());
        self.rows.insert((e.service.clone(), e.ip, e.port, e.fetched_at))
    }

    /// Appends entries not already stored; returns how many were written.
    pub fn append(&mut self, entries: &[DirectResipEntry]) -> Result<usize> {
        let fresh = !self.path.exists();
        let mut buf = String::new();
        if fresh {
            buf.push_str(ENTRY_HEADER);
        }
        let mut n = 0;
        for e in entries {
            if self.remember(e) {
                buf.push_str(&e.to_line());
                n += 1;
            }
        }
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::path_io(&self.path, e))?;
        f.write_all(buf.as_bytes()).map_err(|e| Error::path_io(&self.path, e))?;
        Ok(n)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Distinct (service, ip, port) triples.
    pub fn distinct_count(&self) -> usize {
        self.distinct.len()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_entries(path: &Path) -> Result<(Vec<DirectResipEntry>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
    let mut out = Vec::new();
    let mut bad = 0;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        match DirectResipEntry::parse_line(line) {
            Some(e) => out.push(e),
            None => bad += 1,
        }
    }
    Ok((out, bad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn entry(ip: &str, port: u16, secs: i64) -> DirectResipEntry {
        DirectResipEntry {
            service: "pinyiyun".parse().unwrap(),
            ip: ip.parse().unwrap(),
            port,
            proxy_protocol: Some(ProxyProtocol::Socks5),
            credentials: None,
            fetched_at: Utc.timestamp_opt(1_618_000_000 + secs, 0).unwrap(),
            source: EntrySource::Api,
            subdomain: None,
        }
    }

    #[test]
    fn line_round_trip() {
        let mut e = entry("10.1.2.3", 62456, 0);
        assert_eq!(DirectResipEntry::parse_line(&e.to_line()).unwrap(), e);
        e.source = EntrySource::Dns;
        e.subdomain = Some("zj0571.shenlongip.com".into());
        e.proxy_protocol = None;
        assert_eq!(DirectResipEntry::parse_line(&e.to_line()).unwrap(), e);
        assert!(DirectResipEntry::parse_line("a\tb").is_none());
    }

    #[test]
    fn store_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entries.tsv");
        let mut s = EntryStore::open(&path).unwrap();
        assert_eq!(s.append(&[entry("10.0.0.1", 1, 0), entry("10.0.0.1", 1, 0)]).unwrap(), 1);
        drop(s);
        let mut s = EntryStore::open(&path).unwrap();
        assert_eq!(s.row_count(), 1);
        assert_eq!(s.append(&[entry("10.0.0.1", 1, 60)]).unwrap(), 1);
        assert_eq!(s.distinct_count(), 1);
        assert_eq!(read_entries(&path).unwrap().0.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn repolling_identical_response_adds_no_distinct_keys(
            raw in prop::collection::vec((0u8..20, 1u16..5), 0..40)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let mut store = EntryStore::open(dir.path().join("e.tsv")).unwrap();
            let poll = |t: i64| -> Vec<DirectResipEntry> {
                raw.iter().map(|&(h, p)| entry(&format!("10.0.0.{h}"), p, t)).collect()
            };
            store.append(&poll(0)).unwrap();
            let before = store.distinct_count();
            let expected: HashSet<_> = raw.iter().collect();
            prop_assert_eq!(before, expected.len());
            store.append(&poll(3600)).unwrap();
            prop_assert_eq!(store.distinct_count(), before);
        }
    }
}
