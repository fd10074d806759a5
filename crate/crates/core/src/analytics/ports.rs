use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use serde::Serialize;

use crate::collect::DirectResipEntry;
use crate::report::{csv, grouped, pct_or_na, text_table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortRow {
    pub port: u16,
    pub ips: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortExposure {
    pub exposed_ips: u64,
    /// Ip count descending, then port.
    pub ports: Vec<PortRow>,
}

pub fn port_exposure_summary(entries: &[DirectResipEntry]) -> PortExposure {
    let mut by_port: BTreeMap<u16, BTreeSet<IpAddr>> = BTreeMap::new();
    let mut ips = BTreeSet::new();
    for e in entries {
        ips.insert(e.ip);
        by_port.entry(e.port).or_default().insert(e.ip);
    }
    let mut ports: Vec<PortRow> = by_port
        .into_iter()
        .map(|(port, s)| PortRow { port, ips: s.len() as u64 })
        .collect();
    ports.sort_by(|a, b| b.ips.cmp(&a.ips).then(a.port.cmp(&b.port)));
    PortExposure {
        exposed_ips: ips.len() as u64,
        ports,
    }
}

impl PortExposure {
    pub fn render_text(&self, top: usize) -> String {
        let rows: Vec<Vec<String>> = self
            .ports
            .iter()
            .take(top)
            .map(|r| vec![r.port.to_string(), grouped(r.ips), pct_or_na(r.ips, self.exposed_ips)])
            .collect();
        format!(
            "exposed ips: {}\n{}",
            grouped(self.exposed_ips),
            text_table(&["Port", "# RESIPs", "% RESIPs"], &rows)
        )
    }

    pub fn render_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .ports
            .iter()
            .map(|r| vec![r.port.to_string(), r.ips.to_string(), self.exposed_ips.to_string()])
            .collect();
        csv(&["port", "ips", "exposed_ips"], &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collect::EntrySource;
    use chrono::Utc;

    fn entry(ip: &str, port: u16) -> DirectResipEntry {
        DirectResipEntry {
            service: "pinyiyun.com".parse().unwrap(),
            ip: ip.parse().unwrap(),
            port,
            proxy_protocol: None,
            credentials: None,
            fetched_at: Utc::now(),
            source: EntrySource::Api,
            subdomain: None,
        }
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(port_exposure_summary(&[]).exposed_ips, 0);
    }

    #[test]
    fn one_ip_two_ports() {
        let s = port_exposure_summary(&[entry("10.0.0.1", 62456), entry("10.0.0.1", 3000), entry("10.0.0.1", 3000)]);
        assert_eq!(s.exposed_ips, 1);
        assert_eq!(s.ports, vec![PortRow { port: 3000, ips: 1 }, PortRow { port: 62456, ips: 1 }]);
        assert!(s.render_text(5).starts_with("exposed ips: 1\nPort\t"));
    }
}
