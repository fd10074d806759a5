use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, Ipv4Addr};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::csv;
use crate::types::Cidr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensePrefix {
    pub cidr: Cidr,
    pub members: u64,
    pub fill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub prefix_len: u8,
    pub min_fill: f64,
    pub prefixes: Vec<DensePrefix>,
    /// IPv6 inputs, not analysed.
    pub ipv6_excluded: usize,
}

/// Distinct IPv4 members per prefix, keeping prefixes with `fill >= min_fill`,
/// densest first.
pub fn prefix_density(ips: impl IntoIterator<Item = IpAddr>, prefix_len: u8, min_fill: f64) -> Result<DensityReport> {
    if ![8, 16, 24].contains(&prefix_len) {
        return Err(Error::Config(format!("prefix length {prefix_len} not in {{8, 16, 24}}")));
    }
    let mut v4: BTreeSet<Ipv4Addr> = BTreeSet::new();
    let mut ipv6_excluded = 0;
    for ip in ips {
        match ip {
            IpAddr::V4(a) => {
                v4.insert(a);
            }
            IpAddr::V6(_) => ipv6_excluded += 1,
        }
    }
    if ipv6_excluded > 0 {
        log::warn!("prefix density: {ipv6_excluded} IPv6 addresses excluded");
    }
    let shift = 32 - u32::from(prefix_len);
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for a in v4 {
        *counts.entry(u32::from(a) >> shift).or_default() += 1;
    }
    let size = (1u64 << shift) as f64;
    let mut prefixes: Vec<DensePrefix> = counts
        .into_iter()
        .map(|(net, members)| DensePrefix {
            cidr: Cidr::new(IpAddr::V4(Ipv4Addr::from(net << shift)), prefix_len).expect("aligned base"),
            members,
            fill: members as f64 / size,
        })
        .filter(|p| p.fill >= min_fill)
        .collect();
    prefixes.sort_by(|a, b| b.members.cmp(&a.members).then_with(|| a.cidr.base().cmp(&b.cidr.base())));
    Ok(DensityReport {
        prefix_len,
        min_fill,
        prefixes,
        ipv6_excluded,
    })
}

impl DensityReport {
    pub fn render_csv(&self) -> String {
        let size = 1u64 << (32 - u32::from(self.prefix_len));
        let rows: Vec<Vec<String>> = self
            .prefixes
            .iter()
            .map(|p| vec![p.cidr.to_string(), p.members.to_string(), size.to_string(), format!("{:.6}", p.fill)])
            .collect();
        csv(&["prefix", "members", "size", "fill"], &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_slash24() {
        let ips = (0..=255u8).map(|i| IpAddr::V4(Ipv4Addr::new(10, 1, 2, i)));
        let r = prefix_density(ips, 24, 1.0).unwrap();
        assert_eq!(r.prefixes.len(), 1);
        assert_eq!(r.prefixes[0].fill, 1.0);
        assert_eq!(r.prefixes[0].cidr.to_string(), "10.1.2.0/24");
    }

    #[test]
    fn threshold_and_v6() {
        let mut ips: Vec<IpAddr> = (0..100u8).map(|i| IpAddr::V4(Ipv4Addr::new(10, 1, 2, i))).collect();
        ips.push("10.9.9.9".parse().unwrap());
        ips.push("::1".parse().unwrap());
        let r = prefix_density(ips, 24, 0.3).unwrap();
        assert_eq!(r.prefixes.len(), 1);
        assert_eq!(r.ipv6_excluded, 1);
        assert!(prefix_density(Vec::new(), 20, 0.0).is_err());
    }
}
