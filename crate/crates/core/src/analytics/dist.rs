use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;

use serde::Serialize;

use super::GeoRecord;
use crate::report::{compact, csv, grouped, pct_or_na, text_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Country,
    Province,
    City,
    Isp,
    Asn,
    Slash8,
    Slash16,
}

impl Dimension {
    pub const ALL: [Dimension; 7] = [
        Dimension::Country,
        Dimension::Province,
        Dimension::City,
        Dimension::Isp,
        Dimension::Asn,
        Dimension::Slash8,
        Dimension::Slash16,
    ];

    /// Group key of one address, if known. Prefix dimensions are IPv4 only.
    pub fn key(self, ip: IpAddr, g: &GeoRecord) -> Option<String> {
        let v4 = match ip {
            IpAddr::V4(v4) => Some(v4.octets()),
            IpAddr::V6(_) => None,
        };
        match self {
            Dimension::Country => g.country.clone(),
            // regions and cities are only unique within their parent
            Dimension::Province => Some(format!("{}/{}", g.country.as_ref()?, g.region.as_ref()?)),
            Dimension::City => Some(format!(
                "{}/{}/{}",
                g.country.as_ref()?,
                g.region.as_deref().unwrap_or("-"),
                g.city.as_ref()?
            )),
            Dimension::Isp => g.isp.clone(),
            Dimension::Asn => g.asn.map(|a| format!("AS{a}")),
            Dimension::Slash8 => v4.map(|o| format!("{}.0.0.0/8", o[0])),
            Dimension::Slash16 => v4.map(|o| format!("{}.{}.0.0/16", o[0], o[1])),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Country => "country",
            Dimension::Province => "province",
            Dimension::City => "city",
            Dimension::Isp => "isp",
            Dimension::Asn => "asn",
            Dimension::Slash8 => "slash8",
            Dimension::Slash16 => "slash16",
        })
    }
}

impl std::str::FromStr for Dimension {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown dimension `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedGroup {
    pub key: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DimensionTable {
    pub dimension: Dimension,
    /// Every ip in the input; the percentage denominator.
    pub total: u64,
    /// Ips with no key in this dimension.
    pub unassigned: u64,
    pub distinct_groups: usize,
    /// All groups, count descending then key ascending.
    pub ranked: Vec<RankedGroup>,
}

/// Distinct ip counts per group for each requested dimension.
pub fn distribution_report(enriched: &BTreeMap<IpAddr, GeoRecord>, dims: &[Dimension]) -> Vec<DimensionTable> {
    dims.iter()
        .map(|&dim| {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            let mut unassigned = 0;
            for (ip, g) in enriched {
                match dim.key(*ip, g) {
                    Some(k) => *counts.entry(k).or_default() += 1,
                    None => unassigned += 1,
                }
            }
            let mut ranked: Vec<RankedGroup> = counts.into_iter().map(|(key, count)| RankedGroup { key, count }).collect();
            ranked.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
            DimensionTable {
                dimension: dim,
                total: enriched.len() as u64,
                unassigned,
                distinct_groups: ranked.len(),
                ranked,
            }
        })
        .collect()
}

impl DimensionTable {
    /// Top-N table: `Entity`, `# RESIPs`, `% RESIPs`.
    pub fn render_top(&self, n: usize) -> String {
        let rows: Vec<Vec<String>> = self
            .ranked
            .iter()
            .take(n)
            .map(|g| vec![g.key.clone(), grouped(g.count), pct_or_na(g.count, self.total)])
            .collect();
        text_table(&["Entity", "# RESIPs", "% RESIPs"], &rows)
    }

    /// Numerator and denominator beside every percentage.
    pub fn render_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .ranked
            .iter()
            .map(|g| {
                vec![
                    g.key.clone(),
                    g.count.to_string(),
                    self.total.to_string(),
                    format!("{:.4}", 100.0 * g.count as f64 / self.total.max(1) as f64),
                ]
            })
            .collect();
        csv(&[&self.dimension.to_string(), "ips", "total", "percent"], &rows)
    }

    /// Heatmap-ready `(region, count)` rows.
    pub fn render_heatmap_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self.ranked.iter().map(|g| vec![g.key.clone(), g.count.to_string()]).collect();
        csv(&["region", "count"], &rows)
    }
}

/// One row of the per-group summary table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub ips: u64,
    pub slash16: u64,
    pub slash8: u64,
    pub asns: u64,
    /// `None` renders as N/A, e.g. for a group already restricted to one country.
    pub countries: Option<u64>,
    pub isps: u64,
}

impl GroupSummary {
    pub fn from_enriched(group: &str, enriched: &BTreeMap<IpAddr, GeoRecord>, country_na: bool) -> Self {
        let distinct = |d: Dimension| -> u64 {
            let set: BTreeSet<String> = enriched.iter().filter_map(|(ip, g)| d.key(*ip, g)).collect();
            set.len() as u64
        };
        GroupSummary {
            group: group.to_string(),
            ips: enriched.len() as u64,
            slash16: distinct(Dimension::Slash16),
            slash8: distinct(Dimension::Slash8),
            asns: distinct(Dimension::Asn),
            countries: (!country_na).then(|| distinct(Dimension::Country)),
            isps: distinct(Dimension::Isp),
        }
    }
}

pub const GROUP_SUMMARY_HEADER: [&str; 7] = ["Group", "IPs", "/16 IPv4", "/8 IPv4", "AS", "Countries", "ISPs"];

pub fn render_group_summary(rows: &[GroupSummary]) -> String {
    let c = |n: u64| compact(n as f64);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.group.clone(),
                c(r.ips),
                c(r.slash16),
                c(r.slash8),
                c(r.asns),
                r.countries.map_or_else(|| "N/A".to_string(), c),
                c(r.isps),
            ]
        })
        .collect();
    text_table(&GROUP_SUMMARY_HEADER, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(country: &str, region: &str, isp: &str, asn: u32) -> GeoRecord {
        GeoRecord {
            country: Some(country.into()),
            region: Some(region.into()),
            city: Some("c".into()),
            asn: Some(asn),
            isp: Some(isp.into()),
            ..Default::default()
        }
    }

    #[test]
    fn single_ip_one_group_each() {
        let m = BTreeMap::from([("1.2.3.4".parse().unwrap(), geo("CN", "Zhejiang", "x", 1))]);
        for t in distribution_report(&m, &Dimension::ALL) {
            assert_eq!(t.distinct_groups, 1, "{}", t.dimension);
            assert!(t.render_top(5).contains("100.00%"));
        }
    }

    #[test]
    fn unknowns_and_v6_unassigned() {
        let m = BTreeMap::from([
            ("1.2.3.4".parse().unwrap(), geo("CN", "Zhejiang", "x", 1)),
            ("2001:db8::1".parse().unwrap(), GeoRecord::unknown()),
        ]);
        let r = distribution_report(&m, &[Dimension::Country, Dimension::Slash8]);
        assert_eq!((r[0].unassigned, r[1].unassigned), (1, 1));
        assert_eq!(r[1].ranked[0].key, "1.0.0.0/8");
        assert!(r[0].render_top(3).contains("50.00%"));
    }

    #[test]
    fn summary_layout() {
        let rows = [
            GroupSummary {
                group: "DP".into(),
                ips: 1_470_000,
                slash16: 2_300,
                slash8: 110,
                asns: 149,
                countries: Some(31),
                isps: 671,
            },
            GroupSummary {
                group: "China".into(),
                ips: 4_660_000,
                slash16: 3_200,
                slash8: 122,
                asns: 319,
                countries: None,
                isps: 1_100,
            },
        ];
        let t = render_group_summary(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Group\tIPs\t/16 IPv4\t/8 IPv4\tAS\tCountries\tISPs");
        assert_eq!(lines[1], "DP\t1.47M\t2.3K\t110\t149\t31\t671");
        assert_eq!(lines[2], "China\t4.66M\t3.2K\t122\t319\tN/A\t1.1K");
    }
}
