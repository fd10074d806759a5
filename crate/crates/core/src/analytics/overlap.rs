use std::collections::HashSet;
use std::hash::Hash;
use std::net::IpAddr;

use serde::Serialize;

use crate::report::{compact_k, csv, pct_cell, text_table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Intersection {
    pub overlap: u64,
    pub size_a: u64,
    pub size_b: u64,
    /// `overlap / |A|`, undefined for an empty A.
    pub rate_a: Option<f64>,
    pub rate_b: Option<f64>,
}

impl Intersection {
    pub fn from_counts(overlap: u64, size_a: u64, size_b: u64) -> Self {
        let rate = |n: u64| (n > 0).then(|| overlap as f64 / n as f64);
        Intersection {
            overlap,
            size_a,
            size_b,
            rate_a: rate(size_a),
            rate_b: rate(size_b),
        }
    }

    pub fn swapped(&self) -> Self {
        Intersection::from_counts(self.overlap, self.size_b, self.size_a)
    }
}

pub fn intersection_rates<T: Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> Intersection {
    let (small, big) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let overlap = small.iter().filter(|x| big.contains(x)).count() as u64;
    Intersection::from_counts(overlap, a.len() as u64, b.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Ip,
    Slash16,
    Slash8,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Ip, Granularity::Slash16, Granularity::Slash8];

    pub fn label(self) -> &'static str {
        match self {
            Granularity::Ip => "IPs",
            Granularity::Slash16 => "/16 IPv4",
            Granularity::Slash8 => "/8 IPv4",
        }
    }
}

/// An ip set with its derived IPv4 /16 and /8 sets.
#[derive(Debug, Clone, Default)]
pub struct IpDataset {
    pub name: String,
    pub ips: HashSet<IpAddr>,
    pub slash16: HashSet<u32>,
    pub slash8: HashSet<u32>,
}

impl IpDataset {
    pub fn new(name: &str, ips: impl IntoIterator<Item = IpAddr>) -> Self {
        let mut d = IpDataset {
            name: name.to_string(),
            ..Default::default()
        };
        for ip in ips {
            d.insert(ip);
        }
        d
    }

    pub fn insert(&mut self, ip: IpAddr) {
        if let IpAddr::V4(v4) = ip {
            let n = u32::from(v4);
            self.slash16.insert(n >> 16);
            self.slash8.insert(n >> 24);
        }
        self.ips.insert(ip);
    }

    pub fn union<'a>(name: &str, parts: impl IntoIterator<Item = &'a IpDataset>) -> Self {
        let mut d = IpDataset {
            name: name.to_string(),
            ..Default::default()
        };
        for p in parts {
            d.ips.extend(&p.ips);
            d.slash16.extend(&p.slash16);
            d.slash8.extend(&p.slash8);
        }
        d
    }

    fn at(&self, g: Granularity, other: &IpDataset) -> Intersection {
        match g {
            Granularity::Ip => intersection_rates(&self.ips, &other.ips),
            Granularity::Slash16 => intersection_rates(&self.slash16, &other.slash16),
            Granularity::Slash8 => intersection_rates(&self.slash8, &other.slash8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapCell {
    pub group: String,
    pub prior: String,
    pub granularity: Granularity,
    pub overlap: u64,
    pub prior_size: u64,
    pub ours_size: u64,
}

impl OverlapCell {
    /// `overlap, overlap/prior, overlap/ours`.
    pub fn render(&self) -> String {
        format!(
            "{}, {}, {}",
            compact_k(self.overlap),
            pct_cell(self.overlap, self.prior_size),
            pct_cell(self.overlap, self.ours_size)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    pub groups: Vec<String>,
    pub priors: Vec<String>,
    /// Row-major: group, then prior, then granularity.
    pub cells: Vec<OverlapCell>,
}

/// Every (group, prior, granularity) cell, plus an `Overall` row over the union of groups.
pub fn dataset_overlap_matrix(groups: &[IpDataset], priors: &[IpDataset]) -> OverlapMatrix {
    let overall = IpDataset::union("Overall", groups);
    let rows: Vec<&IpDataset> = groups.iter().chain(std::iter::once(&overall)).collect();
    let mut cells = Vec::new();
    for g in &rows {
        for p in priors {
            for gran in Granularity::ALL {
                let i = g.at(gran, p);
                cells.push(OverlapCell {
                    group: g.name.clone(),
                    prior: p.name.clone(),
                    granularity: gran,
                    overlap: i.overlap,
                    prior_size: i.size_b,
                    ours_size: i.size_a,
                });
            }
        }
    }
    OverlapMatrix {
        groups: rows.iter().map(|g| g.name.clone()).collect(),
        priors: priors.iter().map(|p| p.name.clone()).collect(),
        cells,
    }
}

impl OverlapMatrix {
    /// Two header rows: prior names over their three granularity columns, then the
    /// granularity labels.
    pub fn render_text(&self) -> String {
        let mut top = vec!["Group".to_string()];
        let mut sub = vec![String::new()];
        for p in &self.priors {
            for (i, g) in Granularity::ALL.iter().enumerate() {
                top.push(if i == 0 { p.clone() } else { String::new() });
                sub.push(g.label().to_string());
            }
        }
        let mut out = top.join("\t");
        out.push('\n');
        let sub_refs: Vec<&str> = sub.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = self
            .groups
            .iter()
            .map(|g| {
                std::iter::once(g.clone())
                    .chain(self.cells.iter().filter(|c| &c.group == g).map(OverlapCell::render))
                    .collect()
            })
            .collect();
        out.push_str(&text_table(&sub_refs, &rows));
        out
    }

    pub fn render_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.group.clone(),
                    c.prior.clone(),
                    c.granularity.label().to_string(),
                    c.overlap.to_string(),
                    c.prior_size.to_string(),
                    c.ours_size.to_string(),
                ]
            })
            .collect();
        csv(&["group", "prior", "granularity", "overlap", "prior_size", "ours_size"], &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_disjoint() {
        let a: HashSet<u32> = (0..10).collect();
        let b: HashSet<u32> = (10..20).collect();
        let same = intersection_rates(&a, &a);
        assert_eq!((same.overlap, same.rate_a, same.rate_b), (10, Some(1.0), Some(1.0)));
        let none = intersection_rates(&a, &b);
        assert_eq!((none.overlap, none.rate_a, none.rate_b), (0, Some(0.0), Some(0.0)));
        let empty = intersection_rates(&a, &HashSet::new());
        assert_eq!((empty.overlap, empty.rate_b), (0, None));
    }

    #[test]
    fn paper_rates_from_counts() {
        let i = Intersection::from_counts(1_113_872, 1_277_389, 2_983_867);
        assert_eq!(format!("{:.4}", i.rate_a.unwrap()), "0.8720");
        assert_eq!(format!("{:.4}", i.rate_b.unwrap()), "0.3733");
    }

    #[test]
    fn cell_convention() {
        let c = OverlapCell {
            group: "BC-RESIPs".into(),
            prior: "RESIP-2017".into(),
            granularity: Granularity::Ip,
            overlap: 118_400,
            prior_size: 6_430_000,
            ours_size: 8_176_522,
        };
        assert_eq!(c.render(), "118K, 1.84%, 1.45%");
    }

    #[test]
    fn hand_computed_matrix() {
        let ip = |s: &str| -> IpAddr { s.parse().unwrap() };
        let bc = IpDataset::new("BC", [ip("1.2.3.4"), ip("1.2.9.9"), ip("5.6.7.8")]);
        let dp = IpDataset::new("DP", [ip("1.2.3.4"), ip("9.9.9.9")]);
        let prior = IpDataset::new("P", [ip("1.2.3.4"), ip("5.6.0.1"), ip("7.7.7.7"), ip("8.8.8.8")]);
        let m = dataset_overlap_matrix(&[bc, dp], std::slice::from_ref(&prior));
        let cells: Vec<String> = m.cells.iter().map(OverlapCell::render).collect();
        assert_eq!(
            cells,
            [
                "1, 25%, 33.33%",
                "2, 50%, 100%",
                "2, 50%, 100%",
                "1, 25%, 50%",
                "1, 25%, 50%",
                "1, 25%, 50%",
                "1, 25%, 25%",
                "2, 50%, 66.67%",
                "2, 50%, 66.67%",
            ]
        );
        let text = m.render_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Group\tP\t\t");
        assert_eq!(lines[1], "\tIPs\t/16 IPv4\t/8 IPv4");
        assert!(lines[4].starts_with("Overall\t1, 25%, 25%"));
    }

    proptest! {
        #[test]
        fn swapping_swaps_rates(a in prop::collection::hash_set(0u16..500, 0..200), b in prop::collection::hash_set(0u16..500, 0..200)) {
            let ab = intersection_rates(&a, &b);
            let ba = intersection_rates(&b, &a);
            prop_assert_eq!(ab.overlap, ba.overlap);
            prop_assert_eq!(ab.rate_a, ba.rate_b);
            prop_assert_eq!(ab.rate_b, ba.rate_a);
            prop_assert_eq!(ab.swapped(), ba);
        }
    }
}
