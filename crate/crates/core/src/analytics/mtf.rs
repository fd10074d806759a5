use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::net::IpAddr;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::{fixed1, grouped, pct_or_na, text_table};

pub const OTHER_CATEGORY: &str = "other";

pub const DEFAULT_CATEGORIES: [&str; 6] = [
    "CryptoMining",
    "Remote control Trojan",
    "Worm",
    "Botnet",
    "Rogue promotion",
    "Trojan",
];

/// Closed category vocabulary; anything else maps to [`OTHER_CATEGORY`].
#[derive(Debug, Clone)]
pub struct CategoryVocab {
    by_lower: HashMap<String, String>,
}

impl Default for CategoryVocab {
    fn default() -> Self {
        CategoryVocab::new(DEFAULT_CATEGORIES)
    }
}

impl CategoryVocab {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        CategoryVocab {
            by_lower: names
                .into_iter()
                .map(|n| (n.as_ref().to_lowercase(), n.as_ref().to_string()))
                .collect(),
        }
    }

    pub fn canonical(&self, category: &str) -> String {
        self.by_lower
            .get(&category.trim().to_lowercase())
            .cloned()
            .unwrap_or_else(|| OTHER_CATEGORY.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MtfRecord {
    pub src_ip: IpAddr,
    pub category: String,
    pub subcategory: String,
    pub timestamp: DateTime<Utc>,
    pub flow_count: u64,
}

pub const MTF_HEADER: &str = "# src_ip\tcategory\tsubcategory\ttimestamp\tflow_count\n";

impl MtfRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.src_ip,
            self.category,
            self.subcategory,
            self.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            self.flow_count
        )
    }

    /// `None` on a malformed line or a zero flow count.
    pub fn parse_line(line: &str) -> Option<MtfRecord> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return None;
        }
        let flow_count: u64 = f[4].trim().parse().ok().filter(|&n| n > 0)?;
        Some(MtfRecord {
            src_ip: f[0].trim().parse().ok()?,
            category: f[1].trim().to_string(),
            subcategory: f[2].trim().to_string(),
            timestamp: DateTime::parse_from_rfc3339(f[3].trim()).ok()?.with_timezone(&Utc),
            flow_count,
        })
    }
}

/// Reads a feed, skipping `#` lines; returns the records and the malformed count.
pub fn read_mtf(path: &Path) -> Result<(Vec<MtfRecord>, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let mut out = Vec::new();
    let mut bad = 0;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::path_io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match MtfRecord::parse_line(&line) {
            Some(r) => out.push(r),
            None => bad += 1,
        }
    }
    Ok((out, bad))
}

pub fn render_mtf(records: &[MtfRecord]) -> String {
    let mut s = String::from(MTF_HEADER);
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub const THRESHOLDS: [u64; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    /// Empty for category-level rows.
    pub subcategory: String,
    pub flows: u64,
    pub ips: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MtfSummary {
    pub set_size: u64,
    /// Ips with total flows at or above each of [`THRESHOLDS`].
    pub at_least: [u64; 3],
    /// Flows attributed to set members.
    pub total_flows: u64,
    pub outside_records: u64,
    pub outside_flows: u64,
    /// Flow count descending, then name.
    pub categories: Vec<CategoryRow>,
    pub subcategories: Vec<CategoryRow>,
}

impl MtfSummary {
    pub fn fraction(&self, threshold_index: usize) -> Option<f64> {
        (self.set_size > 0).then(|| self.at_least[threshold_index] as f64 / self.set_size as f64)
    }
}

fn rows(map: BTreeMap<(String, String), (u64, HashSet<IpAddr>)>) -> Vec<CategoryRow> {
    let mut out: Vec<CategoryRow> = map
        .into_iter()
        .map(|((category, subcategory), (flows, ips))| CategoryRow {
            category,
            subcategory,
            flows,
            ips: ips.len() as u64,
        })
        .collect();
    out.sort_by(|a, b| {
        b.flows
            .cmp(&a.flows)
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.subcategory.cmp(&b.subcategory))
    });
    out
}

/// Per-ip flow totals against a RESIP set. Records for ips outside the set are
/// counted apart and excluded from every fraction.
pub fn mtf_summary(records: &[MtfRecord], set: &HashSet<IpAddr>, vocab: &CategoryVocab) -> MtfSummary {
    let mut per_ip: HashMap<IpAddr, u64> = HashMap::new();
    let mut cats: BTreeMap<(String, String), (u64, HashSet<IpAddr>)> = BTreeMap::new();
    let mut subs: BTreeMap<(String, String), (u64, HashSet<IpAddr>)> = BTreeMap::new();
    let (mut outside_records, mut outside_flows, mut total_flows) = (0, 0, 0);
    for r in records {
        if !set.contains(&r.src_ip) {
            outside_records += 1;
            outside_flows += r.flow_count;
            continue;
        }
        total_flows += r.flow_count;
        *per_ip.entry(r.src_ip).or_default() += r.flow_count;
        let cat = vocab.canonical(&r.category);
        let c = cats.entry((cat.clone(), String::new())).or_default();
        c.0 += r.flow_count;
        c.1.insert(r.src_ip);
        let s = subs.entry((cat, r.subcategory.clone())).or_default();
        s.0 += r.flow_count;
        s.1.insert(r.src_ip);
    }
    let mut at_least = [0; 3];
    for total in per_ip.values() {
        for (i, t) in THRESHOLDS.iter().enumerate() {
            if total >= t {
                at_least[i] += 1;
            }
        }
    }
    MtfSummary {
        set_size: set.len() as u64,
        at_least,
        total_flows,
        outside_records,
        outside_flows,
        categories: rows(cats),
        subcategories: rows(subs),
    }
}

pub const THRESHOLD_HEADER: [&str; 4] = ["RESIP Group", "w MTFs", "≥ 5 MTFs", "≥ 10 MTFs"];

pub fn render_threshold_table(groups: &[(&str, &MtfSummary)]) -> String {
    let body: Vec<Vec<String>> = groups
        .iter()
        .map(|(name, s)| {
            std::iter::once(name.to_string())
                .chain(s.at_least.iter().map(|&n| pct_or_na(n, s.set_size)))
                .collect()
        })
        .collect();
    text_table(&THRESHOLD_HEADER, &body)
}

pub const CATEGORY_HEADER: [&str; 5] = ["Malicious Category", "MTFs", "% MTFs", "RESIPs", "% RESIPs"];

pub fn render_category_table(s: &MtfSummary, top: usize) -> String {
    let body: Vec<Vec<String>> = s
        .categories
        .iter()
        .take(top)
        .map(|r| {
            vec![
                r.category.clone(),
                fixed1(r.flows as f64),
                pct_or_na(r.flows, s.total_flows),
                grouped(r.ips),
                pct_or_na(r.ips, s.set_size),
            ]
        })
        .collect();
    text_table(&CATEGORY_HEADER, &body)
}

pub const SUBCATEGORY_HEADER: [&str; 4] = ["Category", "Subcategory", "% MTFs", "% RESIPs"];

/// Top subcategories of the given categories, the category named once per block.
pub fn render_subcategory_table(s: &MtfSummary, categories: &[&str], top: usize) -> String {
    let mut body = Vec::new();
    for cat in categories {
        let picked = s.subcategories.iter().filter(|r| r.category == *cat).take(top);
        for (i, r) in picked.enumerate() {
            body.push(vec![
                if i == 0 { r.category.clone() } else { String::new() },
                r.subcategory.clone(),
                pct_or_na(r.flows, s.total_flows),
                pct_or_na(r.ips, s.set_size),
            ]);
        }
    }
    text_table(&SUBCATEGORY_HEADER, &body)
}

/// CSV with numerators and denominators for each category and subcategory row.
pub fn render_summary_csv(s: &MtfSummary) -> String {
    let body: Vec<Vec<String>> = s
        .categories
        .iter()
        .chain(&s.subcategories)
        .map(|r| {
            vec![
                r.category.clone(),
                r.subcategory.clone(),
                r.flows.to_string(),
                s.total_flows.to_string(),
                r.ips.to_string(),
                s.set_size.to_string(),
            ]
        })
        .collect();
    crate::report::csv(&["category", "subcategory", "flows", "total_flows", "ips", "set_size"], &body)
}

/// Synthetic feed knobs: the fractions of `ips` whose totals reach 1, 5 and 10 flows.
#[derive(Debug, Clone)]
pub struct SyntheticMtfSpec {
    pub seed: u64,
    pub at_least: [f64; 3],
    pub outside_records: usize,
    pub start: DateTime<Utc>,
}

impl Default for SyntheticMtfSpec {
    fn default() -> Self {
        SyntheticMtfSpec {
            seed: 7,
            at_least: [0.8005, 0.6806, 0.5879],
            outside_records: 100,
            start: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).single().expect("valid"),
        }
    }
}

const SUBCATEGORIES: [(&str, &[&str]); 6] = [
    ("CryptoMining", &["MiningPool", "Minerd", "WannaMine"]),
    ("Remote control Trojan", &["Gh0st", "PlugX"]),
    ("Worm", &["Mozi", "Conficker"]),
    ("Botnet", &["Mirai"]),
    ("Rogue promotion", &["Adware"]),
    ("Trojan", &["Generic Trojan", "Zbot", "Farfli"]),
];

/// Feed whose per-ip totals hit the spec's threshold counts exactly
/// (`round(fraction * |ips|)` ips at each level).
pub fn generate_mtf(ips: &[IpAddr], spec: &SyntheticMtfSpec) -> Vec<MtfRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = ips.len() as f64;
    let [c1, c5, c10] = spec.at_least.map(|f| (f * n).round() as usize);
    let mut out = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng, ip: IpAddr, total: u64| {
        let mut left = total;
        while left > 0 {
            let flows = rng.random_range(1..=left.min(8));
            left -= flows;
            let (cat, subs) = SUBCATEGORIES.choose(rng).expect("non-empty");
            out.push(MtfRecord {
                src_ip: ip,
                category: (*cat).to_string(),
                subcategory: (*subs.choose(rng).expect("non-empty")).to_string(),
                timestamp: spec.start + Duration::minutes(rng.random_range(0..525_600)),
                flow_count: flows,
            });
        }
    };
    for (i, ip) in ips.iter().enumerate() {
        let total = if i < c10 {
            rng.random_range(10..=60)
        } else if i < c5 {
            rng.random_range(5..=9)
        } else if i < c1 {
            rng.random_range(1..=4)
        } else {
            0
        };
        emit(&mut rng, *ip, total);
    }
    for k in 0..spec.outside_records {
        let ip = IpAddr::V4(std::net::Ipv4Addr::new(203, 0, 113, (k % 250) as u8 + 1));
        let total = rng.random_range(1..=3);
        emit(&mut rng, ip, total);
    }
    out
}
