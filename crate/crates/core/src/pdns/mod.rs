//! Passive-DNS analytics: service matching, DP-RESIP extraction, lifetimes,
//! daily-active series, usage volume and crest-trough evolution.

mod report;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::PatternSet;
use crate::types::{merge_intervals, DateDay, Interval, ServiceId};

pub use report::{
    lifetime_shares, render_daily_csv, render_lifetime_cdf_csv, render_usage_csv, render_usage_table,
    LifetimeShares,
};
pub use synth::{generate_pdns, SyntheticPdnsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RrType {
    A,
    #[allow(clippy::upper_case_acronyms)]
    AAAA,
}

impl fmt::Display for RrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RrType::A => "A",
            RrType::AAAA => "AAAA",
        })
    }
}

impl FromStr for RrType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(RrType::A),
            "AAAA" => Ok(RrType::AAAA),
            other => Err(Error::Config(format!("unsupported rrtype `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PdnsRecord {
    pub fqdn: String,
    pub rrtype: RrType,
    pub rdata: IpAddr,
    pub first_seen: DateDay,
    pub last_seen: DateDay,
    pub query_count: u64,
}

pub const PDNS_HEADER: &str = "# fqdn\trrtype\trdata\tfirst_seen\tlast_seen\tquery_count\n";

impl PdnsRecord {
    pub fn new(
        fqdn: &str,
        rrtype: RrType,
        rdata: IpAddr,
        first_seen: DateDay,
        last_seen: DateDay,
        query_count: u64,
    ) -> Result<Self> {
        Interval::new(first_seen, last_seen)?;
        if (rrtype == RrType::A) != rdata.is_ipv4() {
            return Err(Error::Config(format!("{rrtype} record with rdata {rdata}")));
        }
        let fqdn = fqdn.trim().trim_end_matches('.').to_ascii_lowercase();
        if fqdn.is_empty() {
            return Err(Error::InvalidHostname(fqdn));
        }
        Ok(PdnsRecord {
            fqdn,
            rrtype,
            rdata,
            first_seen,
            last_seen,
            query_count,
        })
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.first_seen, self.last_seen).expect("validated on construction")
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            self.fqdn, self.rrtype, self.rdata, self.first_seen, self.last_seen, self.query_count
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if f.len() != 6 {
            return Err(Error::Config(format!("expected 6 fields, got {}", f.len())));
        }
        let ip: IpAddr = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rdata `{}`", f[2])))?;
        let count: u64 = f[5]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad query count `{}`", f[5])))?;
        PdnsRecord::new(f[0], f[1].parse()?, ip, f[3].parse()?, f[4].parse()?, count)
    }
}

/// Streams records from `reader`, calling `f` for each; returns the malformed line count.
pub fn read_pdns<R: BufRead>(reader: R, mut f: impl FnMut(PdnsRecord)) -> Result<usize> {
    let mut bad = 0;
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        match PdnsRecord::parse_line(&line) {
            Ok(r) => f(r),
            Err(e) => {
                bad += 1;
                log::debug!("skipping pdns line: {e}");
            }
        }
    }
    Ok(bad)
}

pub fn read_pdns_file(path: &Path) -> Result<(Vec<PdnsRecord>, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let mut out = Vec::new();
    let bad = read_pdns(std::io::BufReader::new(file), |r| out.push(r))?;
    Ok((out, bad))
}

pub fn render_pdns(records: &[PdnsRecord]) -> String {
    let mut s = String::from(PDNS_HEADER);
    for r in records {
        s.push_str(&r.to_line());
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedRecord {
    pub service: ServiceId,
    pub record: PdnsRecord,
}

/// Records claimed by more than one service.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub records: u64,
    pub by_services: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub tagged: Vec<TaggedRecord>,
    pub dropped: u64,
    pub conflicts: ConflictReport,
}

/// Tags each record with every service whose pattern its fqdn satisfies. A record
/// claimed by several services is emitted once per service and reported.
pub fn match_service_domains(records: impl IntoIterator<Item = PdnsRecord>, patterns: &PatternSet) -> MatchResult {
    let mut memo: HashMap<String, Vec<ServiceId>> = HashMap::new();
    let mut out = MatchResult::default();
    for r in records {
        let services = memo
            .entry(r.fqdn.clone())
            .or_insert_with(|| patterns.services_for(&r.fqdn).into_iter().cloned().collect());
        match services.len() {
            0 => out.dropped += 1,
            n => {
                if n > 1 {
                    out.conflicts.records += 1;
                    let key = services.iter().map(ServiceId::as_str).collect::<Vec<_>>().join("+");
                    *out.conflicts.by_services.entry(key).or_default() += 1;
                }
                for s in services.iter() {
                    out.tagged.push(TaggedRecord {
                        service: s.clone(),
                        record: r.clone(),
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpResipSet {
    pub service: ServiceId,
    pub ips: BTreeSet<IpAddr>,
    pub fqdns: BTreeSet<String>,
}

impl DpResipSet {
    pub fn fqdn_count(&self) -> usize {
        self.fqdns.len()
    }
}

/// Distinct rdata and fqdns per service, ordered by service.
pub fn extract_dp_resips(tagged: &[TaggedRecord]) -> Vec<DpResipSet> {
    let mut by: BTreeMap<&ServiceId, (BTreeSet<IpAddr>, BTreeSet<String>)> = BTreeMap::new();
    for t in tagged {
        let e = by.entry(&t.service).or_default();
        e.0.insert(t.record.rdata);
        if !e.1.contains(&t.record.fqdn) {
            e.1.insert(t.record.fqdn.clone());
        }
    }
    by.into_iter()
        .map(|(s, (ips, fqdns))| DpResipSet {
            service: s.clone(),
            ips,
            fqdns,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResipLifetime {
    pub ip: IpAddr,
    pub service: ServiceId,
    pub intervals: Vec<Interval>,
    pub lifetime_days: u64,
}

/// One lifetime per (service, ip), ordered by service then ip.
pub fn compute_lifetimes(tagged: &[TaggedRecord]) -> Vec<ResipLifetime> {
    let mut by: BTreeMap<(&ServiceId, IpAddr), Vec<Interval>> = BTreeMap::new();
    for t in tagged {
        by.entry((&t.service, t.record.rdata)).or_default().push(t.record.interval());
    }
    by.into_iter()
        .map(|((service, ip), ivs)| {
            let intervals = merge_intervals(&ivs);
            let lifetime_days = intervals.iter().map(Interval::day_count).sum();
            ResipLifetime {
                ip,
                service: service.clone(),
                intervals,
                lifetime_days,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyActiveSeries {
    pub service: ServiceId,
    /// First day of `counts`; `None` for an empty series.
    pub start: Option<DateDay>,
    pub counts: Vec<u64>,
}

impl DailyActiveSeries {
    pub fn days(&self) -> impl Iterator<Item = (DateDay, u64)> + '_ {
        let start = self.start;
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, c)| (start.expect("non-empty series has a start").add_days(i as i64), *c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Distinct active ips per day over [min first_seen, max last_seen]. An ip is active
/// on every day its records cover.
pub fn daily_active_series(tagged: &[TaggedRecord], service: &ServiceId) -> DailyActiveSeries {
    let mine: Vec<TaggedRecord> = tagged.iter().filter(|t| &t.service == service).cloned().collect();
    let mut series = DailyActiveSeries {
        service: service.clone(),
        start: None,
        counts: Vec::new(),
    };
    let (Some(start), Some(end)) = (
        mine.iter().map(|t| t.record.first_seen).min(),
        mine.iter().map(|t| t.record.last_seen).max(),
    ) else {
        return series;
    };
    let len = end.days_since(start) as usize + 1;
    let mut diff = vec![0i64; len + 1];
    for lt in compute_lifetimes(&mine) {
        for iv in lt.intervals {
            diff[iv.first().days_since(start) as usize] += 1;
            diff[iv.last().days_since(start) as usize + 1] -= 1;
        }
    }
    let mut running = 0i64;
    series.counts = diff[..len]
        .iter()
        .map(|d| {
            running += d;
            running as u64
        })
        .collect();
    series.start = Some(start);
    series
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageSummary {
    pub service: ServiceId,
    pub resip_count: usize,
    pub fqdn_count: usize,
    /// Whole days from the first to the last matched observation, inclusive.
    pub lifetime_days: u64,
    pub total_queries: u64,
    /// `total_queries / lifetime_days`; a lower bound on relay usage.
    pub daily_usage: f64,
}

pub fn usage_volume(tagged: &[TaggedRecord], service: &ServiceId) -> Option<UsageSummary> {
    let mine: Vec<&TaggedRecord> = tagged.iter().filter(|t| &t.service == service).collect();
    let first = mine.iter().map(|t| t.record.first_seen).min()?;
    let last = mine.iter().map(|t| t.record.last_seen).max()?;
    let ips: BTreeSet<IpAddr> = mine.iter().map(|t| t.record.rdata).collect();
    let fqdns: BTreeSet<&str> = mine.iter().map(|t| t.record.fqdn.as_str()).collect();
    let total_queries: u64 = mine.iter().map(|t| t.record.query_count).sum();
    let lifetime_days = last.days_since(first) as u64 + 1;
    Some(UsageSummary {
        service: service.clone(),
        resip_count: ips.len(),
        fqdn_count: fqdns.len(),
        lifetime_days,
        total_queries,
        daily_usage: total_queries as f64 / lifetime_days as f64,
    })
}

/// Services present in a tagged stream, in order.
pub fn services_in(tagged: &[TaggedRecord]) -> Vec<ServiceId> {
    let set: BTreeSet<&ServiceId> = tagged.iter().map(|t| &t.service).collect();
    set.into_iter().cloned().collect()
}

/// Centered moving average; windows are clipped at the series edges and averaged
/// over the points they contain. Even windows lean one day forward.
pub fn smooth(counts: &[u64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let left = (w - 1) / 2;
    let right = w / 2;
    let mut prefix = vec![0u128; counts.len() + 1];
    for (i, c) in counts.iter().enumerate() {
        prefix[i + 1] = prefix[i] + u128::from(*c);
    }
    (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(counts.len() - 1);
            (prefix[hi + 1] - prefix[lo]) as f64 / (hi + 1 - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrestTrough {
    pub crest_day: DateDay,
    pub crest_value: f64,
    pub days_to_crest: i64,
    pub trough_day: Option<DateDay>,
    pub crest_to_trough_days: Option<i64>,
}

pub const DEFAULT_WINDOW: usize = 7;
pub const DEFAULT_TROUGH_FRACTION: f64 = 0.05;

/// Crest is the earliest global maximum of the smoothed series; the trough is the
/// first later day whose smoothed value is at most `trough_fraction` of the crest.
pub fn crest_trough_metrics(series: &DailyActiveSeries, window: usize, trough_fraction: f64) -> Option<CrestTrough> {
    let start = series.start?;
    let s = smooth(&series.counts, window);
    let mut crest = 0;
    for (i, v) in s.iter().enumerate() {
        if *v > s[crest] {
            crest = i;
        }
    }
    let crest_value = s[crest];
    let trough = if crest_value > 0.0 {
        let bound = trough_fraction * crest_value;
        s.iter().enumerate().skip(crest + 1).find(|(_, v)| **v <= bound).map(|(i, _)| i)
    } else {
        None
    };
    Some(CrestTrough {
        crest_day: start.add_days(crest as i64),
        crest_value,
        days_to_crest: crest as i64,
        trough_day: trough.map(|t| start.add_days(t as i64)),
        crest_to_trough_days: trough.map(|t| (t - crest) as i64),
    })
}
