//! Shared value types: service ids, calendar days, day intervals and CIDR blocks.

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use ipnet::IpNet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Key of one proxy service. One website is one service unless configured otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ServiceId(String);

impl ServiceId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let trimmed = id.trim();
        if trimmed.is_empty() || trimmed.contains(['\t', '\n']) {
            return Err(Error::Config(format!("invalid service id `{id}`")));
        }
        Ok(ServiceId(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ServiceId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        ServiceId::new(s)
    }
}

impl From<ServiceId> for String {
    fn from(s: ServiceId) -> String {
        s.0
    }
}

impl FromStr for ServiceId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ServiceId::new(s)
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A UTC calendar day. Sub-day timestamps are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DateDay(NaiveDate);

impl DateDay {
    pub fn new(date: NaiveDate) -> Self {
        DateDay(date)
    }

    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(DateDay)
    }

    pub fn from_timestamp(ts: &DateTime<Utc>) -> Self {
        DateDay(ts.date_naive())
    }

    pub fn date(self) -> NaiveDate {
        self.0
    }

    /// Signed whole-day difference `self - other`.
    pub fn days_since(self, other: DateDay) -> i64 {
        (self.0 - other.0).num_days()
    }

    pub fn add_days(self, days: i64) -> Self {
        DateDay(self.0 + chrono::Duration::days(days))
    }

    pub fn succ(self) -> Self {
        self.add_days(1)
    }

    /// Days since 1970-01-01, handy as a dense index.
    pub fn ordinal(self) -> i64 {
        i64::from(self.0.num_days_from_ce()) - 719_163
    }
}

impl FromStr for DateDay {
    type Err = Error;
    /// Accepts `YYYY-MM-DD` or any RFC 3339 timestamp (truncated to its UTC day).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(DateDay(d));
        }
        DateTime::parse_from_rfc3339(s)
            .map(|ts| DateDay(ts.with_timezone(&Utc).date_naive()))
            .map_err(|_| Error::Config(format!("invalid date `{s}`")))
    }
}

impl fmt::Display for DateDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

/// Closed range of days, `first <= last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    first: DateDay,
    last: DateDay,
}

impl Interval {
    pub fn new(first: DateDay, last: DateDay) -> Result<Self> {
        if first > last {
            return Err(Error::InvalidInterval {
                first: first.to_string(),
                last: last.to_string(),
            });
        }
        Ok(Interval { first, last })
    }

    pub fn single(day: DateDay) -> Self {
        Interval {
            first: day,
            last: day,
        }
    }

    pub fn first(&self) -> DateDay {
        self.first
    }

    pub fn last(&self) -> DateDay {
        self.last
    }

    pub fn day_count(&self) -> u64 {
        (self.last.days_since(self.first) + 1) as u64
    }

    pub fn contains(&self, day: DateDay) -> bool {
        self.first <= day && day <= self.last
    }

    pub fn days(&self) -> impl Iterator<Item = DateDay> {
        let first = self.first;
        (0..self.day_count() as i64).map(move |i| first.add_days(i))
    }
}

/// Merges intervals into a sorted, pairwise-disjoint list covering the same days.
/// Intervals that overlap or touch (no gap day between them) are fused.
pub fn merge_intervals(intervals: &[Interval]) -> Vec<Interval> {
    let mut sorted = intervals.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(prev) if iv.first <= prev.last.succ() => {
                if iv.last > prev.last {
                    prev.last = iv.last;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

/// Total distinct days covered by a set of intervals.
pub fn covered_days(intervals: &[Interval]) -> u64 {
    merge_intervals(intervals).iter().map(Interval::day_count).sum()
}

/// A network prefix whose host bits are all zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cidr(IpNet);

impl Cidr {
    pub fn new(base: IpAddr, prefix_len: u8) -> Result<Self> {
        let net = IpNet::new(base, prefix_len)
            .map_err(|e| Error::InvalidCidr(format!("{base}/{prefix_len}"), e.to_string()))?;
        if net.network() != base {
            return Err(Error::InvalidCidr(
                format!("{base}/{prefix_len}"),
                "host bits set".into(),
            ));
        }
        Ok(Cidr(net))
    }

    /// The prefix of length `prefix_len` containing `ip`.
    pub fn containing(ip: IpAddr, prefix_len: u8) -> Result<Self> {
        let net = IpNet::new(ip, prefix_len)
            .map_err(|e| Error::InvalidCidr(format!("{ip}/{prefix_len}"), e.to_string()))?;
        Ok(Cidr(net.trunc()))
    }

    pub fn base(&self) -> IpAddr {
        self.0.network()
    }

    pub fn prefix_len(&self) -> u8 {
        self.0.prefix_len()
    }

    pub fn contains(&self, ip: &IpAddr) -> bool {
        self.0.contains(ip)
    }

    /// Number of addresses in the block (saturating for huge v6 blocks).
    pub fn size(&self) -> u128 {
        let host_bits = u32::from(self.0.max_prefix_len() - self.0.prefix_len());
        1u128.checked_shl(host_bits).unwrap_or(u128::MAX)
    }

    pub fn as_ipnet(&self) -> &IpNet {
        &self.0
    }
}

impl FromStr for Cidr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let net: IpNet = s
            .trim()
            .parse()
            .map_err(|e: ipnet::AddrParseError| Error::InvalidCidr(s.to_string(), e.to_string()))?;
        Cidr::new(net.addr(), net.prefix_len())
    }
}

impl fmt::Display for Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for Cidr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;
    use std::net::{Ipv4Addr, Ipv6Addr};

    fn day(n: i64) -> DateDay {
        DateDay::from_ymd(2021, 1, 1).unwrap().add_days(n)
    }

    #[test]
    fn merge_empty() {
        assert!(merge_intervals(&[]).is_empty());
    }

    #[test]
    fn merge_overlap() {
        let a = Interval::new(day(0), day(2)).unwrap();
        let b = Interval::new(day(2), day(4)).unwrap();
        assert_eq!(merge_intervals(&[a, b]), vec![Interval::new(day(0), day(4)).unwrap()]);
    }

    #[test]
    fn merge_adjacent_and_gap() {
        let a = Interval::new(day(0), day(1)).unwrap();
        let b = Interval::new(day(2), day(3)).unwrap();
        let c = Interval::new(day(5), day(5)).unwrap();
        assert_eq!(
            merge_intervals(&[c, b, a]),
            vec![Interval::new(day(0), day(3)).unwrap(), c]
        );
    }

    #[test]
    fn interval_rejects_reversed() {
        assert!(Interval::new(day(3), day(1)).is_err());
        assert_eq!(Interval::new(day(3), day(3)).unwrap().day_count(), 1);
    }

    #[test]
    fn date_parsing_truncates() {
        let d: DateDay = "2021-04-10T23:59:59Z".parse().unwrap();
        assert_eq!(d, DateDay::from_ymd(2021, 4, 10).unwrap());
        let d: DateDay = "2021-04-10T23:30:00-02:00".parse().unwrap();
        assert_eq!(d, DateDay::from_ymd(2021, 4, 11).unwrap());
    }

    #[test]
    fn cidr_rejects_host_bits() {
        assert!("10.0.0.1/24".parse::<Cidr>().is_err());
        let c: Cidr = "10.1.0.0/16".parse().unwrap();
        assert_eq!(c.size(), 65_536);
        assert_eq!(
            Cidr::containing("10.1.2.3".parse().unwrap(), 8).unwrap().to_string(),
            "10.0.0.0/8"
        );
    }

    fn brute_force_days(ivs: &[Interval]) -> BTreeSet<DateDay> {
        let mut set = BTreeSet::new();
        for iv in ivs {
            let mut d = iv.first();
            while d <= iv.last() {
                set.insert(d);
                d = d.succ();
            }
        }
        set
    }

    fn mask_v4(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(len))
        }
    }

    fn mask_v6(len: u8) -> u128 {
        if len == 0 {
            0
        } else {
            u128::MAX << (128 - u32::from(len))
        }
    }

    proptest! {
        #[test]
        fn merge_matches_day_enumeration(raw in prop::collection::vec((0i64..400, 0i64..30), 0..1000)) {
            let ivs: Vec<Interval> = raw.iter()
                .map(|&(s, len)| Interval::new(day(s), day(s + len)).unwrap())
                .collect();
            let merged = merge_intervals(&ivs);
            let total: u64 = merged.iter().map(Interval::day_count).sum();
            let days = brute_force_days(&ivs);
            prop_assert_eq!(total as usize, days.len());
            for w in merged.windows(2) {
                // disjoint, sorted and separated by at least one uncovered day
                prop_assert!(w[0].last().succ() < w[1].first());
            }
            prop_assert_eq!(brute_force_days(&merged), days);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn cidr_v4_membership_matches_mask(ip in any::<u32>(), base in any::<u32>(), len in 0u8..=32) {
            let net = base & mask_v4(len);
            let cidr = Cidr::new(IpAddr::V4(Ipv4Addr::from(net)), len).unwrap();
            let expected = ip & mask_v4(len) == net;
            prop_assert_eq!(cidr.contains(&IpAddr::V4(Ipv4Addr::from(ip))), expected);
        }

        #[test]
        fn cidr_v6_membership_matches_mask(ip in any::<u128>(), base in any::<u128>(), len in 0u8..=128) {
            let net = base & mask_v6(len);
            let cidr = Cidr::new(IpAddr::V6(Ipv6Addr::from(net)), len).unwrap();
            let expected = ip & mask_v6(len) == net;
            prop_assert_eq!(cidr.contains(&IpAddr::V6(Ipv6Addr::from(ip))), expected);
        }
    }
}
