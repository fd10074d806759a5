use std::collections::BTreeMap;

use serde::Serialize;

use super::{DailyActiveSeries, ResipLifetime, UsageSummary};
use crate::report::{compact, compact_k, csv, grouped, text_table};
use crate::types::ServiceId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeShares {
    pub resips: usize,
    pub one_day: f64,
    pub under_ten: f64,
}

pub fn lifetime_shares(lifetimes: &[ResipLifetime]) -> LifetimeShares {
    let n = lifetimes.len();
    let one = lifetimes.iter().filter(|l| l.lifetime_days == 1).count();
    let ten = lifetimes.iter().filter(|l| l.lifetime_days < 10).count();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    LifetimeShares {
        resips: n,
        one_day: frac(one),
        under_ten: frac(ten),
    }
}

/// Per-service lifetime CDF: `service,lifetime_days,resips,cdf`.
pub fn render_lifetime_cdf_csv(lifetimes: &[ResipLifetime]) -> String {
    let mut by: BTreeMap<&ServiceId, BTreeMap<u64, u64>> = BTreeMap::new();
    for l in lifetimes {
        *by.entry(&l.service).or_default().entry(l.lifetime_days).or_default() += 1;
    }
    let mut rows = Vec::new();
    for (service, hist) in by {
        let total: u64 = hist.values().sum();
        let mut acc = 0;
        for (days, n) in hist {
            acc += n;
            rows.push(vec![
                service.to_string(),
                days.to_string(),
                n.to_string(),
                format!("{:.6}", acc as f64 / total as f64),
            ]);
        }
    }
    csv(&["service", "lifetime_days", "resips", "cdf"], &rows)
}

/// `service,date,active` for every day of every series.
pub fn render_daily_csv(series: &[DailyActiveSeries]) -> String {
    let mut rows = Vec::new();
    for s in series.iter().filter(|s| !s.is_empty()) {
        for (d, c) in s.days() {
            rows.push(vec![s.service.to_string(), d.to_string(), c.to_string()]);
        }
    }
    csv(&["service", "date", "active"], &rows)
}

const USAGE_HEADER: [&str; 6] = ["Provider", "FQDNs", "RESIPs", "Lifetime", "Total Usage", "Daily Usage"];

/// Usage table in the paper's layout, largest RESIP pools first.
pub fn render_usage_table(rows: &[UsageSummary]) -> String {
    let mut sorted: Vec<&UsageSummary> = rows.iter().collect();
    sorted.sort_by(|a, b| b.resip_count.cmp(&a.resip_count).then(a.service.cmp(&b.service)));
    let body: Vec<Vec<String>> = sorted
        .iter()
        .map(|u| {
            vec![
                u.service.to_string(),
                grouped(u.fqdn_count as u64),
                compact_k(u.resip_count as u64),
                grouped(u.lifetime_days),
                compact(u.total_queries as f64),
                compact(u.daily_usage),
            ]
        })
        .collect();
    text_table(&USAGE_HEADER, &body)
}

pub fn render_usage_csv(rows: &[UsageSummary]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|u| {
            vec![
                u.service.to_string(),
                u.fqdn_count.to_string(),
                u.resip_count.to_string(),
                u.lifetime_days.to_string(),
                u.total_queries.to_string(),
                format!("{:.3}", u.daily_usage),
            ]
        })
        .collect();
    csv(
        &["service", "fqdns", "resips", "lifetime_days", "total_queries", "daily_usage"],
        &body,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(service: &str, resips: usize, fqdns: usize, days: u64, total: u64) -> UsageSummary {
        UsageSummary {
            service: service.parse().unwrap(),
            resip_count: resips,
            fqdn_count: fqdns,
            lifetime_days: days,
            total_queries: total,
            daily_usage: total as f64 / days as f64,
        }
    }

    #[test]
    fn usage_table_layout() {
        let t = render_usage_table(&[
            usage("shenlongip.com", 181_000, 816, 948, 1_330_000_000),
            usage("yunip168.com", 191_000, 636, 1_637, 761_000_000),
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Provider\tFQDNs\tRESIPs\tLifetime\tTotal Usage\tDaily Usage");
        assert_eq!(lines[1], "yunip168.com\t636\t191K\t1,637\t761M\t465K");
        // point division gives 1.40M; the table's 1.41M comes from the unrounded total
        assert_eq!(lines[2], "shenlongip.com\t816\t181K\t948\t1.33B\t1.4M");
    }

    #[test]
    fn cdf_reaches_one() {
        let l = |d| ResipLifetime {
            ip: "10.0.0.1".parse().unwrap(),
            service: "s".parse().unwrap(),
            intervals: vec![],
            lifetime_days: d,
        };
        let csv = render_lifetime_cdf_csv(&[l(1), l(1), l(3), l(12)]);
        let last = csv.lines().last().unwrap();
        assert_eq!(last, "s,12,1,1.000000");
        assert!(csv.contains("s,1,2,0.500000"));
        let s = lifetime_shares(&[l(1), l(1), l(3), l(12)]);
        assert_eq!((s.one_day, s.under_ten), (0.5, 0.75));
    }
}
