use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::net::IpAddr;

use serde::Serialize;

use super::ExitObservation;
use crate::report::{grouped, period_mmddyy, text_table};
use crate::types::{DateDay, ServiceId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ServiceStats {
    pub service: ServiceId,
    /// First and last day with a successful probe.
    pub period: Option<(DateDay, DateDay)>,
    /// Distinct days with at least one successful probe.
    pub days: usize,
    pub unique_resips: usize,
    pub successful_probes: u64,
    pub attempted_probes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CumulativePoint {
    pub service: ServiceId,
    pub date: DateDay,
    pub cumulative_probes: u64,
    pub cumulative_unique_ips: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CampaignStats {
    pub services: Vec<ServiceStats>,
    /// One point per service per day of its period, gaps included.
    pub series: Vec<CumulativePoint>,
    /// Exit ips across all services.
    #[serde(skip)]
    pub all_ips: BTreeSet<IpAddr>,
    /// Days with a successful probe in any service.
    #[serde(skip)]
    pub all_days: BTreeSet<DateDay>,
}

/// Recomputes everything from the observation log.
pub fn campaign_stats(obs: &[ExitObservation]) -> CampaignStats {
    #[derive(Default)]
    struct Acc {
        attempted: u64,
        per_day: BTreeMap<DateDay, Vec<IpAddr>>,
    }
    let mut acc: BTreeMap<ServiceId, Acc> = BTreeMap::new();
    for o in obs {
        let a = acc.entry(o.service.clone()).or_default();
        a.attempted += 1;
        if let (true, Some(ip)) = (o.success, o.exit_ip) {
            a.per_day.entry(DateDay::from_timestamp(&o.observed_at)).or_default().push(ip);
        }
    }

    let mut stats = CampaignStats::default();
    for (service, a) in acc {
        let mut seen: HashSet<IpAddr> = HashSet::new();
        let mut probes = 0u64;
        let period = match (a.per_day.keys().next(), a.per_day.keys().next_back()) {
            (Some(f), Some(l)) => Some((*f, *l)),
            _ => None,
        };
        if let Some((first, last)) = period {
            let mut day = first;
            while day <= last {
                if let Some(ips) = a.per_day.get(&day) {
                    probes += ips.len() as u64;
                    for ip in ips {
                        seen.insert(*ip);
                    }
                }
                stats.series.push(CumulativePoint {
                    service: service.clone(),
                    date: day,
                    cumulative_probes: probes,
                    cumulative_unique_ips: seen.len(),
                });
                day = day.succ();
            }
        }
        let unique: BTreeSet<&IpAddr> = a.per_day.values().flatten().collect();
        stats.all_ips.extend(unique.iter().copied());
        stats.all_days.extend(a.per_day.keys());
        stats.services.push(ServiceStats {
            service,
            period,
            days: a.per_day.len(),
            unique_resips: unique.len(),
            successful_probes: probes,
            attempted_probes: a.attempted,
        });
    }
    stats
}

/// Plot data for the cumulative probes / unique IPs figure.
pub fn render_cumulative_csv(stats: &CampaignStats) -> String {
    let mut s = String::from("service,date,cumulative_probes,cumulative_unique_ips\n");
    for p in &stats.series {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.service, p.date, p.cumulative_probes, p.cumulative_unique_ips
        ));
    }
    s
}

pub const CAMPAIGN_HEADER: [&str; 5] = ["Provider", "Period", "Days", "RESIPs", "Probes"];

/// Per-service rows plus an `Overall` row whose RESIP count is the union across services.
pub fn render_campaign_table(stats: &CampaignStats, names: &BTreeMap<ServiceId, String>) -> String {
    let mut rows = Vec::new();
    let mut overall: Option<(DateDay, DateDay)> = None;
    for s in &stats.services {
        let period = s.period.map_or_else(|| "-".to_string(), |(f, l)| period_mmddyy(f, l));
        if let Some((f, l)) = s.period {
            overall = Some(overall.map_or((f, l), |(of, ol)| (of.min(f), ol.max(l))));
        }
        rows.push(vec![
            names.get(&s.service).cloned().unwrap_or_else(|| s.service.to_string()),
            period,
            s.days.to_string(),
            grouped(s.unique_resips as u64),
            grouped(s.successful_probes),
        ]);
    }
    rows.push(vec![
        "Overall".into(),
        overall.map_or_else(|| "-".to_string(), |(f, l)| period_mmddyy(f, l)),
        stats.all_days.len().to_string(),
        grouped(stats.all_ips.len() as u64),
        grouped(stats.services.iter().map(|s| s.successful_probes).sum()),
    ]);
    text_table(&CAMPAIGN_HEADER, &rows)
}
