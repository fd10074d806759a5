use std::collections::HashSet;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PdnsRecord, RrType};
use crate::types::DateDay;

/// Knobs for a synthetic pDNS stream. Lifetimes are drawn so that about
/// `one_day_share` of ips live one day and `under_ten_share` live under ten.
#[derive(Debug, Clone)]
pub struct SyntheticPdnsSpec {
    /// (apex, number of ips)
    pub services: Vec<(String, usize)>,
    pub seed: u64,
    pub start: DateDay,
    pub span_days: u32,
    pub one_day_share: f64,
    pub under_ten_share: f64,
    /// Unrelated records mixed in.
    pub noise_records: usize,
    pub ipv6_share: f64,
}

impl Default for SyntheticPdnsSpec {
    fn default() -> Self {
        SyntheticPdnsSpec {
            services: vec![
                ("shenlongip.com".into(), 1500),
                ("yunip168.com".into(), 1200),
                ("jtip.in".into(), 800),
            ],
            seed: 7,
            start: DateDay::from_ymd(2019, 1, 1).expect("valid date"),
            span_days: 730,
            one_day_share: 0.55,
            under_ten_share: 0.91,
            noise_records: 500,
            ipv6_share: 0.05,
        }
    }
}

const PROVINCES: [&str; 12] = ["bj", "sh", "zj", "js", "fj", "sc", "gd", "hn", "hb", "ah", "sd", "ln"];
const NOISE_DOMAINS: [&str; 4] = ["example.com", "example.net", "cdn.example.org", "mail.example.com"];

fn draw_lifetime(rng: &mut ChaCha8Rng, spec: &SyntheticPdnsSpec) -> u32 {
    let u: f64 = rng.random();
    if u < spec.one_day_share {
        1
    } else if u < spec.under_ten_share {
        rng.random_range(2..=9)
    } else {
        // log-uniform over 10..=400 days
        let x: f64 = rng.random_range((10f64).ln()..(401f64).ln());
        (x.exp() as u32).clamp(10, 400)
    }
}

/// Start offset with a rise-and-fall popularity: triangular, peaking at 70% of the span.
fn draw_start(rng: &mut ChaCha8Rng, latest: u32) -> u32 {
    let (a, c, b) = (0.0, 0.7 * f64::from(latest), f64::from(latest));
    let u: f64 = rng.random();
    let f = (c - a) / (b - a);
    let x = if u < f {
        a + ((b - a) * (c - a) * u).sqrt()
    } else {
        b - ((b - a) * (b - c) * (1.0 - u)).sqrt()
    };
    (x as u32).min(latest)
}

fn random_parts(rng: &mut ChaCha8Rng, total: u32, k: u32) -> Vec<u32> {
    let mut cuts: Vec<u32> = rand::seq::index::sample(rng, (total - 1) as usize, (k - 1) as usize)
        .into_iter()
        .map(|c| c as u32 + 1)
        .collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(k as usize);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        parts.push(c - prev);
        prev = c;
    }
    parts
}

/// Deterministic stream for a given spec. Each ip's covered days equal its drawn
/// lifetime; some ips appear under several fqdns or in several separated spells.
pub fn generate_pdns(spec: &SyntheticPdnsSpec) -> Vec<PdnsRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    for (si, (apex, n_ips)) in spec.services.iter().enumerate() {
        let fqdns: Vec<String> = (0..40)
            .map(|i| format!("{}{:04}.{apex}", PROVINCES[i % PROVINCES.len()], 100 + i * 7))
            .collect();
        let mut used: HashSet<IpAddr> = HashSet::new();
        while used.len() < *n_ips {
            let ip = if rng.random_bool(spec.ipv6_share) {
                IpAddr::V6(Ipv6Addr::new(0x240e, si as u16, rng.random(), rng.random(), 0, 0, 0, rng.random()))
            } else {
                IpAddr::V4(Ipv4Addr::new(
                    [112, 114, 115, 117, 183][rng.random_range(0..5)],
                    si as u8 * 16 + rng.random_range(0..16),
                    rng.random(),
                    rng.random_range(1..255),
                ))
            };
            if !used.insert(ip) {
                continue;
            }
            let rrtype = if ip.is_ipv4() { RrType::A } else { RrType::AAAA };
            let lifetime = draw_lifetime(&mut rng, spec);
            let spells = if lifetime >= 2 && rng.random_bool(0.3) {
                rng.random_range(2..=lifetime.min(3))
            } else {
                1
            };
            let parts = random_parts(&mut rng, lifetime, spells);
            let gaps: Vec<u32> = (1..spells).map(|_| rng.random_range(2..=30)).collect();
            let extent = lifetime + gaps.iter().sum::<u32>();
            let latest = spec.span_days.saturating_sub(extent);
            let mut day = draw_start(&mut rng, latest);
            for (i, len) in parts.iter().enumerate() {
                let first = spec.start.add_days(i64::from(day));
                let last = first.add_days(i64::from(len - 1));
                let fqdn = fqdns.choose(&mut rng).expect("non-empty");
                let q = rng.random_range(0..5_000u64);
                out.push(PdnsRecord::new(fqdn, rrtype, ip, first, last, q).expect("generated record is valid"));
                if rng.random_bool(0.2) {
                    // a second name for part of the same spell
                    let off = rng.random_range(0..*len);
                    let other = fqdns.choose(&mut rng).expect("non-empty");
                    let f2 = first.add_days(i64::from(off));
                    let l2 = f2.add_days(i64::from(rng.random_range(0..len - off)));
                    out.push(PdnsRecord::new(other, rrtype, ip, f2, l2, rng.random_range(0..500)).expect("valid"));
                }
                day += len + gaps.get(i).copied().unwrap_or(0);
            }
        }
    }
    for _ in 0..spec.noise_records {
        let d = spec.start.add_days(rng.random_range(0..i64::from(spec.span_days.max(1))));
        let ip = IpAddr::V4(Ipv4Addr::new(198, 51, 100, rng.random_range(1..255)));
        let name = NOISE_DOMAINS.choose(&mut rng).expect("non-empty");
        out.push(PdnsRecord::new(name, RrType::A, ip, d, d, rng.random_range(0..100)).expect("valid"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::PatternSet;
    use crate::pdns::{compute_lifetimes, lifetime_shares, match_service_domains};

    #[test]
    fn generator_hits_lifetime_targets() {
        let spec = SyntheticPdnsSpec::default();
        let records = generate_pdns(&spec);
        assert_eq!(records, generate_pdns(&spec));
        let m = match_service_domains(records, &PatternSet::bundled());
        assert_eq!(m.dropped as usize, spec.noise_records);
        let lifetimes = compute_lifetimes(&m.tagged);
        assert_eq!(lifetimes.len(), 3500);
        let shares = lifetime_shares(&lifetimes);
        assert!(shares.one_day >= 0.53, "{shares:?}");
        assert!((shares.under_ten - 0.91).abs() < 0.02, "{shares:?}");
    }
}
