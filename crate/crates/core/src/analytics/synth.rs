use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{generate_mtf, AssocType, HostReport, MalwareAssoc, MtfRecord, SipsLabel, SyntheticMtfSpec};

#[derive(Debug, Clone)]
pub struct SyntheticAnalyticsSpec {
    pub seed: u64,
    pub n_ips: usize,
    /// Size of the unrelated "prior" dataset used for overlap runs.
    pub n_prior: usize,
}

impl Default for SyntheticAnalyticsSpec {
    fn default() -> Self {
        SyntheticAnalyticsSpec {
            seed: 7,
            n_ips: 5_000,
            n_prior: 3_000,
        }
    }
}

/// Hermetic inputs for every analytics subcommand.
#[derive(Debug, Clone)]
pub struct AnalyticsFixture {
    /// CSV in the geo table format.
    pub geo_csv: String,
    pub ips: Vec<IpAddr>,
    pub prior: Vec<IpAddr>,
    pub mtf: Vec<MtfRecord>,
    pub host_reports: Vec<HostReport>,
    pub sips: Vec<SipsLabel>,
}

const REGIONS: [(&str, &str, &str, u32, &str); 6] = [
    ("112.10.0.0/16", "Zhejiang", "Hangzhou", 4134, "CHINANET"),
    ("112.11.0.0/16", "Zhejiang", "Ningbo", 4134, "CHINANET"),
    ("36.20.0.0/16", "Jiangsu", "Nanjing", 4837, "China Unicom"),
    ("36.21.0.0/16", "Fujian", "Xiamen", 4837, "China Unicom"),
    ("183.60.0.0/16", "Guangdong", "Shenzhen", 9808, "China Mobile"),
    ("183.61.0.0/16", "Sichuan", "Chengdu", 9808, "China Mobile"),
];

pub fn generate_analytics_inputs(spec: &SyntheticAnalyticsSpec) -> AnalyticsFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut geo_csv = String::from("cidr,country,region,city,asn,isp,org_name,org_type\n");
    for (cidr, region, city, asn, isp) in REGIONS {
        geo_csv.push_str(&format!("{cidr},CN,{region},{city},{asn},{isp},,\n"));
    }
    // a university block nested in the first prefix
    geo_csv.push_str("112.10.200.0/24,CN,Zhejiang,Hangzhou,4538,CERNET,Zhejiang University,education\n");

    let mut set: BTreeSet<IpAddr> = BTreeSet::new();
    // one fully populated /24
    for h in 0..=255u8 {
        set.insert(IpAddr::V4(Ipv4Addr::new(112, 10, 7, h)));
    }
    while set.len() < spec.n_ips {
        let ip = if rng.random_bool(0.03) {
            IpAddr::V4(Ipv4Addr::new(198, 18, rng.random(), rng.random()))
        } else {
            let (cidr, ..) = REGIONS.choose(&mut rng).expect("non-empty");
            let base: Ipv4Addr = cidr.split('/').next().and_then(|b| b.parse().ok()).expect("literal");
            let o = base.octets();
            IpAddr::V4(Ipv4Addr::new(o[0], o[1], rng.random_range(0..64), rng.random()))
        };
        set.insert(ip);
    }
    let ips: Vec<IpAddr> = set.iter().copied().collect();

    let mut prior: BTreeSet<IpAddr> = BTreeSet::new();
    while prior.len() < spec.n_prior {
        if rng.random_bool(0.2) {
            prior.insert(*ips.choose(&mut rng).expect("non-empty"));
        } else {
            prior.insert(IpAddr::V4(Ipv4Addr::new(
                [112, 36, 61, 222][rng.random_range(0..4)],
                rng.random_range(0..32),
                rng.random(),
                rng.random(),
            )));
        }
    }

    let mtf = generate_mtf(
        &ips,
        &SyntheticMtfSpec {
            seed: spec.seed,
            ..Default::default()
        },
    );

    let mut host_reports = Vec::new();
    for ip in &ips {
        if !rng.random_bool(0.5) {
            continue;
        }
        let mut r = HostReport {
            ip: *ip,
            malicious_urls: Vec::new(),
            malware_assocs: Vec::new(),
        };
        if rng.random_bool(0.03) {
            r.malicious_urls.push(format!("http://{ip}:{}/Mozi.m", rng.random_range(1024..65535)));
        }
        for t in [AssocType::Embedding, AssocType::Communicating, AssocType::Hosting] {
            if rng.random_bool(0.02) {
                r.malware_assocs.push(MalwareAssoc {
                    hash: format!("{:016x}{:016x}", rng.random::<u64>(), rng.random::<u64>()),
                    assoc_type: t,
                });
            }
        }
        host_reports.push(r);
    }

    let mut sips = Vec::new();
    for ip in &ips {
        if rng.random_bool(0.95) {
            sips.push(SipsLabel {
                ip: *ip,
                is_sips: rng.random_bool(0.68),
            });
        }
    }

    AnalyticsFixture {
        geo_csv,
        ips,
        prior: prior.into_iter().collect(),
        mtf,
        host_reports,
        sips,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::GeoTable;

    #[test]
    fn fixture_is_consistent() {
        let f = generate_analytics_inputs(&SyntheticAnalyticsSpec {
            n_ips: 1_000,
            n_prior: 500,
            ..Default::default()
        });
        assert_eq!(f.ips.len(), 1_000);
        assert_eq!(f.prior.len(), 500);
        let t = GeoTable::parse_csv(&f.geo_csv, "synthetic").unwrap();
        assert_eq!(t.len(), 7);
        let known = f.ips.iter().filter(|ip| t.lookup(**ip).is_some()).count();
        assert!(known > 900);
    }
}
