use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::{IpAddr, Ipv4Addr};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resipscope::analytics::{
    distribution_report, intersection_rates, mtf_summary, prefix_density, sips_rate, CategoryVocab, Dimension,
    GeoRecord, MtfRecord, OTHER_CATEGORY,
};

fn random_v4(rng: &mut ChaCha8Rng) -> IpAddr {
    // a few dense /16s so prefixes actually fill up
    IpAddr::V4(Ipv4Addr::new(
        [10, 36, 112][rng.random_range(0..3)],
        rng.random_range(0..4),
        rng.random_range(0..8),
        rng.random(),
    ))
}

fn enriched(n: usize, seed: u64) -> BTreeMap<IpAddr, GeoRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let countries = ["CN", "US", "BR", "IN"];
    let regions = ["Zhejiang", "Jiangsu", "Texas"];
    let isps = ["CHINANET", "China Unicom", "Comcast", "Vivo"];
    let mut out = BTreeMap::new();
    while out.len() < n {
        let ip = if rng.random_bool(0.05) {
            IpAddr::V6(rng.random::<u128>().into())
        } else {
            random_v4(&mut rng)
        };
        let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| rng.random_bool(0.9).then(|| xs[rng.random_range(0..xs.len())].to_string());
        let g = GeoRecord {
            country: pick(&mut rng, &countries),
            region: pick(&mut rng, &regions),
            city: pick(&mut rng, &["a", "b", "c", "d", "e"]),
            asn: rng.random_bool(0.9).then(|| rng.random_range(1..30)),
            isp: pick(&mut rng, &isps),
            ..Default::default()
        };
        out.insert(ip, g);
    }
    out
}

#[test]
fn distribution_equals_group_by() {
    let data = enriched(1_000, 3);
    let tables = distribution_report(&data, &Dimension::ALL);
    for t in tables {
        let mut brute: HashMap<String, u64> = HashMap::new();
        let mut missing = 0;
        for (ip, g) in &data {
            let key = match t.dimension {
                Dimension::Country => g.country.clone(),
                Dimension::Province => g.country.as_ref().zip(g.region.as_ref()).map(|(c, r)| format!("{c}/{r}")),
                Dimension::City => match (&g.country, &g.city) {
                    (Some(c), Some(city)) => Some(format!("{c}/{}/{city}", g.region.as_deref().unwrap_or("-"))),
                    _ => None,
                },
                Dimension::Isp => g.isp.clone(),
                Dimension::Asn => g.asn.map(|a| format!("AS{a}")),
                Dimension::Slash8 | Dimension::Slash16 => match ip {
                    IpAddr::V4(v4) => {
                        let o = v4.octets();
                        Some(if t.dimension == Dimension::Slash8 {
                            format!("{}.0.0.0/8", o[0])
                        } else {
                            format!("{}.{}.0.0/16", o[0], o[1])
                        })
                    }
                    IpAddr::V6(_) => None,
                },
            };
            match key {
                Some(k) => *brute.entry(k).or_default() += 1,
                None => missing += 1,
            }
        }
        assert_eq!(t.unassigned, missing, "{}", t.dimension);
        assert_eq!(t.distinct_groups, brute.len(), "{}", t.dimension);
        let got: HashMap<String, u64> = t.ranked.iter().map(|g| (g.key.clone(), g.count)).collect();
        assert_eq!(got, brute, "{}", t.dimension);
        assert!(t.ranked.windows(2).all(|w| w[0].count > w[1].count || (w[0].count == w[1].count && w[0].key < w[1].key)));
    }
}

#[test]
fn density_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ips: Vec<IpAddr> = (0..5_000).map(|_| random_v4(&mut rng)).collect();
    // one full /24
    ips.extend((0..=255u8).map(|i| IpAddr::V4(Ipv4Addr::new(10, 9, 9, i))));
    ips.push("2001:db8::1".parse().unwrap());
    let distinct: HashSet<Ipv4Addr> = ips
        .iter()
        .filter_map(|ip| match ip {
            IpAddr::V4(a) => Some(*a),
            IpAddr::V6(_) => None,
        })
        .collect();
    for len in [8u8, 16, 24] {
        for min_fill in [0.0, 0.004, 0.3, 1.0] {
            let r = prefix_density(ips.clone(), len, min_fill).unwrap();
            assert_eq!(r.ipv6_excluded, 1);
            let size = 1u64 << (32 - len);
            let mut brute: HashMap<String, u64> = HashMap::new();
            for a in &distinct {
                let o = a.octets();
                let key = match len {
                    8 => format!("{}.0.0.0/8", o[0]),
                    16 => format!("{}.{}.0.0/16", o[0], o[1]),
                    _ => format!("{}.{}.{}.0/24", o[0], o[1], o[2]),
                };
                *brute.entry(key).or_default() += 1;
            }
            brute.retain(|_, n| *n as f64 / size as f64 >= min_fill);
            let got: HashMap<String, u64> = r.prefixes.iter().map(|p| (p.cidr.to_string(), p.members)).collect();
            assert_eq!(got, brute, "/{len} >= {min_fill}");
            if min_fill == 0.0 {
                assert_eq!(r.prefixes.iter().map(|p| p.members).sum::<u64>(), distinct.len() as u64);
            }
            assert!(r.prefixes.windows(2).all(|w| w[0].fill >= w[1].fill));
        }
    }
    let full = prefix_density(ips, 24, 1.0).unwrap();
    assert_eq!(full.prefixes.len(), 1);
    assert_eq!(full.prefixes[0].cidr.to_string(), "10.9.9.0/24");
}

#[test]
fn intersection_equals_nested_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let a: Vec<u32> = (0..rng.random_range(0..2_000)).map(|_| rng.random_range(0..5_000)).collect();
        let b: Vec<u32> = (0..rng.random_range(0..2_000)).map(|_| rng.random_range(0..5_000)).collect();
        let sa: HashSet<u32> = a.iter().copied().collect();
        let sb: HashSet<u32> = b.iter().copied().collect();
        let mut da = a.clone();
        da.sort_unstable();
        da.dedup();
        let mut db = b.clone();
        db.sort_unstable();
        db.dedup();
        let overlap = da.iter().filter(|x| db.binary_search(x).is_ok()).count() as u64;
        let i = intersection_rates(&sa, &sb);
        assert_eq!(i.overlap, overlap);
        assert_eq!(i.rate_a, (!da.is_empty()).then(|| overlap as f64 / da.len() as f64));
        assert_eq!(i.rate_b, (!db.is_empty()).then(|| overlap as f64 / db.len() as f64));
    }
}

#[test]
fn mtf_equals_per_ip_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let set: Vec<IpAddr> = (0..100u32).map(|i| IpAddr::V4((0x0a00_0000 + i).into())).collect();
    let cats = ["CryptoMining", "Worm", "Spam", "botnet"];
    let t0 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let records: Vec<MtfRecord> = (0..600)
        .map(|_| MtfRecord {
            src_ip: if rng.random_bool(0.9) {
                set[rng.random_range(0..60)]
            } else {
                "192.0.2.1".parse().unwrap()
            },
            category: cats[rng.random_range(0..cats.len())].to_string(),
            subcategory: ["x", "y"][rng.random_range(0..2)].to_string(),
            timestamp: t0,
            flow_count: rng.random_range(1..4),
        })
        .collect();
    let set_h: HashSet<IpAddr> = set.iter().copied().collect();
    let s = mtf_summary(&records, &set_h, &CategoryVocab::default());

    let mut per_ip = vec![0u64; set.len()];
    let mut outside = 0;
    for r in &records {
        match set.iter().position(|ip| *ip == r.src_ip) {
            Some(i) => per_ip[i] += r.flow_count,
            None => outside += 1,
        }
    }
    for (k, t) in [1u64, 5, 10].into_iter().enumerate() {
        let n = per_ip.iter().filter(|&&x| x >= t).count() as u64;
        assert_eq!(s.at_least[k], n);
        assert_eq!(s.fraction(k), Some(n as f64 / 100.0));
    }
    assert_eq!(s.outside_records, outside);

    let canon = |c: &str| match c.to_lowercase().as_str() {
        "cryptomining" => "CryptoMining".to_string(),
        "worm" => "Worm".to_string(),
        "botnet" => "Botnet".to_string(),
        _ => OTHER_CATEGORY.to_string(),
    };
    for row in &s.categories {
        let mine: Vec<&MtfRecord> = records
            .iter()
            .filter(|r| set_h.contains(&r.src_ip) && canon(&r.category) == row.category)
            .collect();
        assert_eq!(row.flows, mine.iter().map(|r| r.flow_count).sum::<u64>());
        assert_eq!(row.ips, mine.iter().map(|r| r.src_ip).collect::<HashSet<_>>().len() as u64);
    }
    assert_eq!(s.categories.iter().map(|r| r.flows).sum::<u64>(), s.total_flows);
}

#[test]
fn sips_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sample: Vec<IpAddr> = (0..1_000u32).map(|i| IpAddr::V4((0x6400_0000 + i).into())).collect();
    let mut labels = HashMap::new();
    for ip in &sample {
        if rng.random_bool(0.9) {
            labels.insert(*ip, rng.random_bool(0.6));
        }
    }
    let set: HashSet<IpAddr> = sample.iter().copied().collect();
    for exclude in [false, true] {
        let r = sips_rate(&set, &labels, exclude);
        let yes = sample.iter().filter(|ip| labels.get(ip) == Some(&true)).count() as u64;
        let labelled = sample.iter().filter(|ip| labels.contains_key(ip)).count() as u64;
        let den = if exclude { labelled } else { 1_000 };
        assert_eq!(r.labeled_sips, yes);
        assert_eq!(r.denominator, den);
        assert_eq!(r.rate, Some(yes as f64 / den as f64));
    }
}
