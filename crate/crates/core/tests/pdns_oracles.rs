use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::net::IpAddr;

use resipscope::patterns::PatternSet;
use resipscope::pdns::{
    compute_lifetimes, daily_active_series, extract_dp_resips, generate_pdns, match_service_domains,
    read_pdns_file, render_pdns, services_in, PdnsRecord, SyntheticPdnsSpec,
};
use resipscope::{DateDay, ServiceId};

fn three_services() -> PatternSet {
    PatternSet::parse(
        r#"
[[service]]
id = "shenlongip.com"
apexes = ["shenlongip.com"]
label_globs = ["*"]
[[service]]
id = "yunip168.com"
apexes = ["yunip168.com"]
[[service]]
id = "jtip.in"
apexes = ["jtip.in"]
label_globs = ["bj0100", "*.*"]
"#,
    )
    .unwrap()
}

fn spec() -> SyntheticPdnsSpec {
    SyntheticPdnsSpec {
        services: vec![
            ("shenlongip.com".into(), 2500),
            ("yunip168.com".into(), 2000),
            ("jtip.in".into(), 1500),
        ],
        noise_records: 1000,
        seed: 11,
        ..Default::default()
    }
}

/// Suffix comparison plus per-label globbing, written without the library's matcher.
fn brute_match(fqdn: &str, apex: &str, globs: Option<&[&str]>) -> bool {
    let Some(sub) = fqdn.strip_suffix(apex).and_then(|s| s.strip_suffix('.')) else {
        return false;
    };
    let Some(globs) = globs else { return true };
    let labels: Vec<&str> = sub.split('.').collect();
    globs.iter().any(|g| {
        let gl: Vec<&str> = g.split('.').collect();
        gl.len() == labels.len() && gl.iter().zip(&labels).all(|(g, l)| *g == "*" || g == l)
    })
}

#[test]
fn match_set_equals_brute_force() {
    let records = generate_pdns(&spec());
    assert!(records.len() >= 8_000 && records.len() <= 10_000, "{} records", records.len());
    let m = match_service_domains(records.clone(), &three_services());
    let got: BTreeSet<(String, String, String)> = m
        .tagged
        .iter()
        .map(|t| (t.service.to_string(), t.record.fqdn.clone(), t.record.to_line()))
        .collect();

    let rules: [(&str, Option<&[&str]>); 3] = [
        ("shenlongip.com", Some(&["*"])),
        ("yunip168.com", None),
        ("jtip.in", Some(&["bj0100", "*.*"])),
    ];
    let mut want = BTreeSet::new();
    for r in &records {
        for (apex, globs) in rules {
            if brute_match(&r.fqdn, apex, globs) {
                want.insert((apex.to_string(), r.fqdn.clone(), r.to_line()));
            }
        }
    }
    assert_eq!(got, want);
    assert!(m.dropped >= 1000);
}

fn day_sets(records: &[&PdnsRecord]) -> BTreeMap<IpAddr, BTreeSet<DateDay>> {
    let mut out: BTreeMap<IpAddr, BTreeSet<DateDay>> = BTreeMap::new();
    for r in records {
        let mut d = r.first_seen;
        while d <= r.last_seen {
            out.entry(r.rdata).or_default().insert(d);
            d = d.succ();
        }
    }
    out
}

#[test]
fn lifetimes_series_and_sets_equal_day_enumeration() {
    let m = match_service_domains(generate_pdns(&spec()), &PatternSet::bundled());
    let lifetimes = compute_lifetimes(&m.tagged);
    let sets = extract_dp_resips(&m.tagged);
    for service in services_in(&m.tagged) {
        let mine: Vec<&PdnsRecord> = m.tagged.iter().filter(|t| t.service == service).map(|t| &t.record).collect();
        let days = day_sets(&mine);

        for l in lifetimes.iter().filter(|l| l.service == service) {
            assert_eq!(l.lifetime_days as usize, days[&l.ip].len(), "{service} {}", l.ip);
        }

        let series = daily_active_series(&m.tagged, &service);
        let mut per_day: BTreeMap<DateDay, HashSet<IpAddr>> = BTreeMap::new();
        for (ip, ds) in &days {
            for d in ds {
                per_day.entry(*d).or_default().insert(*ip);
            }
        }
        for (d, c) in series.days() {
            assert_eq!(c as usize, per_day.get(&d).map_or(0, HashSet::len));
        }
        let active_total: u64 = series.counts.iter().sum();
        let lifetime_total: u64 = lifetimes.iter().filter(|l| l.service == service).map(|l| l.lifetime_days).sum();
        assert_eq!(active_total, lifetime_total);

        let set = sets.iter().find(|s| s.service == service).unwrap();
        let brute: BTreeSet<IpAddr> = mine.iter().map(|r| r.rdata).collect();
        assert_eq!(set.ips, brute);
    }
}

#[test]
fn stream_file_round_trip_counts_malformed() {
    let records = generate_pdns(&SyntheticPdnsSpec {
        services: vec![("jtip.in".into(), 50)],
        noise_records: 5,
        ..Default::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pdns.tsv");
    let mut text = render_pdns(&records);
    text.push_str("broken line\nx.jtip.in\tA\t::1\t2021-01-01\t2021-01-01\t3\n");
    std::fs::write(&path, text).unwrap();
    let (back, bad) = read_pdns_file(&path).unwrap();
    assert_eq!(back, records);
    assert_eq!(bad, 2);
    let m = match_service_domains(back, &PatternSet::bundled());
    let id: ServiceId = "jtip.in".parse().unwrap();
    assert_eq!(extract_dp_resips(&m.tagged)[0].service, id);
}
