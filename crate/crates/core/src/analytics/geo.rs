use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatfile::{clean_field, read_tsv};
use crate::types::Cidr;

/// Enrichment for one address. `None` fields are unknown, never empty strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoRecord {
    pub country: Option<String>,
    pub region: Option<String>,
    pub city: Option<String>,
    pub asn: Option<u32>,
    pub isp: Option<String>,
    pub org_name: Option<String>,
    pub org_type: Option<String>,
}

impl GeoRecord {
    pub fn unknown() -> Self {
        GeoRecord::default()
    }

    pub fn is_unknown(&self) -> bool {
        *self == GeoRecord::default()
    }
}

fn opt(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty() && t != "-").then(|| t.to_string())
}

fn key(ip: IpAddr) -> (bool, u128) {
    match ip {
        IpAddr::V4(v4) => (false, u128::from(u32::from(v4))),
        IpAddr::V6(v6) => (true, u128::from(v6)),
    }
}

/// Offline prefix table with longest-prefix-match lookup.
#[derive(Debug, Default)]
pub struct GeoTable {
    /// (is_v6, prefix_len) -> network bits -> record
    by_len: BTreeMap<(bool, u8), HashMap<u128, GeoRecord>>,
}

impl GeoTable {
    pub fn insert(&mut self, cidr: Cidr, rec: GeoRecord) {
        let (v6, bits) = key(cidr.base());
        self.by_len.entry((v6, cidr.prefix_len())).or_default().insert(bits, rec);
    }

    /// Rows: cidr, country, region, city, asn, isp, org_name, org_type. A header row
    /// starting with `cidr` is skipped; empty or `-` fields are unknown.
    pub fn parse_csv(text: &str, label: &str) -> Result<GeoTable> {
        let mut table = GeoTable::default();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::parse(label, i + 1, e.to_string()))?;
            let f = |k: usize| row.get(k).unwrap_or("");
            if i == 0 && f(0).trim().eq_ignore_ascii_case("cidr") {
                continue;
            }
            let line = row.position().map_or(i + 1, |p| p.line() as usize);
            let cidr: Cidr = f(0).parse().map_err(|e: Error| Error::parse(label, line, e.to_string()))?;
            let country = opt(f(1));
            if let Some(c) = &country {
                if c.len() != 2 || !c.chars().all(|ch| ch.is_ascii_uppercase()) {
                    return Err(Error::parse(label, line, format!("country `{c}` is not an ISO code")));
                }
            }
            let asn = match opt(f(4)) {
                None => None,
                Some(a) => Some(
                    a.trim_start_matches("AS")
                        .parse()
                        .map_err(|_| Error::parse(label, line, format!("bad asn `{a}`")))?,
                ),
            };
            table.insert(
                cidr,
                GeoRecord {
                    country,
                    region: opt(f(2)),
                    city: opt(f(3)),
                    asn,
                    isp: opt(f(5)),
                    org_name: opt(f(6)),
                    org_type: opt(f(7)),
                },
            );
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<GeoTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
        GeoTable::parse_csv(&text, &path.display().to_string())
    }

    pub fn lookup(&self, ip: IpAddr) -> Option<&GeoRecord> {
        let (v6, bits) = key(ip);
        let width = if v6 { 128 } else { 32 };
        self.by_len
            .range((v6, 0)..=(v6, 128))
            .rev()
            .find_map(|(&(_, len), m)| {
                let mask = if len == 0 { 0 } else { (!0u128 >> (128 - width)) & !((1u128 << (width - u32::from(len))) - 1) };
                m.get(&(bits & mask))
            })
    }

    pub fn len(&self) -> usize {
        self.by_len.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A remote enrichment source (WHOIS or a geo API).
pub trait RemoteGeo {
    fn fetch(&mut self, ip: IpAddr) -> Result<Option<GeoRecord>>;
}

/// Disk-cached, budgeted wrapper around a remote source. Each fetch is spaced at
/// least `min_interval` from the previous one.
pub struct CachedRemote<R: RemoteGeo> {
    inner: R,
    cache_path: Option<PathBuf>,
    cache: BTreeMap<IpAddr, GeoRecord>,
    pub budget: usize,
    pub min_interval: Duration,
    last: Option<Instant>,
    pub requests: usize,
}

impl<R: RemoteGeo> CachedRemote<R> {
    pub fn new(inner: R, cache_path: Option<PathBuf>, budget: usize) -> Result<Self> {
        let cache = match &cache_path {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::path_io(p, e))?;
                serde_json::from_str(&text)?
            }
            _ => BTreeMap::new(),
        };
        Ok(CachedRemote {
            inner,
            cache_path,
            cache,
            budget,
            min_interval: Duration::ZERO,
            last: None,
            requests: 0,
        })
    }

    /// Cached answer, or a fresh fetch while budget remains.
    pub fn get(&mut self, ip: IpAddr) -> Option<GeoRecord> {
        if let Some(r) = self.cache.get(&ip) {
            return Some(r.clone());
        }
        if self.requests >= self.budget {
            return None;
        }
        if let Some(last) = self.last {
            let wait = self.min_interval.saturating_sub(last.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        self.requests += 1;
        self.last = Some(Instant::now());
        match self.inner.fetch(ip) {
            Ok(Some(r)) => {
                self.cache.insert(ip, r.clone());
                Some(r)
            }
            Ok(None) => None,
            Err(e) => {
                log::warn!("remote geo lookup for {ip} failed: {e}");
                None
            }
        }
    }

    pub fn save(&self) -> Result<()> {
        if let Some(p) = &self.cache_path {
            std::fs::write(p, serde_json::to_string(&self.cache)?).map_err(|e| Error::path_io(p, e))?;
        }
        Ok(())
    }
}

/// Table lookup first, the remote source for misses, explicit unknown otherwise.
pub fn geo_enrich<R: RemoteGeo>(
    ips: impl IntoIterator<Item = IpAddr>,
    table: &GeoTable,
    mut remote: Option<&mut CachedRemote<R>>,
) -> BTreeMap<IpAddr, GeoRecord> {
    let mut out = BTreeMap::new();
    for ip in ips {
        if out.contains_key(&ip) {
            continue;
        }
        let rec = match table.lookup(ip) {
            Some(r) => r.clone(),
            None => remote.as_deref_mut().and_then(|r| r.get(ip)).unwrap_or_else(GeoRecord::unknown),
        };
        out.insert(ip, rec);
    }
    out
}

pub const ENRICHED_HEADER: &str = "# ip\tcountry\tregion\tcity\tasn\tisp\torg_name\torg_type\n";

/// Enriched ips as TSV; unknown fields are `-`.
pub fn render_enriched(map: &BTreeMap<IpAddr, GeoRecord>) -> String {
    let f = |v: &Option<String>| v.as_deref().map_or_else(|| "-".to_string(), clean_field);
    let mut s = String::from(ENRICHED_HEADER);
    for (ip, g) in map {
        s.push_str(&format!(
            "{ip}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            f(&g.country),
            f(&g.region),
            f(&g.city),
            g.asn.map_or_else(|| "-".to_string(), |a| a.to_string()),
            f(&g.isp),
            f(&g.org_name),
            f(&g.org_type)
        ));
    }
    s
}

pub fn read_enriched(path: &Path) -> Result<BTreeMap<IpAddr, GeoRecord>> {
    let label = path.display().to_string();
    let mut out = BTreeMap::new();
    for rec in read_tsv(path)? {
        if rec.fields.len() != 8 {
            return Err(Error::parse(&label, rec.line, "expected 8 fields"));
        }
        let f = |i: usize| opt(&rec.fields[i]);
        let ip: IpAddr = rec.fields[0].trim().parse().map_err(|_| Error::parse(&label, rec.line, "bad ip"))?;
        let asn = match f(4) {
            None => None,
            Some(a) => Some(a.parse().map_err(|_| Error::parse(&label, rec.line, "bad asn"))?),
        };
        out.insert(
            ip,
            GeoRecord {
                country: f(1),
                region: f(2),
                city: f(3),
                asn,
                isp: f(5),
                org_name: f(6),
                org_type: f(7),
            },
        );
    }
    Ok(out)
}

/// Placeholder type for callers that have no remote source.
pub struct NoRemote;

impl RemoteGeo for NoRemote {
    fn fetch(&mut self, _ip: IpAddr) -> Result<Option<GeoRecord>> {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE: &str = "cidr,country,region,city,asn,isp,org_name,org_type
10.0.0.0/8,CN,Zhejiang,Hangzhou,4134,CHINANET,,
10.1.0.0/16,CN,Jiangsu,Nanjing,AS4837,\"China Unicom, Jiangsu\",Some Univ,education
2001:db8::/32,US,,,7922,Comcast,-,-
";

    fn ip(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    #[test]
    fn longest_prefix_wins() {
        let t = GeoTable::parse_csv(TABLE, "t").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.lookup(ip("10.2.3.4")).unwrap().city.as_deref(), Some("Hangzhou"));
        let nested = t.lookup(ip("10.1.3.4")).unwrap();
        assert_eq!(nested.city.as_deref(), Some("Nanjing"));
        assert_eq!(nested.asn, Some(4837));
        assert_eq!(nested.isp.as_deref(), Some("China Unicom, Jiangsu"));
        assert_eq!(t.lookup(ip("2001:db8::1")).unwrap().region, None);
        assert!(t.lookup(ip("11.0.0.1")).is_none());
    }

    #[test]
    fn enriched_round_trip() {
        let t = GeoTable::parse_csv(TABLE, "t").unwrap();
        let m = geo_enrich::<NoRemote>([ip("10.1.0.9"), ip("2001:db8::2"), ip("9.9.9.9")], &t, None);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        std::fs::write(&p, render_enriched(&m)).unwrap();
        assert_eq!(read_enriched(&p).unwrap(), m);
    }

    #[test]
    fn bad_country_rejected() {
        assert!(GeoTable::parse_csv("10.0.0.0/8,China,,,,,,\n", "t").is_err());
        assert!(GeoTable::parse_csv("10.0.0.1/8,CN,,,,,,\n", "t").is_err());
    }

    #[test]
    fn empty_table_all_unknown() {
        let out = geo_enrich::<NoRemote>([ip("1.1.1.1"), ip("::1")], &GeoTable::default(), None);
        assert!(out.values().all(GeoRecord::is_unknown));
        assert_eq!(out.len(), 2);
    }

    struct Counting(usize);
    impl RemoteGeo for Counting {
        fn fetch(&mut self, _ip: IpAddr) -> Result<Option<GeoRecord>> {
            self.0 += 1;
            Ok(Some(GeoRecord {
                country: Some("JP".into()),
                ..Default::default()
            }))
        }
    }

    #[test]
    fn remote_fills_misses_within_budget_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("geo.json");
        let table = GeoTable::parse_csv(TABLE, "t").unwrap();
        let mut remote = CachedRemote::new(Counting(0), Some(cache.clone()), 2).unwrap();
        let out = geo_enrich([ip("10.0.0.1"), ip("8.8.8.8"), ip("8.8.4.4"), ip("9.9.9.9")], &table, Some(&mut remote));
        assert_eq!(out[&ip("10.0.0.1")].country.as_deref(), Some("CN"));
        assert_eq!(out[&ip("8.8.8.8")].country.as_deref(), Some("JP"));
        assert!(out[&ip("9.9.9.9")].is_unknown());
        assert_eq!(remote.requests, 2);
        remote.save().unwrap();
        let mut again = CachedRemote::new(Counting(0), Some(cache), 0).unwrap();
        assert_eq!(again.get(ip("8.8.4.4")).unwrap().country.as_deref(), Some("JP"));
        assert_eq!(again.inner.0, 0);
    }

    proptest! {
        #[test]
        fn lookup_matches_linear_scan(
            prefixes in prop::collection::vec((any::<u32>(), 0u8..=32), 1..40),
            probes in prop::collection::vec(any::<u32>(), 1..100)
        ) {
            let mut t = GeoTable::default();
            let mut list = Vec::new();
            for (i, (base, len)) in prefixes.into_iter().enumerate() {
                let c = Cidr::containing(IpAddr::V4(base.into()), len).unwrap();
                let rec = GeoRecord { asn: Some(i as u32), ..Default::default() };
                t.insert(c, rec.clone());
                list.retain(|(x, _): &(Cidr, GeoRecord)| *x != c);
                list.push((c, rec));
            }
            for p in probes {
                let a = IpAddr::V4(p.into());
                let want = list.iter().filter(|(c, _)| c.contains(&a)).max_by_key(|(c, _)| c.prefix_len()).map(|(_, r)| r);
                prop_assert_eq!(t.lookup(a), want);
            }
        }
    }
}
