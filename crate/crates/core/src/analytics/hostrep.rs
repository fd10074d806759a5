use std::collections::HashSet;
use std::io::BufRead;
use std::net::IpAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{pct_or_na, text_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocType {
    Embedding,
    Communicating,
    Hosting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalwareAssoc {
    pub hash: String,
    pub assoc_type: AssocType,
}

/// Threat-intel report for one ip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostReport {
    pub ip: IpAddr,
    #[serde(default)]
    pub malicious_urls: Vec<String>,
    #[serde(default)]
    pub malware_assocs: Vec<MalwareAssoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reason {
    MaliciousUrls { count: usize },
    Hosting { hash: String },
    /// Weak indicator; recorded, never flags.
    Communicating { hash: String },
    /// Weak indicator; recorded, never flags.
    Embedding { hash: String },
}

impl Reason {
    pub fn is_strong(&self) -> bool {
        matches!(self, Reason::MaliciousUrls { .. } | Reason::Hosting { .. })
    }
}

/// Malicious iff the ip served a malicious url or hosted malware.
pub fn host_maliciousness(report: &HostReport) -> (bool, Vec<Reason>) {
    let mut reasons = Vec::new();
    if !report.malicious_urls.is_empty() {
        reasons.push(Reason::MaliciousUrls {
            count: report.malicious_urls.len(),
        });
    }
    for a in &report.malware_assocs {
        let hash = a.hash.clone();
        reasons.push(match a.assoc_type {
            AssocType::Hosting => Reason::Hosting { hash },
            AssocType::Communicating => Reason::Communicating { hash },
            AssocType::Embedding => Reason::Embedding { hash },
        });
    }
    (reasons.iter().any(Reason::is_strong), reasons)
}

/// One JSON object per line.
pub fn read_host_reports(path: &Path) -> Result<Vec<HostReport>> {
    let file = std::fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::path_io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: HostReport = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path.display().to_string(), i + 1, e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct HostRepSummary {
    pub sample_size: u64,
    pub with_reports: u64,
    pub malicious: u64,
    pub with_mal_urls: u64,
    pub with_hosted_malware: u64,
}

/// Counts over a sample; reports for ips outside the sample are ignored.
pub fn host_report_summary(sample: &HashSet<IpAddr>, reports: &[HostReport]) -> HostRepSummary {
    let mut seen = HashSet::new();
    let mut s = HostRepSummary {
        sample_size: sample.len() as u64,
        ..Default::default()
    };
    for r in reports.iter().filter(|r| sample.contains(&r.ip)) {
        if !seen.insert(r.ip) {
            continue;
        }
        s.with_reports += 1;
        let (mal, _) = host_maliciousness(r);
        s.malicious += u64::from(mal);
        s.with_mal_urls += u64::from(!r.malicious_urls.is_empty());
        s.with_hosted_malware += u64::from(r.malware_assocs.iter().any(|a| a.assoc_type == AssocType::Hosting));
    }
    s
}

pub const HOSTREP_HEADER: [&str; 5] = ["RESIP Group", "W Reports", "Mal", "W Mal URLs", "W Malware"];

pub fn render_hostrep_table(groups: &[(&str, HostRepSummary)]) -> String {
    let body: Vec<Vec<String>> = groups
        .iter()
        .map(|(name, s)| {
            vec![
                name.to_string(),
                pct_or_na(s.with_reports, s.sample_size),
                pct_or_na(s.malicious, s.sample_size),
                pct_or_na(s.with_mal_urls, s.sample_size),
                pct_or_na(s.with_hosted_malware, s.sample_size),
            ]
        })
        .collect();
    text_table(&HOSTREP_HEADER, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(types: &[AssocType], urls: usize) -> HostReport {
        HostReport {
            ip: "10.0.0.1".parse().unwrap(),
            malicious_urls: (0..urls).map(|i| format!("http://10.0.0.1:{}/Mozi.m", 50_000 + i)).collect(),
            malware_assocs: types
                .iter()
                .enumerate()
                .map(|(i, &t)| MalwareAssoc {
                    hash: format!("{i:064x}"),
                    assoc_type: t,
                })
                .collect(),
        }
    }

    #[test]
    fn truth_table_over_assoc_combinations() {
        use AssocType::*;
        for mask in 0..8u8 {
            let types: Vec<AssocType> = [Embedding, Communicating, Hosting]
                .into_iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t)
                .collect();
            let (mal, reasons) = host_maliciousness(&report(&types, 0));
            assert_eq!(mal, mask & 4 != 0, "mask {mask:03b}");
            assert_eq!(reasons.len(), types.len());
            assert!(host_maliciousness(&report(&types, 1)).0);
        }
    }

    #[test]
    fn json_line_shape() {
        let line = r#"{"ip":"1.2.3.4","malicious_urls":["http://1.2.3.4:8080/Mozi.a"],"malware_assocs":[{"hash":"ab","assoc_type":"communicating"}]}"#;
        let r: HostReport = serde_json::from_str(line).unwrap();
        assert!(host_maliciousness(&r).0);
        let bare: HostReport = serde_json::from_str(r#"{"ip":"1.2.3.4"}"#).unwrap();
        assert_eq!(host_maliciousness(&bare), (false, vec![]));
    }

    #[test]
    fn summary_counts() {
        let sample: HashSet<IpAddr> = ["10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let mut a = report(&[AssocType::Hosting], 0);
        let mut b = report(&[AssocType::Communicating], 2);
        b.ip = "10.0.0.2".parse().unwrap();
        let mut c = report(&[AssocType::Embedding], 0);
        c.ip = "10.0.0.3".parse().unwrap();
        a.malicious_urls.clear();
        let s = host_report_summary(&sample, &[a, b, c]);
        assert_eq!((s.with_reports, s.malicious, s.with_mal_urls, s.with_hosted_malware), (3, 2, 1, 1));
        let t = render_hostrep_table(&[("China", s)]);
        assert_eq!(t.lines().nth(1), Some("China\t75.00%\t50.00%\t25.00%\t25.00%"));
    }

    fn assoc() -> impl Strategy<Value = AssocType> {
        prop_oneof![
            Just(AssocType::Embedding),
            Just(AssocType::Communicating),
            Just(AssocType::Hosting)
        ]
    }

    proptest! {
        #[test]
        fn adding_hosting_never_clears_flag(types in prop::collection::vec(assoc(), 0..6), urls in 0usize..3) {
            let r = report(&types, urls);
            let before = host_maliciousness(&r).0;
            let mut more = types.clone();
            more.push(AssocType::Hosting);
            let after = host_maliciousness(&report(&more, urls)).0;
            prop_assert!(after);
            prop_assert!(after || !before);
        }
    }
}
