use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::net::IpAddr;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::pct_or_na;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SipsLabel {
    pub ip: IpAddr,
    pub is_sips: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SipsRate {
    pub labeled_sips: u64,
    pub sample_size: u64,
    /// Sample ips with no label.
    pub unlabeled: u64,
    pub denominator: u64,
    /// `None` for an empty denominator.
    pub rate: Option<f64>,
}

impl SipsRate {
    pub fn from_counts(labeled_sips: u64, sample_size: u64, unlabeled: u64, exclude_unlabeled: bool) -> Self {
        let denominator = if exclude_unlabeled { sample_size - unlabeled } else { sample_size };
        SipsRate {
            labeled_sips,
            sample_size,
            unlabeled,
            denominator,
            rate: (denominator > 0).then(|| labeled_sips as f64 / denominator as f64),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "{} of {} ({}) labelled SIPS; {} unlabeled",
            self.labeled_sips,
            self.denominator,
            pct_or_na(self.labeled_sips, self.denominator),
            self.unlabeled
        )
    }
}

/// Labels must be unique per ip; duplicates are a config error.
pub fn label_map(labels: &[SipsLabel]) -> Result<HashMap<IpAddr, bool>> {
    let mut m = HashMap::new();
    for l in labels {
        if m.insert(l.ip, l.is_sips).is_some() {
            return Err(Error::Config(format!("duplicate SIPS label for {}", l.ip)));
        }
    }
    Ok(m)
}

pub fn sips_rate(sample: &HashSet<IpAddr>, labels: &HashMap<IpAddr, bool>, exclude_unlabeled: bool) -> SipsRate {
    let mut sips = 0;
    let mut unlabeled = 0;
    for ip in sample {
        match labels.get(ip) {
            Some(true) => sips += 1,
            Some(false) => {}
            None => unlabeled += 1,
        }
    }
    SipsRate::from_counts(sips, sample.len() as u64, unlabeled, exclude_unlabeled)
}

pub fn render_sips_labels(labels: &[SipsLabel]) -> String {
    let mut s = String::from("# ip\tis_sips\n");
    for l in labels {
        s.push_str(&format!("{}\t{}\n", l.ip, l.is_sips));
    }
    s
}

/// `ip<TAB>true|false|1|0` lines; `#` comments.
pub fn read_sips_labels(path: &Path) -> Result<Vec<SipsLabel>> {
    let file = std::fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let label = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::path_io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (ip, flag) = line
            .split_once(['\t', ','])
            .ok_or_else(|| Error::parse(&label, i + 1, "expected ip and flag"))?;
        let ip = ip.trim().parse().map_err(|_| Error::parse(&label, i + 1, "bad ip"))?;
        let is_sips = match flag.trim().to_ascii_lowercase().as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(Error::parse(&label, i + 1, format!("bad flag `{other}`"))),
        };
        out.push(SipsLabel { ip, is_sips });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ips(n: u32) -> HashSet<IpAddr> {
        (0..n).map(|i| IpAddr::V4((0x0a00_0000 + i).into())).collect()
    }

    #[test]
    fn paper_counts() {
        let r = SipsRate::from_counts(20_290, 30_000, 0, true);
        assert_eq!(pct_or_na(r.labeled_sips, r.denominator), "67.63%");
    }

    #[test]
    fn all_false_and_empty() {
        let sample = ips(5);
        let labels: HashMap<IpAddr, bool> = sample.iter().map(|ip| (*ip, false)).collect();
        assert_eq!(sips_rate(&sample, &labels, false).rate, Some(0.0));
        assert_eq!(sips_rate(&HashSet::new(), &labels, false).rate, None);
    }

    #[test]
    fn unlabeled_flag_changes_denominator() {
        let sample = ips(4);
        let mut it = sample.iter();
        let labels = HashMap::from([(*it.next().unwrap(), true), (*it.next().unwrap(), false)]);
        assert_eq!(sips_rate(&sample, &labels, true).rate, Some(0.5));
        assert_eq!(sips_rate(&sample, &labels, false).rate, Some(0.25));
        let dup = [SipsLabel { ip: "1.1.1.1".parse().unwrap(), is_sips: true }; 2];
        assert!(label_map(&dup).is_err());
    }
}
