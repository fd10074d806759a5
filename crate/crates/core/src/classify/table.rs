use std::path::Path;

use super::{FeatureVector, Label, LabeledExample, Provenance, N_FEATURES};
use crate::error::{Error, Result};
use crate::flatfile::{parse_tsv, Record};
use crate::psl::{to_apex, ApexDomain};

/// One featurized site. Unlabeled rows (candidates) carry `-` in both label columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub apex: ApexDomain,
    pub label: Option<(Label, Provenance)>,
    pub features: FeatureVector,
}

impl FeatureRow {
    pub fn labeled(&self) -> Option<LabeledExample> {
        self.label.map(|(label, provenance)| LabeledExample {
            apex: self.apex.clone(),
            features: self.features.clone(),
            label,
            provenance,
        })
    }
}

/// `apex, label, provenance, f0..f71`; values use the shortest round-trip repr.
pub fn render_feature_table(rows: &[FeatureRow]) -> String {
    let mut s = String::from("# apex\tlabel\tprovenance");
    for i in 0..N_FEATURES {
        s.push_str(&format!("\tf{i}"));
    }
    s.push('\n');
    for r in rows {
        let (l, p) = r
            .label
            .map_or(("-".to_string(), "-".to_string()), |(l, p)| (l.to_string(), p.to_string()));
        s.push_str(&format!("{}\t{l}\t{p}", r.apex));
        for v in r.features.values() {
            s.push_str(&format!("\t{v}"));
        }
        s.push('\n');
    }
    s
}

fn parse_row(rec: &Record, label: &str) -> Result<FeatureRow> {
    let f = &rec.fields;
    if f.len() != 3 + N_FEATURES {
        return Err(Error::parse(label, rec.line, format!("expected {} fields, got {}", 3 + N_FEATURES, f.len())));
    }
    let apex = to_apex(f[0].trim())?;
    let lab = match (f[1].trim(), f[2].trim()) {
        ("-", _) => None,
        (l, p) => Some((l.parse()?, p.parse()?)),
    };
    let values = f[3..]
        .iter()
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::parse(label, rec.line, e.to_string()))?;
    Ok(FeatureRow {
        apex,
        label: lab,
        features: FeatureVector::new(values)?,
    })
}

pub fn parse_feature_table(text: &str, label: &str) -> Result<Vec<FeatureRow>> {
    parse_tsv(text).map(|rec| parse_row(&rec, label)).collect()
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
    parse_feature_table(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut v = vec![0.0; N_FEATURES];
        v[1] = 1.0 / 3.0;
        v[30] = 0.1 + 0.2;
        let rows = vec![
            FeatureRow {
                apex: to_apex("a.com").unwrap(),
                label: Some((Label::Rps, Provenance::BootstrapRound(2))),
                features: FeatureVector::new(v).unwrap(),
            },
            FeatureRow {
                apex: to_apex("b.net").unwrap(),
                label: None,
                features: FeatureVector::zeros(),
            },
        ];
        let text = render_feature_table(&rows);
        assert_eq!(parse_feature_table(&text, "t").unwrap(), rows);
        assert!(parse_feature_table("a.com\trps\tprior_work\t1\n", "t").is_err());
    }
}
