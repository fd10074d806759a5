use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{predict, FeatureVector, ForestModel, Label, Provenance};
use crate::error::{Error, Result};
use crate::flatfile::{parse_tsv, read_tsv};
use crate::psl::{to_apex, ApexDomain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundtruthRecord {
    pub apex: ApexDomain,
    pub label: Label,
    pub provenance: Provenance,
}

/// Newline-delimited `apex<TAB>label<TAB>provenance` records, one per apex.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Groundtruth {
    pub records: Vec<GroundtruthRecord>,
}

impl Groundtruth {
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut g = Groundtruth::default();
        for rec in parse_tsv(text) {
            if rec.fields.len() < 3 {
                return Err(Error::parse(label, rec.line, "expected apex, label, provenance"));
            }
            let apex = to_apex(rec.fields[0].trim())?;
            let l: Label = rec.fields[1].parse()?;
            let p: Provenance = rec.fields[2].parse()?;
            g.push(GroundtruthRecord {
                apex,
                label: l,
                provenance: p,
            });
        }
        Ok(g)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
        Groundtruth::parse(&text, &path.display().to_string())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# apex\tlabel\tprovenance\n");
        for r in &self.records {
            s.push_str(&format!("{}\t{}\t{}\n", r.apex, r.label, r.provenance));
        }
        s
    }

    pub fn contains(&self, apex: &ApexDomain) -> bool {
        self.records.iter().any(|r| &r.apex == apex)
    }

    /// Appends unless the apex is already labeled; returns whether it was added.
    pub fn push(&mut self, rec: GroundtruthRecord) -> bool {
        if self.contains(&rec.apex) {
            return false;
        }
        self.records.push(rec);
        true
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    pub sample_n: usize,
    pub seed: u64,
    pub round: u32,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            sample_n: 50,
            seed: 0,
            round: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundReport {
    pub round: u32,
    pub candidates: usize,
    pub positives: usize,
    pub sampled: usize,
    pub confirmed: usize,
    pub rejected: usize,
    pub unlabeled: usize,
    /// Fewer positives than requested; all of them were sampled.
    pub exhausted: bool,
}

impl RoundReport {
    pub fn to_text(&self) -> String {
        format!(
            "round\t{}\ncandidates\t{}\npositives\t{}\nsampled\t{}\nconfirmed\t{}\nrejected\t{}\nunlabeled\t{}\nexhausted\t{}\n",
            self.round,
            self.candidates,
            self.positives,
            self.sampled,
            self.confirmed,
            self.rejected,
            self.unlabeled,
            self.exhausted
        )
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapRound {
    /// Sampled positives awaiting manual verdicts, as (apex, score).
    pub pending: Vec<(ApexDomain, f64)>,
    pub added: Vec<GroundtruthRecord>,
    pub report: RoundReport,
}

/// Scores all candidates, samples `sample_n` positives for review and, given
/// verdicts, appends the confirmed ones to `groundtruth`.
pub fn bootstrap_round(
    model: &ForestModel,
    candidates: &[(ApexDomain, FeatureVector)],
    opts: &BootstrapOptions,
    verdicts: Option<&BTreeMap<ApexDomain, Label>>,
    groundtruth: &mut Groundtruth,
) -> Result<BootstrapRound> {
    let mut positives = Vec::new();
    for (apex, fv) in candidates {
        let (label, score) = predict(model, fv.values())?;
        if label.is_rps() {
            positives.push((apex.clone(), score));
        }
    }
    positives.sort_by(|a, b| a.0.cmp(&b.0));
    let exhausted = positives.len() < opts.sample_n;
    let pending: Vec<(ApexDomain, f64)> = if exhausted {
        positives.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picks = index::sample(&mut rng, positives.len(), opts.sample_n).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| positives[i].clone()).collect()
    };

    let mut report = RoundReport {
        round: opts.round,
        candidates: candidates.len(),
        positives: positives.len(),
        sampled: pending.len(),
        exhausted,
        ..Default::default()
    };
    let mut added = Vec::new();
    match verdicts {
        None => report.unlabeled = pending.len(),
        Some(v) => {
            for (apex, _) in &pending {
                match v.get(apex) {
                    Some(Label::Rps) => {
                        report.confirmed += 1;
                        let rec = GroundtruthRecord {
                            apex: apex.clone(),
                            label: Label::Rps,
                            provenance: Provenance::BootstrapRound(opts.round),
                        };
                        if groundtruth.push(rec.clone()) {
                            added.push(rec);
                        }
                    }
                    Some(Label::NonRps) => report.rejected += 1,
                    None => report.unlabeled += 1,
                }
            }
        }
    }
    Ok(BootstrapRound {
        pending,
        added,
        report,
    })
}

pub fn write_pending_labels(path: &Path, pending: &[(ApexDomain, f64)]) -> Result<()> {
    let mut s = String::from("# apex\tscore\n");
    for (apex, score) in pending {
        s.push_str(&format!("{apex}\t{score:.4}\n"));
    }
    std::fs::write(path, s).map_err(|e| Error::path_io(path, e))
}

/// Reads `apex<TAB>verdict` rows.
pub fn read_verdicts(path: &Path) -> Result<BTreeMap<ApexDomain, Label>> {
    let label = path.display().to_string();
    let mut out = BTreeMap::new();
    for rec in read_tsv(path)? {
        if rec.fields.len() < 2 {
            return Err(Error::parse(&label, rec.line, "expected apex, verdict"));
        }
        out.insert(to_apex(rec.fields[0].trim())?, rec.fields[1].parse()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{DecisionTree, ForestParams, Node, N_FEATURES};

    /// One stump: feature 0 above 0.5 votes RPS.
    fn stump_model() -> ForestModel {
        ForestModel {
            params: ForestParams::default(),
            keyword_set_id: String::new(),
            keywords: vec![],
            trees: vec![DecisionTree {
                nodes: vec![
                    Node::Split {
                        feature: 0,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                    },
                    Node::Leaf { rps: 0, non_rps: 3 },
                    Node::Leaf { rps: 3, non_rps: 0 },
                ],
            }],
        }
    }

    fn candidates(pos: usize, neg: usize) -> Vec<(ApexDomain, FeatureVector)> {
        (0..pos + neg)
            .map(|i| {
                let mut v = vec![0.0; N_FEATURES];
                v[0] = if i < pos { 1.0 } else { 0.0 };
                (to_apex(&format!("cand{i:02}.com")).unwrap(), FeatureVector::new(v).unwrap())
            })
            .collect()
    }

    #[test]
    fn scripted_round_grows_by_confirmed() {
        let model = stump_model();
        let cands = candidates(10, 7);
        let opts = BootstrapOptions {
            sample_n: 5,
            seed: 9,
            round: 2,
        };
        let mut gt = Groundtruth::default();
        let first = bootstrap_round(&model, &cands, &opts, None, &mut gt).unwrap();
        assert_eq!(first.pending.len(), 5);
        assert_eq!(first.report.positives, 10);
        assert!(!first.report.exhausted);

        let mut verdicts = BTreeMap::new();
        for (i, (apex, _)) in first.pending.iter().enumerate() {
            verdicts.insert(apex.clone(), if i < 3 { Label::Rps } else { Label::NonRps });
        }
        let second = bootstrap_round(&model, &cands, &opts, Some(&verdicts), &mut gt).unwrap();
        assert_eq!(second.pending, first.pending);
        assert_eq!(gt.len(), 3);
        assert_eq!(second.report.confirmed, 3);
        assert_eq!(second.report.rejected, 2);
        assert!(gt.records.iter().all(|r| r.provenance == Provenance::BootstrapRound(2)));

        let back = Groundtruth::parse(&gt.render(), "gt").unwrap();
        assert_eq!(back, gt);
    }

    #[test]
    fn zero_positives_flag_exhaustion() {
        let mut gt = Groundtruth::default();
        let r = bootstrap_round(&stump_model(), &candidates(0, 4), &BootstrapOptions::default(), None, &mut gt)
            .unwrap();
        assert!(r.pending.is_empty());
        assert!(r.report.exhausted);
    }

    #[test]
    fn pending_and_verdict_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pending.tsv");
        write_pending_labels(&p, &[(to_apex("a.com").unwrap(), 0.75)]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "# apex\tscore\na.com\t0.7500\n");
        let v = dir.path().join("labels.tsv");
        std::fs::write(&v, "a.com\trps\nwww.b.com\tnon_rps\n").unwrap();
        let got = read_verdicts(&v).unwrap();
        assert_eq!(got[&to_apex("b.com").unwrap()], Label::NonRps);
    }
}
