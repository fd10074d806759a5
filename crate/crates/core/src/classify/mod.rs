//! RPS website classifier: keyword selection, 72-feature extraction, random forest,
//! k-fold evaluation and the groundtruth bootstrap loop.

mod bootstrap;
mod eval;
mod features;
mod forest;
pub mod synth;
mod table;
mod tfidf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatfile::sha256_hex;
use crate::psl::ApexDomain;

pub use bootstrap::{
    bootstrap_round, read_verdicts, write_pending_labels, BootstrapOptions, BootstrapRound,
    Groundtruth, GroundtruthRecord, RoundReport,
};
pub use eval::{kfold_eval, EvalReport, FoldScore};
pub use features::{extract_features, featurize_html, zh_surface_forms};
pub use forest::{
    best_split, predict, train_forest, DecisionTree, ForestModel, ForestParams, Node,
    DEFAULT_MAX_FEATURES,
};
pub use table::{parse_feature_table, read_feature_table, render_feature_table, FeatureRow};
pub use tfidf::compute_tfidf_gaps;

pub const N_KEYWORDS: usize = 12;
pub const N_COMPONENTS: usize = 4;
pub const N_FEATURES: usize = N_KEYWORDS * 2 + N_COMPONENTS * N_KEYWORDS;
pub const COMPONENTS: [&str; N_COMPONENTS] = ["title", "keywords_meta", "description_meta", "tags_meta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "rps")]
    Rps,
    #[serde(rename = "non_rps")]
    NonRps,
}

impl Label {
    pub fn is_rps(self) -> bool {
        self == Label::Rps
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Rps => "rps",
            Label::NonRps => "non_rps",
        })
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rps" | "1" | "yes" | "true" => Ok(Label::Rps),
            "non_rps" | "nonrps" | "non-rps" | "0" | "no" | "false" => Ok(Label::NonRps),
            other => Err(Error::Config(format!("unknown label `{other}`"))),
        }
    }
}

/// Where a labeled example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    PriorWork,
    TopSites,
    BootstrapRound(u32),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::PriorWork => f.write_str("prior_work"),
            Provenance::TopSites => f.write_str("top_sites"),
            Provenance::BootstrapRound(n) => write!(f, "bootstrap_round_{n}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "prior_work" => Ok(Provenance::PriorWork),
            "top_sites" => Ok(Provenance::TopSites),
            other => other
                .strip_prefix("bootstrap_round_")
                .and_then(|n| n.parse().ok())
                .map(Provenance::BootstrapRound)
                .ok_or_else(|| Error::Config(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSpec {
    pub keyword: String,
    pub avg_tfidf_rps: f64,
    pub avg_tfidf_nonrps: f64,
    pub gap: f64,
}

impl KeywordSpec {
    pub fn new(keyword: &str, avg_tfidf_rps: f64, avg_tfidf_nonrps: f64) -> Self {
        KeywordSpec {
            keyword: keyword.to_lowercase(),
            avg_tfidf_rps,
            avg_tfidf_nonrps,
            gap: avg_tfidf_rps - avg_tfidf_nonrps,
        }
    }
}

/// Exactly twelve keywords in a fixed order; the order defines the feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    specs: Vec<KeywordSpec>,
}

const BUNDLED_KEYWORDS: [(&str, f64, f64); N_KEYWORDS] = [
    ("proxy", 0.41, 0.01),
    ("proxies", 0.40, 0.00),
    ("ip", 0.26, 0.00),
    ("residential", 0.14, 0.00),
    ("ips", 0.11, 0.00),
    ("free", 0.08, 0.04),
    ("http", 0.08, 0.00),
    ("buy", 0.06, 0.01),
    ("price", 0.05, 0.01),
    ("rotating", 0.04, 0.00),
    ("pricing", 0.03, 0.00),
    ("provider", 0.02, 0.00),
];

impl KeywordSet {
    pub fn new(specs: Vec<KeywordSpec>) -> Result<Self> {
        if specs.len() != N_KEYWORDS {
            return Err(Error::KeywordCount {
                expected: N_KEYWORDS,
                got: specs.len(),
            });
        }
        Ok(KeywordSet { specs })
    }

    /// The published keyword table with its class averages.
    pub fn bundled() -> Self {
        KeywordSet {
            specs: BUNDLED_KEYWORDS
                .iter()
                .map(|(k, r, n)| KeywordSpec::new(k, *r, *n))
                .collect(),
        }
    }

    /// Top twelve of a ranked gap list.
    pub fn from_ranked(ranked: &[KeywordSpec]) -> Result<Self> {
        KeywordSet::new(ranked.iter().take(N_KEYWORDS).cloned().collect())
    }

    pub fn specs(&self) -> &[KeywordSpec] {
        &self.specs
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.keyword.as_str())
    }

    /// Stable identifier: sha256 over the ordered keyword list.
    pub fn id(&self) -> String {
        let joined: Vec<&str> = self.keywords().collect();
        sha256_hex(joined.join("\n").as_bytes())[..16].to_string()
    }
}

/// 72 feature values. Slots `2k`/`2k+1` hold kw_num/kw_ratio of keyword k;
/// slot `24 + 12c + k` holds kw_pos of keyword k in component c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: N_FEATURES,
                got: values.len(),
            });
        }
        Ok(FeatureVector(values))
    }

    pub fn zeros() -> Self {
        FeatureVector(vec![0.0; N_FEATURES])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_index(k: usize) -> usize {
        2 * k
    }

    pub fn ratio_index(k: usize) -> usize {
        2 * k + 1
    }

    pub fn pos_index(component: usize, k: usize) -> usize {
        2 * N_KEYWORDS + component * N_KEYWORDS + k
    }

    pub fn kw_num(&self, k: usize) -> f64 {
        self.0[Self::num_index(k)]
    }

    pub fn kw_ratio(&self, k: usize) -> f64 {
        self.0[Self::ratio_index(k)]
    }

    pub fn kw_pos(&self, component: usize, k: usize) -> f64 {
        self.0[Self::pos_index(component, k)]
    }

    pub(crate) fn set(&mut self, i: usize, v: f64) {
        self.0[i] = v;
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Vec<f64> {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub apex: ApexDomain,
    pub features: FeatureVector,
    pub label: Label,
    pub provenance: Provenance,
}
