//! Run configuration: one TOML file, every field defaulted, `RESIP_DATA_ROOT`
//! overriding the data root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatfile::sha256_hex;

pub const DATA_ROOT_ENV: &str = "RESIP_DATA_ROOT";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    pub page_cap: usize,
    pub politeness: bool,
    pub delay_ms: u64,
    pub timeout_secs: u64,
    pub workers: usize,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            page_cap: crate::crawl::DEFAULT_PAGE_CAP,
            politeness: true,
            delay_ms: 500,
            timeout_secs: 20,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub n_trees: usize,
    pub k: usize,
    pub max_features: usize,
    pub threshold: f64,
    pub bootstrap_sample: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            n_trees: 200,
            k: 10,
            max_features: crate::classify::DEFAULT_MAX_FEATURES,
            threshold: 0.5,
            bootstrap_sample: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Probes per second.
    pub rate: f64,
    pub duration_secs: Option<u64>,
    pub concurrency: usize,
    pub probes_per_service: u64,
    pub timeout_secs: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            rate: 1.0,
            duration_secs: None,
            concurrency: 8,
            probes_per_service: 100,
            timeout_secs: crate::infiltrate::DEFAULT_TIMEOUT.as_secs(),
        }
    }
}

/// Optional input locations; relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub patterns: Option<PathBuf>,
    pub endpoints: Vec<PathBuf>,
    pub gateways: Option<PathBuf>,
    pub geo_table: Option<PathBuf>,
    pub mtf_feed: Option<PathBuf>,
    pub host_reports: Option<PathBuf>,
    pub sips_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub seeds: BTreeMap<String, u64>,
    pub crawl: CrawlConfig,
    pub classify: ClassifyConfig,
    pub campaign: CampaignConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_root: PathBuf::from("resip-data"),
            seeds: BTreeMap::new(),
            crawl: CrawlConfig::default(),
            classify: ClassifyConfig::default(),
            campaign: CampaignConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// sha256 of the file bytes, or of the serialized defaults.
    pub hash: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` (or takes defaults) and applies the environment override.
    pub fn load(path: Option<&Path>) -> Result<LoadedConfig> {
        let (mut config, hash) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::path_io(p, e))?;
                let mut c = RunConfig::parse(&text)?;
                let base = p.parent().unwrap_or(Path::new(""));
                c.resolve_relative(base);
                (c, sha256_hex(text.as_bytes()))
            }
            None => {
                let c = RunConfig::default();
                let text = toml::to_string(&c).map_err(|e| Error::Config(e.to_string()))?;
                (c, sha256_hex(text.as_bytes()))
            }
        };
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            config.data_root = PathBuf::from(root);
        }
        Ok(LoadedConfig { config, hash })
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_root);
        let paths = &mut self.paths;
        for p in [
            &mut paths.patterns,
            &mut paths.gateways,
            &mut paths.geo_table,
            &mut paths.mtf_feed,
            &mut paths.host_reports,
            &mut paths.sips_labels,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        paths.endpoints.iter_mut().for_each(fix);
    }

    pub fn seed(&self, stage: &str) -> u64 {
        self.seeds.get(stage).copied().unwrap_or(DEFAULT_SEED)
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.data_root.join(stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.classify.n_trees, 200);
        assert_eq!(c.classify.k, 10);
        assert_eq!(c.seed("classify"), DEFAULT_SEED);
    }

    #[test]
    fn partial_file_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            "data_root = \"out\"\n[seeds]\nclassify = 11\n[classify]\nn_trees = 50\n[paths]\ngeo_table = \"geo.csv\"\n",
        )
        .unwrap();
        let l = RunConfig::load(Some(&p)).unwrap();
        assert_eq!(l.config.seed("classify"), 11);
        assert_eq!(l.config.classify.n_trees, 50);
        assert_eq!(l.config.classify.k, 10);
        assert_eq!(l.config.paths.geo_table, Some(dir.path().join("geo.csv")));
        assert_eq!(l.hash.len(), 64);
        assert!(RunConfig::parse("[classify]\nntrees = 3\n").is_err());
    }
}
