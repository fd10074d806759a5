//! Search-engine query jobs and ingestion of exported result files into
//! deduplicated per-apex candidates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::flatfile::{self, Record};
use crate::psl::{to_apex, ApexDomain};

pub const MAX_RESULTS_CAP: u32 = 1000;

/// The bundled bilingual keyword table (row number, English, Chinese).
pub const BUNDLED_QUERY_TABLE: &str = include_str!("../data/query_keywords.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Google,
    Bing,
    Baidu,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Zh];
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Google, Engine::Bing, Engine::Baidu];
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Google => "google",
            Engine::Bing => "bing",
            Engine::Baidu => "baidu",
        }
    }
}

impl FromStr for Language {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::Config(format!("unknown language `{other}`"))),
        }
    }
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "google" => Ok(Engine::Google),
            "bing" => Ok(Engine::Bing),
            "baidu" => Ok(Engine::Baidu),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRow {
    pub english: String,
    pub chinese: String,
}

impl QueryRow {
    pub fn variant(&self, lang: Language) -> &str {
        match lang {
            Language::En => &self.english,
            Language::Zh => &self.chinese,
        }
    }
}

/// Which keyword rows to query, in which languages, on which engines.
#[derive(Debug, Clone)]
pub struct QueryTable {
    pub rows: Vec<QueryRow>,
    pub languages: Vec<Language>,
    pub engines: Vec<Engine>,
    pub max_results: u32,
}

impl QueryTable {
    /// Parses `no<TAB>english<TAB>chinese` rows; all languages and engines enabled.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in flatfile::parse_tsv(text) {
            let (Some(en), Some(zh)) = (rec.field(1), rec.field(2)) else {
                return Err(Error::parse("query table", rec.line, "expected no, english, chinese"));
            };
            if en.trim().is_empty() || zh.trim().is_empty() {
                return Err(Error::parse("query table", rec.line, "missing language variant"));
            }
            rows.push(QueryRow {
                english: en.trim().to_string(),
                chinese: zh.trim().to_string(),
            });
        }
        Ok(QueryTable {
            rows,
            languages: Language::ALL.to_vec(),
            engines: Engine::ALL.to_vec(),
            max_results: MAX_RESULTS_CAP,
        })
    }

    pub fn bundled() -> Self {
        QueryTable::parse(BUNDLED_QUERY_TABLE).expect("bundled query table parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SearchQueryJob {
    pub keyword: String,
    pub language: Language,
    pub engine: Engine,
    pub max_results: u32,
}

impl SearchQueryJob {
    pub fn id(&self) -> String {
        query_id(self.engine, self.language, &self.keyword)
    }
}

fn query_id(engine: Engine, language: Language, keyword: &str) -> String {
    format!("{engine}:{language}:{keyword}")
}

/// One job per (row, language variant, engine).
pub fn build_query_jobs(table: &QueryTable) -> Result<Vec<SearchQueryJob>> {
    if table.rows.is_empty() || table.languages.is_empty() || table.engines.is_empty() {
        return Err(Error::EmptyQueryTable);
    }
    let max_results = table.max_results.min(MAX_RESULTS_CAP);
    let mut jobs = Vec::with_capacity(table.rows.len() * table.languages.len() * table.engines.len());
    for row in &table.rows {
        for &language in &table.languages {
            for &engine in &table.engines {
                jobs.push(SearchQueryJob {
                    keyword: row.variant(language).to_string(),
                    language,
                    engine,
                    max_results,
                });
            }
        }
    }
    Ok(jobs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResultEntry {
    pub url: Url,
    pub query: SearchQueryJob,
    pub rank: u32,
}

impl SearchResultEntry {
    /// Parses one `url, keyword, language, engine, rank` row.
    pub fn from_record(rec: &Record) -> std::result::Result<Self, String> {
        if rec.fields.len() < 5 {
            return Err(format!("expected 5 fields, got {}", rec.fields.len()));
        }
        let url = Url::parse(rec.fields[0].trim()).map_err(|e| format!("bad url: {e}"))?;
        let language: Language = rec.fields[2].parse().map_err(|e: Error| e.to_string())?;
        let engine: Engine = rec.fields[3].parse().map_err(|e: Error| e.to_string())?;
        let rank: u32 = rec.fields[4]
            .trim()
            .parse()
            .map_err(|_| format!("bad rank `{}`", rec.fields[4]))?;
        if rank == 0 {
            return Err("rank must be >= 1".into());
        }
        Ok(SearchResultEntry {
            url,
            query: SearchQueryJob {
                keyword: rec.fields[1].trim().to_string(),
                language,
                engine,
                max_results: MAX_RESULTS_CAP,
            },
            rank,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpsCandidate {
    pub apex: ApexDomain,
    pub source_urls: BTreeSet<String>,
    pub discovery_queries: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub candidates: Vec<RpsCandidate>,
    pub entries_read: usize,
    pub distinct_urls: usize,
    pub error_lines: usize,
}

/// Normalized dedup key: fragment stripped, query string kept.
pub fn normalize_url(url: &Url) -> Url {
    let mut u = url.clone();
    u.set_fragment(None);
    u
}

/// Groups result rows by apex. Unparseable rows are skipped and counted.
pub fn ingest_records(path_label: &str, records: &[Record]) -> IngestReport {
    let mut by_apex: BTreeMap<ApexDomain, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    let mut urls = BTreeSet::new();
    let mut report = IngestReport::default();
    for rec in records {
        let entry = match SearchResultEntry::from_record(rec) {
            Ok(e) => e,
            Err(msg) => {
                log::warn!("{path_label}:{}: skipping line: {msg}", rec.line);
                report.error_lines += 1;
                continue;
            }
        };
        let url = normalize_url(&entry.url);
        let apex = match url.host_str().map(to_apex) {
            Some(Ok(a)) => a,
            Some(Err(e)) => {
                log::warn!("{path_label}:{}: skipping line: {e}", rec.line);
                report.error_lines += 1;
                continue;
            }
            None => {
                log::warn!("{path_label}:{}: skipping line: url has no host", rec.line);
                report.error_lines += 1;
                continue;
            }
        };
        report.entries_read += 1;
        let url = url.to_string();
        urls.insert(url.clone());
        let slot = by_apex.entry(apex).or_default();
        slot.0.insert(url);
        slot.1.insert(entry.query.id());
    }
    report.distinct_urls = urls.len();
    report.candidates = by_apex
        .into_iter()
        .map(|(apex, (source_urls, discovery_queries))| RpsCandidate {
            apex,
            source_urls,
            discovery_queries,
        })
        .collect();
    report
}

pub fn ingest_search_results(path: &Path) -> Result<IngestReport> {
    let records = flatfile::read_tsv(path)?;
    Ok(ingest_records(&path.display().to_string(), &records))
}

/// `apex<TAB>url_count<TAB>urls(space separated)<TAB>queries(space separated)` rows.
pub fn render_candidates(candidates: &[RpsCandidate]) -> String {
    let mut out = String::from("apex\turl_count\tsource_urls\tdiscovery_queries\n");
    for c in candidates {
        let urls: Vec<&str> = c.source_urls.iter().map(String::as_str).collect();
        let queries: Vec<String> = c
            .discovery_queries
            .iter()
            .map(|q| q.replace(' ', "+"))
            .collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            c.apex,
            c.source_urls.len(),
            urls.join(" "),
            queries.join(" ")
        ));
    }
    out
}
