//! Website crawling, snapshot bundles, homepage text extraction and NLP preprocessing.

mod bundle;
mod extract;
mod fetch;
pub mod text;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::psl::ApexDomain;

pub use bundle::{ingest_snapshot_bundle, write_snapshot_bundle, MANIFEST};
pub use extract::{extract_from_str, extract_text_bundle, strip_tags};
pub use fetch::{crawl_many, crawl_site, CrawlOptions, Politeness, DEFAULT_PAGE_CAP};
pub use text::{
    detect_and_translate, detect_language, lemmatize, preprocess, tokenize, ComponentTokens,
    StubTranslator, Stopwords, TextBundle, TokenizedBundle, TranslateError, Translator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    Static,
    Dynamic,
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Static => "static",
            RenderMode::Dynamic => "dynamic",
        })
    }
}

impl FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(RenderMode::Static),
            "dynamic" => Ok(RenderMode::Dynamic),
            other => Err(Error::Config(format!("unknown render mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub url: Url,
    pub fetch_time: DateTime<Utc>,
    pub html: Vec<u8>,
    pub render_mode: RenderMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageFailure {
    pub url: Url,
    pub reason: String,
}

/// Crawled pages of one site, homepage first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebsiteSnapshot {
    pub apex: ApexDomain,
    pub pages: Vec<Page>,
    /// The homepage itself could not be fetched.
    pub fetch_failed: bool,
    pub failures: Vec<PageFailure>,
}

impl WebsiteSnapshot {
    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn homepage(&self) -> Option<&Page> {
        self.pages.first()
    }

    /// Extracted text bundle of the homepage (all-empty when nothing was fetched).
    pub fn homepage_bundle(&self) -> TextBundle {
        self.homepage()
            .map(|p| extract_text_bundle(&p.html))
            .unwrap_or_default()
    }
}
