use std::collections::{HashSet, VecDeque};
use std::net::SocketAddr;
use std::time::Duration;

use chrono::Utc;
use futures::stream::{self, StreamExt};
use reqwest::redirect;
use scraper::{Html, Selector};
use url::Url;

use super::{Page, PageFailure, RenderMode, WebsiteSnapshot};
use crate::error::{Error, Result};
use crate::psl::{to_apex, ApexDomain};

pub const DEFAULT_PAGE_CAP: usize = 100;

#[derive(Debug, Clone)]
pub struct Politeness {
    /// Global on/off switch for the inter-request delay.
    pub enabled: bool,
    pub delay: Duration,
    pub user_agent: String,
}

impl Default for Politeness {
    fn default() -> Self {
        Politeness {
            enabled: true,
            delay: Duration::from_millis(500),
            user_agent: concat!(
                "resipscope-crawler/",
                env!("CARGO_PKG_VERSION"),
                " (research crawler; one request per host at a time)"
            )
            .to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrawlOptions {
    pub page_cap: usize,
    pub politeness: Politeness,
    pub timeout: Duration,
    /// Homepage override; defaults to `http://<apex>/`.
    pub homepage: Option<Url>,
    /// Static host → socket address overrides (fixtures, pinned resolution).
    pub resolve: Vec<(String, SocketAddr)>,
}

impl Default for CrawlOptions {
    fn default() -> Self {
        CrawlOptions {
            page_cap: DEFAULT_PAGE_CAP,
            politeness: Politeness::default(),
            timeout: Duration::from_secs(20),
            homepage: None,
            resolve: Vec::new(),
        }
    }
}

fn same_apex(url: &Url, apex: &ApexDomain) -> bool {
    matches!(url.scheme(), "http" | "https")
        && url
            .host_str()
            .and_then(|h| to_apex(h).ok())
            .is_some_and(|a| &a == apex)
}

fn build_client(apex: &ApexDomain, opts: &CrawlOptions) -> Result<reqwest::Client> {
    let redirect_apex = apex.clone();
    let policy = redirect::Policy::custom(move |attempt| {
        if attempt.previous().len() >= 5 {
            attempt.error("too many redirects")
        } else if same_apex(attempt.url(), &redirect_apex) {
            attempt.follow()
        } else {
            attempt.stop()
        }
    });
    let mut builder = reqwest::Client::builder()
        .user_agent(opts.politeness.user_agent.clone())
        .timeout(opts.timeout)
        .redirect(policy);
    for (host, addr) in &opts.resolve {
        builder = builder.resolve(host, *addr);
    }
    builder.build().map_err(|e| Error::Http(e.to_string()))
}

fn extract_links(base: &Url, html: &[u8]) -> Vec<Url> {
    let text = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&text);
    let sel = Selector::parse("a[href]").expect("static selector");
    doc.select(&sel)
        .filter_map(|a| a.value().attr("href"))
        .filter_map(|href| base.join(href.trim()).ok())
        .map(|mut u| {
            u.set_fragment(None);
            u
        })
        .collect()
}

/// Breadth-first crawl of one site. Only same-apex links are followed, each url is
/// requested at most once, and requests within the site are strictly sequential.
pub async fn crawl_site(apex: &ApexDomain, opts: &CrawlOptions) -> Result<WebsiteSnapshot> {
    let client = build_client(apex, opts)?;
    let home = match &opts.homepage {
        Some(u) => u.clone(),
        None => Url::parse(&format!("http://{apex}/")).map_err(|e| Error::Config(e.to_string()))?,
    };
    let mut snapshot = WebsiteSnapshot {
        apex: apex.clone(),
        pages: Vec::new(),
        fetch_failed: false,
        failures: Vec::new(),
    };
    let mut seen: HashSet<Url> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(home.clone());
    queue.push_back(home);
    let mut first = true;

    while let Some(url) = queue.pop_front() {
        if snapshot.pages.len() >= opts.page_cap {
            break;
        }
        if !first && opts.politeness.enabled && !opts.politeness.delay.is_zero() {
            tokio::time::sleep(opts.politeness.delay).await;
        }
        let is_home = first;
        first = false;
        match fetch_page(&client, &url).await {
            Ok(page) => {
                for link in extract_links(&page.url, &page.html) {
                    if same_apex(&link, apex) && seen.insert(link.clone()) {
                        queue.push_back(link);
                    }
                }
                snapshot.pages.push(page);
            }
            Err(reason) => {
                log::debug!("crawl {apex}: {url}: {reason}");
                if is_home {
                    snapshot.fetch_failed = true;
                }
                snapshot.failures.push(PageFailure { url, reason });
            }
        }
    }
    Ok(snapshot)
}

async fn fetch_page(client: &reqwest::Client, url: &Url) -> std::result::Result<Page, String> {
    let resp = client
        .get(url.clone())
        .send()
        .await
        .map_err(|e| format!("request failed: {e}"))?;
    let status = resp.status();
    if status.is_redirection() {
        return Err(format!("off-site redirect ({status})"));
    }
    if !status.is_success() {
        return Err(format!("http status {status}"));
    }
    let is_html = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_none_or(|ct| ct.contains("html"));
    if !is_html {
        return Err("not an html document".into());
    }
    let final_url = resp.url().clone();
    let html = resp
        .bytes()
        .await
        .map_err(|e| format!("body read failed: {e}"))?
        .to_vec();
    Ok(Page {
        url: final_url,
        fetch_time: Utc::now(),
        html,
        render_mode: RenderMode::Static,
    })
}

/// Crawls several sites with at most `workers` in flight; results sorted by apex.
pub async fn crawl_many(
    apexes: &[ApexDomain],
    opts: &CrawlOptions,
    workers: usize,
) -> Vec<(ApexDomain, Result<WebsiteSnapshot>)> {
    let mut out: Vec<(ApexDomain, Result<WebsiteSnapshot>)> = stream::iter(apexes.iter().cloned())
        .map(|apex| async move {
            let snap = crawl_site(&apex, opts).await;
            (apex, snap)
        })
        .buffer_unordered(workers.max(1))
        .collect()
        .await;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
