//! Seeded synthetic homepage corpus: RPS-style and ordinary websites, including
//! Chinese pages and keyword-bearing hard negatives.

use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Groundtruth, GroundtruthRecord, Label, Provenance};
use crate::crawl::{ingest_snapshot_bundle, write_snapshot_bundle, Page, RenderMode, WebsiteSnapshot};
use crate::error::{Error, Result};
use crate::psl::{to_apex, ApexDomain};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_rps: usize,
    pub n_non_rps: usize,
    pub seed: u64,
    /// Share of pages (both classes) written in Chinese.
    pub zh_share: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_rps: 110,
            n_non_rps: 1073,
            seed: 7,
            zh_share: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPage {
    pub apex: ApexDomain,
    pub label: Label,
    pub html: String,
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "zen", "tor", "vex", "lu", "pi", "sol", "nex", "ora", "qui", "ba",
    "do", "fy", "gri", "hal", "jo", "ky",
];
const TLDS: &[&str] = &["com", "net", "io", "org", "co", "cn"];

const RPS_TITLES: &[&str] = &[
    "{b} - Residential Proxies",
    "Buy Rotating Residential IPs | {b}",
    "{b}: Premium Proxy Provider",
    "{b} | Residential Proxy Network",
    "Cheap HTTP & SOCKS5 Proxies - {b}",
    "{b} Proxy Service",
    "{b}",
];
const RPS_SENTENCES: &[&str] = &[
    "Buy residential proxies from a trusted provider.",
    "Our rotating proxy pool covers millions of residential IPs in 190 countries.",
    "Every proxy supports HTTP, HTTPS and SOCKS5 protocols.",
    "Get a free trial of our residential IP network today.",
    "Pricing starts at $1.5 per GB with unlimited concurrent sessions.",
    "Static residential proxies and rotating proxies for any use case.",
    "Choose sticky sessions or rotate the IP on every request.",
    "The best proxy provider for web scraping and ad verification.",
    "Flexible price plans for residential and datacenter proxies.",
    "Ethically sourced residential IPs with 99.9% uptime.",
    "Buy proxies by traffic or by port with transparent pricing.",
    "Access geo-targeted IPs at city and ASN level.",
    "Unblockable and undetectable proxies for sneaker sites.",
    "Integrate the proxy API with a single HTTP request.",
    "Free proxies are slow; residential IPs are reliable.",
];
const RPS_WEAK: &[&str] = &[
    "Scale your data collection with our network.",
    "Trusted by thousands of businesses worldwide.",
    "Sign up and start in minutes.",
    "Contact sales for an enterprise plan.",
];

const ZH_RPS_TITLES: &[&str] = &["{b} 住宅代理", "{b} - 动态住宅 IP 代理服务", "{b} 代理 IP 供应商"];
const ZH_RPS_SENTENCES: &[&str] = &[
    "购买住宅代理，稳定高速。",
    "海量动态住宅 IP，支持 HTTP 和 SOCKS5。",
    "免费试用代理 IP。",
    "价格实惠，定价透明。",
    "旋转代理池覆盖全国城市。",
    "专业代理 IP 供应商。",
];
const ZH_NON_TITLES: &[&str] = &["{b} 新闻网", "{b} 在线商城", "{b} 博客"];
const ZH_NON_SENTENCES: &[&str] = &[
    "今日要闻与深度报道。",
    "全场商品包邮，欢迎选购。",
    "分享生活与旅行的点滴。",
    "联系我们获取更多信息。",
    "关于我们的团队与历史。",
];

struct Category {
    titles: &'static [&'static str],
    sentences: &'static [&'static str],
}

const NON_RPS: &[Category] = &[
    Category {
        titles: &["{b} News", "{b} Daily - Breaking News", "{b} Times"],
        sentences: &[
            "Breaking news from around the world, updated every hour.",
            "The city council approved the new budget on Tuesday.",
            "Markets closed higher as technology shares rallied.",
            "Read our analysis of the election results.",
            "Weather forecast: sunny with light winds this weekend.",
            "Subscribe to our newsletter for daily headlines.",
        ],
    },
    Category {
        titles: &["{b} Store", "Shop {b} - Free Shipping", "{b} Online Shop"],
        sentences: &[
            "Buy shoes, bags and accessories at the best price.",
            "Free shipping on all orders over $50.",
            "Compare price and reviews before you buy.",
            "New arrivals every week in our spring collection.",
            "Sign in to track your order and returns.",
            "Gift cards available in any amount.",
        ],
    },
    Category {
        titles: &["{b} - Project Management Software", "{b} Cloud Platform", "{b} for Teams"],
        sentences: &[
            "Plan, track and ship work with your whole team.",
            "Start a free trial, no credit card required.",
            "See pricing for startups and enterprises.",
            "Integrates with the tools you already use.",
            "Our provider network guarantees 99.99% availability.",
            "Secure by default with single sign-on.",
        ],
    },
    Category {
        titles: &["{b} Engineering Blog", "{b} Dev Notes", "{b} - Notes on Systems"],
        sentences: &[
            "Configuring nginx as a reverse proxy for HTTP services.",
            "How we debugged a memory leak in production.",
            "A short guide to TLS certificates and HTTP headers.",
            "Benchmarking database connection pools.",
            "Why our CI pipeline got twice as fast.",
            "Notes on DNS caching and IP anycast.",
        ],
    },
    Category {
        titles: &["{b} Recipes", "{b} Travel", "{b} Photography"],
        sentences: &[
            "A simple weeknight pasta with fresh basil.",
            "Ten things to do on a rainy day in Lisbon.",
            "Choosing the right lens for portrait photography.",
            "Our favorite hiking trails this autumn.",
            "Bake bread at home with only four ingredients.",
        ],
    },
    Category {
        titles: &["{b} University", "{b} Library", "{b} Museum"],
        sentences: &[
            "Applications for the fall semester are now open.",
            "Visit the museum for free on the first Sunday.",
            "Library hours and access for visitors.",
            "Research news from our faculty and students.",
            "Campus map, parking and accessibility information.",
        ],
    },
];

const FILLER: &[&str] = &[
    "About us", "Contact", "Privacy policy", "Terms of service", "Careers", "Help center",
    "Follow us on social media.", "All rights reserved.",
];

fn brand(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pick_sentences(rng: &mut ChaCha8Rng, pool: &[&str], lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| pool.choose(rng).expect("non-empty").to_string()).collect()
}

struct Draft {
    title: String,
    description: Option<String>,
    keywords: Option<String>,
    tags: Option<String>,
    paragraphs: Vec<String>,
    lang: &'static str,
}

fn render(d: &Draft, b: &str, rng: &mut ChaCha8Rng) -> String {
    let mut h = format!("<!DOCTYPE html>\n<html lang=\"{}\"><head><meta charset=\"utf-8\">", d.lang);
    h.push_str(&format!("<title>{}</title>", d.title));
    for (name, v) in [("description", &d.description), ("keywords", &d.keywords), ("tags", &d.tags)] {
        if let Some(v) = v {
            h.push_str(&format!("<meta name=\"{name}\" content=\"{v}\">"));
        }
    }
    h.push_str("<style>body{font-family:sans-serif}</style></head><body>");
    h.push_str(&format!("<header><nav><a href=\"/\">{b}</a> <a href=\"/about\">About</a></nav></header><main>"));
    for p in &d.paragraphs {
        if rng.random_bool(0.2) {
            h.push_str(&format!("<h2>{p}</h2>"));
        } else {
            h.push_str(&format!("<p>{p}</p>"));
        }
    }
    let footer: Vec<String> = pick_sentences(rng, FILLER, 1, 3);
    h.push_str(&format!(
        "</main><footer>{}</footer><script>window.dataLayer=[];</script></body></html>\n",
        footer.join(" | ")
    ));
    h
}

fn rps_draft(rng: &mut ChaCha8Rng, b: &str, zh: bool) -> Draft {
    if zh {
        let title = ZH_RPS_TITLES.choose(rng).expect("non-empty").replace("{b}", b);
        return Draft {
            title,
            description: rng.random_bool(0.6).then(|| "住宅代理 IP 服务".to_string()),
            keywords: rng.random_bool(0.5).then(|| "代理,住宅 IP,HTTP 代理".to_string()),
            tags: None,
            paragraphs: pick_sentences(rng, ZH_RPS_SENTENCES, 2, 6),
            lang: "zh",
        };
    }
    let title = RPS_TITLES.choose(rng).expect("non-empty").replace("{b}", b);
    let weak = rng.random_bool(0.15);
    let mut paragraphs = if weak {
        pick_sentences(rng, RPS_SENTENCES, 1, 2)
    } else {
        pick_sentences(rng, RPS_SENTENCES, 3, 9)
    };
    paragraphs.extend(pick_sentences(rng, RPS_WEAK, 0, 3));
    Draft {
        title,
        description: rng
            .random_bool(0.7)
            .then(|| format!("{b} offers residential proxies and rotating IPs at a fair price.")),
        keywords: rng.random_bool(0.5).then(|| "proxy, residential proxies, rotating ip, socks5".into()),
        tags: rng.random_bool(0.1).then(|| "proxy".into()),
        paragraphs,
        lang: "en",
    }
}

fn non_rps_draft(rng: &mut ChaCha8Rng, b: &str, zh: bool) -> Draft {
    if zh {
        return Draft {
            title: ZH_NON_TITLES.choose(rng).expect("non-empty").replace("{b}", b),
            description: rng.random_bool(0.5).then(|| "欢迎访问".to_string()),
            keywords: None,
            tags: None,
            paragraphs: pick_sentences(rng, ZH_NON_SENTENCES, 2, 6),
            lang: "zh",
        };
    }
    let cat = NON_RPS.choose(rng).expect("non-empty");
    Draft {
        title: cat.titles.choose(rng).expect("non-empty").replace("{b}", b),
        description: rng
            .random_bool(0.6)
            .then(|| cat.sentences.choose(rng).expect("non-empty").to_string()),
        keywords: None,
        tags: None,
        paragraphs: pick_sentences(rng, cat.sentences, 2, 8),
        lang: "en",
    }
}

/// Generates the corpus; identical `spec` gives identical pages.
pub fn generate_corpus(spec: &SyntheticSpec) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pages = Vec::with_capacity(spec.n_rps + spec.n_non_rps);
    for i in 0..spec.n_rps + spec.n_non_rps {
        let rps = i < spec.n_rps;
        let b = brand(&mut rng);
        let tld = TLDS.choose(&mut rng).expect("non-empty");
        let apex = to_apex(&format!("{b}{i}.{tld}")).expect("generated names are valid");
        let zh = rng.random_bool(spec.zh_share);
        let display = capitalize(&b);
        let draft = if rps {
            rps_draft(&mut rng, &display, zh)
        } else {
            non_rps_draft(&mut rng, &display, zh)
        };
        pages.push(SyntheticPage {
            apex,
            label: if rps { Label::Rps } else { Label::NonRps },
            html: render(&draft, &display, &mut rng),
        });
    }
    pages
}

/// Writes one homepage-only snapshot bundle per site under `dir/bundles/<apex>/`
/// plus `dir/groundtruth.tsv`.
pub fn write_corpus(pages: &[SyntheticPage], dir: &Path) -> Result<()> {
    let fetch_time = Utc.with_ymd_and_hms(2021, 11, 1, 0, 0, 0).single().expect("valid date");
    let mut gt = Groundtruth::default();
    for p in pages {
        let snapshot = WebsiteSnapshot {
            apex: p.apex.clone(),
            pages: vec![Page {
                url: format!("https://{}/", p.apex)
                    .parse()
                    .map_err(|e: url::ParseError| Error::Config(e.to_string()))?,
                fetch_time,
                html: p.html.as_bytes().to_vec(),
                render_mode: RenderMode::Static,
            }],
            fetch_failed: false,
            failures: vec![],
        };
        write_snapshot_bundle(&snapshot, &dir.join("bundles").join(p.apex.as_str()))?;
        gt.push(GroundtruthRecord {
            apex: p.apex.clone(),
            label: p.label,
            provenance: if p.label.is_rps() {
                Provenance::PriorWork
            } else {
                Provenance::TopSites
            },
        });
    }
    let path = dir.join("groundtruth.tsv");
    std::fs::write(&path, gt.render()).map_err(|e| Error::path_io(&path, e))
}

/// Loads a corpus written by [`write_corpus`] (homepage of each bundle).
pub fn read_corpus(dir: &Path) -> Result<Vec<SyntheticPage>> {
    let gt = Groundtruth::read(&dir.join("groundtruth.tsv"))?;
    gt.records
        .iter()
        .map(|r| {
            let snap = ingest_snapshot_bundle(&dir.join("bundles").join(r.apex.as_str()), Some(&r.apex))?;
            let html = snap
                .homepage()
                .map(|p| String::from_utf8_lossy(&p.html).into_owned())
                .unwrap_or_default();
            Ok(SyntheticPage {
                apex: r.apex.clone(),
                label: r.label,
                html,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SyntheticSpec {
            n_rps: 20,
            n_non_rps: 50,
            ..Default::default()
        };
        let a = generate_corpus(&spec);
        assert_eq!(a, generate_corpus(&spec));
        assert_eq!(a.iter().filter(|p| p.label.is_rps()).count(), 20);
        let mut apexes: Vec<_> = a.iter().map(|p| &p.apex).collect();
        apexes.sort();
        apexes.dedup();
        assert_eq!(apexes.len(), 70);
    }

    #[test]
    fn disk_round_trip() {
        let spec = SyntheticSpec {
            n_rps: 3,
            n_non_rps: 4,
            ..Default::default()
        };
        let pages = generate_corpus(&spec);
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&pages, dir.path()).unwrap();
        assert_eq!(read_corpus(dir.path()).unwrap(), pages);
    }
}
