use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DirectResipEntry, EntrySource, EntryStore};
use crate::error::{Error, Result};
use crate::infiltrate::{Credentials, ProxyProtocol};
use crate::types::ServiceId;

/// JSON pointers into one API response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapping {
    /// Pointer to the array of entries; empty means the document root.
    #[serde(default)]
    pub items: String,
    pub ip: String,
    pub port: String,
    #[serde(default)]
    pub username: Option<String>,
    #[serde(default)]
    pub password: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEndpointConfig {
    pub service: ServiceId,
    /// `{name}` placeholders are filled from `params`.
    pub url: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    /// HTTP basic auth for the API itself.
    #[serde(default)]
    pub auth: Option<Credentials>,
    #[serde(default = "default_poll")]
    pub poll_interval_secs: u64,
    #[serde(default)]
    pub protocol: Option<ProxyProtocol>,
    pub mapping: FieldMapping,
    /// A response captured from the live API; the mapping must accept it.
    pub sample_response: String,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_retry_base")]
    pub retry_base_ms: u64,
}

fn default_poll() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}
fn default_retry_base() -> u64 {
    500
}

impl ApiEndpointConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ApiEndpointConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
        ApiEndpointConfig::parse(&text)
    }

    /// The mapping must turn the stored sample into at least one entry, with no failures.
    pub fn validate(&self) -> Result<()> {
        let m = map_response(&self.sample_response, self, Utc::now());
        if m.failures > 0 || m.entries.is_empty() {
            return Err(Error::Config(format!(
                "{}: field mapping rejects the sample response ({} entries, {} failures)",
                self.service,
                m.entries.len(),
                m.failures
            )));
        }
        if let Some(p) = self.url.find('{') {
            let name = self.url[p + 1..].split('}').next().unwrap_or("");
            if !self.params.contains_key(name) {
                return Err(Error::Config(format!("{}: url placeholder `{name}` has no param", self.service)));
            }
        }
        Ok(())
    }

    pub fn render_url(&self) -> String {
        let mut url = self.url.clone();
        for (k, v) in &self.params {
            url = url.replace(&format!("{{{k}}}"), v);
        }
        url
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MappedResponse {
    pub entries: Vec<DirectResipEntry>,
    /// Items (or the whole document) the mapping could not read.
    pub failures: usize,
}

fn as_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn map_item(item: &Value, cfg: &ApiEndpointConfig, fetched_at: DateTime<Utc>) -> Option<DirectResipEntry> {
    let m = &cfg.mapping;
    let ip = as_string(item.pointer(&m.ip)?)?.parse().ok()?;
    let port: u16 = as_string(item.pointer(&m.port)?)?.parse().ok()?;
    if port == 0 {
        return None;
    }
    let field = |p: &Option<String>| p.as_ref().and_then(|p| item.pointer(p)).and_then(as_string);
    let credentials = match (field(&m.username), field(&m.password)) {
        (Some(username), Some(password)) => Some(Credentials { username, password }),
        _ => None,
    };
    Some(DirectResipEntry {
        service: cfg.service.clone(),
        ip,
        port,
        proxy_protocol: cfg.protocol,
        credentials,
        fetched_at,
        source: EntrySource::Api,
        subdomain: None,
    })
}

pub fn map_response(body: &str, cfg: &ApiEndpointConfig, fetched_at: DateTime<Utc>) -> MappedResponse {
    let Ok(doc) = serde_json::from_str::<Value>(body) else {
        return MappedResponse { entries: Vec::new(), failures: 1 };
    };
    let Some(Value::Array(items)) = doc.pointer(&cfg.mapping.items) else {
        return MappedResponse { entries: Vec::new(), failures: 1 };
    };
    let mut out = MappedResponse::default();
    for item in items {
        match map_item(item, cfg, fetched_at) {
            Some(e) => out.entries.push(e),
            None => out.failures += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApiPoll {
    pub entries: Vec<DirectResipEntry>,
    pub failures: usize,
    /// Raw response kept for triage when the mapping failed.
    pub archived: Option<PathBuf>,
}

async fn get_with_retry(client: &reqwest::Client, cfg: &ApiEndpointConfig) -> Result<String> {
    let url = cfg.render_url();
    let mut attempt = 0;
    loop {
        let mut req = client.get(&url);
        if let Some(a) = &cfg.auth {
            req = req.basic_auth(&a.username, Some(&a.password));
        }
        let res = match req.send().await {
            Ok(r) if r.status().is_success() => r.text().await.map_err(|e| e.to_string()),
            Ok(r) => Err(format!("status {}", r.status())),
            Err(e) => Err(e.to_string()),
        };
        match res {
            Ok(body) => return Ok(body),
            Err(e) if attempt >= cfg.retries => {
                return Err(Error::Http(format!("{}: {e} after {} attempts", cfg.service, attempt + 1)));
            }
            Err(e) => {
                let wait = Duration::from_millis(cfg.retry_base_ms << attempt.min(16));
                log::warn!("{}: {e}; retrying in {wait:?}", cfg.service);
                tokio::time::sleep(wait).await;
                attempt += 1;
            }
        }
    }
}

/// One poll of one endpoint. Unmappable responses are written to `archive_dir`.
pub async fn fetch_api_resips(cfg: &ApiEndpointConfig, archive_dir: Option<&Path>) -> Result<ApiPoll> {
    cfg.validate()?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| Error::Http(e.to_string()))?;
    let body = get_with_retry(&client, cfg).await?;
    let fetched_at = Utc::now();
    let mapped = map_response(&body, cfg, fetched_at);
    let mut poll = ApiPoll {
        entries: mapped.entries,
        failures: mapped.failures,
        archived: None,
    };
    if poll.failures > 0 {
        log::warn!("{}: {} items failed the field mapping", cfg.service, poll.failures);
        if let Some(dir) = archive_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::path_io(dir, e))?;
            let path = dir.join(format!("{}-{}.json", cfg.service, fetched_at.format("%Y%m%dT%H%M%S%.3fZ")));
            std::fs::write(&path, &body).map_err(|e| Error::path_io(&path, e))?;
            poll.archived = Some(path);
        }
    }
    Ok(poll)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PollReport {
    pub rows_written: usize,
    /// Polls that failed outright or returned unmappable items.
    pub failed_polls: usize,
}

/// Polls every endpoint on its own interval, `polls` times each, funnelling
/// entries through a single store writer.
pub async fn poll_endpoints(
    configs: Vec<ApiEndpointConfig>,
    store: &mut EntryStore,
    polls: u32,
    archive_dir: Option<PathBuf>,
) -> Result<PollReport> {
    let (tx, mut rx) = tokio::sync::mpsc::channel::<(Vec<DirectResipEntry>, bool)>(64);
    for cfg in configs {
        let tx = tx.clone();
        let archive = archive_dir.clone();
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(Duration::from_secs(cfg.poll_interval_secs.max(1)));
            for _ in 0..polls {
                ticker.tick().await;
                let msg = match fetch_api_resips(&cfg, archive.as_deref()).await {
                    Ok(p) => {
                        let failed = p.failures > 0;
                        (p.entries, failed)
                    }
                    Err(e) => {
                        log::error!("{}: poll skipped: {e}", cfg.service);
                        (Vec::new(), true)
                    }
                };
                if tx.send(msg).await.is_err() {
                    return;
                }
            }
        });
    }
    drop(tx);
    let mut report = PollReport::default();
    while let Some((batch, failed)) = rx.recv().await {
        report.rows_written += store.append(&batch)?;
        report.failed_polls += usize::from(failed);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg(sample: &str) -> ApiEndpointConfig {
        ApiEndpointConfig {
            service: "pinyiyun".parse().unwrap(),
            url: "http://127.0.0.1:1/get?key={key}".into(),
            params: BTreeMap::from([("key".to_string(), "k".to_string())]),
            auth: None,
            poll_interval_secs: 60,
            protocol: Some(ProxyProtocol::Socks5),
            mapping: FieldMapping {
                items: "/data".into(),
                ip: "/ip".into(),
                port: "/port".into(),
                username: Some("/user".into()),
                password: Some("/pass".into()),
            },
            sample_response: sample.into(),
            retries: 0,
            retry_base_ms: 1,
        }
    }

    const THREE: &str = r#"{"code":0,"data":[
        {"ip":"1.2.3.4","port":62456},
        {"ip":"5.6.7.8","port":"3000","user":"u","pass":"p"},
        {"ip":"2001:db8::2","port":1080}]}"#;

    #[test]
    fn three_pairs_map_to_three_entries() {
        let m = map_response(THREE, &cfg(THREE), Utc::now());
        assert_eq!(m.failures, 0);
        let pairs: Vec<(String, u16)> = m.entries.iter().map(|e| (e.ip.to_string(), e.port)).collect();
        assert_eq!(
            pairs,
            [("1.2.3.4".to_string(), 62456), ("5.6.7.8".into(), 3000), ("2001:db8::2".into(), 1080)]
        );
        assert_eq!(m.entries[1].credentials.as_ref().unwrap().username, "u");
        assert!(m.entries[0].credentials.is_none());
    }

    #[test]
    fn empty_and_broken_responses() {
        let c = cfg(THREE);
        assert_eq!(map_response(r#"{"data":[]}"#, &c, Utc::now()), MappedResponse::default());
        let missing_port = map_response(r#"{"data":[{"ip":"1.2.3.4"}]}"#, &c, Utc::now());
        assert_eq!((missing_port.entries.len(), missing_port.failures), (0, 1));
        assert_eq!(map_response("<html>", &c, Utc::now()).failures, 1);
        assert_eq!(map_response(r#"{"data":{}}"#, &c, Utc::now()).failures, 1);
    }

    #[test]
    fn validation_uses_sample() {
        assert!(cfg(THREE).validate().is_ok());
        assert!(cfg(r#"{"data":[]}"#).validate().is_err());
        let mut c = cfg(THREE);
        c.params.clear();
        assert!(c.validate().is_err());
        assert_eq!(cfg(THREE).render_url(), "http://127.0.0.1:1/get?key=k");
    }

    #[test]
    fn toml_config() {
        let text = r#"
service = "xiaoxiang"
url = "http://api.example/ips"
protocol = "http"
sample_response = '[{"addr":"9.9.9.9","p":3000}]'
[mapping]
ip = "/addr"
port = "/p"
"#;
        let c = ApiEndpointConfig::parse(text).unwrap();
        assert_eq!(c.poll_interval_secs, 60);
        assert_eq!(c.mapping.items, "");
    }
}
