//! Backconnect exit-IP capture: echo server, proxy probe client, rate-limited
//! campaigns and campaign statistics.

mod campaign;
mod echo;
mod probe;
mod stats;

use std::fmt;
use std::io::Write as _;
use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::types::ServiceId;

pub use campaign::{
    plan_probes, probe_token, read_logged_tokens, schedule_campaign, CampaignOptions, CampaignSummary,
    GatewayConfig,
};
pub use echo::{EchoRecord, EchoServer};
pub use probe::{send_probe, DEFAULT_TIMEOUT};
pub use stats::{
    campaign_stats, render_campaign_table, render_cumulative_csv, CampaignStats, CumulativePoint, ServiceStats,
    CAMPAIGN_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyProtocol {
    Http,
    HttpsConnect,
    Socks5,
}

impl fmt::Display for ProxyProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProxyProtocol::Http => "http",
            ProxyProtocol::HttpsConnect => "https_connect",
            ProxyProtocol::Socks5 => "socks5",
        })
    }
}

impl FromStr for ProxyProtocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "http" => Ok(ProxyProtocol::Http),
            "https_connect" | "https" | "connect" => Ok(ProxyProtocol::HttpsConnect),
            "socks5" | "socks" => Ok(ProxyProtocol::Socks5),
            other => Err(Error::Config(format!("unknown proxy protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub service: ServiceId,
    /// `host:port` of the proxy gateway.
    pub gateway: String,
    pub proxy_protocol: ProxyProtocol,
    pub credentials: Option<Credentials>,
    /// Echo endpoint, e.g. `http://203.0.113.7:8080/probe`.
    pub target: Url,
    pub token: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    GatewayUnreachable,
    ProxyAuthFailed,
    RelayTimeout,
    TokenMismatch,
    /// Proxy refused or garbled the relay (non-200 status, SOCKS error, bad echo body).
    RelayError,
    ConnectionRefused,
    /// Echoed address differs from the direct proxy's own address.
    RelayMismatch,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::GatewayUnreachable => "gateway_unreachable",
            FailureClass::ProxyAuthFailed => "proxy_auth_failed",
            FailureClass::RelayTimeout => "relay_timeout",
            FailureClass::TokenMismatch => "token_mismatch",
            FailureClass::RelayError => "relay_error",
            FailureClass::ConnectionRefused => "connection_refused",
            FailureClass::RelayMismatch => "relay_mismatch",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            FailureClass::GatewayUnreachable,
            FailureClass::ProxyAuthFailed,
            FailureClass::RelayTimeout,
            FailureClass::TokenMismatch,
            FailureClass::RelayError,
            FailureClass::ConnectionRefused,
            FailureClass::RelayMismatch,
        ]
        .into_iter()
        .find(|c| c.as_str() == s.trim())
        .ok_or_else(|| Error::Config(format!("unknown failure class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitObservation {
    pub service: ServiceId,
    pub exit_ip: Option<IpAddr>,
    pub observed_at: DateTime<Utc>,
    pub token: String,
    pub success: bool,
    pub failure: Option<FailureClass>,
    pub latency: Duration,
}

pub const OBSERVATION_HEADER: &str =
    "# timestamp\tservice\ttoken\tsuccess\tfailure_class\texit_ip\tlatency_ms\n";

impl ExitObservation {
    /// One log line, newline-terminated.
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.observed_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.service,
            self.token,
            self.success,
            self.failure.map_or("-", FailureClass::as_str),
            self.exit_ip.map_or_else(|| "-".to_string(), |ip| ip.to_string()),
            self.latency.as_millis()
        )
    }

    pub fn parse_log_line(line: &str) -> Option<ExitObservation> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if f.len() != 7 {
            return None;
        }
        Some(ExitObservation {
            observed_at: DateTime::parse_from_rfc3339(f[0]).ok()?.with_timezone(&Utc),
            service: f[1].parse().ok()?,
            token: f[2].to_string(),
            success: f[3].parse().ok()?,
            failure: match f[4] {
                "-" => None,
                s => Some(s.parse().ok()?),
            },
            exit_ip: match f[5] {
                "-" => None,
                s => Some(s.parse().ok()?),
            },
            latency: Duration::from_millis(f[6].parse().ok()?),
        })
    }
}

/// Reads an observation log. Unparseable lines are skipped and counted.
pub fn read_observation_log(path: &Path) -> Result<(Vec<ExitObservation>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
    Ok(parse_observation_log(&text))
}

pub fn parse_observation_log(text: &str) -> (Vec<ExitObservation>, usize) {
    let mut out = Vec::new();
    let mut bad = 0;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        match ExitObservation::parse_log_line(line) {
            Some(o) => out.push(o),
            None => bad += 1,
        }
    }
    (out, bad)
}

pub fn write_observation_log(path: &Path, obs: &[ExitObservation]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::path_io(path, e))?;
    let mut s = String::from(OBSERVATION_HEADER);
    for o in obs {
        s.push_str(&o.to_log_line());
    }
    f.write_all(s.as_bytes()).map_err(|e| Error::path_io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn log_line_round_trip() {
        let o = ExitObservation {
            service: "pinyiyun".parse().unwrap(),
            exit_ip: Some("2001:db8::1".parse().unwrap()),
            observed_at: Utc.with_ymd_and_hms(2021, 4, 10, 8, 0, 0).unwrap(),
            token: "t-1".into(),
            success: true,
            failure: None,
            latency: Duration::from_millis(42),
        };
        let line = o.to_log_line();
        assert_eq!(line, "2021-04-10T08:00:00.000Z\tpinyiyun\tt-1\ttrue\t-\t2001:db8::1\t42\n");
        assert_eq!(ExitObservation::parse_log_line(&line).unwrap(), o);
        let failed = ExitObservation {
            exit_ip: None,
            success: false,
            failure: Some(FailureClass::RelayTimeout),
            ..o
        };
        assert_eq!(ExitObservation::parse_log_line(&failed.to_log_line()).unwrap(), failed);
        assert!(ExitObservation::parse_log_line("2021-04-10T08:00:00Z\tx").is_none());
    }
}
