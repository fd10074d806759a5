use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::task::JoinSet;
use tokio::time::{interval_at, sleep_until, Instant, MissedTickBehavior};
use url::Url;

use super::{
    parse_observation_log, send_probe, Credentials, ExitObservation, FailureClass, ProbeSpec,
    ProxyProtocol, OBSERVATION_HEADER,
};
use crate::error::{Error, Result};
use crate::types::ServiceId;

/// One purchased gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub service: ServiceId,
    pub gateway: String,
    pub protocol: ProxyProtocol,
    #[serde(default)]
    pub credentials: Option<Credentials>,
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    /// Probes per second across the campaign.
    pub rate: f64,
    /// Stop issuing after this long; `None` runs until the specs are exhausted.
    pub duration: Option<Duration>,
    pub concurrency: usize,
    pub log_path: PathBuf,
    /// Continue an existing log, skipping tokens already recorded.
    pub resume: bool,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
}

impl CampaignOptions {
    pub fn new(log_path: impl Into<PathBuf>) -> Self {
        CampaignOptions {
            rate: 1.0,
            duration: None,
            concurrency: 8,
            log_path: log_path.into(),
            resume: false,
            backoff_base: Duration::from_secs(1),
            backoff_max: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CampaignSummary {
    pub planned: usize,
    pub already_logged: usize,
    pub issued: usize,
    pub successes: usize,
    pub failures: usize,
    pub unissued: usize,
}

/// Deterministic probe token; resuming relies on regenerating the same sequence.
pub fn probe_token(campaign: &str, service: &ServiceId, seq: u64) -> String {
    format!("{campaign}.{service}.{seq:08}")
}

/// `per_service` probes for each gateway, interleaved round-robin.
pub fn plan_probes(
    gateways: &[GatewayConfig],
    per_service: u64,
    campaign: &str,
    target: &Url,
    timeout: Duration,
) -> Vec<ProbeSpec> {
    let mut out = Vec::with_capacity(gateways.len() * per_service as usize);
    for seq in 0..per_service {
        for g in gateways {
            out.push(ProbeSpec {
                service: g.service.clone(),
                gateway: g.gateway.clone(),
                proxy_protocol: g.protocol,
                credentials: g.credentials.clone(),
                target: target.clone(),
                token: probe_token(campaign, &g.service, seq),
                timeout,
            });
        }
    }
    out
}

/// Drops a torn final line (no trailing newline) and returns the logged tokens.
pub fn read_logged_tokens(path: &Path) -> Result<HashSet<String>> {
    let mut text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashSet::new()),
        Err(e) => return Err(Error::path_io(path, e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        text.truncate(keep);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::path_io(path, e))?;
        f.set_len(keep as u64).map_err(|e| Error::path_io(path, e))?;
        log::warn!("{}: dropped a torn final record", path.display());
    }
    let (obs, _) = parse_observation_log(&text);
    Ok(obs.into_iter().map(|o| o.token).collect())
}

struct Backoff {
    failures: u32,
    until: Instant,
}

fn is_gateway_failure(c: Option<FailureClass>) -> bool {
    matches!(c, Some(FailureClass::GatewayUnreachable | FailureClass::RelayTimeout))
}

/// Issues probes at no more than `rate` per second with at most `concurrency` in
/// flight, appending every observation to the log. Services whose gateway keeps
/// failing are backed off exponentially while the others continue.
pub async fn schedule_campaign(specs: Vec<ProbeSpec>, opts: &CampaignOptions) -> Result<CampaignSummary> {
    if !(opts.rate > 0.0) {
        return Err(Error::Config("campaign rate must be positive".into()));
    }
    let path = &opts.log_path;
    let exists = path.exists();
    if exists && !opts.resume {
        return Err(Error::Config(format!(
            "{} already exists; resume it or choose another log",
            path.display()
        )));
    }
    let logged = if opts.resume { read_logged_tokens(path)? } else { HashSet::new() };
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::path_io(path, e))?;
    if !exists || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(false) {
        log.write_all(OBSERVATION_HEADER.as_bytes()).map_err(|e| Error::path_io(path, e))?;
    }

    let mut summary = CampaignSummary {
        planned: specs.len(),
        ..Default::default()
    };
    let mut pending: VecDeque<ProbeSpec> = specs
        .into_iter()
        .filter(|s| {
            let seen = logged.contains(&s.token);
            if seen {
                summary.already_logged += 1;
            }
            !seen
        })
        .collect();

    let start = Instant::now();
    let period = Duration::from_secs_f64(1.0 / opts.rate);
    let mut ticker = interval_at(start + period, period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let deadline = opts.duration.map(|d| start + d);
    let far = start + Duration::from_secs(86400 * 365 * 30);
    let stop = sleep_until(deadline.unwrap_or(far));
    tokio::pin!(stop);
    let concurrency = opts.concurrency.max(1);
    let mut in_flight: JoinSet<ExitObservation> = JoinSet::new();
    let mut backoff: HashMap<ServiceId, Backoff> = HashMap::new();

    loop {
        let open = deadline.is_none_or(|d| Instant::now() < d);
        let issuing = open && !pending.is_empty();
        if !issuing && in_flight.is_empty() {
            break;
        }
        tokio::select! {
            _ = ticker.tick(), if issuing && in_flight.len() < concurrency => {
                let now = Instant::now();
                if deadline.is_some_and(|d| now >= d) {
                    continue;
                }
                let ready = pending
                    .iter()
                    .position(|s| backoff.get(&s.service).is_none_or(|b| b.until <= now));
                if let Some(i) = ready {
                    let spec = pending.remove(i).expect("index in range");
                    summary.issued += 1;
                    in_flight.spawn(async move { send_probe(&spec).await });
                }
            }
            Some(joined) = in_flight.join_next(), if !in_flight.is_empty() => {
                let obs = match joined {
                    Ok(o) => o,
                    Err(e) => {
                        log::error!("probe task failed: {e}");
                        summary.failures += 1;
                        continue;
                    }
                };
                log.write_all(obs.to_log_line().as_bytes()).map_err(|e| Error::path_io(path, e))?;
                if obs.success {
                    summary.successes += 1;
                    backoff.remove(&obs.service);
                } else {
                    summary.failures += 1;
                    if is_gateway_failure(obs.failure) {
                        let b = backoff.entry(obs.service.clone()).or_insert(Backoff { failures: 0, until: Instant::now() });
                        b.failures += 1;
                        let wait = opts
                            .backoff_base
                            .saturating_mul(1u32 << (b.failures - 1).min(20))
                            .min(opts.backoff_max);
                        b.until = Instant::now() + wait;
                        log::info!("{}: backing off {:?} after {} gateway failures", obs.service, wait, b.failures);
                    }
                }
            }
            _ = &mut stop, if issuing => {}
        }
    }
    summary.unissued = pending.len();
    log.flush().map_err(|e| Error::path_io(path, e))?;
    Ok(summary)
}
