use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Subcommand;
use serde::Deserialize;
use url::Url;

use super::{require, runtime, split_pair, Ctx, Status};
use crate::collect::{
    poll_endpoints, read_entries, resolve_dns_resips, verify_many, ApiEndpointConfig, DnsOutcome, DnsScanOptions,
    EntryStore,
};
use crate::crawl::{crawl_many, ingest_snapshot_bundle, write_snapshot_bundle, CrawlOptions, Politeness};
use crate::error::{Error, Result};
use crate::flatfile::{parse_tsv, read_body};
use crate::harvest::{build_query_jobs, ingest_search_results, render_candidates, QueryTable};
use crate::infiltrate::{
    campaign_stats, plan_probes, read_observation_log, render_campaign_table, render_cumulative_csv,
    schedule_campaign, send_probe, CampaignOptions, Credentials, EchoServer, GatewayConfig, ProbeSpec,
    ProxyProtocol,
};
use crate::patterns::PatternSet;
use crate::psl::ApexDomain;
use crate::report::csv;
use crate::types::ServiceId;

#[derive(Debug, Subcommand)]
pub enum HarvestCmd {
    /// Expand the keyword table into search jobs.
    Queries {
        /// Keyword table; the bundled one by default.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Aggregate search result rows into apex candidates.
    Ingest {
        /// `url<TAB>keyword<TAB>language<TAB>engine<TAB>rank` rows.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CrawlCmd {
    /// Crawl candidate sites into snapshot bundles.
    Run {
        /// Candidate file from `harvest ingest`.
        #[arg(long, required_unless_present = "apex")]
        candidates: Option<PathBuf>,
        #[arg(long)]
        apex: Vec<String>,
        #[arg(long)]
        page_cap: Option<usize>,
        #[arg(long)]
        no_politeness: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// `host=ip:port` resolution override, repeatable.
        #[arg(long, value_parser = split_pair)]
        resolve: Vec<(String, String)>,
    },
    /// Validate bundles produced elsewhere and list them.
    IngestSnapshots {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum InfiltrateCmd {
    /// Run the echo server that records exit addresses.
    Echo {
        #[arg(long, default_value = "0.0.0.0:8080")]
        bind: SocketAddr,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Send one probe through a gateway.
    Probe {
        #[arg(long)]
        service: ServiceId,
        /// Gateway `host:port`.
        #[arg(long)]
        gateway: String,
        #[arg(long, default_value = "http")]
        protocol: ProxyProtocol,
        #[arg(long)]
        user: Option<String>,
        #[arg(long, requires = "user")]
        password: Option<String>,
        /// Echo server probe url.
        #[arg(long)]
        target: Url,
        #[arg(long, default_value = "manual")]
        token: String,
        #[arg(long)]
        timeout_secs: Option<u64>,
    },
    /// Scheduled probing through every configured gateway.
    Campaign {
        /// TOML file with `[[gateway]]` tables.
        #[arg(long)]
        gateways: Option<PathBuf>,
        #[arg(long)]
        target: Url,
        #[arg(long, default_value = "campaign")]
        name: String,
        #[arg(long)]
        per_service: Option<u64>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        duration_secs: Option<u64>,
        /// Skip probes whose tokens are already logged.
        #[arg(long)]
        resume: bool,
    },
    /// Per-service campaign table and cumulative series.
    Stats {
        #[arg(long)]
        log: Option<PathBuf>,
        /// `service=Display Name`, repeatable.
        #[arg(long = "name", value_parser = split_pair)]
        names: Vec<(String, String)>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CollectCmd {
    /// Poll API endpoints into the entry store.
    Api {
        /// Endpoint TOML, repeatable; falls back to the configured list.
        #[arg(long)]
        endpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        polls: u32,
    },
    /// Resolve DNS-published RESIP names.
    Dns {
        #[arg(long)]
        resolver: SocketAddr,
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Connect to collected entries through the echo server.
    Verify {
        #[arg(long)]
        echo: Url,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        concurrency: usize,
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
    },
}

pub fn harvest(ctx: &Ctx, cmd: HarvestCmd) -> Result<Status> {
    match cmd {
        HarvestCmd::Queries { table } => {
            let (t, prov) = match &table {
                Some(p) => (QueryTable::parse(&read_body(p)?)?, ctx.prov("harvest.queries").with_input(p)?),
                None => (QueryTable::bundled(), ctx.prov("harvest.queries")),
            };
            let jobs = build_query_jobs(&t)?;
            let mut body = String::from("# id\tkeyword\tlanguage\tengine\tmax_results\n");
            for j in &jobs {
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    j.id(),
                    j.keyword,
                    j.language,
                    j.engine,
                    j.max_results
                ));
            }
            ctx.write(&ctx.out("harvest", "queries.tsv"), &prov, &body)?;
            println!("jobs\t{}", jobs.len());
            Ok(Status::Ok)
        }
        HarvestCmd::Ingest { input } => {
            let r = ingest_search_results(&input)?;
            let prov = ctx.prov("harvest.ingest").with_input(&input)?;
            ctx.write(&ctx.out("harvest", "candidates.tsv"), &prov, &render_candidates(&r.candidates))?;
            println!(
                "entries\t{}\ndistinct_urls\t{}\ncandidates\t{}\nerror_lines\t{}",
                r.entries_read,
                r.distinct_urls,
                r.candidates.len(),
                r.error_lines
            );
            Ok(Status::from_problems(r.error_lines))
        }
    }
}

fn read_candidate_apexes(path: &std::path::Path) -> Result<Vec<ApexDomain>> {
    let text = read_body(path)?;
    parse_tsv(&text)
        .into_iter()
        .filter(|r| r.fields[0] != "apex")
        .map(|r| r.fields[0].parse())
        .collect()
}

pub fn crawl(ctx: &Ctx, cmd: CrawlCmd) -> Result<Status> {
    match cmd {
        CrawlCmd::Run {
            candidates,
            apex,
            page_cap,
            no_politeness,
            workers,
            resolve,
        } => {
            let mut apexes = match &candidates {
                Some(p) => read_candidate_apexes(p)?,
                None => Vec::new(),
            };
            for a in &apex {
                apexes.push(a.parse()?);
            }
            let c = &ctx.cfg.crawl;
            let opts = CrawlOptions {
                page_cap: page_cap.unwrap_or(c.page_cap),
                politeness: Politeness {
                    enabled: c.politeness && !no_politeness,
                    delay: Duration::from_millis(c.delay_ms),
                    ..Default::default()
                },
                timeout: Duration::from_secs(c.timeout_secs),
                homepage: None,
                resolve: resolve
                    .into_iter()
                    .map(|(h, a)| {
                        a.parse()
                            .map(|a| (h, a))
                            .map_err(|_| Error::Config(format!("bad socket address `{a}`")))
                    })
                    .collect::<Result<_>>()?,
            };
            let results = runtime()?.block_on(crawl_many(&apexes, &opts, workers.unwrap_or(c.workers)));
            let dir = ctx.cfg.stage_dir("crawl").join("snapshots");
            let mut report = String::from("# apex\tpages\tfetch_failed\tfailures\terror\n");
            let mut problems = 0;
            for (apex, res) in results {
                match res {
                    Ok(snap) => {
                        write_snapshot_bundle(&snap, &dir.join(apex.as_str()))?;
                        problems += usize::from(snap.fetch_failed);
                        report.push_str(&format!(
                            "{apex}\t{}\t{}\t{}\t-\n",
                            snap.page_count(),
                            snap.fetch_failed,
                            snap.failures.len()
                        ));
                    }
                    Err(e) => {
                        problems += 1;
                        report.push_str(&format!("{apex}\t0\ttrue\t0\t{}\n", e.to_string().replace(['\t', '\n'], " ")));
                    }
                }
            }
            let mut prov = ctx.prov("crawl.run");
            if let Some(p) = &candidates {
                prov = prov.with_input(p)?;
            }
            ctx.write(&ctx.out("crawl", "crawl_report.tsv"), &prov, &report)?;
            Ok(Status::from_problems(problems))
        }
        CrawlCmd::IngestSnapshots { input } => {
            let mut dirs: Vec<PathBuf> = std::fs::read_dir(&input)
                .map_err(|e| Error::path_io(&input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            let mut problems = 0;
            for d in dirs {
                match ingest_snapshot_bundle(&d, None) {
                    Ok(s) => println!("{}\t{}", s.apex, s.page_count()),
                    Err(e) => {
                        log::warn!("{}: {e}", d.display());
                        problems += 1;
                    }
                }
            }
            Ok(Status::from_problems(problems))
        }
    }
}

#[derive(Deserialize)]
struct GatewayFile {
    gateway: Vec<GatewayConfig>,
}

pub fn infiltrate(ctx: &Ctx, cmd: InfiltrateCmd) -> Result<Status> {
    let default_log = || ctx.out("infiltrate", "observations.log");
    match cmd {
        InfiltrateCmd::Echo { bind, log } => {
            let log = log.unwrap_or_else(|| ctx.out("infiltrate", "echo.log"));
            if let Some(parent) = log.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::path_io(parent, e))?;
            }
            runtime()?.block_on(async {
                let server = EchoServer::start(bind, Some(&log)).await?;
                println!("listening\t{}", server.probe_url());
                server.wait().await;
                Ok(Status::Ok)
            })
        }
        InfiltrateCmd::Probe {
            service,
            gateway,
            protocol,
            user,
            password,
            target,
            token,
            timeout_secs,
        } => {
            let spec = ProbeSpec {
                service,
                gateway,
                proxy_protocol: protocol,
                credentials: user.map(|username| Credentials {
                    username,
                    password: password.unwrap_or_default(),
                }),
                target,
                token,
                timeout: Duration::from_secs(timeout_secs.unwrap_or(ctx.cfg.campaign.timeout_secs)),
            };
            let obs = runtime()?.block_on(send_probe(&spec));
            print!("{}", obs.to_log_line());
            Ok(if obs.success { Status::Ok } else { Status::Partial })
        }
        InfiltrateCmd::Campaign {
            gateways,
            target,
            name,
            per_service,
            rate,
            duration_secs,
            resume,
        } => {
            let path = require(gateways.or_else(|| ctx.cfg.paths.gateways.clone()), "gateway file")?;
            let text = std::fs::read_to_string(&path).map_err(|e| Error::path_io(&path, e))?;
            let file: GatewayFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let c = &ctx.cfg.campaign;
            let specs = plan_probes(
                &file.gateway,
                per_service.unwrap_or(c.probes_per_service),
                &name,
                &target,
                Duration::from_secs(c.timeout_secs),
            );
            let log = default_log();
            if let Some(parent) = log.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::path_io(parent, e))?;
            }
            let mut opts = CampaignOptions::new(&log);
            opts.rate = rate.unwrap_or(c.rate);
            opts.duration = duration_secs.or(c.duration_secs).map(Duration::from_secs);
            opts.concurrency = c.concurrency;
            opts.resume = resume;
            let s = runtime()?.block_on(schedule_campaign(specs, &opts))?;
            println!(
                "planned\t{}\nalready_logged\t{}\nissued\t{}\nsuccesses\t{}\nfailures\t{}\nunissued\t{}",
                s.planned, s.already_logged, s.issued, s.successes, s.failures, s.unissued
            );
            Ok(Status::from_problems(s.unissued))
        }
        InfiltrateCmd::Stats { log, names } => {
            let log = log.unwrap_or_else(default_log);
            let (obs, bad) = read_observation_log(&log)?;
            let stats = campaign_stats(&obs);
            let names: BTreeMap<ServiceId, String> = names
                .into_iter()
                .map(|(k, v)| Ok((k.parse()?, v)))
                .collect::<Result<_>>()?;
            let prov = ctx.prov("infiltrate.stats").with_input(&log)?;
            let table = render_campaign_table(&stats, &names);
            ctx.write(&ctx.out("infiltrate", "campaign.txt"), &prov, &table)?;
            let rows: Vec<Vec<String>> = stats
                .services
                .iter()
                .map(|s| {
                    let (first, last) = s
                        .period
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .unwrap_or_default();
                    vec![
                        s.service.to_string(),
                        first,
                        last,
                        s.days.to_string(),
                        s.unique_resips.to_string(),
                        s.successful_probes.to_string(),
                        s.attempted_probes.to_string(),
                    ]
                })
                .collect();
            ctx.write(
                &ctx.out("infiltrate", "stats.csv"),
                &prov,
                &csv(
                    &["service", "first_day", "last_day", "days", "resips", "successful_probes", "attempted_probes"],
                    &rows,
                ),
            )?;
            ctx.write(&ctx.out("infiltrate", "cumulative.csv"), &prov, &render_cumulative_csv(&stats))?;
            print!("{table}");
            Ok(Status::from_problems(bad))
        }
    }
}

fn outcome_cell(o: &DnsOutcome) -> (String, String) {
    match o {
        DnsOutcome::Answered(ips) => (
            "answered".into(),
            ips.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        ),
        DnsOutcome::NoData => ("nodata".into(), "-".into()),
        DnsOutcome::NxDomain => ("nxdomain".into(), "-".into()),
        DnsOutcome::Timeout => ("timeout".into(), "-".into()),
        DnsOutcome::Failed(e) => ("failed".into(), e.replace(['\t', '\n'], " ")),
    }
}

pub fn collect(ctx: &Ctx, cmd: CollectCmd) -> Result<Status> {
    let entries_path = ctx.out("collect", "entries.tsv");
    let open_store = || -> Result<EntryStore> {
        let dir = ctx.cfg.stage_dir("collect");
        std::fs::create_dir_all(&dir).map_err(|e| Error::path_io(&dir, e))?;
        EntryStore::open(&entries_path)
    };
    match cmd {
        CollectCmd::Api { endpoint, polls } => {
            let paths = if endpoint.is_empty() {
                ctx.cfg.paths.endpoints.clone()
            } else {
                endpoint
            };
            if paths.is_empty() {
                return Err(Error::Config("no endpoint configs given".into()));
            }
            let configs = paths.iter().map(|p| ApiEndpointConfig::read(p)).collect::<Result<Vec<_>>>()?;
            let mut store = open_store()?;
            let archive = ctx.cfg.stage_dir("collect").join("archive");
            let r = runtime()?.block_on(poll_endpoints(configs, &mut store, polls, Some(archive)))?;
            println!(
                "rows_written\t{}\nfailed_polls\t{}\ndistinct\t{}",
                r.rows_written,
                r.failed_polls,
                store.distinct_count()
            );
            Ok(Status::from_problems(r.failed_polls))
        }
        CollectCmd::Dns { resolver, patterns } => {
            let pattern_path = patterns.or_else(|| ctx.cfg.paths.patterns.clone());
            let set = match &pattern_path {
                Some(p) => PatternSet::read(p)?,
                None => PatternSet::bundled(),
            };
            let scan = runtime()?.block_on(resolve_dns_resips(&set, &DnsScanOptions::new(resolver)))?;
            let mut store = open_store()?;
            let written = store.append(&scan.entries)?;
            let mut body = String::from("# name\trtype\toutcome\tanswers\n");
            let mut failed = 0;
            for a in &scan.answers {
                let (kind, detail) = outcome_cell(&a.outcome);
                failed += usize::from(matches!(a.outcome, DnsOutcome::Timeout | DnsOutcome::Failed(_)));
                body.push_str(&format!("{}\t{}\t{kind}\t{detail}\n", a.name, a.record_type));
            }
            let mut prov = ctx.prov("collect.dns");
            if let Some(p) = &pattern_path {
                prov = prov.with_input(p)?;
            }
            ctx.write(&ctx.out("collect", "dns_answers.tsv"), &prov, &body)?;
            println!("queries\t{}\nrows_written\t{written}", scan.answers.len());
            Ok(Status::from_problems(failed))
        }
        CollectCmd::Verify {
            echo,
            input,
            concurrency,
            timeout_secs,
        } => {
            let path = input.unwrap_or(entries_path.clone());
            let (entries, bad) = read_entries(&path)?;
            let results = runtime()?.block_on(verify_many(
                &entries,
                &echo,
                Duration::from_secs(timeout_secs),
                concurrency,
            ));
            let mut body = String::from("# service\tip\tport\tok\texit_ip\tfailure\n");
            let mut ok = 0;
            for (e, r) in entries.iter().zip(&results) {
                ok += usize::from(r.ok);
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    e.service,
                    e.ip,
                    e.port,
                    r.ok,
                    r.exit_ip.map_or_else(|| "-".to_string(), |i| i.to_string()),
                    r.failure.as_ref().map_or_else(|| "-".to_string(), |f| f.to_string()),
                ));
            }
            let prov = ctx.prov("collect.verify").with_input(&path)?;
            ctx.write(&ctx.out("collect", "verify.tsv"), &prov, &body)?;
            println!("entries\t{}\nverified\t{ok}", entries.len());
            Ok(Status::from_problems(bad))
        }
    }
}
