use std::path::PathBuf;

use clap::{Args, Subcommand};

use super::{split_pair, Ctx, Status};
use crate::error::Result;
use crate::flatfile::Provenance;
use crate::patterns::PatternSet;
use crate::pdns::{
    compute_lifetimes, crest_trough_metrics, daily_active_series, extract_dp_resips, generate_pdns,
    lifetime_shares, match_service_domains, read_pdns_file, render_daily_csv, render_lifetime_cdf_csv,
    render_pdns, render_usage_csv, render_usage_table, services_in, usage_volume, MatchResult,
    SyntheticPdnsSpec, DEFAULT_TROUGH_FRACTION, DEFAULT_WINDOW,
};
use crate::report::csv;

#[derive(Debug, Subcommand)]
pub enum PdnsCmd {
    /// Tag records with service domains; writes matched, conflict and DP-RESIP files.
    Match(Input),
    /// Per-ip lifetimes and their CDF.
    Lifetimes(Input),
    /// Daily active RESIPs per service.
    Daily(Input),
    /// Usage volume table.
    Usage(Input),
    /// Crest and trough of the smoothed daily series.
    Evolution {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_TROUGH_FRACTION)]
        fraction: f64,
    },
    /// Write a synthetic pDNS stream.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// `apex=ip_count`, repeatable; defaults to three services.
        #[arg(long = "service", value_parser = split_pair)]
        services: Vec<(String, String)>,
        #[arg(long, default_value_t = 500)]
        noise: usize,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    /// pDNS stream (fqdn, rrtype, rdata, first_seen, last_seen, query_count).
    #[arg(long = "in")]
    input: PathBuf,
    /// Service domain patterns; the bundled table by default.
    #[arg(long)]
    patterns: Option<PathBuf>,
}

struct Loaded {
    matched: MatchResult,
    malformed: usize,
    prov: Provenance,
}

fn load(ctx: &Ctx, stage: &str, input: &Input) -> Result<Loaded> {
    let pattern_path = input.patterns.clone().or_else(|| ctx.cfg.paths.patterns.clone());
    let patterns = match &pattern_path {
        Some(p) => PatternSet::read(p)?,
        None => PatternSet::bundled(),
    };
    let (records, malformed) = read_pdns_file(&input.input)?;
    if malformed > 0 {
        log::warn!("{}: {malformed} malformed lines skipped", input.input.display());
    }
    let mut prov = ctx.prov(stage).with_input(&input.input)?;
    if let Some(p) = &pattern_path {
        prov = prov.with_input(p)?;
    }
    Ok(Loaded {
        matched: match_service_domains(records, &patterns),
        malformed,
        prov,
    })
}

pub fn run(ctx: &Ctx, cmd: PdnsCmd) -> Result<Status> {
    match cmd {
        PdnsCmd::Match(input) => {
            let l = load(ctx, "pdns.match", &input)?;
            let m = &l.matched;
            let mut tagged = String::from("# service\tfqdn\trrtype\trdata\tfirst_seen\tlast_seen\tquery_count\n");
            for t in &m.tagged {
                tagged.push_str(&format!("{}\t{}\n", t.service, t.record.to_line()));
            }
            ctx.write(&ctx.out("pdns", "matched.tsv"), &l.prov, &tagged)?;
            let rows: Vec<Vec<String>> = m
                .conflicts
                .by_services
                .iter()
                .map(|(k, n)| vec![k.clone(), n.to_string()])
                .collect();
            ctx.write(&ctx.out("pdns", "conflicts.csv"), &l.prov, &csv(&["services", "records"], &rows))?;
            let sets = extract_dp_resips(&m.tagged);
            let rows: Vec<Vec<String>> = sets
                .iter()
                .map(|s| vec![s.service.to_string(), s.ips.len().to_string(), s.fqdn_count().to_string()])
                .collect();
            ctx.write(&ctx.out("pdns", "dp_resips.csv"), &l.prov, &csv(&["service", "ips", "fqdns"], &rows))?;
            println!("matched\t{}\ndropped\t{}\nmalformed\t{}", m.tagged.len(), m.dropped, l.malformed);
            Ok(Status::from_problems(l.malformed))
        }
        PdnsCmd::Lifetimes(input) => {
            let l = load(ctx, "pdns.lifetimes", &input)?;
            let lifetimes = compute_lifetimes(&l.matched.tagged);
            let rows: Vec<Vec<String>> = lifetimes
                .iter()
                .map(|x| {
                    let first = x.intervals.first().map(|i| i.first().to_string()).unwrap_or_default();
                    let last = x.intervals.last().map(|i| i.last().to_string()).unwrap_or_default();
                    vec![
                        x.service.to_string(),
                        x.ip.to_string(),
                        x.lifetime_days.to_string(),
                        x.intervals.len().to_string(),
                        first,
                        last,
                    ]
                })
                .collect();
            ctx.write(
                &ctx.out("pdns", "lifetimes.csv"),
                &l.prov,
                &csv(&["service", "ip", "lifetime_days", "spells", "first_seen", "last_seen"], &rows),
            )?;
            ctx.write(&ctx.out("pdns", "lifetime_cdf.csv"), &l.prov, &render_lifetime_cdf_csv(&lifetimes))?;
            let s = lifetime_shares(&lifetimes);
            println!(
                "resips\t{}\none_day\t{:.4}\nunder_ten_days\t{:.4}",
                s.resips, s.one_day, s.under_ten
            );
            Ok(Status::from_problems(l.malformed))
        }
        PdnsCmd::Daily(input) => {
            let l = load(ctx, "pdns.daily", &input)?;
            let series: Vec<_> = services_in(&l.matched.tagged)
                .iter()
                .map(|s| daily_active_series(&l.matched.tagged, s))
                .collect();
            ctx.write(&ctx.out("pdns", "daily.csv"), &l.prov, &render_daily_csv(&series))?;
            Ok(Status::from_problems(l.malformed))
        }
        PdnsCmd::Usage(input) => {
            let l = load(ctx, "pdns.usage", &input)?;
            let rows: Vec<_> = services_in(&l.matched.tagged)
                .iter()
                .filter_map(|s| usage_volume(&l.matched.tagged, s))
                .collect();
            let table = render_usage_table(&rows);
            ctx.write(&ctx.out("pdns", "usage.txt"), &l.prov, &table)?;
            ctx.write(&ctx.out("pdns", "usage.csv"), &l.prov, &render_usage_csv(&rows))?;
            print!("{table}");
            Ok(Status::from_problems(l.malformed))
        }
        PdnsCmd::Evolution { input, window, fraction } => {
            let l = load(ctx, "pdns.evolution", &input)?;
            let mut rows = Vec::new();
            for s in services_in(&l.matched.tagged) {
                let series = daily_active_series(&l.matched.tagged, &s);
                let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
                match crest_trough_metrics(&series, window, fraction) {
                    Some(c) => rows.push(vec![
                        s.to_string(),
                        c.crest_day.to_string(),
                        format!("{:.3}", c.crest_value),
                        c.days_to_crest.to_string(),
                        opt(c.trough_day.map(|d| d.to_string())),
                        opt(c.crest_to_trough_days.map(|d| d.to_string())),
                    ]),
                    None => rows.push(vec![s.to_string(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into()]),
                }
            }
            ctx.write(
                &ctx.out("pdns", "evolution.csv"),
                &l.prov,
                &csv(
                    &["service", "crest_day", "crest_value", "days_to_crest", "trough_day", "crest_to_trough_days"],
                    &rows,
                ),
            )?;
            Ok(Status::from_problems(l.malformed))
        }
        PdnsCmd::GenSynthetic { out, seed, services, noise } => {
            let seed = ctx.seed("pdns", seed);
            let mut spec = SyntheticPdnsSpec {
                seed,
                noise_records: noise,
                ..Default::default()
            };
            if !services.is_empty() {
                spec.services = services
                    .into_iter()
                    .map(|(apex, n)| {
                        n.parse()
                            .map(|n| (apex, n))
                            .map_err(|_| crate::Error::Config(format!("bad ip count `{n}`")))
                    })
                    .collect::<Result<_>>()?;
            }
            let records = generate_pdns(&spec);
            ctx.write(&out, &ctx.prov("pdns.gen-synthetic").with_seed("pdns", seed), &render_pdns(&records))?;
            Ok(Status::Ok)
        }
    }
}
