use std::collections::HashSet;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::Subcommand;

use super::{require, split_pair, Ctx, Status};
use crate::analytics::{
    dataset_overlap_matrix, distribution_report, generate_analytics_inputs, geo_enrich, host_report_summary,
    intersection_rates, label_map, mtf_summary, port_exposure_summary, prefix_density, read_enriched,
    read_host_reports, read_ip_list, read_mtf, read_sips_labels, render_category_table, render_enriched, render_mtf,
    render_sips_labels, render_subcategory_table, render_summary_csv, render_threshold_table,
    render_group_summary, render_hostrep_table, sips_rate, CachedRemote, CategoryVocab, Dimension, GeoTable,
    GroupSummary, IpDataset, NoRemote, SyntheticAnalyticsSpec, DEFAULT_CATEGORIES,
};
use crate::collect::read_entries;
use crate::error::{Error, Result};
use crate::flatfile::Provenance;

#[derive(Debug, Subcommand)]
pub enum AnalyticsCmd {
    /// Join an ip list with the geo table.
    Enrich {
        #[arg(long)]
        ips: PathBuf,
        /// `cidr,country,region,city,asn,isp,org_name,org_type` CSV.
        #[arg(long)]
        geo_table: Option<PathBuf>,
    },
    /// Ranked distributions over geo and prefix dimensions.
    Dist {
        /// Enriched ips; defaults to the output of `enrich`.
        #[arg(long)]
        enriched: Option<PathBuf>,
        /// Dimension to report, repeatable; all by default.
        #[arg(long = "dim")]
        dims: Vec<Dimension>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Group name for the summary row.
        #[arg(long, default_value = "RESIPs")]
        name: String,
        /// Render the country count as N/A.
        #[arg(long)]
        country_na: bool,
    },
    /// Prefixes whose populated share reaches a threshold.
    Density {
        #[arg(long)]
        ips: PathBuf,
        #[arg(long = "prefix-len", default_value = "24")]
        prefix_lens: Vec<u8>,
        #[arg(long, default_value_t = 0.5)]
        min_fill: f64,
    },
    /// Intersection rates of two ip lists.
    Intersect {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Group by prior-dataset overlap matrix at ip, /16 and /8 granularity.
    Overlap {
        /// `NAME=ip-list`, repeatable.
        #[arg(long = "group", value_parser = split_pair, required = true)]
        groups: Vec<(String, String)>,
        #[arg(long = "prior", value_parser = split_pair, required = true)]
        priors: Vec<(String, String)>,
    },
    /// Join groups with the malicious traffic feed.
    Mtf {
        #[arg(long = "group", value_parser = split_pair, required = true)]
        groups: Vec<(String, String)>,
        #[arg(long)]
        feed: Option<PathBuf>,
        /// Category vocabulary, repeatable; the built-in six by default.
        #[arg(long = "category")]
        categories: Vec<String>,
        #[arg(long, default_value_t = 6)]
        top: usize,
    },
    /// Host report maliciousness per group.
    Hostrep {
        #[arg(long = "group", value_parser = split_pair, required = true)]
        groups: Vec<(String, String)>,
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Share of a group labelled as static ips.
    Sips {
        #[arg(long = "group", value_parser = split_pair, required = true)]
        groups: Vec<(String, String)>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Drop unlabeled ips from the denominator.
        #[arg(long)]
        exclude_unlabeled: bool,
    },
    /// Open-port exposure of directly collected entries.
    Ports {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Write a hermetic input set for every analytics subcommand.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 5000)]
        n_ips: usize,
        #[arg(long, default_value_t = 3000)]
        n_prior: usize,
    },
}

fn ip_list(path: &Path) -> Result<(Vec<IpAddr>, usize)> {
    let (ips, bad) = read_ip_list(path)?;
    if bad > 0 {
        log::warn!("{}: {bad} unparseable lines skipped", path.display());
    }
    Ok((ips, bad))
}

struct Groups {
    sets: Vec<(String, Vec<IpAddr>)>,
    bad: usize,
    prov: Provenance,
}

fn load_groups(ctx: &Ctx, stage: &str, pairs: &[(String, String)]) -> Result<Groups> {
    let mut prov = ctx.prov(stage);
    let mut sets = Vec::new();
    let mut bad = 0;
    for (name, path) in pairs {
        let path = PathBuf::from(path);
        let (ips, b) = ip_list(&path)?;
        bad += b;
        prov = prov.with_input(&path)?;
        sets.push((name.clone(), ips));
    }
    Ok(Groups { sets, bad, prov })
}

fn set_of(ips: &[IpAddr]) -> HashSet<IpAddr> {
    ips.iter().copied().collect()
}

fn ip_lines(ips: &[IpAddr]) -> String {
    let mut s = String::from("# ip\n");
    for ip in ips {
        s.push_str(&format!("{ip}\n"));
    }
    s
}

pub fn run(ctx: &Ctx, cmd: AnalyticsCmd) -> Result<Status> {
    match cmd {
        AnalyticsCmd::Enrich { ips, geo_table } => {
            let table_path = require(geo_table.or_else(|| ctx.cfg.paths.geo_table.clone()), "geo table")?;
            let table = GeoTable::read(&table_path)?;
            let (list, bad) = ip_list(&ips)?;
            let map = geo_enrich(list, &table, None::<&mut CachedRemote<NoRemote>>);
            let unknown = map.values().filter(|g| g.is_unknown()).count();
            let prov = ctx.prov("analytics.enrich").with_input(&ips)?.with_input(&table_path)?;
            ctx.write(&ctx.out("analytics", "enriched.tsv"), &prov, &render_enriched(&map))?;
            println!("ips\t{}\nunknown\t{unknown}", map.len());
            Ok(Status::from_problems(bad))
        }
        AnalyticsCmd::Dist {
            enriched,
            dims,
            top,
            name,
            country_na,
        } => {
            let path = enriched.unwrap_or_else(|| ctx.out("analytics", "enriched.tsv"));
            let map = read_enriched(&path)?;
            let dims = if dims.is_empty() { Dimension::ALL.to_vec() } else { dims };
            let prov = ctx.prov("analytics.dist").with_input(&path)?;
            let mut text = String::new();
            for t in distribution_report(&map, &dims) {
                text.push_str(&format!(
                    "## {} ({} groups, {} unassigned)\n",
                    t.dimension, t.distinct_groups, t.unassigned
                ));
                text.push_str(&t.render_top(top));
                text.push('\n');
                ctx.write(&ctx.out("analytics", &format!("dist_{}.csv", t.dimension)), &prov, &t.render_csv())?;
                if t.dimension == Dimension::Province {
                    ctx.write(&ctx.out("analytics", "heatmap_province.csv"), &prov, &t.render_heatmap_csv())?;
                }
            }
            text.push_str("## summary\n");
            text.push_str(&render_group_summary(&[GroupSummary::from_enriched(&name, &map, country_na)]));
            ctx.write(&ctx.out("analytics", "dist.txt"), &prov, &text)?;
            Ok(Status::Ok)
        }
        AnalyticsCmd::Density {
            ips,
            prefix_lens,
            min_fill,
        } => {
            let (list, bad) = ip_list(&ips)?;
            let prov = ctx.prov("analytics.density").with_input(&ips)?;
            for len in prefix_lens {
                let r = prefix_density(list.iter().copied(), len, min_fill)?;
                ctx.write(&ctx.out("analytics", &format!("density_{len}.csv")), &prov, &r.render_csv())?;
                println!("/{len}\t{} prefixes at fill >= {min_fill}", r.prefixes.len());
            }
            Ok(Status::from_problems(bad))
        }
        AnalyticsCmd::Intersect { a, b } => {
            let (la, bad_a) = ip_list(&a)?;
            let (lb, bad_b) = ip_list(&b)?;
            let i = intersection_rates(&set_of(&la), &set_of(&lb));
            let rate = |r: Option<f64>| r.map_or_else(|| "N/A".to_string(), |r| format!("{:.2}%", 100.0 * r));
            let text = format!(
                "overlap\t{}\nsize_a\t{}\nsize_b\t{}\nrate_a\t{}\nrate_b\t{}\n",
                i.overlap,
                i.size_a,
                i.size_b,
                rate(i.rate_a),
                rate(i.rate_b)
            );
            let prov = ctx.prov("analytics.intersect").with_input(&a)?.with_input(&b)?;
            ctx.write(&ctx.out("analytics", "intersect.txt"), &prov, &text)?;
            print!("{text}");
            Ok(Status::from_problems(bad_a + bad_b))
        }
        AnalyticsCmd::Overlap { groups, priors } => {
            let g = load_groups(ctx, "analytics.overlap", &groups)?;
            let mut p = load_groups(ctx, "analytics.overlap", &priors)?;
            let mut prov = g.prov;
            for (_, path) in &priors {
                prov = prov.with_input(Path::new(path))?;
            }
            let gs: Vec<IpDataset> = g.sets.iter().map(|(n, ips)| IpDataset::new(n, ips.iter().copied())).collect();
            let ps: Vec<IpDataset> = p.sets.drain(..).map(|(n, ips)| IpDataset::new(&n, ips)).collect();
            let m = dataset_overlap_matrix(&gs, &ps);
            let text = m.render_text();
            ctx.write(&ctx.out("analytics", "overlap.txt"), &prov, &text)?;
            ctx.write(&ctx.out("analytics", "overlap.csv"), &prov, &m.render_csv())?;
            print!("{text}");
            Ok(Status::from_problems(g.bad + p.bad))
        }
        AnalyticsCmd::Mtf {
            groups,
            feed,
            categories,
            top,
        } => {
            let feed = require(feed.or_else(|| ctx.cfg.paths.mtf_feed.clone()), "MTF feed")?;
            let g = load_groups(ctx, "analytics.mtf", &groups)?;
            let (records, bad) = read_mtf(&feed)?;
            let vocab = if categories.is_empty() {
                CategoryVocab::default()
            } else {
                CategoryVocab::new(&categories)
            };
            let prov = g.prov.with_input(&feed)?;
            let summaries: Vec<_> = g
                .sets
                .iter()
                .map(|(n, ips)| (n.as_str(), mtf_summary(&records, &set_of(ips), &vocab)))
                .collect();
            let refs: Vec<(&str, _)> = summaries.iter().map(|(n, s)| (*n, s)).collect();
            let mut text = render_threshold_table(&refs);
            let sub_cats: Vec<&str> = if categories.is_empty() {
                DEFAULT_CATEGORIES[..2].to_vec()
            } else {
                categories.iter().take(2).map(String::as_str).collect()
            };
            for (n, s) in &summaries {
                text.push_str(&format!("\n## {n}\n"));
                text.push_str(&render_category_table(s, top));
                text.push('\n');
                text.push_str(&render_subcategory_table(s, &sub_cats, 3));
                ctx.write(&ctx.out("analytics", &format!("mtf_{n}.csv")), &prov, &render_summary_csv(s))?;
            }
            ctx.write(&ctx.out("analytics", "mtf.txt"), &prov, &text)?;
            print!("{text}");
            Ok(Status::from_problems(bad + g.bad))
        }
        AnalyticsCmd::Hostrep { groups, reports } => {
            let path = require(reports.or_else(|| ctx.cfg.paths.host_reports.clone()), "host reports")?;
            let g = load_groups(ctx, "analytics.hostrep", &groups)?;
            let reports = read_host_reports(&path)?;
            let rows: Vec<(&str, _)> = g
                .sets
                .iter()
                .map(|(n, ips)| (n.as_str(), host_report_summary(&set_of(ips), &reports)))
                .collect();
            let text = render_hostrep_table(&rows);
            ctx.write(&ctx.out("analytics", "hostrep.txt"), &g.prov.clone().with_input(&path)?, &text)?;
            print!("{text}");
            Ok(Status::from_problems(g.bad))
        }
        AnalyticsCmd::Sips {
            groups,
            labels,
            exclude_unlabeled,
        } => {
            let path = require(labels.or_else(|| ctx.cfg.paths.sips_labels.clone()), "SIPS labels")?;
            let g = load_groups(ctx, "analytics.sips", &groups)?;
            let map = label_map(&read_sips_labels(&path)?)?;
            let mut text = String::new();
            for (n, ips) in &g.sets {
                text.push_str(&format!("{n}\t{}\n", sips_rate(&set_of(ips), &map, exclude_unlabeled).render()));
            }
            ctx.write(&ctx.out("analytics", "sips.txt"), &g.prov.clone().with_input(&path)?, &text)?;
            print!("{text}");
            Ok(Status::from_problems(g.bad))
        }
        AnalyticsCmd::Ports { input, top } => {
            let path = input.unwrap_or_else(|| ctx.out("collect", "entries.tsv"));
            let (entries, bad) = read_entries(&path)?;
            let e = port_exposure_summary(&entries);
            let prov = ctx.prov("analytics.ports").with_input(&path)?;
            let text = e.render_text(top);
            ctx.write(&ctx.out("analytics", "ports.txt"), &prov, &text)?;
            ctx.write(&ctx.out("analytics", "ports.csv"), &prov, &e.render_csv())?;
            print!("{text}");
            Ok(Status::from_problems(bad))
        }
        AnalyticsCmd::GenSynthetic {
            out,
            seed,
            n_ips,
            n_prior,
        } => {
            let seed = ctx.seed("analytics", seed);
            let f = generate_analytics_inputs(&SyntheticAnalyticsSpec { seed, n_ips, n_prior });
            let prov = ctx.prov("analytics.gen-synthetic").with_seed("analytics", seed);
            std::fs::create_dir_all(&out).map_err(|e| Error::path_io(&out, e))?;
            // the geo table is a plain CSV; a comment header would break CSV readers
            let geo = out.join("geo.csv");
            std::fs::write(&geo, &f.geo_csv).map_err(|e| Error::path_io(&geo, e))?;
            println!("wrote\t{}", geo.display());
            ctx.write(&out.join("resips.txt"), &prov, &ip_lines(&f.ips))?;
            ctx.write(&out.join("prior.txt"), &prov, &ip_lines(&f.prior))?;
            ctx.write(&out.join("mtf.tsv"), &prov, &render_mtf(&f.mtf))?;
            let mut jsonl = String::new();
            for r in &f.host_reports {
                jsonl.push_str(&serde_json::to_string(r)?);
                jsonl.push('\n');
            }
            let hr = out.join("hostreports.jsonl");
            std::fs::write(&hr, jsonl).map_err(|e| Error::path_io(&hr, e))?;
            println!("wrote\t{}", hr.display());
            ctx.write(&out.join("sips.tsv"), &prov, &render_sips_labels(&f.sips))?;
            Ok(Status::Ok)
        }
    }
}
