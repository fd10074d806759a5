//! Hermetic analytics run: enrichment, distributions, dense prefixes, overlap
//! and the threat-intel joins.

use std::collections::HashSet;
use std::net::IpAddr;

use resipscope::analytics::{
    dataset_overlap_matrix, distribution_report, generate_analytics_inputs, geo_enrich, host_report_summary,
    label_map, mtf_summary, prefix_density, render_hostrep_table, render_threshold_table, sips_rate, CachedRemote,
    CategoryVocab, Dimension, GeoTable, IpDataset, NoRemote, SyntheticAnalyticsSpec,
};

fn main() -> resipscope::Result<()> {
    let f = generate_analytics_inputs(&SyntheticAnalyticsSpec::default());
    let table = GeoTable::parse_csv(&f.geo_csv, "geo.csv")?;
    let enriched = geo_enrich(f.ips.iter().copied(), &table, None::<&mut CachedRemote<NoRemote>>);
    for t in distribution_report(&enriched, &[Dimension::Province, Dimension::Isp]) {
        print!("{}", t.render_top(3));
    }

    let dense = prefix_density(f.ips.iter().copied(), 24, 0.9)?;
    for p in &dense.prefixes {
        println!("dense {} ({} members)", p.cidr, p.members);
    }

    let ours = IpDataset::new("Ours", f.ips.iter().copied());
    let prior = IpDataset::new("Prior", f.prior.iter().copied());
    print!("{}", dataset_overlap_matrix(&[ours], &[prior]).render_text());

    let set: HashSet<IpAddr> = f.ips.iter().copied().collect();
    let mtf = mtf_summary(&f.mtf, &set, &CategoryVocab::default());
    print!("{}", render_threshold_table(&[("Synthetic", &mtf)]));
    print!("{}", render_hostrep_table(&[("Synthetic", host_report_summary(&set, &f.host_reports))]));
    println!("SIPS: {}", sips_rate(&set, &label_map(&f.sips)?, false).render());
    Ok(())
}
