//! Landscape distributions, overlaps, prefix density and threat-intel joins over
//! RESIP ip sets.

mod density;
mod dist;
mod geo;
mod hostrep;
mod mtf;
mod overlap;
mod ports;
mod sips;
mod synth;

pub use density::{prefix_density, DensePrefix, DensityReport};
pub use dist::{
    distribution_report, render_group_summary, Dimension, DimensionTable, GroupSummary, RankedGroup,
    GROUP_SUMMARY_HEADER,
};
pub use geo::{
    geo_enrich, read_enriched, render_enriched, CachedRemote, GeoRecord, GeoTable, NoRemote, RemoteGeo, ENRICHED_HEADER,
};
pub use hostrep::{
    host_maliciousness, host_report_summary, read_host_reports, render_hostrep_table, AssocType, HostRepSummary,
    HostReport, MalwareAssoc, Reason, HOSTREP_HEADER,
};
pub use mtf::{
    generate_mtf, mtf_summary, read_mtf, render_category_table, render_mtf, render_subcategory_table,
    render_summary_csv, render_threshold_table, CategoryRow, CategoryVocab, MtfRecord, MtfSummary, SyntheticMtfSpec,
    CATEGORY_HEADER, DEFAULT_CATEGORIES, OTHER_CATEGORY, SUBCATEGORY_HEADER, THRESHOLDS, THRESHOLD_HEADER,
};
pub use overlap::{dataset_overlap_matrix, intersection_rates, Granularity, Intersection, IpDataset, OverlapCell, OverlapMatrix};
pub use ports::{port_exposure_summary, PortExposure, PortRow};
pub use sips::{label_map, read_sips_labels, render_sips_labels, sips_rate, SipsLabel, SipsRate};
pub use synth::{generate_analytics_inputs, AnalyticsFixture, SyntheticAnalyticsSpec};

use std::io::BufRead;
use std::net::IpAddr;
use std::path::Path;

use crate::error::{Error, Result};

/// One ip per line (first tab field); `#` comments. Returns the ips and the
/// count of unparseable lines.
pub fn read_ip_list(path: &Path) -> Result<(Vec<IpAddr>, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let mut ips = Vec::new();
    let mut bad = 0;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::path_io(path, e))?;
        let field = line.split('\t').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse() {
            Ok(ip) => ips.push(ip),
            Err(_) => bad += 1,
        }
    }
    Ok((ips, bad))
}
