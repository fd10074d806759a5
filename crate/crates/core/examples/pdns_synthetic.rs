//! Synthetic passive DNS stream through matching, lifetimes, usage and the
//! crest/trough summary.

use resipscope::patterns::PatternSet;
use resipscope::pdns::{
    compute_lifetimes, crest_trough_metrics, daily_active_series, extract_dp_resips, generate_pdns,
    lifetime_shares, match_service_domains, render_usage_table, services_in, usage_volume, SyntheticPdnsSpec,
    DEFAULT_TROUGH_FRACTION, DEFAULT_WINDOW,
};

fn main() {
    let records = generate_pdns(&SyntheticPdnsSpec::default());
    let m = match_service_domains(records, &PatternSet::bundled());
    println!("matched {} dropped {} conflicting {}", m.tagged.len(), m.dropped, m.conflicts.records);
    for s in extract_dp_resips(&m.tagged) {
        println!("{}: {} ips over {} fqdns", s.service, s.ips.len(), s.fqdn_count());
    }
    let shares = lifetime_shares(&compute_lifetimes(&m.tagged));
    println!("one day {:.1}%, under ten days {:.1}%", 100.0 * shares.one_day, 100.0 * shares.under_ten);

    let services = services_in(&m.tagged);
    let usage: Vec<_> = services.iter().filter_map(|s| usage_volume(&m.tagged, s)).collect();
    print!("{}", render_usage_table(&usage));
    for s in &services {
        let series = daily_active_series(&m.tagged, s);
        if let Some(c) = crest_trough_metrics(&series, DEFAULT_WINDOW, DEFAULT_TROUGH_FRACTION) {
            println!("{s}: crest {} after {} days, trough {:?}", c.crest_day, c.days_to_crest, c.trough_day);
        }
    }
}
