//! Search results to apex candidates, then a crawl of one candidate served by a
//! local fixture site, then homepage features.

use std::time::Duration;

use resipscope::classify::{featurize_html, KeywordSet};
use resipscope::crawl::{crawl_site, write_snapshot_bundle, CrawlOptions, Politeness, Stopwords};
use resipscope::fixtures::{chain_site, SiteServer};
use resipscope::harvest::{build_query_jobs, ingest_search_results, render_candidates, QueryTable};

#[tokio::main]
async fn main() -> resipscope::Result<()> {
    let jobs = build_query_jobs(&QueryTable::bundled())?;
    println!("query jobs: {} (first: {})", jobs.len(), jobs[0].id());

    let dir = tempfile::tempdir()?;
    let results = dir.path().join("results.tsv");
    std::fs::write(
        &results,
        "https://www.rps-fixture.com/pricing\tresidential proxy\ten\tgoogle\t1\n\
         https://rps-fixture.com/\t住宅代理\tzh\tbaidu\t4\n\
         https://blog.example.org/post\trotating proxy\ten\tbing\t9\n",
    )?;
    let report = ingest_search_results(&results)?;
    print!("{}", render_candidates(&report.candidates));

    let mut pages = chain_site(4, "partner.example.net");
    pages.insert(
        "/".into(),
        "<html><head><title>Rotating residential proxies</title>\
         <meta name=\"keywords\" content=\"residential proxy, rotating ips\"></head>\
         <body><p>Millions of residential ips for businesses.</p><a href=\"/p1\">pricing</a></body></html>"
            .into(),
    );
    let server = SiteServer::start(pages).await?;
    let apex = report.candidates[1].apex.clone();
    let opts = CrawlOptions {
        politeness: Politeness {
            enabled: false,
            ..Default::default()
        },
        timeout: Duration::from_secs(5),
        homepage: Some(format!("http://www.{apex}:{}/", server.addr.port()).parse().expect("valid url")),
        resolve: vec![(format!("www.{apex}"), server.addr)],
        ..Default::default()
    };
    let snap = crawl_site(&apex, &opts).await?;
    println!("{apex}: {} pages, fetch_failed={}", snap.page_count(), snap.fetch_failed);
    write_snapshot_bundle(&snap, &dir.path().join(apex.as_str()))?;

    let html = &snap.homepage().expect("homepage fetched").html;
    let fv = featurize_html(html, &KeywordSet::bundled(), Stopwords::bundled(), None);
    println!("features: {} values, {} nonzero", fv.values().len(), fv.values().iter().filter(|v| **v != 0.0).count());
    Ok(())
}
