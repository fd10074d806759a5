//! Direct RESIP collection: an API endpoint and a DNS-published name list, both
//! served locally, then verification through a forwarding proxy.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use resipscope::collect::{
    fetch_api_resips, resolve_dns_resips, verify_many, ApiEndpointConfig, DnsScanOptions, EntryStore, FieldMapping,
};
use resipscope::fixtures::{ForwarderConfig, ForwardingProxy, SiteServer, StubDns};
use resipscope::infiltrate::{EchoServer, ProxyProtocol};
use resipscope::patterns::PatternSet;

#[tokio::main]
async fn main() -> resipscope::Result<()> {
    // a direct RESIP listens and exits on the same address
    let proxy = ForwardingProxy::start(ForwarderConfig {
        listen: Some("127.0.0.4:0".parse().expect("valid")),
        outbound_ip: Some("127.0.0.4".parse().expect("valid")),
        ..Default::default()
    })
    .await?;
    let listing = format!(r#"{{"data":[{{"ip":"127.0.0.4","port":{}}}]}}"#, proxy.addr.port());
    let api = SiteServer::start(HashMap::from([("/get".to_string(), listing.clone())])).await?;
    let cfg = ApiEndpointConfig {
        service: "pinyiyun".parse()?,
        url: format!("http://{}/get", api.addr),
        params: BTreeMap::new(),
        auth: None,
        poll_interval_secs: 1,
        protocol: Some(ProxyProtocol::Http),
        mapping: FieldMapping {
            items: "/data".into(),
            ip: "/ip".into(),
            port: "/port".into(),
            username: None,
            password: None,
        },
        sample_response: listing,
        retries: 1,
        retry_base_ms: 10,
    };
    let dir = tempfile::tempdir()?;
    let mut store = EntryStore::open(dir.path().join("entries.tsv"))?;
    let poll = fetch_api_resips(&cfg, None).await?;
    store.append(&poll.entries)?;

    let dns = StubDns::start(HashMap::from([
        ("a1.shenlongip.com".to_string(), vec!["203.0.113.7".parse().expect("valid")]),
        ("a2.shenlongip.com".to_string(), vec!["203.0.113.8".parse().expect("valid")]),
    ]))
    .await?;
    let patterns = PatternSet::parse(
        "[[service]]\nid = \"shenlongip.com\"\napexes = [\"shenlongip.com\"]\nlabel_globs = [\"*\"]\nport = 62456\n\
         names = [\"a1.shenlongip.com\", \"a2.shenlongip.com\", \"a3.shenlongip.com\"]\n",
    )?;
    let scan = resolve_dns_resips(&patterns, &DnsScanOptions::new(dns.addr)).await?;
    store.append(&scan.entries)?;
    println!("stored {} distinct entries in {}", store.distinct_count(), store.path().display());

    let echo = EchoServer::start("127.0.0.1:0".parse().expect("valid"), None).await?;
    let results = verify_many(&poll.entries, &echo.probe_url(), Duration::from_secs(3), 4).await;
    for (e, r) in poll.entries.iter().zip(&results) {
        println!("{}:{} ok={} exit={:?}", e.ip, e.port, r.ok, r.exit_ip);
    }
    Ok(())
}
