//! A short infiltration campaign through two loopback gateways with distinct exit
//! addresses, then the per-provider table.

use std::collections::BTreeMap;
use std::time::Duration;

use resipscope::fixtures::{ForwarderConfig, ForwardingProxy};
use resipscope::infiltrate::{
    campaign_stats, plan_probes, read_observation_log, render_campaign_table, schedule_campaign, CampaignOptions,
    EchoServer, GatewayConfig, ProxyProtocol,
};

#[tokio::main]
async fn main() -> resipscope::Result<()> {
    let echo = EchoServer::start("127.0.0.1:0".parse().expect("valid"), None).await?;
    let mut gateways = Vec::new();
    for (name, exit, protocol) in [
        ("alpha", "127.0.0.2", ProxyProtocol::Http),
        ("beta", "127.0.0.3", ProxyProtocol::Socks5),
    ] {
        let proxy = ForwardingProxy::start(ForwarderConfig {
            outbound_ip: Some(exit.parse().expect("valid")),
            ..Default::default()
        })
        .await?;
        gateways.push((
            GatewayConfig {
                service: name.parse()?,
                gateway: proxy.addr.to_string(),
                protocol,
                credentials: None,
            },
            proxy,
        ));
    }
    let configs: Vec<GatewayConfig> = gateways.iter().map(|(g, _)| g.clone()).collect();
    let specs = plan_probes(&configs, 10, "demo", &echo.probe_url(), Duration::from_secs(5));

    let dir = tempfile::tempdir()?;
    let log = dir.path().join("observations.log");
    let mut opts = CampaignOptions::new(&log);
    opts.rate = 100.0;
    let summary = schedule_campaign(specs, &opts).await?;
    println!("issued {} successes {} failures {}", summary.issued, summary.successes, summary.failures);

    let (obs, _) = read_observation_log(&log)?;
    let names = BTreeMap::from([
        ("alpha".parse()?, "Alpha".to_string()),
        ("beta".parse()?, "Beta".to_string()),
    ]);
    print!("{}", render_campaign_table(&campaign_stats(&obs), &names));
    Ok(())
}
