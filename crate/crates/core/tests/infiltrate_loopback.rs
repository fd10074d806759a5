use std::collections::HashSet;
use std::net::{IpAddr, SocketAddr};
use std::time::{Duration, Instant};

use resipscope::fixtures::{FixedResponder, ForwarderConfig, ForwardingProxy};
use resipscope::infiltrate::{
    campaign_stats, plan_probes, read_observation_log, schedule_campaign, send_probe,
    CampaignOptions, Credentials, EchoServer, FailureClass, GatewayConfig, ProbeSpec,
    ProxyProtocol,
};
use resipscope::ServiceId;

fn exit_addr() -> IpAddr {
    "127.0.0.2".parse().unwrap()
}

async fn echo() -> EchoServer {
    EchoServer::start("127.0.0.1:0".parse().unwrap(), None).await.unwrap()
}

async fn forwarder(creds: Option<(&str, &str)>) -> ForwardingProxy {
    ForwardingProxy::start(ForwarderConfig {
        outbound_ip: Some(exit_addr()),
        credentials: creds.map(|(u, p)| (u.to_string(), p.to_string())),
        ..Default::default()
    })
    .await
    .unwrap()
}

fn spec(gateway: SocketAddr, protocol: ProxyProtocol, echo: &EchoServer, token: &str) -> ProbeSpec {
    ProbeSpec {
        service: ServiceId::new("fixture").unwrap(),
        gateway: gateway.to_string(),
        proxy_protocol: protocol,
        credentials: None,
        target: echo.probe_url(),
        token: token.to_string(),
        timeout: Duration::from_secs(5),
    }
}

#[tokio::test]
async fn echo_protocol_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("echo.log");
    let echo = EchoServer::start("127.0.0.1:0".parse().unwrap(), Some(&log_path)).await.unwrap();
    let base = format!("http://{}/probe", echo.addr);

    let body = reqwest::get(format!("{base}?token=abc")).await.unwrap().text().await.unwrap();
    assert_eq!(body.lines().collect::<Vec<_>>(), ["127.0.0.1", "abc"]);

    let status = reqwest::get(&base).await.unwrap().status();
    assert_eq!(status.as_u16(), 400);
    assert_eq!(echo.records().len(), 1);

    let (a, b) = tokio::join!(
        reqwest::get(format!("{base}?token=t1")),
        reqwest::get(format!("{base}?token=t2"))
    );
    a.unwrap();
    b.unwrap();
    let text = std::fs::read_to_string(&log_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let tokens: HashSet<&str> = lines.iter().map(|l| l.split('\t').nth(2).unwrap()).collect();
    assert_eq!(tokens, HashSet::from(["abc", "t1", "t2"]));
    assert!(lines.iter().all(|l| l.split('\t').count() == 3));
}

#[tokio::test]
async fn all_protocols_report_forwarder_exit() {
    let echo = echo().await;
    let fwd = forwarder(None).await;
    for (i, proto) in [ProxyProtocol::Http, ProxyProtocol::HttpsConnect, ProxyProtocol::Socks5]
        .into_iter()
        .enumerate()
    {
        let obs = send_probe(&spec(fwd.addr, proto, &echo, &format!("tok-{i}"))).await;
        assert!(obs.success, "{proto}: {:?}", obs.failure);
        assert_eq!(obs.exit_ip, Some(exit_addr()), "{proto}");
    }
    let seen: Vec<_> = echo.records().into_iter().map(|r| r.client).collect();
    assert_eq!(seen, vec![exit_addr(); 3]);
}

#[tokio::test]
async fn credentials_checked() {
    let echo = echo().await;
    let fwd = forwarder(Some(("user", "secret"))).await;
    for proto in [ProxyProtocol::Http, ProxyProtocol::HttpsConnect, ProxyProtocol::Socks5] {
        let mut s = spec(fwd.addr, proto, &echo, "t");
        let denied = send_probe(&s).await;
        assert_eq!(denied.failure, Some(FailureClass::ProxyAuthFailed), "{proto}");
        s.credentials = Some(Credentials {
            username: "user".into(),
            password: "secret".into(),
        });
        assert!(send_probe(&s).await.success, "{proto}");
        s.credentials.as_mut().unwrap().password = "wrong".into();
        assert_eq!(send_probe(&s).await.failure, Some(FailureClass::ProxyAuthFailed), "{proto}");
    }
}

#[tokio::test]
async fn failure_classes() {
    let echo = echo().await;
    let dead = spec("127.0.0.1:1".parse().unwrap(), ProxyProtocol::Http, &echo, "x");
    let obs = send_probe(&dead).await;
    assert!(!obs.success);
    assert_eq!(obs.failure, Some(FailureClass::GatewayUnreachable));
    assert_eq!(obs.exit_ip, None);

    let liar = FixedResponder::start("127.0.0.9\nnot-your-token\n").await.unwrap();
    let fwd = forwarder(None).await;
    let mut s = spec(fwd.addr, ProxyProtocol::Http, &echo, "mine");
    s.target = format!("http://{}/probe", liar.addr).parse().unwrap();
    let obs = send_probe(&s).await;
    assert_eq!(obs.failure, Some(FailureClass::TokenMismatch));
    assert!(!obs.success);

    let stalled = ForwardingProxy::start(ForwarderConfig {
        stall: true,
        ..Default::default()
    })
    .await
    .unwrap();
    let mut s = spec(stalled.addr, ProxyProtocol::Socks5, &echo, "slow");
    s.timeout = Duration::from_millis(300);
    assert_eq!(send_probe(&s).await.failure, Some(FailureClass::RelayTimeout));
}

fn gateways(addrs: &[(&str, SocketAddr)]) -> Vec<GatewayConfig> {
    addrs
        .iter()
        .map(|(name, a)| GatewayConfig {
            service: ServiceId::new(*name).unwrap(),
            gateway: a.to_string(),
            protocol: ProxyProtocol::Http,
            credentials: None,
        })
        .collect()
}

#[tokio::test]
async fn rate_limited_campaign() {
    let echo = echo().await;
    let fwd = forwarder(None).await;
    let dir = tempfile::tempdir().unwrap();
    let specs = plan_probes(&gateways(&[("svc", fwd.addr)]), 100, "c1", &echo.probe_url(), Duration::from_secs(5));
    let mut opts = CampaignOptions::new(dir.path().join("obs.tsv"));
    opts.rate = 10.0;
    opts.concurrency = 4;
    let start = Instant::now();
    let summary = schedule_campaign(specs, &opts).await.unwrap();
    assert!(start.elapsed() >= Duration::from_secs(10));
    assert_eq!(summary.successes, 100);
    let (obs, bad) = read_observation_log(&opts.log_path).unwrap();
    assert_eq!((obs.len(), bad), (100, 0));
    let stats = campaign_stats(&obs);
    assert_eq!(stats.services[0].unique_resips, 1);
    assert_eq!(stats.services[0].successful_probes, 100);
}

#[tokio::test]
async fn zero_duration_logs_nothing() {
    let echo = echo().await;
    let dir = tempfile::tempdir().unwrap();
    let specs = plan_probes(&gateways(&[("svc", echo.addr)]), 5, "c0", &echo.probe_url(), Duration::from_secs(1));
    let mut opts = CampaignOptions::new(dir.path().join("obs.tsv"));
    opts.duration = Some(Duration::ZERO);
    let summary = schedule_campaign(specs, &opts).await.unwrap();
    assert_eq!(summary.issued, 0);
    assert!(read_observation_log(&opts.log_path).unwrap().0.is_empty());
}

#[tokio::test]
async fn dead_gateway_backs_off_while_others_continue() {
    let echo = echo().await;
    let fwd = forwarder(None).await;
    let dir = tempfile::tempdir().unwrap();
    let gws = gateways(&[("alive", fwd.addr), ("dead", "127.0.0.1:1".parse().unwrap())]);
    let specs = plan_probes(&gws, 10, "c2", &echo.probe_url(), Duration::from_secs(2));
    let mut opts = CampaignOptions::new(dir.path().join("obs.tsv"));
    opts.rate = 50.0;
    opts.duration = Some(Duration::from_secs(2));
    opts.backoff_base = Duration::from_millis(400);
    let summary = schedule_campaign(specs, &opts).await.unwrap();
    let (obs, _) = read_observation_log(&opts.log_path).unwrap();
    let alive = obs.iter().filter(|o| o.service.as_str() == "alive" && o.success).count();
    let dead = obs.iter().filter(|o| o.service.as_str() == "dead").count();
    assert_eq!(alive, 10);
    assert!(dead >= 1 && dead < 10, "dead gateway probed {dead} times");
    assert!(summary.unissued > 0);
}

#[tokio::test]
async fn kill_and_resume_has_no_duplicate_tokens() {
    let echo = echo().await;
    let fwd = forwarder(None).await;
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("obs.tsv");
    let gws = gateways(&[("a", fwd.addr), ("b", fwd.addr)]);
    let specs = plan_probes(&gws, 30, "c3", &echo.probe_url(), Duration::from_secs(5));
    let mut opts = CampaignOptions::new(&log_path);
    opts.rate = 40.0;

    let first = {
        let specs = specs.clone();
        let opts = opts.clone();
        tokio::spawn(async move { schedule_campaign(specs, &opts).await })
    };
    tokio::time::sleep(Duration::from_millis(700)).await;
    first.abort();
    let _ = first.await;
    std::fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"2021-04-10T00:00:00.000Z\ta\tc3.a.000"))
        .unwrap();
    let before = read_observation_log(&log_path).unwrap().0.len();
    assert!(before > 0 && before < 60, "first run logged {before}");

    opts.resume = true;
    let summary = schedule_campaign(specs, &opts).await.unwrap();
    assert_eq!(summary.already_logged, before);
    let (obs, bad) = read_observation_log(&log_path).unwrap();
    assert_eq!(bad, 0);
    let tokens: HashSet<&str> = obs.iter().map(|o| o.token.as_str()).collect();
    assert_eq!(tokens.len(), obs.len());
    assert_eq!(obs.len(), 60);
    let stats = campaign_stats(&obs);
    let series = &stats.series;
    for w in series.windows(2).filter(|w| w[0].service == w[1].service) {
        assert!(w[1].cumulative_unique_ips >= w[0].cumulative_unique_ips);
    }
}
