//! Loopback forwarding proxy speaking HTTP (absolute-form), CONNECT and SOCKS5.

use std::net::{IpAddr, SocketAddr};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use tokio::io::{copy_bidirectional, AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpSocket, TcpStream};
use tokio::task::JoinHandle;

#[derive(Debug, Clone, Default)]
pub struct ForwarderConfig {
    pub listen: Option<SocketAddr>,
    /// Source address for outbound connections; this is the exit IP an echo sees.
    pub outbound_ip: Option<IpAddr>,
    /// Relay through another proxy (HTTP CONNECT) instead of connecting directly.
    pub upstream: Option<SocketAddr>,
    pub credentials: Option<(String, String)>,
    /// Accept connections but never answer.
    pub stall: bool,
}

pub struct ForwardingProxy {
    pub addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl ForwardingProxy {
    pub async fn start(cfg: ForwarderConfig) -> std::io::Result<ForwardingProxy> {
        let listen = cfg.listen.unwrap_or_else(|| "127.0.0.1:0".parse().expect("valid"));
        let listener = TcpListener::bind(listen).await?;
        let addr = listener.local_addr()?;
        let handle = tokio::spawn(async move {
            loop {
                let Ok((stream, _)) = listener.accept().await else { continue };
                let cfg = cfg.clone();
                tokio::spawn(async move {
                    if cfg.stall {
                        let _hold = stream;
                        std::future::pending::<()>().await;
                        return;
                    }
                    if let Err(e) = serve(stream, &cfg).await {
                        log::debug!("forwarder: {e}");
                    }
                });
            }
        });
        Ok(ForwardingProxy { addr, handle })
    }
}

impl Drop for ForwardingProxy {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

type IoResult<T> = std::io::Result<T>;

fn other(msg: &str) -> std::io::Error {
    std::io::Error::other(msg.to_string())
}

async fn serve(client: TcpStream, cfg: &ForwarderConfig) -> IoResult<()> {
    let mut first = [0u8; 1];
    client.peek(&mut first).await?;
    if first[0] == 5 {
        serve_socks5(client, cfg).await
    } else {
        serve_http(client, cfg).await
    }
}

async fn open_tunnel(host: &str, port: u16, cfg: &ForwarderConfig) -> IoResult<TcpStream> {
    let hop = match cfg.upstream {
        Some(up) => up,
        None => tokio::net::lookup_host((host, port))
            .await?
            .next()
            .ok_or_else(|| other("no address"))?,
    };
    let socket = if hop.is_ipv4() { TcpSocket::new_v4()? } else { TcpSocket::new_v6()? };
    if let Some(ip) = cfg.outbound_ip {
        socket.bind(SocketAddr::new(ip, 0))?;
    }
    let mut stream = socket.connect(hop).await?;
    if cfg.upstream.is_some() {
        let authority = if host.contains(':') { format!("[{host}]:{port}") } else { format!("{host}:{port}") };
        stream
            .write_all(format!("CONNECT {authority} HTTP/1.1\r\nHost: {authority}\r\n\r\n").as_bytes())
            .await?;
        let head = read_head(&mut stream).await?;
        if !head.starts_with(b"HTTP/1.1 200") && !head.starts_with(b"HTTP/1.0 200") {
            return Err(other("upstream refused CONNECT"));
        }
    }
    Ok(stream)
}

async fn read_head(s: &mut TcpStream) -> IoResult<Vec<u8>> {
    let mut buf = Vec::new();
    let mut b = [0u8; 1];
    while !buf.ends_with(b"\r\n\r\n") {
        if s.read(&mut b).await? == 0 || buf.len() > 16 * 1024 {
            return Err(other("truncated head"));
        }
        buf.push(b[0]);
    }
    Ok(buf)
}

fn split_authority(a: &str) -> Option<(String, u16)> {
    let (h, p) = a.rsplit_once(':')?;
    Some((h.trim_matches(['[', ']']).to_string(), p.parse().ok()?))
}

fn authorized(head: &str, cfg: &ForwarderConfig) -> bool {
    let Some((u, p)) = &cfg.credentials else { return true };
    let expected = format!("Basic {}", B64.encode(format!("{u}:{p}")));
    head.lines().any(|l| {
        l.split_once(':')
            .is_some_and(|(k, v)| k.trim().eq_ignore_ascii_case("proxy-authorization") && v.trim() == expected)
    })
}

async fn serve_http(mut client: TcpStream, cfg: &ForwarderConfig) -> IoResult<()> {
    let head_bytes = read_head(&mut client).await?;
    let head = String::from_utf8_lossy(&head_bytes).into_owned();
    let request_line = head.lines().next().unwrap_or("");
    let mut parts = request_line.split_whitespace();
    let (method, target, version) = (
        parts.next().unwrap_or(""),
        parts.next().unwrap_or(""),
        parts.next().unwrap_or("HTTP/1.1"),
    );
    if !authorized(&head, cfg) {
        client
            .write_all(b"HTTP/1.1 407 Proxy Authentication Required\r\nProxy-Authenticate: Basic\r\nContent-Length: 0\r\n\r\n")
            .await?;
        return Ok(());
    }
    if method.eq_ignore_ascii_case("CONNECT") {
        let (host, port) = split_authority(target).ok_or_else(|| other("bad CONNECT target"))?;
        let mut upstream = match open_tunnel(&host, port, cfg).await {
            Ok(s) => s,
            Err(_) => {
                client.write_all(b"HTTP/1.1 502 Bad Gateway\r\nContent-Length: 0\r\n\r\n").await?;
                return Ok(());
            }
        };
        client.write_all(b"HTTP/1.1 200 Connection Established\r\n\r\n").await?;
        copy_bidirectional(&mut client, &mut upstream).await?;
        return Ok(());
    }

    let url: url::Url = target.parse().map_err(|_| other("expected absolute-form request"))?;
    let host = url.host_str().ok_or_else(|| other("no host"))?.trim_matches(['[', ']']).to_string();
    let port = url.port_or_known_default().ok_or_else(|| other("no port"))?;
    let mut upstream = match open_tunnel(&host, port, cfg).await {
        Ok(s) => s,
        Err(_) => {
            client.write_all(b"HTTP/1.1 502 Bad Gateway\r\nContent-Length: 0\r\n\r\n").await?;
            return Ok(());
        }
    };
    let origin = match url.query() {
        Some(q) => format!("{}?{q}", url.path()),
        None => url.path().to_string(),
    };
    let mut forwarded = format!("{method} {origin} {version}\r\n");
    for line in head.lines().skip(1) {
        let lower = line.to_ascii_lowercase();
        if line.is_empty() || lower.starts_with("proxy-authorization") || lower.starts_with("proxy-connection") {
            continue;
        }
        forwarded.push_str(line);
        forwarded.push_str("\r\n");
    }
    forwarded.push_str("\r\n");
    upstream.write_all(forwarded.as_bytes()).await?;
    copy_bidirectional(&mut client, &mut upstream).await?;
    Ok(())
}

async fn serve_socks5(mut client: TcpStream, cfg: &ForwarderConfig) -> IoResult<()> {
    let mut hdr = [0u8; 2];
    client.read_exact(&mut hdr).await?;
    let mut methods = vec![0u8; hdr[1] as usize];
    client.read_exact(&mut methods).await?;
    let want = if cfg.credentials.is_some() { 2 } else { 0 };
    if !methods.contains(&want) {
        client.write_all(&[5, 0xff]).await?;
        return Ok(());
    }
    client.write_all(&[5, want]).await?;
    if let Some((u, p)) = &cfg.credentials {
        let mut v = [0u8; 2];
        client.read_exact(&mut v).await?;
        let mut user = vec![0u8; v[1] as usize];
        client.read_exact(&mut user).await?;
        let mut plen = [0u8; 1];
        client.read_exact(&mut plen).await?;
        let mut pass = vec![0u8; plen[0] as usize];
        client.read_exact(&mut pass).await?;
        let ok = user == u.as_bytes() && pass == p.as_bytes();
        client.write_all(&[1, if ok { 0 } else { 1 }]).await?;
        if !ok {
            return Ok(());
        }
    }
    let mut req = [0u8; 4];
    client.read_exact(&mut req).await?;
    let host = match req[3] {
        1 => {
            let mut a = [0u8; 4];
            client.read_exact(&mut a).await?;
            IpAddr::from(a).to_string()
        }
        4 => {
            let mut a = [0u8; 16];
            client.read_exact(&mut a).await?;
            IpAddr::from(a).to_string()
        }
        3 => {
            let mut l = [0u8; 1];
            client.read_exact(&mut l).await?;
            let mut name = vec![0u8; l[0] as usize];
            client.read_exact(&mut name).await?;
            String::from_utf8_lossy(&name).into_owned()
        }
        _ => return Err(other("bad address type")),
    };
    let mut port = [0u8; 2];
    client.read_exact(&mut port).await?;
    let port = u16::from_be_bytes(port);
    match open_tunnel(&host, port, cfg).await {
        Ok(mut upstream) => {
            client.write_all(&[5, 0, 0, 1, 0, 0, 0, 0, 0, 0]).await?;
            copy_bidirectional(&mut client, &mut upstream).await?;
        }
        Err(_) => client.write_all(&[5, 5, 0, 1, 0, 0, 0, 0, 0, 0]).await?,
    }
    Ok(())
}

/// Answers every connection with one fixed HTTP response.
pub struct FixedResponder {
    pub addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl FixedResponder {
    pub async fn start(body: &str) -> std::io::Result<FixedResponder> {
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let resp = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = tokio::spawn(async move {
            loop {
                let Ok((mut s, _)) = listener.accept().await else { continue };
                let resp = resp.clone();
                tokio::spawn(async move {
                    if read_head(&mut s).await.is_ok() {
                        let _ = s.write_all(resp.as_bytes()).await;
                        let _ = s.shutdown().await;
                    }
                });
            }
        });
        Ok(FixedResponder { addr, handle })
    }
}

impl Drop for FixedResponder {
    fn drop(&mut self) {
        self.handle.abort();
    }
}
