use std::net::IpAddr;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::Utc;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use url::Url;

use super::{Credentials, ExitObservation, FailureClass, ProbeSpec, ProxyProtocol};

const MAX_RESPONSE: usize = 64 * 1024;

type Stage<T> = std::result::Result<T, FailureClass>;

/// Relays one echo probe through the spec's gateway. Never errors: failures are
/// reported in the observation.
pub async fn send_probe(spec: &ProbeSpec) -> ExitObservation {
    let start = Instant::now();
    let outcome = run(spec, start).await;
    let latency = start.elapsed();
    let (exit_ip, failure) = match outcome {
        Ok((ip, token)) if token == spec.token => (Some(ip), None),
        Ok((ip, _)) => (Some(ip), Some(FailureClass::TokenMismatch)),
        Err(c) => (None, Some(c)),
    };
    ExitObservation {
        service: spec.service.clone(),
        exit_ip,
        observed_at: Utc::now(),
        token: spec.token.clone(),
        success: failure.is_none(),
        failure,
        latency,
    }
}

async fn run(spec: &ProbeSpec, start: Instant) -> Stage<(IpAddr, String)> {
    let stream = match tokio::time::timeout(spec.timeout, TcpStream::connect(&spec.gateway)).await {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            log::debug!("gateway {}: {e}", spec.gateway);
            return Err(FailureClass::GatewayUnreachable);
        }
        Err(_) => return Err(FailureClass::GatewayUnreachable),
    };
    let remaining = spec.timeout.saturating_sub(start.elapsed());
    match tokio::time::timeout(remaining, exchange(stream, spec)).await {
        Ok(r) => r,
        Err(_) => Err(FailureClass::RelayTimeout),
    }
}

fn target_parts(target: &Url, token: &str) -> Stage<(String, u16, String)> {
    let host = target.host_str().ok_or(FailureClass::RelayError)?.to_string();
    let port = target.port_or_known_default().ok_or(FailureClass::RelayError)?;
    let mut u = target.clone();
    u.query_pairs_mut().clear().append_pair("token", token);
    let path = match u.query() {
        Some(q) => format!("{}?{q}", u.path()),
        None => u.path().to_string(),
    };
    Ok((host, port, path))
}

fn host_header(host: &str, port: u16) -> String {
    if host.contains(':') && !host.starts_with('[') {
        format!("[{host}]:{port}")
    } else {
        format!("{host}:{port}")
    }
}

fn proxy_auth(creds: &Option<Credentials>) -> String {
    match creds {
        Some(c) => format!(
            "Proxy-Authorization: Basic {}\r\n",
            B64.encode(format!("{}:{}", c.username, c.password))
        ),
        None => String::new(),
    }
}

async fn exchange(mut s: TcpStream, spec: &ProbeSpec) -> Stage<(IpAddr, String)> {
    let (host, port, path) = target_parts(&spec.target, &spec.token)?;
    let authority = host_header(&host, port);
    let request_path = match spec.proxy_protocol {
        ProxyProtocol::Http => format!("http://{authority}{path}"),
        ProxyProtocol::HttpsConnect => {
            let connect = format!(
                "CONNECT {authority} HTTP/1.1\r\nHost: {authority}\r\n{}\r\n",
                proxy_auth(&spec.credentials)
            );
            write(&mut s, connect.as_bytes()).await?;
            let head = read_head(&mut s).await?;
            check_status(status_code(&head)?)?;
            path.clone()
        }
        ProxyProtocol::Socks5 => {
            socks5_connect(&mut s, &host, port, &spec.credentials).await?;
            path.clone()
        }
    };
    let auth = if spec.proxy_protocol == ProxyProtocol::Http {
        proxy_auth(&spec.credentials)
    } else {
        String::new()
    };
    let req = format!(
        "GET {request_path} HTTP/1.1\r\nHost: {authority}\r\n{auth}Connection: close\r\n\r\n"
    );
    write(&mut s, req.as_bytes()).await?;
    let raw = read_to_end(&mut s).await?;
    let (head, body) = split_head(&raw).ok_or(FailureClass::RelayError)?;
    check_status(status_code(head)?)?;
    let body = if header_value(head, "transfer-encoding").is_some_and(|v| v.contains("chunked")) {
        decode_chunked(body).ok_or(FailureClass::RelayError)?
    } else {
        body.to_vec()
    };
    parse_echo_body(&body).ok_or(FailureClass::RelayError)
}

/// Two-line echo body: peer address, then token.
fn parse_echo_body(body: &[u8]) -> Option<(IpAddr, String)> {
    let text = std::str::from_utf8(body).ok()?;
    let mut lines = text.lines();
    let ip: IpAddr = lines.next()?.trim().parse().ok()?;
    let token = lines.next().unwrap_or("").trim().to_string();
    Some((ip.to_canonical(), token))
}

fn check_status(code: u16) -> Stage<()> {
    match code {
        200..=299 => Ok(()),
        407 => Err(FailureClass::ProxyAuthFailed),
        504 | 408 => Err(FailureClass::RelayTimeout),
        _ => Err(FailureClass::RelayError),
    }
}

async fn write(s: &mut TcpStream, bytes: &[u8]) -> Stage<()> {
    s.write_all(bytes).await.map_err(|_| FailureClass::RelayError)
}

async fn read_head(s: &mut TcpStream) -> Stage<Vec<u8>> {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    while !buf.ends_with(b"\r\n\r\n") {
        if buf.len() > MAX_RESPONSE {
            return Err(FailureClass::RelayError);
        }
        match s.read(&mut byte).await {
            Ok(0) | Err(_) => return Err(FailureClass::RelayError),
            Ok(_) => buf.push(byte[0]),
        }
    }
    Ok(buf)
}

async fn read_to_end(s: &mut TcpStream) -> Stage<Vec<u8>> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    loop {
        match s.read(&mut chunk).await {
            Ok(0) => return Ok(buf),
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                if buf.len() > MAX_RESPONSE {
                    return Err(FailureClass::RelayError);
                }
            }
            Err(_) if !buf.is_empty() => return Ok(buf),
            Err(_) => return Err(FailureClass::RelayError),
        }
    }
}

fn split_head(raw: &[u8]) -> Option<(&[u8], &[u8])> {
    let i = raw.windows(4).position(|w| w == b"\r\n\r\n")?;
    Some((&raw[..i + 4], &raw[i + 4..]))
}

fn status_code(head: &[u8]) -> Stage<u16> {
    let text = std::str::from_utf8(head).map_err(|_| FailureClass::RelayError)?;
    let line = text.lines().next().unwrap_or("");
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some(v), Some(code)) if v.starts_with("HTTP/") => code.parse().map_err(|_| FailureClass::RelayError),
        _ => Err(FailureClass::RelayError),
    }
}

fn header_value(head: &[u8], name: &str) -> Option<String> {
    let text = std::str::from_utf8(head).ok()?;
    text.lines().skip(1).find_map(|l| {
        let (k, v) = l.split_once(':')?;
        k.trim().eq_ignore_ascii_case(name).then(|| v.trim().to_ascii_lowercase())
    })
}

fn decode_chunked(mut body: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    loop {
        let eol = body.windows(2).position(|w| w == b"\r\n")?;
        let size_str = std::str::from_utf8(&body[..eol]).ok()?;
        let size = usize::from_str_radix(size_str.split(';').next()?.trim(), 16).ok()?;
        body = &body[eol + 2..];
        if size == 0 {
            return Some(out);
        }
        if body.len() < size + 2 {
            return None;
        }
        out.extend_from_slice(&body[..size]);
        body = &body[size + 2..];
    }
}

async fn read_exact(s: &mut TcpStream, buf: &mut [u8]) -> Stage<()> {
    s.read_exact(buf).await.map(|_| ()).map_err(|_| FailureClass::RelayError)
}

async fn socks5_connect(s: &mut TcpStream, host: &str, port: u16, creds: &Option<Credentials>) -> Stage<()> {
    let greeting: &[u8] = if creds.is_some() { &[5, 2, 0, 2] } else { &[5, 1, 0] };
    write(s, greeting).await?;
    let mut choice = [0u8; 2];
    read_exact(s, &mut choice).await?;
    if choice[0] != 5 {
        return Err(FailureClass::RelayError);
    }
    match (choice[1], creds) {
        (0, _) => {}
        (2, Some(c)) => {
            let (u, p) = (c.username.as_bytes(), c.password.as_bytes());
            if u.len() > 255 || p.len() > 255 {
                return Err(FailureClass::ProxyAuthFailed);
            }
            let mut msg = vec![1, u.len() as u8];
            msg.extend_from_slice(u);
            msg.push(p.len() as u8);
            msg.extend_from_slice(p);
            write(s, &msg).await?;
            let mut status = [0u8; 2];
            read_exact(s, &mut status).await?;
            if status[1] != 0 {
                return Err(FailureClass::ProxyAuthFailed);
            }
        }
        _ => return Err(FailureClass::ProxyAuthFailed),
    }

    let mut req = vec![5, 1, 0];
    match host.trim_matches(['[', ']']).parse::<IpAddr>() {
        Ok(IpAddr::V4(v4)) => {
            req.push(1);
            req.extend_from_slice(&v4.octets());
        }
        Ok(IpAddr::V6(v6)) => {
            req.push(4);
            req.extend_from_slice(&v6.octets());
        }
        Err(_) => {
            if host.len() > 255 {
                return Err(FailureClass::RelayError);
            }
            req.push(3);
            req.push(host.len() as u8);
            req.extend_from_slice(host.as_bytes());
        }
    }
    req.extend_from_slice(&port.to_be_bytes());
    write(s, &req).await?;

    let mut head = [0u8; 4];
    read_exact(s, &mut head).await?;
    match head[1] {
        0 => {}
        6 => return Err(FailureClass::RelayTimeout),
        _ => return Err(FailureClass::RelayError),
    }
    let addr_len = match head[3] {
        1 => 4,
        4 => 16,
        3 => {
            let mut l = [0u8; 1];
            read_exact(s, &mut l).await?;
            l[0] as usize
        }
        _ => return Err(FailureClass::RelayError),
    };
    let mut rest = vec![0u8; addr_len + 2];
    read_exact(s, &mut rest).await
}

/// Default per-probe timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);
