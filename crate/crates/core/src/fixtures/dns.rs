//! Minimal authoritative UDP DNS responder answering A/AAAA from a fixed table.

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};

use hickory_proto::op::{Message, MessageType, ResponseCode};
use hickory_proto::rr::rdata::{A, AAAA};
use hickory_proto::rr::{RData, Record, RecordType};
use tokio::net::UdpSocket;
use tokio::task::JoinHandle;

pub struct StubDns {
    pub addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl StubDns {
    /// Names not in `table` answer NXDOMAIN.
    pub async fn start(table: HashMap<String, Vec<IpAddr>>) -> std::io::Result<StubDns> {
        let table: HashMap<String, Vec<IpAddr>> = table
            .into_iter()
            .map(|(k, v)| (k.trim_end_matches('.').to_ascii_lowercase(), v))
            .collect();
        let sock = UdpSocket::bind("127.0.0.1:0").await?;
        let addr = sock.local_addr()?;
        let handle = tokio::spawn(async move {
            let mut buf = vec![0u8; 4096];
            loop {
                let Ok((n, peer)) = sock.recv_from(&mut buf).await else { continue };
                let Ok(req) = Message::from_vec(&buf[..n]) else { continue };
                let Some(q) = req.queries().first().cloned() else { continue };
                let mut resp = Message::new();
                resp.set_id(req.id())
                    .set_message_type(MessageType::Response)
                    .set_op_code(req.op_code())
                    .set_recursion_desired(req.recursion_desired())
                    .set_authoritative(true)
                    .add_query(q.clone());
                let key = q.name().to_ascii().trim_end_matches('.').to_ascii_lowercase();
                match table.get(&key) {
                    None => {
                        resp.set_response_code(ResponseCode::NXDomain);
                    }
                    Some(ips) => {
                        for ip in ips {
                            let rdata = match (ip, q.query_type()) {
                                (IpAddr::V4(v4), RecordType::A) => RData::A(A(*v4)),
                                (IpAddr::V6(v6), RecordType::AAAA) => RData::AAAA(AAAA(*v6)),
                                _ => continue,
                            };
                            resp.add_answer(Record::from_rdata(q.name().clone(), 60, rdata));
                        }
                    }
                }
                if let Ok(wire) = resp.to_vec() {
                    let _ = sock.send_to(&wire, peer).await;
                }
            }
        });
        Ok(StubDns { addr, handle })
    }
}

impl Drop for StubDns {
    fn drop(&mut self) {
        self.handle.abort();
    }
}
