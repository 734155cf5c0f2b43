//! Pushes delivered readings to application endpoints over TCP.

use std::collections::HashMap;
use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Sender};
use std::thread;
use std::time::{Duration, Instant};

use vwsn_core::manager::{DataSink, DeliveredData};

const CONNECT_TIMEOUT: Duration = Duration::from_millis(500);
const RETRY_AFTER: Duration = Duration::from_secs(5);

/// Hands each reading to a writer thread, so the simulation never waits on
/// the network. One connection per endpoint, opened lazily; an endpoint
/// that refuses is skipped for a few seconds before the next attempt.
pub struct TcpSink {
    tx: Sender<(String, String)>,
}

impl TcpSink {
    pub fn spawn() -> Self {
        let (tx, rx) = channel::<(String, String)>();
        thread::Builder::new()
            .name("vwsn-data".into())
            .spawn(move || {
                let mut conns: HashMap<String, TcpStream> = HashMap::new();
                let mut down: HashMap<String, Instant> = HashMap::new();
                for (endpoint, line) in rx {
                    if down
                        .get(&endpoint)
                        .is_some_and(|t| t.elapsed() < RETRY_AFTER)
                    {
                        continue;
                    }
                    if !conns.contains_key(&endpoint) {
                        match connect(&endpoint) {
                            Ok(s) => {
                                down.remove(&endpoint);
                                conns.insert(endpoint.clone(), s);
                            }
                            Err(e) => {
                                log::warn!("data endpoint {endpoint} unreachable: {e}");
                                down.insert(endpoint, Instant::now());
                                continue;
                            }
                        }
                    }
                    let stream = conns.get_mut(&endpoint).expect("just inserted");
                    if let Err(e) = stream.write_all(line.as_bytes()) {
                        log::warn!("write to {endpoint} failed: {e}");
                        conns.remove(&endpoint);
                        down.insert(endpoint, Instant::now());
                    }
                }
            })
            .expect("spawn data writer");
        TcpSink { tx }
    }
}

fn connect(endpoint: &str) -> std::io::Result<TcpStream> {
    let addr = endpoint
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::other("no address"))?;
    let s = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT)?;
    s.set_nodelay(true)?;
    Ok(s)
}

impl DataSink for TcpSink {
    fn deliver(&mut self, data: &DeliveredData) {
        let _ = self.tx.send((data.endpoint.clone(), data.to_line()));
    }
}
