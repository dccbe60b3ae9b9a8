//! UDP front end and configuration file for running a gateway process.

use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Deserialize;

use super::delivery::{Clock, Delivery, DeliveryError, Outbound};
use super::wire::{Code, Message, MsgType, MAX_DATAGRAM};
use super::{Gateway, GatewayConfig, Requester};
use crate::hash::ContractAddress;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub listen: String,
    pub journal: Option<PathBuf>,
    pub seed: String,
    #[serde(default)]
    pub roots: Vec<ContractAddress>,
    #[serde(default)]
    pub requesters: Vec<Requester>,
    #[serde(default)]
    pub things: Vec<ThingEntry>,
    /// Milliseconds per retry backoff tick.
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThingEntry {
    pub id: String,
    pub sink: String,
}

fn default_tick_ms() -> u64 {
    100
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("seed must not be empty")]
    EmptySeed,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = FileConfig::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        if cfg.seed.is_empty() {
            return Err(ConfigError::EmptySeed);
        }
        Ok(cfg)
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            master_seed: self.seed.as_bytes().to_vec(),
            roots: self.roots.clone(),
            requesters: self.requesters.clone(),
            retry: Default::default(),
        }
    }
}

/// Extracts `host:port` from `udp://host:port/...`, `coap://host:port/...`
/// or a bare `host:port`.
pub fn sink_socket_addr(uri: &str) -> Option<SocketAddr> {
    let rest = uri.split_once("://").map_or(uri, |(_, r)| r);
    let authority = rest.split('/').next()?;
    authority.to_socket_addrs().ok()?.next()
}

/// Sends each outbound message as a POST datagram and waits for an Ack
/// with the same message id.
pub struct UdpDelivery {
    socket: UdpSocket,
    next_id: u16,
}

impl UdpDelivery {
    pub fn new(timeout: Duration) -> std::io::Result<UdpDelivery> {
        let socket = UdpSocket::bind("127.0.0.1:0")?;
        socket.set_read_timeout(Some(timeout))?;
        Ok(UdpDelivery { socket, next_id: 1 })
    }
}

impl Delivery for UdpDelivery {
    fn deliver(&mut self, msg: &Outbound) -> Result<(), DeliveryError> {
        let addr = sink_socket_addr(&msg.target)
            .ok_or_else(|| DeliveryError(format!("cannot route to {}", msg.target)))?;
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1);
        let req = Message::request(Code::Post, id, &msg.wire_path(), &msg.wire_payload());
        let bytes = req.encode().map_err(|e| DeliveryError(e.to_string()))?;
        self.socket
            .send_to(&bytes, addr)
            .map_err(|e| DeliveryError(e.to_string()))?;
        let mut buf = [0u8; MAX_DATAGRAM];
        loop {
            let (n, from) = self
                .socket
                .recv_from(&mut buf)
                .map_err(|e| DeliveryError(format!("no ack from {addr}: {e}")))?;
            if from != addr {
                continue;
            }
            match Message::decode(&buf[..n]) {
                Ok(m) if m.message_id == id && m.msg_type == MsgType::Ack => return Ok(()),
                Ok(m) if m.message_id == id => {
                    return Err(DeliveryError(format!("{addr} replied {:?}", m.msg_type)))
                }
                _ => continue,
            }
        }
    }
}

/// Running request workers and event watcher.
pub struct Server {
    pub local_addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl Server {
    /// Binds `listen` and starts `workers` request threads plus one watcher
    /// that polls the chain every `poll` interval.
    pub fn start(
        gateway: Arc<Gateway>,
        listen: &str,
        workers: usize,
        poll: Duration,
        clock: Arc<dyn Clock>,
    ) -> std::io::Result<Server> {
        let socket = UdpSocket::bind(listen)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local_addr = socket.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();
        for _ in 0..workers.max(1) {
            let socket = socket.try_clone()?;
            let gateway = Arc::clone(&gateway);
            let shutdown = Arc::clone(&shutdown);
            threads.push(std::thread::spawn(move || {
                let mut buf = vec![0u8; MAX_DATAGRAM + 1];
                while !shutdown.load(Ordering::Relaxed) {
                    let Ok((n, from)) = socket.recv_from(&mut buf) else {
                        continue;
                    };
                    let reply = gateway.handle_datagram(&buf[..n], &from.to_string());
                    let _ = socket.send_to(&reply, from);
                }
            }));
        }
        let watcher_shutdown = Arc::clone(&shutdown);
        threads.push(std::thread::spawn(move || {
            let Ok(mut delivery) = UdpDelivery::new(Duration::from_millis(500)) else {
                return;
            };
            while !watcher_shutdown.load(Ordering::Relaxed) {
                if let Err(e) = gateway.poll_events(&mut delivery, clock.as_ref(), None) {
                    eprintln!("watcher: {e}");
                }
                std::thread::sleep(poll);
            }
        }));
        Ok(Server {
            local_addr,
            shutdown,
            threads,
        })
    }

    pub fn stop(self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for t in self.threads {
            let _ = t.join();
        }
    }
}
