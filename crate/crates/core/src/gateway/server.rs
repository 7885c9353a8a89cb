use std::io::{BufReader, ErrorKind};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{bounded, unbounded, Receiver, Sender, TrySendError};
use serde_json::{json, Value};

use super::protocol::{display_payload, parse_inbound, Envelope, InboundKind, Published};
use super::ws::{self, Message, MessageReader};
use super::GatewayError;

/// Frames queued per connection before a slow client is dropped.
pub const SEND_QUEUE_BOUND: usize = 256;

enum Outgoing {
    Text(String),
    Pong(Vec<u8>),
    Close,
}

struct ClientOut {
    next_seq: u64,
    tx: Option<Sender<Outgoing>>,
}

struct Client {
    id: u64,
    out: Mutex<ClientOut>,
    stream: TcpStream,
}

impl Client {
    fn out(&self) -> MutexGuard<'_, ClientOut> {
        self.out.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn is_open(&self) -> bool {
        self.out().tx.is_some()
    }

    /// Queues one envelope; false once the client is gone.
    fn push(&self, kind: &str, payload: Value) -> bool {
        let mut out = self.out();
        let Some(tx) = &out.tx else {
            return false;
        };
        let envelope = Envelope {
            kind: kind.to_string(),
            seq: out.next_seq,
            payload,
        };
        let text = serde_json::to_string(&envelope).expect("envelopes serialize");
        match tx.try_send(Outgoing::Text(text)) {
            Ok(()) => {
                out.next_seq += 1;
                true
            }
            Err(TrySendError::Full(_)) => {
                log::warn!("console {} fell {SEND_QUEUE_BOUND} frames behind; disconnecting", self.id);
                out.tx = None;
                drop(out);
                let _ = self.stream.shutdown(Shutdown::Both);
                false
            }
            Err(TrySendError::Disconnected(_)) => {
                out.tx = None;
                false
            }
        }
    }

    fn push_control(&self, msg: Outgoing) {
        if let Some(tx) = &self.out().tx {
            let _ = tx.try_send(msg);
        }
    }

    fn close(&self) {
        self.out().tx = None;
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

#[derive(Default)]
struct Latest {
    servo: Option<Value>,
    display: Option<Value>,
    supervisor: Option<Value>,
    metrics: Option<Value>,
}

struct Shared {
    clients: Mutex<Vec<Arc<Client>>>,
    latest: Mutex<Latest>,
    config: Value,
    inbound: Sender<String>,
    stop: AtomicBool,
    next_id: AtomicU64,
}

impl Shared {
    fn clients(&self) -> MutexGuard<'_, Vec<Arc<Client>>> {
        self.clients.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn latest(&self) -> MutexGuard<'_, Latest> {
        self.latest.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Fans published state out to every connected console.
#[derive(Clone)]
pub struct Broadcaster {
    shared: Arc<Shared>,
}

impl Broadcaster {
    /// Queues `msg` for every open connection; returns how many took it.
    pub fn broadcast(&self, msg: &Published) -> usize {
        let kind = msg.kind();
        let payload = msg.payload();
        let mut clients = self.shared.clients();
        {
            let mut latest = self.shared.latest();
            let slot = match msg {
                Published::Servo(_) => Some(&mut latest.servo),
                Published::Display(_) => Some(&mut latest.display),
                Published::Supervisor(_) => Some(&mut latest.supervisor),
                Published::Metrics(_) => Some(&mut latest.metrics),
                Published::Event(_) => None,
            };
            if let Some(slot) = slot {
                *slot = Some(payload.clone());
            }
        }
        let delivered = clients
            .iter()
            .filter(|c| c.push(kind, payload.clone()))
            .count();
        clients.retain(|c| c.is_open());
        delivered
    }

    pub fn connection_count(&self) -> usize {
        let mut clients = self.shared.clients();
        clients.retain(|c| c.is_open());
        clients.len()
    }
}

/// WebSocket server for operator consoles.
pub struct GatewayServer {
    shared: Arc<Shared>,
    addr: SocketAddr,
    inbound: Receiver<String>,
    acceptor: Option<JoinHandle<()>>,
}

impl GatewayServer {
    /// `config_summary` is sent to every client in its hello frame.
    pub fn bind(addr: &str, config_summary: Value) -> Result<Self, GatewayError> {
        let listener = TcpListener::bind(addr).map_err(|e| GatewayError::BindFailure {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let (tx, rx) = unbounded();
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            latest: Mutex::new(Latest::default()),
            config: config_summary,
            inbound: tx,
            stop: AtomicBool::new(false),
            next_id: AtomicU64::new(1),
        });
        let acceptor = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("gateway-accept".into())
                .spawn(move || accept_loop(listener, shared))?
        };
        log::info!("console gateway listening on ws://{local}");
        Ok(GatewayServer {
            shared,
            addr: local,
            inbound: rx,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn broadcaster(&self) -> Broadcaster {
        Broadcaster {
            shared: Arc::clone(&self.shared),
        }
    }

    /// Text of console `command` and `chat` frames, in arrival order.
    pub fn inbound(&self) -> Receiver<String> {
        self.inbound.clone()
    }

    /// Closes every connection and stops accepting.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        for c in self.shared.clients().drain(..) {
            c.push_control(Outgoing::Close);
            c.out().tx = None;
        }
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for GatewayServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let shared = Arc::clone(&shared);
                let spawned = thread::Builder::new()
                    .name(format!("gateway-{peer}"))
                    .spawn(move || {
                        if let Err(e) = serve_connection(stream, shared) {
                            log::debug!("console {peer}: {e}");
                        }
                    });
                if let Err(e) = spawned {
                    log::error!("cannot spawn connection thread: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn serve_connection(mut stream: TcpStream, shared: Arc<Shared>) -> Result<(), GatewayError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    ws::accept(&mut stream)?;
    stream.set_read_timeout(None)?;

    let (tx, rx) = bounded(SEND_QUEUE_BOUND);
    let client = Arc::new(Client {
        id: shared.next_id.fetch_add(1, Ordering::SeqCst),
        out: Mutex::new(ClientOut { next_seq: 1, tx: Some(tx) }),
        stream: stream.try_clone()?,
    });

    let writer = {
        let mut stream = stream.try_clone()?;
        thread::Builder::new()
            .name(format!("gateway-write-{}", client.id))
            .spawn(move || {
                for out in rx {
                    let sent = match out {
                        Outgoing::Text(t) => ws::write_frame(&mut stream, ws::OP_TEXT, t.as_bytes(), None),
                        Outgoing::Pong(p) => ws::write_frame(&mut stream, ws::OP_PONG, &p, None),
                        Outgoing::Close => {
                            let _ = ws::write_frame(&mut stream, ws::OP_CLOSE, &[], None);
                            break;
                        }
                    };
                    if sent.is_err() {
                        break;
                    }
                }
                let _ = stream.shutdown(Shutdown::Both);
            })?
    };

    {
        // hello goes out before any broadcast reaches this client
        let mut clients = shared.clients();
        let latest = shared.latest();
        client.push(
            "hello",
            json!({
                "config": shared.config,
                "snapshot": {
                    "servo": latest.servo,
                    "display": latest.display.clone().or_else(|| Some(display_payload(&Default::default()))),
                    "supervisor": latest.supervisor,
                    "metrics": latest.metrics,
                },
            }),
        );
        clients.push(Arc::clone(&client));
    }

    let mut reader = MessageReader::new(BufReader::new(stream), true);
    let result = loop {
        let msg = match reader.read() {
            Ok(m) => m,
            Err(GatewayError::Io(e))
                if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset) =>
            {
                break Ok(());
            }
            Err(e) => break Err(e),
        };
        match msg {
            Message::Text(text) => match parse_inbound(&text) {
                Ok(inbound) => {
                    if let (InboundKind::Command | InboundKind::Chat, Some(t)) =
                        (inbound.kind, inbound.text)
                    {
                        let _ = shared.inbound.send(t);
                    }
                    client.push("ack", json!({ "ref_seq": inbound.seq }));
                }
                Err(e) => {
                    client.push("error", json!({ "ref_seq": e.ref_seq, "message": e.message }));
                }
            },
            Message::Binary(_) => {
                client.push(
                    "error",
                    json!({ "ref_seq": null, "message": "binary frames are not supported" }),
                );
            }
            Message::Ping(p) => client.push_control(Outgoing::Pong(p)),
            Message::Pong(_) => {}
            Message::Close => {
                client.push_control(Outgoing::Close);
                break Ok(());
            }
        }
    };
    client.close();
    shared.clients().retain(|c| c.id != client.id);
    let _ = writer.join();
    result
}
