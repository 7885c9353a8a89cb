mod common;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use common::schema::Schema;
use deskbot_core::gateway::ws::{Client, ClientSender};
use deskbot_core::gateway::{GatewayError, GatewayServer, Published, PROTOCOL_SCHEMA};
use deskbot_core::overseer::{
    load_script, run_session, OverseerError, RuntimeEvent, Session, SessionReport, ShutdownHandle,
    TranscriptSource,
};
use serde_json::{json, Value};

fn schema() -> Schema {
    Schema::new(serde_json::from_str(PROTOCOL_SCHEMA).unwrap())
}

struct Runtime {
    addr: SocketAddr,
    shutdown: ShutdownHandle,
    thread: JoinHandle<SessionReport>,
    _dir: tempfile::TempDir,
}

impl Runtime {
    fn start() -> Runtime {
        let dir = tempfile::tempdir().unwrap();
        let mut config = common::script_config(dir.path(), "");
        config.source = "gateway".into();
        config.gateway = Some("127.0.0.1:0".into());
        let session = Session::new(config).unwrap();
        let server = session.gateway().unwrap();
        let addr = server.local_addr();
        let inbound = server.inbound();
        let shutdown = session.shutdown_handle();
        let thread =
            thread::spawn(move || run_session(session, TranscriptSource::Channel(inbound)).unwrap());
        Runtime {
            addr,
            shutdown,
            thread,
            _dir: dir,
        }
    }

    fn stop(self) -> SessionReport {
        self.shutdown.request();
        self.thread.join().unwrap()
    }
}

/// Reads every frame a client receives on a background thread.
struct Recorder {
    frames: Arc<Mutex<Vec<(Instant, Value)>>>,
    sender: ClientSender,
    next_seq: u64,
    _reader: JoinHandle<()>,
}

impl Recorder {
    fn connect(addr: SocketAddr) -> Recorder {
        let reader_client = Client::connect(addr).unwrap();
        Self::record(reader_client)
    }

    fn record(mut client: Client) -> Recorder {
        let frames = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&frames);
        // a second handle on the same socket for sending
        let sender = client.sender().unwrap();
        let reader = thread::spawn(move || {
            while let Ok(Some(text)) = client.recv_text() {
                let v: Value = serde_json::from_str(&text).unwrap();
                sink.lock().unwrap().push((Instant::now(), v));
            }
        });
        Recorder {
            frames,
            sender,
            next_seq: 1,
            _reader: reader,
        }
    }

    fn send(&mut self, kind: &str, text: &str) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let frame = json!({"type": kind, "seq": seq, "payload": {"text": text}});
        self.sender.send_text(&frame.to_string()).unwrap();
        seq
    }

    fn snapshot(&self) -> Vec<(Instant, Value)> {
        self.frames.lock().unwrap().clone()
    }

    fn wait_for(&self, what: impl Fn(&Value) -> bool) -> (Instant, Value) {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            if let Some(found) = self.snapshot().into_iter().find(|(_, v)| what(v)) {
                return found;
            }
            assert!(Instant::now() < deadline, "timed out waiting for a frame");
            thread::sleep(Duration::from_millis(5));
        }
    }
}

fn is(kind: &'static str) -> impl Fn(&Value) -> bool {
    move |v| v["type"] == kind
}

fn broadcasts(frames: &[(Instant, Value)]) -> Vec<Value> {
    frames
        .iter()
        .map(|(_, v)| v)
        .filter(|v| !matches!(v["type"].as_str(), Some("hello" | "ack" | "error")))
        .map(|v| json!({"type": v["type"], "payload": v["payload"]}))
        .collect()
}

#[test]
fn console_walk_and_stop_end_to_end() {
    let runtime = Runtime::start();
    let mut a = Recorder::connect(runtime.addr);
    let b = Recorder::connect(runtime.addr);
    a.wait_for(is("hello"));
    b.wait_for(is("hello"));

    let walk_seq = a.send("command", "walk");
    let (_, ack) = a.wait_for(|v| v["type"] == "ack" && v["payload"]["ref_seq"] == walk_seq);
    assert_eq!(ack["payload"]["ref_seq"], 1);
    let (started_at, started) = a.wait_for(is("task_started"));
    assert_eq!(started["payload"]["name"], "walk");
    b.wait_for(is("task_started"));

    thread::sleep(Duration::from_millis(1200));
    let during_walk = a
        .snapshot()
        .iter()
        .filter(|(t, v)| {
            v["type"] == "servo_state" && *t > started_at && *t <= started_at + Duration::from_secs(1)
        })
        .count();
    assert!(during_walk >= 20, "{during_walk} servo frames in the first second");

    let stop_seq = a.send("command", "stop");
    a.wait_for(|v| v["type"] == "ack" && v["payload"]["ref_seq"] == stop_seq);
    let (_, done) = a.wait_for(is("task_finished"));
    assert_eq!(done["payload"]["outcome"]["status"]["kind"], "interrupted");

    a.send("chat", "hello");
    let (_, chat) = a.wait_for(is("chat_turn"));
    assert_eq!(chat["payload"]["tag"], "greeting");

    let idle_from = Instant::now();
    thread::sleep(Duration::from_millis(3100));
    let idle = a
        .snapshot()
        .iter()
        .filter(|(t, v)| v["type"] == "servo_state" && *t > idle_from)
        .count();
    assert!(idle >= 3, "{idle} servo frames while idle for 3 s");

    let report = runtime.stop();
    assert_eq!(report.metrics.walk, 1);
    assert_eq!(report.metrics.chatbot_turns, 1);
    thread::sleep(Duration::from_millis(100));

    let schema = schema();
    for rec in [&a, &b] {
        let frames = rec.snapshot();
        assert_eq!(frames[0].1["type"], "hello");
        for (i, (_, v)) in frames.iter().enumerate() {
            assert_eq!(v["seq"], (i + 1) as u64, "seq must count up by one");
            schema.validate(v).unwrap_or_else(|e| panic!("{e}\n{v}"));
        }
    }
    let (fa, fb) = (broadcasts(&a.snapshot()), broadcasts(&b.snapshot()));
    let start = fa.iter().position(|v| *v == fb[0]).expect("b's first frame reached a");
    assert_eq!(fa[start..], fb[..], "both consoles see the same broadcasts");
}

#[test]
fn every_inbound_frame_gets_exactly_one_reply() {
    let runtime = Runtime::start();
    let client = Client::connect(runtime.addr).unwrap();
    let mut rec = Recorder::record(client);
    rec.wait_for(is("hello"));
    let sent = [
        r#"{"type":"ack_request","seq":10,"payload":{}}"#,
        r#"{"type":"command","seq":11,"payload":{"text":"stop"}}"#,
        r#"{"type":"dance","seq":12,"payload":{}}"#,
        r#"{"type":"chat","seq":13,"payload":{}}"#,
        r#"{"type":"chat","seq":14,"payload":{"text":"thanks"}}"#,
        r#"not json at all"#,
        r#"[1,2,3]"#,
    ];
    for s in sent {
        rec.sender.send_text(s).unwrap();
    }
    rec.sender.send_raw(deskbot_core::gateway::ws::OP_BINARY, b"\x00\x01").unwrap();
    let replies = |frames: &[(Instant, Value)]| {
        frames
            .iter()
            .filter(|(_, v)| matches!(v["type"].as_str(), Some("ack" | "error")))
            .map(|(_, v)| (v["type"].as_str().unwrap().to_string(), v["payload"]["ref_seq"].clone()))
            .collect::<Vec<_>>()
    };
    let deadline = Instant::now() + Duration::from_secs(5);
    while replies(&rec.snapshot()).len() < 8 {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(5));
    }
    rec.wait_for(is("chat_turn"));
    let got = replies(&rec.snapshot());
    let expected: Vec<(String, Value)> = [
        ("ack", json!(10)),
        ("ack", json!(11)),
        ("error", json!(12)),
        ("error", json!(13)),
        ("ack", json!(14)),
        ("error", Value::Null),
        ("error", Value::Null),
        ("error", Value::Null),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    assert_eq!(got, expected);
    // still open after the bad frames
    rec.send("command", "walk");
    rec.wait_for(is("task_started"));
    let schema = schema();
    for (_, v) in rec.snapshot() {
        schema.validate(&v).unwrap_or_else(|e| panic!("{e}\n{v}"));
    }
    runtime.stop();
}

#[test]
fn stalled_client_is_dropped_and_others_keep_receiving() {
    let server = GatewayServer::bind("127.0.0.1:0", json!({})).unwrap();
    let broadcaster = server.broadcaster();
    let stalled = Client::connect(server.local_addr()).unwrap();
    let live = Recorder::connect(server.local_addr());
    live.wait_for(is("hello"));
    while broadcaster.connection_count() < 2 {
        thread::sleep(Duration::from_millis(1));
    }
    let big = "x".repeat(32 * 1024);
    let total = 1500;
    let mut dropped_at = None;
    for i in 0..total {
        let delivered =
            broadcaster.broadcast(&Published::Event(RuntimeEvent::Notice { text: big.clone() }));
        if delivered == 1 && dropped_at.is_none() {
            dropped_at = Some(i);
        }
        // give the live reader a chance to keep up
        if i % 64 == 0 {
            thread::sleep(Duration::from_millis(2));
        }
    }
    assert!(dropped_at.is_some(), "stalled client was never disconnected");
    assert_eq!(broadcaster.connection_count(), 1);
    let deadline = Instant::now() + Duration::from_secs(20);
    while live.snapshot().len() < total + 1 {
        assert!(Instant::now() < deadline, "live client fell behind");
        thread::sleep(Duration::from_millis(10));
    }
    drop(stalled);
}

#[test]
fn occupied_port_fails_to_bind() {
    let holder = GatewayServer::bind("127.0.0.1:0", json!({})).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut config = common::script_config(dir.path(), "");
    config.gateway = Some(holder.local_addr().to_string());
    assert!(matches!(
        Session::new(config),
        Err(OverseerError::Gateway(GatewayError::BindFailure { .. }))
    ));
}

/// Events with timing detail removed, for comparing sources.
fn shape(report: &SessionReport) -> Vec<Value> {
    report
        .events
        .iter()
        .map(|e| {
            let mut v = serde_json::to_value(&e.event).unwrap();
            if let RuntimeEvent::TaskFinished { outcome, .. } = &e.event {
                v["outcome"] = json!(outcome.status);
            }
            v
        })
        .collect()
}

#[test]
fn console_and_script_transcripts_are_indistinguishable() {
    let script = "@0 hello\n@0.5 walk\n@1.5 stop\n@2 home assistant\n@2.5 tell me about the moon\n@3 exit assistant\n@3.5 thanks\n";
    let dir = tempfile::tempdir().unwrap();
    let config = common::script_config(dir.path(), script);
    let lines = load_script(common::script_path(&config), config.script_gap).unwrap();
    let scripted = run_session(Session::new(config).unwrap(), TranscriptSource::Script(lines.clone()))
        .unwrap();

    let runtime = Runtime::start();
    let mut console = Recorder::connect(runtime.addr);
    console.wait_for(is("hello"));
    for line in &lines {
        let kind = if line.text.contains("walk") || line.text == "stop" { "command" } else { "chat" };
        let seq = console.send(kind, &line.text);
        console.wait_for(|v| v["type"] == "ack" && v["payload"]["ref_seq"] == seq);
        // let the session act on it before the next line
        let expected_transcripts = console
            .snapshot()
            .iter()
            .filter(|(_, v)| v["type"] == "transcript")
            .count()
            + 1;
        let deadline = Instant::now() + Duration::from_secs(5);
        while console
            .snapshot()
            .iter()
            .filter(|(_, v)| v["type"] == "transcript")
            .count()
            < expected_transcripts
        {
            assert!(Instant::now() < deadline);
            thread::sleep(Duration::from_millis(5));
        }
        thread::sleep(Duration::from_millis(300));
    }
    let live = runtime.stop();
    assert_eq!(shape(&scripted), shape(&live));
    assert_eq!(scripted.metrics, live.metrics);
}
