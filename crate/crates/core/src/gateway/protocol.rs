use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::overseer::{RuntimeEvent, SessionMetrics, SupervisorStatus};
use crate::servo::{DotMatrixFrame, ServoSnapshot};

/// JSON Schema for every frame the runtime sends.
pub const PROTOCOL_SCHEMA: &str = include_str!("../../data/console_protocol.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    pub payload: Value,
}

/// State and events the session pushes to consoles.
#[derive(Clone, Debug, PartialEq)]
pub enum Published {
    Servo(ServoSnapshot),
    Display(DotMatrixFrame),
    Supervisor(SupervisorStatus),
    Metrics(SessionMetrics),
    Event(RuntimeEvent),
}

pub(crate) fn display_payload(frame: &DotMatrixFrame) -> Value {
    json!({ "bitmap": frame.bits() })
}

impl Published {
    pub fn kind(&self) -> &'static str {
        match self {
            Published::Servo(_) => "servo_state",
            Published::Display(_) => "display",
            Published::Supervisor(_) => "supervisor",
            Published::Metrics(_) => "metrics",
            Published::Event(e) => e.kind(),
        }
    }

    pub fn payload(&self) -> Value {
        let value = match self {
            Published::Servo(s) => serde_json::to_value(s),
            Published::Display(d) => Ok(display_payload(d)),
            Published::Supervisor(s) => serde_json::to_value(s),
            Published::Metrics(m) => serde_json::to_value(m),
            Published::Event(e) => serde_json::to_value(e).map(|mut v| {
                if let Some(map) = v.as_object_mut() {
                    map.remove("event");
                }
                v
            }),
        };
        value.expect("published types serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InboundKind {
    Command,
    Chat,
    AckRequest,
}

/// A well-formed client frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inbound {
    pub seq: u64,
    pub kind: InboundKind,
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboundError {
    /// The frame's seq when it could be read.
    pub ref_seq: Option<u64>,
    pub message: String,
}

pub fn parse_inbound(text: &str) -> Result<Inbound, InboundError> {
    let fail = |ref_seq, message: &str| InboundError {
        ref_seq,
        message: message.to_string(),
    };
    let value: Value = serde_json::from_str(text).map_err(|e| InboundError {
        ref_seq: None,
        message: format!("invalid JSON: {e}"),
    })?;
    let Some(obj) = value.as_object() else {
        return Err(fail(None, "frame must be a JSON object"));
    };
    let Some(seq) = obj.get("seq").and_then(Value::as_u64) else {
        return Err(fail(None, "missing or invalid seq"));
    };
    let seq = Some(seq);
    let kind = match obj.get("type").and_then(Value::as_str) {
        Some("command") => InboundKind::Command,
        Some("chat") => InboundKind::Chat,
        Some("ack_request") => InboundKind::AckRequest,
        Some(other) => return Err(fail(seq, &format!("unsupported type {other:?}"))),
        None => return Err(fail(seq, "missing type")),
    };
    let payload = match obj.get("payload") {
        Some(Value::Object(p)) => p,
        None if kind == InboundKind::AckRequest => &serde_json::Map::new(),
        _ => return Err(fail(seq, "payload must be an object")),
    };
    let text = match (kind, payload.get("text")) {
        (InboundKind::AckRequest, _) => None,
        (_, Some(Value::String(t))) if !t.trim().is_empty() => Some(t.clone()),
        _ => return Err(fail(seq, "payload.text must be a nonempty string")),
    };
    Ok(Inbound {
        seq: seq.expect("set above"),
        kind,
        text,
    })
}
