use std::fmt;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::assistant::AssistantAnswer;
use crate::gait::{TaskCommand, TaskOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentName {
    Speech,
    Chatbot,
    TaskParser,
    Assistant,
    Gateway,
}

impl SegmentName {
    pub const ALL: [SegmentName; 5] = [
        SegmentName::Speech,
        SegmentName::Chatbot,
        SegmentName::TaskParser,
        SegmentName::Assistant,
        SegmentName::Gateway,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentName::Speech => "speech",
            SegmentName::Chatbot => "chatbot",
            SegmentName::TaskParser => "task_parser",
            SegmentName::Assistant => "assistant",
            SegmentName::Gateway => "gateway",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.as_str() == name)
    }
}

impl fmt::Display for SegmentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum SegmentStatus {
    Running,
    Restarting,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentState {
    pub name: SegmentName,
    pub status: SegmentStatus,
    pub restart_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisorStatus {
    pub segments: Vec<SegmentState>,
    pub active_task: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RuntimeEvent {
    Transcript {
        text: String,
    },
    CommandDetected {
        command: TaskCommand,
    },
    ChatTurn {
        input: String,
        reply: String,
        tag: Option<String>,
        confidence: f64,
    },
    TaskStarted {
        name: String,
    },
    TaskFinished {
        name: String,
        outcome: TaskOutcome,
    },
    AssistantAnswered {
        query: String,
        answer: AssistantAnswer,
    },
    ModeChanged {
        mode: Mode,
    },
    /// User-visible message that is not a fault, e.g. a busy rejection.
    Notice {
        text: String,
    },
    SegmentFailed {
        segment: SegmentName,
        reason: String,
    },
    ErrorReport {
        segment: SegmentName,
        reason: String,
        time: f64,
    },
    SegmentRestarted {
        segment: SegmentName,
        restart_count: u32,
    },
}

impl RuntimeEvent {
    /// Wire `type` name for this event.
    pub fn kind(&self) -> &'static str {
        match self {
            RuntimeEvent::Transcript { .. } => "transcript",
            RuntimeEvent::CommandDetected { .. } => "command_detected",
            RuntimeEvent::ChatTurn { .. } => "chat_turn",
            RuntimeEvent::TaskStarted { .. } => "task_started",
            RuntimeEvent::TaskFinished { .. } => "task_finished",
            RuntimeEvent::AssistantAnswered { .. } => "assistant_answer",
            RuntimeEvent::ModeChanged { .. } => "mode_changed",
            RuntimeEvent::Notice { .. } => "notice",
            RuntimeEvent::SegmentFailed { .. } => "segment_failed",
            RuntimeEvent::ErrorReport { .. } => "error_report",
            RuntimeEvent::SegmentRestarted { .. } => "segment_restarted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    /// Session time in seconds.
    pub at: f64,
    #[serde(flatten)]
    pub event: RuntimeEvent,
}
