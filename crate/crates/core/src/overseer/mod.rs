//! Session supervisor: routes transcripts to the task parser, chatbot and
//! assistant, runs at most one gait task at a time, restarts failed
//! segments and keeps usage metrics.

mod config;
mod event;
mod metrics;
mod router;
mod segment;
mod session;
mod source;

use std::path::{Path, PathBuf};

pub use config::{BusConfig, GaitConfig, OutputConfig, RuntimeConfig, SourceSpec};
pub use event::{
    RuntimeEvent, SegmentName, SegmentState, SegmentStatus, SupervisorStatus, TimedEvent,
};
pub use metrics::{export_metrics, read_metrics, SessionMetrics, FEATURES};
pub use router::{normalize_transcript, route, Mode, Route};
pub use segment::{
    CallError, FaultKind, FaultSpec, RestartPolicy, Segment, SegmentChange, WorkerFactory,
};
pub use session::{load_or_train_model, run_session, Session, SessionReport, ShutdownHandle};
pub use source::{load_script, parse_script, ScriptLine, TranscriptSource};

#[derive(Debug, thiserror::Error)]
pub enum OverseerError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("script line {line}: {message}")]
    InvalidScript { line: usize, message: String },
    #[error("invalid metrics file: {0}")]
    InvalidMetrics(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Intent(#[from] crate::intent::IntentError),
    #[error(transparent)]
    Servo(#[from] crate::servo::ServoError),
    #[error(transparent)]
    Gait(#[from] crate::gait::GaitError),
    #[error(transparent)]
    Fixture(#[from] crate::assistant::FixtureError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

impl OverseerError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        OverseerError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
