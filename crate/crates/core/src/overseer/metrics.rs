use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OverseerError;

/// Feature names in export order.
pub const FEATURES: [&str; 7] = [
    "chatbot_turns",
    "walk",
    "run",
    "turn",
    "pickup",
    "assistant_queries",
    "errors",
];

/// Per-feature usage counters for one session.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub chatbot_turns: u64,
    pub walk: u64,
    pub run: u64,
    pub turn: u64,
    pub pickup: u64,
    pub assistant_queries: u64,
    pub errors: u64,
}

impl SessionMetrics {
    pub fn counts(&self) -> [u64; 7] {
        [
            self.chatbot_turns,
            self.walk,
            self.run,
            self.turn,
            self.pickup,
            self.assistant_queries,
            self.errors,
        ]
    }

    fn slot(&mut self, feature: &str) -> Option<&mut u64> {
        Some(match feature {
            "chatbot_turns" => &mut self.chatbot_turns,
            "walk" => &mut self.walk,
            "run" => &mut self.run,
            "turn" => &mut self.turn,
            "pickup" => &mut self.pickup,
            "assistant_queries" => &mut self.assistant_queries,
            "errors" => &mut self.errors,
            _ => return None,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,count\n");
        for (name, count) in FEATURES.iter().zip(self.counts()) {
            out.push_str(&format!("{name},{count}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, OverseerError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut metrics = SessionMetrics::default();
        let mut seen = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| OverseerError::InvalidMetrics(e.to_string()))?;
            let (Some(name), Some(count)) = (record.get(0), record.get(1)) else {
                return Err(OverseerError::InvalidMetrics("expected feature,count".into()));
            };
            let count = count
                .parse()
                .map_err(|_| OverseerError::InvalidMetrics(format!("bad count {count:?}")))?;
            *metrics
                .slot(name)
                .ok_or_else(|| OverseerError::InvalidMetrics(format!("unknown feature {name}")))? =
                count;
            seen.push(name.to_string());
        }
        if seen != FEATURES {
            return Err(OverseerError::InvalidMetrics(
                "features missing or out of order".into(),
            ));
        }
        Ok(metrics)
    }
}

/// Writes `feature,count` rows in fixed order; returns the row count.
pub fn export_metrics(metrics: &SessionMetrics, path: impl AsRef<Path>) -> Result<usize, OverseerError> {
    let path = path.as_ref();
    std::fs::write(path, metrics.to_csv()).map_err(|e| OverseerError::io(path, e))?;
    Ok(FEATURES.len())
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<SessionMetrics, OverseerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| OverseerError::io(path, e))?;
    SessionMetrics::from_csv(&text)
}
