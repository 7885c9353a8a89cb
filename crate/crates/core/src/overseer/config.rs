use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{FaultSpec, OverseerError, RestartPolicy};
use crate::gait::{GaitParams, DEFAULT_TICK};
use crate::intent::TrainingConfig;
use crate::servo::{JitterMode, RobotBodyConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusConfig {
    /// Only `"sim"` is supported.
    pub kind: String,
    pub jitter: JitterMode,
    pub seed: u64,
    pub body: RobotBodyConfig,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig {
            kind: "sim".into(),
            jitter: JitterMode::HardwareTimed,
            seed: 0,
            body: RobotBodyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitConfig {
    #[serde(flatten)]
    pub params: GaitParams,
    /// Cycles played for one "turn" command.
    pub turn_cycles: u32,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            params: GaitParams::default(),
            turn_cycles: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub metrics: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub error_log: Option<PathBuf>,
    pub growth_log: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceSpec {
    Interactive,
    Script(PathBuf),
    Gateway,
}

impl SourceSpec {
    pub fn parse(text: &str) -> Result<Self, OverseerError> {
        match text {
            "interactive" => Ok(SourceSpec::Interactive),
            "gateway" => Ok(SourceSpec::Gateway),
            _ => match text.strip_prefix("script:") {
                Some(path) if !path.is_empty() => Ok(SourceSpec::Script(path.into())),
                _ => Err(OverseerError::InvalidConfig(format!(
                    "source must be interactive, gateway or script:<path>, got {text:?}"
                ))),
            },
        }
    }
}

/// Runtime configuration file. Relative paths are resolved against the
/// directory holding the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub bus: BusConfig,
    /// Trained model; trained from `intents` and written here when missing.
    pub model: PathBuf,
    /// Intents corpus; the bundled desk corpus when absent.
    pub intents: Option<PathBuf>,
    /// Assistant knowledge fixture; the bundled sample when absent.
    pub fixture: Option<PathBuf>,
    pub gait: GaitConfig,
    /// Console address, e.g. `127.0.0.1:8765`.
    pub gateway: Option<String>,
    pub source: String,
    pub outputs: OutputConfig,
    /// Pace ticks at wall-clock rate. Defaults to on for interactive and
    /// gateway sources and off for scripts.
    pub realtime: Option<bool>,
    pub tick: f64,
    /// Seconds between unstamped script lines, and after the last one.
    pub script_gap: f64,
    pub faults: Vec<FaultSpec>,
    pub restart: RestartPolicy,
    pub segment_timeout_ms: u64,
    pub chat_seed: u64,
    /// Fixed `YYYY-MM-DD` for the assistant clock; the system date when absent.
    pub date: Option<String>,
    pub training: TrainingConfig,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            bus: BusConfig::default(),
            model: "model.json".into(),
            intents: None,
            fixture: None,
            gait: GaitConfig::default(),
            gateway: None,
            source: "interactive".into(),
            outputs: OutputConfig::default(),
            realtime: None,
            tick: DEFAULT_TICK,
            script_gap: 1.0,
            faults: Vec::new(),
            restart: RestartPolicy::default(),
            segment_timeout_ms: 1000,
            chat_seed: 0,
            date: None,
            training: TrainingConfig::default(),
        }
    }
}

impl RuntimeConfig {
    pub fn from_json(json: &str) -> Result<Self, OverseerError> {
        let config: RuntimeConfig =
            serde_json::from_str(json).map_err(|e| OverseerError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OverseerError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| OverseerError::io(path, e))?;
        let mut config = Self::from_json(&json)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.model);
        let out = &mut self.outputs;
        for p in [
            &mut self.intents,
            &mut self.fixture,
            &mut out.metrics,
            &mut out.trace,
            &mut out.error_log,
            &mut out.growth_log,
            &mut out.events,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Ok(SourceSpec::Script(p)) = SourceSpec::parse(&self.source) {
            if p.is_relative() {
                self.source = format!("script:{}", base.join(p).display());
            }
        }
    }

    pub fn validate(&self) -> Result<(), OverseerError> {
        let bad = |m: String| Err(OverseerError::InvalidConfig(m));
        if self.bus.kind != "sim" {
            return bad(format!("unsupported bus kind {:?}", self.bus.kind));
        }
        if !(self.tick > 0.0) {
            return bad("tick must be positive".into());
        }
        if !(self.script_gap >= 0.0) {
            return bad("script_gap must be non-negative".into());
        }
        if self.segment_timeout_ms == 0 {
            return bad("segment_timeout_ms must be positive".into());
        }
        self.source_spec()?;
        self.assistant_date()?;
        for f in &self.faults {
            f.validate().map_err(OverseerError::InvalidConfig)?;
        }
        self.bus
            .body
            .validate()
            .map_err(|e| OverseerError::InvalidConfig(e.to_string()))?;
        self.gait
            .params
            .validate(&self.bus.body)
            .map_err(|e| OverseerError::InvalidConfig(e.to_string()))?;
        self.training
            .validate()
            .map_err(|e| OverseerError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn source_spec(&self) -> Result<SourceSpec, OverseerError> {
        SourceSpec::parse(&self.source)
    }

    pub fn assistant_date(&self) -> Result<Option<NaiveDate>, OverseerError> {
        self.date
            .as_deref()
            .map(|d| {
                NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|e| OverseerError::InvalidConfig(format!("date {d:?}: {e}")))
            })
            .transpose()
    }

    pub fn is_realtime(&self) -> bool {
        self.realtime.unwrap_or(!matches!(
            self.source_spec(),
            Ok(SourceSpec::Script(_))
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RuntimeConfig::from_json("{}").unwrap(), RuntimeConfig::default());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(RuntimeConfig::from_json(r#"{"modle": "x"}"#).is_err());
        assert!(RuntimeConfig::from_json(r#"{"source": "microphone"}"#).is_err());
        assert!(RuntimeConfig::from_json(r#"{"bus": {"kind": "i2c"}}"#).is_err());
        assert!(RuntimeConfig::from_json(r#"{"date": "March 1"}"#).is_err());
        assert!(RuntimeConfig::from_json(
            r#"{"faults": [{"segment": "chatbot"}]}"#
        )
        .is_err());
    }

    #[test]
    fn parses_a_full_config() {
        let json = r#"{
            "bus": {"kind": "sim", "jitter": {"mode": "software_timed", "sigma_us": 4.0}, "seed": 9},
            "model": "m.json",
            "gait": {"step_period": 1.0, "turn_cycles": 1},
            "source": "script:demo.txt",
            "outputs": {"metrics": "out/metrics.csv"},
            "faults": [{"segment": "chatbot", "on_call": 1, "persistent": true}],
            "date": "2024-03-01"
        }"#;
        let mut c = RuntimeConfig::from_json(json).unwrap();
        assert_eq!(c.bus.jitter, JitterMode::SoftwareTimed { sigma_us: 4.0 });
        assert_eq!(c.gait.params.step_period, 1.0);
        assert_eq!(c.gait.turn_cycles, 1);
        assert!(!c.is_realtime());
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.model, PathBuf::from("/cfg/m.json"));
        assert_eq!(c.outputs.metrics, Some(PathBuf::from("/cfg/out/metrics.csv")));
        assert_eq!(c.source_spec().unwrap(), SourceSpec::Script("/cfg/demo.txt".into()));
        assert_eq!(
            c.assistant_date().unwrap(),
            NaiveDate::from_ymd_opt(2024, 3, 1)
        );
    }
}
