use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IntentError;

/// Above this many tags the output layer would be wider than half the
/// second hidden layer.
pub const MAX_RECOMMENDED_TAGS: usize = 32;

const BUNDLED: &str = include_str!("../../data/desk_intents.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub tag: String,
    pub patterns: Vec<String>,
    pub responses: Vec<String>,
    /// Carried through load/save; routing never reads it.
    #[serde(default)]
    pub context: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentCorpus {
    pub version: u64,
    pub intents: Vec<Intent>,
}

impl IntentCorpus {
    pub fn new(version: u64, intents: Vec<Intent>) -> Result<Self, IntentError> {
        let corpus = IntentCorpus { version, intents };
        corpus.validate()?;
        Ok(corpus)
    }

    /// The 14-tag desk corpus shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled corpus is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, IntentError> {
        let corpus: IntentCorpus =
            serde_json::from_str(json).map_err(|e| IntentError::InvalidCorpus(e.to_string()))?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntentError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        if self.intents.len() < 2 {
            return Err(IntentError::InvalidCorpus(format!(
                "need at least 2 intents, found {}",
                self.intents.len()
            )));
        }
        let mut seen = HashSet::new();
        for intent in &self.intents {
            if intent.tag.is_empty() {
                return Err(IntentError::InvalidCorpus("empty tag".into()));
            }
            if !seen.insert(intent.tag.as_str()) {
                return Err(IntentError::InvalidCorpus(format!(
                    "duplicate tag {:?}",
                    intent.tag
                )));
            }
            if intent.patterns.is_empty() {
                return Err(IntentError::InvalidCorpus(format!(
                    "tag {:?} has no patterns",
                    intent.tag
                )));
            }
            if intent.responses.is_empty() {
                return Err(IntentError::InvalidCorpus(format!(
                    "tag {:?} has no responses",
                    intent.tag
                )));
            }
        }
        if self.exceeds_recommended_tags() {
            log::warn!(
                "corpus has {} tags; more than {} makes the output layer wider than half of the 64-unit hidden layer",
                self.intents.len(),
                MAX_RECOMMENDED_TAGS
            );
        }
        Ok(())
    }

    pub fn exceeds_recommended_tags(&self) -> bool {
        self.intents.len() > MAX_RECOMMENDED_TAGS
    }

    pub fn tags(&self) -> Vec<String> {
        self.intents.iter().map(|i| i.tag.clone()).collect()
    }

    pub fn intent(&self, tag: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.tag == tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intent(tag: &str) -> Intent {
        Intent {
            tag: tag.into(),
            patterns: vec!["x".into()],
            responses: vec!["y".into()],
            context: None,
        }
    }

    #[test]
    fn bundled_corpus_has_fourteen_tags() {
        let c = IntentCorpus::bundled();
        assert_eq!(c.intents.len(), 14);
        assert!(c.intent("greeting").is_some());
    }

    #[test]
    fn rejects_single_intent_and_duplicates() {
        assert!(IntentCorpus::new(1, vec![intent("a")]).is_err());
        assert!(IntentCorpus::new(1, vec![intent("a"), intent("a")]).is_err());
        let mut empty = intent("b");
        empty.responses.clear();
        assert!(IntentCorpus::new(1, vec![intent("a"), empty]).is_err());
    }

    #[test]
    fn many_tags_is_a_warning_not_an_error() {
        let intents: Vec<_> = (0..33).map(|i| intent(&format!("t{i}"))).collect();
        let c = IntentCorpus::new(1, intents).unwrap();
        assert!(c.exceeds_recommended_tags());
        let intents: Vec<_> = (0..32).map(|i| intent(&format!("t{i}"))).collect();
        assert!(!IntentCorpus::new(1, intents).unwrap().exceeds_recommended_tags());
    }

    #[test]
    fn context_survives_round_trip() {
        let json = r#"{"version":3,"intents":[
            {"tag":"a","patterns":["p"],"responses":["r"],"context":"ctx"},
            {"tag":"b","patterns":["q"],"responses":["s"]}]}"#;
        let c = IntentCorpus::from_json(json).unwrap();
        assert_eq!(c.intents[0].context.as_deref(), Some("ctx"));
        let back = IntentCorpus::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
