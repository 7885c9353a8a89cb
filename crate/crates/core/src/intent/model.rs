use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_text, vectorize, Dense, IntentCorpus, IntentError, NetworkParameters, Vocabulary};
use crate::Parallelism;

pub const MODEL_FORMAT_VERSION: u64 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.25;
pub const FALLBACK_REPLY: &str = "I am not sure I understood that. Could you say it another way?";

/// An immutable trained classifier: vocabulary, tag order, weights and the
/// confidence threshold below which an utterance counts as unmatched.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub vocab: Vocabulary,
    pub tags: Vec<String>,
    pub params: NetworkParameters,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionResult {
    /// (tag, confidence), highest confidence first.
    pub ranked: Vec<(String, f64)>,
    pub matched: bool,
}

impl PredictionResult {
    pub fn top(&self) -> (&str, f64) {
        let (tag, p) = &self.ranked[0];
        (tag, *p)
    }
}

impl TrainedModel {
    pub fn new(
        vocab: Vocabulary,
        tags: Vec<String>,
        params: NetworkParameters,
        threshold: f64,
    ) -> Result<Self, IntentError> {
        if params.input_len() != vocab.len() {
            return Err(IntentError::DimensionMismatch {
                expected: vocab.len(),
                actual: params.input_len(),
            });
        }
        if params.tag_count() != tags.len() {
            return Err(IntentError::DimensionMismatch {
                expected: tags.len(),
                actual: params.tag_count(),
            });
        }
        Ok(TrainedModel {
            vocab,
            tags,
            params,
            threshold,
        })
    }

    pub fn predict(&self, text: &str) -> PredictionResult {
        let features = vectorize(&normalize_text(text), &self.vocab);
        let probs = self
            .params
            .infer(features.as_slice())
            .expect("vectorize always matches the vocabulary size");
        let mut ranked: Vec<(String, f64)> = self.tags.iter().cloned().zip(probs).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let matched = ranked[0].1 >= self.threshold;
        PredictionResult { ranked, matched }
    }

    pub fn predict_batch<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        parallelism: Parallelism,
    ) -> Vec<PredictionResult> {
        parallelism.map(texts, |t| self.predict(t.as_ref()))
    }

    pub fn check_corpus(&self, corpus: &IntentCorpus) -> Result<(), IntentError> {
        let mismatch = || IntentError::TagSetMismatch {
            model: self.tags.len(),
            corpus: corpus.intents.len(),
        };
        if self.tags.len() != corpus.intents.len() {
            return Err(mismatch());
        }
        if self.tags.iter().zip(&corpus.intents).any(|(t, i)| *t != i.tag) {
            return Err(mismatch());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub utterance: String,
    pub top_tag: Option<String>,
    pub confidence: f64,
    /// Session time in seconds.
    pub timestamp: f64,
}

/// Unmatched utterances, kept for offline curation of the corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthLog {
    entries: Vec<GrowthEntry>,
}

impl GrowthLog {
    pub fn append(&mut self, entry: GrowthEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[GrowthEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).map_err(std::io::Error::other)?);
            out.push('\n');
        }
        std::fs::write(path, out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reply {
    pub text: String,
    pub tag: Option<String>,
    pub confidence: f64,
}

/// A model paired with its corpus and a seeded reply picker.
#[derive(Debug)]
pub struct Chatbot {
    model: TrainedModel,
    corpus: IntentCorpus,
    rng: ChaCha8Rng,
    growth: GrowthLog,
}

impl Chatbot {
    pub fn new(model: TrainedModel, corpus: IntentCorpus, seed: u64) -> Result<Self, IntentError> {
        model.check_corpus(&corpus)?;
        Ok(Chatbot {
            model,
            corpus,
            rng: ChaCha8Rng::seed_from_u64(seed),
            growth: GrowthLog::default(),
        })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn growth_log(&self) -> &GrowthLog {
        &self.growth
    }

    pub fn respond(&mut self, text: &str, timestamp: f64) -> Reply {
        let prediction = self.model.predict(text);
        let (tag, confidence) = prediction.top();
        if !prediction.matched {
            self.growth.append(GrowthEntry {
                utterance: text.to_string(),
                top_tag: Some(tag.to_string()),
                confidence,
                timestamp,
            });
            return Reply {
                text: FALLBACK_REPLY.to_string(),
                tag: None,
                confidence,
            };
        }
        let intent = self
            .corpus
            .intent(tag)
            .expect("tag set checked at construction");
        let pick = self.rng.random_range(0..intent.responses.len());
        Reply {
            text: intent.responses[pick].clone(),
            tag: Some(tag.to_string()),
            confidence,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    vocab: Vec<String>,
    tags: Vec<String>,
    threshold: f64,
    layers: Vec<LayerFile>,
}

impl From<&Dense> for LayerFile {
    fn from(d: &Dense) -> Self {
        LayerFile {
            w: d.weights.chunks(d.fan_out).map(<[f64]>::to_vec).collect(),
            b: d.biases.clone(),
        }
    }
}

impl LayerFile {
    fn into_dense(self, fan_in: usize, fan_out: usize) -> Result<Dense, IntentError> {
        if self.w.len() != fan_in
            || self.w.iter().any(|row| row.len() != fan_out)
            || self.b.len() != fan_out
        {
            return Err(IntentError::CorruptFile(format!(
                "layer shape does not match {fan_in}x{fan_out}"
            )));
        }
        Ok(Dense {
            fan_in,
            fan_out,
            weights: self.w.into_iter().flatten().collect(),
            biases: self.b,
        })
    }
}

pub fn model_to_json(model: &TrainedModel) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        vocab: model.vocab.tokens().to_vec(),
        tags: model.tags.clone(),
        threshold: model.threshold,
        layers: model.params.layers().into_iter().map(LayerFile::from).collect(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(json: &str) -> Result<TrainedModel, IntentError> {
    let corrupt = |e: serde_json::Error| IntentError::CorruptFile(e.to_string());
    let value: serde_json::Value = serde_json::from_str(json).map_err(corrupt)?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| IntentError::CorruptFile("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(IntentError::FormatVersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(corrupt)?;
    let vocab = Vocabulary::from_tokens(file.vocab)?;
    let [l1, l2, l3]: [LayerFile; 3] = file
        .layers
        .try_into()
        .map_err(|_| IntentError::CorruptFile("expected exactly 3 layers".into()))?;
    let t = file.tags.len();
    if t < 2 {
        return Err(IntentError::CorruptFile("fewer than 2 tags".into()));
    }
    let params = NetworkParameters {
        hidden1: l1.into_dense(vocab.len(), super::HIDDEN1)?,
        hidden2: l2.into_dense(super::HIDDEN1, super::HIDDEN2)?,
        output: l3.into_dense(super::HIDDEN2, t)?,
    };
    TrainedModel::new(vocab, file.tags, params, file.threshold)
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), IntentError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|source| IntentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, IntentError> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::{train, Intent, TrainingConfig};

    fn tiny_model() -> (TrainedModel, IntentCorpus) {
        let corpus = IntentCorpus::new(
            1,
            vec![
                Intent {
                    tag: "greeting".into(),
                    patterns: vec!["hello there".into(), "hi".into()],
                    responses: vec!["Hello!".into()],
                    context: None,
                },
                Intent {
                    tag: "joke".into(),
                    patterns: vec!["tell a joke".into(), "make me laugh".into()],
                    responses: vec!["one".into(), "two".into(), "three".into()],
                    context: None,
                },
            ],
        )
        .unwrap();
        let config = TrainingConfig {
            epochs: 60,
            seed: 1,
            ..Default::default()
        };
        (train(&corpus, &config).unwrap().model, corpus)
    }

    #[test]
    fn ranked_is_sorted_and_normalized() {
        let (model, _) = tiny_model();
        for text in ["", "hello there", "qwzx vvv", "tell a joke please"] {
            let p = model.predict(text);
            let sum: f64 = p.ranked.iter().map(|r| r.1).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        }
        assert_eq!(model.predict("hello there").top().0, "greeting");
        assert_eq!(model.predict("").ranked, model.predict("qwzx vvv").ranked);
    }

    #[test]
    fn single_response_tag_always_returns_it() {
        let (model, corpus) = tiny_model();
        let mut bot = Chatbot::new(model, corpus, 5).unwrap();
        for _ in 0..5 {
            let r = bot.respond("hello there", 0.0);
            assert_eq!(r.text, "Hello!");
            assert_eq!(r.tag.as_deref(), Some("greeting"));
        }
        assert!(bot.growth_log().is_empty());
    }

    #[test]
    fn unmatched_utterance_falls_back_and_logs() {
        let (mut model, corpus) = tiny_model();
        model.threshold = 1.0;
        let mut bot = Chatbot::new(model, corpus, 5).unwrap();
        let r = bot.respond("what is the capital of peru", 2.5);
        assert_eq!(r.text, FALLBACK_REPLY);
        assert_eq!(r.tag, None);
        assert_eq!(bot.growth_log().len(), 1);
        assert_eq!(bot.growth_log().entries()[0].timestamp, 2.5);
    }

    #[test]
    fn seeded_reply_choice_is_reproducible() {
        let (model, corpus) = tiny_model();
        let picks = |seed| {
            let mut bot = Chatbot::new(model.clone(), corpus.clone(), seed).unwrap();
            (0..20)
                .map(|_| bot.respond("tell a joke", 0.0).text)
                .collect::<Vec<_>>()
        };
        let a = picks(9);
        assert_eq!(a, picks(9));
        assert!(a.iter().any(|t| t != &a[0]), "20 picks from 3 replies all equal");
    }

    #[test]
    fn tag_set_mismatch() {
        let (model, mut corpus) = tiny_model();
        corpus.intents.push(Intent {
            tag: "extra".into(),
            patterns: vec!["x".into()],
            responses: vec!["y".into()],
            context: None,
        });
        assert!(matches!(
            Chatbot::new(model, corpus, 0),
            Err(IntentError::TagSetMismatch { model: 2, corpus: 3 })
        ));
    }

    #[test]
    fn corrupt_and_versioned_files() {
        let (model, _) = tiny_model();
        let json = model_to_json(&model);
        assert_eq!(model_from_json(&json).unwrap(), model);
        assert!(matches!(
            model_from_json(&json[..json.len() / 2]),
            Err(IntentError::CorruptFile(_))
        ));
        let bumped = json.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            model_from_json(&bumped),
            Err(IntentError::FormatVersionMismatch { found: 2, expected: 1 })
        ));
    }
}
