//! Home-assistant features served from offline fixtures: today's date,
//! on-this-day history, topic summaries and word translation.
//!
//! Each capability is an [`AssistantProvider`]; a networked provider can
//! be slotted into a [`ProviderChain`] ahead of the offline ones.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

const SAMPLE_FIXTURE: &str = include_str!("../../data/assistant_fixture.json");

pub const FALLBACK_ANSWER: &str =
    "Sorry, I do not know that one yet. You can ask me the date, what happened on this day, to tell you about a topic, or to translate a word.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryIntent {
    Date,
    OnThisDay,
    Summarize { topic: String },
    Translate { text: String, target_language: String },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantQuery {
    pub text: String,
    pub detected_intent: QueryIntent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantAnswer {
    pub text: String,
    pub provider: String,
    pub offline: bool,
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keyword-pattern detection over the normalized text.
pub fn parse_query(text: &str) -> AssistantQuery {
    let norm = normalize(text);
    let padded = format!(" {norm} ");
    let has = |phrase: &str| padded.contains(&format!(" {phrase} "));

    let detected_intent = if ["on this day", "today in history", "historical significance"]
        .iter()
        .any(|p| has(p))
    {
        QueryIntent::OnThisDay
    } else if let Some(rest) = after(&norm, "translate") {
        match rest.rsplit_once(" to ").or_else(|| rest.rsplit_once(" into ")) {
            Some((words, lang)) if !words.is_empty() && !lang.is_empty() => QueryIntent::Translate {
                text: words.to_string(),
                target_language: lang.to_string(),
            },
            _ => QueryIntent::Unknown,
        }
    } else if ["what is the date", "whats the date", "todays date", "what day is it", "what is today"]
        .iter()
        .any(|p| has(p))
    {
        QueryIntent::Date
    } else if let Some(topic) = ["tell me about", "summary of", "summarize"]
        .iter()
        .find_map(|p| after(&norm, p))
    {
        QueryIntent::Summarize {
            topic: topic.to_string(),
        }
    } else {
        QueryIntent::Unknown
    };
    AssistantQuery {
        text: text.to_string(),
        detected_intent,
    }
}

/// Text following `phrase` (on word boundaries), if nonempty.
fn after<'a>(norm: &'a str, phrase: &str) -> Option<&'a str> {
    let start = if norm.starts_with(&format!("{phrase} ")) {
        0
    } else {
        norm.find(&format!(" {phrase} "))? + 1
    };
    let rest = norm[start + phrase.len()..].trim();
    (!rest.is_empty()).then_some(rest)
}

/// Source of "today"; injected so date answers are reproducible.
pub trait Clock: Send + Sync {
    fn today(&self) -> NaiveDate;
}

#[derive(Clone, Copy, Debug)]
pub struct FixedClock(pub NaiveDate);

impl Clock for FixedClock {
    fn today(&self) -> NaiveDate {
        self.0
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn today(&self) -> NaiveDate {
        chrono::Local::now().date_naive()
    }
}

/// Offline knowledge; all keys are matched case-insensitively.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeFixture {
    #[serde(default)]
    pub topics: BTreeMap<String, String>,
    /// Keyed by `MM-DD`.
    #[serde(default)]
    pub on_this_day: BTreeMap<String, String>,
    /// phrase -> language -> translation
    #[serde(default)]
    pub dictionary: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

impl KnowledgeFixture {
    pub fn sample() -> Self {
        Self::from_json(SAMPLE_FIXTURE).expect("sample fixture is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let raw: KnowledgeFixture = serde_json::from_str(json)?;
        Ok(raw.lowercased())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let err = |m: String| FixtureError::Load {
            path: path.display().to_string(),
            message: m,
        };
        let json = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&json).map_err(|e| err(e.to_string()))
    }

    fn lowercased(self) -> Self {
        KnowledgeFixture {
            topics: self.topics.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
            on_this_day: self.on_this_day,
            dictionary: self
                .dictionary
                .into_iter()
                .map(|(k, langs)| {
                    (
                        normalize(&k),
                        langs.into_iter().map(|(l, t)| (normalize(&l), t)).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn topic(&self, topic: &str) -> Option<&str> {
        let key = normalize(topic);
        let key = key.strip_prefix("the ").unwrap_or(&key);
        self.topics.get(key).map(String::as_str)
    }

    pub fn translate(&self, text: &str, language: &str) -> Option<String> {
        let language = normalize(language);
        let lookup = |phrase: &str| self.dictionary.get(phrase)?.get(&language).cloned();
        let text = normalize(text);
        lookup(&text).or_else(|| {
            text.split(' ')
                .map(lookup)
                .collect::<Option<Vec<_>>>()
                .map(|words| words.join(" "))
        })
    }

    pub fn on_this_day(&self, date: NaiveDate) -> Option<&str> {
        let key = format!("{:02}-{:02}", date.month(), date.day());
        self.on_this_day.get(&key).map(String::as_str)
    }
}

pub trait AssistantProvider: Send + Sync {
    fn name(&self) -> &str;

    /// `None` when this provider does not handle the query.
    fn answer(&self, query: &AssistantQuery, clock: &dyn Clock) -> Option<AssistantAnswer>;
}

fn offline(provider: &str, text: String) -> Option<AssistantAnswer> {
    Some(AssistantAnswer {
        text,
        provider: provider.to_string(),
        offline: true,
    })
}

pub struct DateProvider;

impl AssistantProvider for DateProvider {
    fn name(&self) -> &str {
        "date"
    }

    fn answer(&self, query: &AssistantQuery, clock: &dyn Clock) -> Option<AssistantAnswer> {
        if query.detected_intent != QueryIntent::Date {
            return None;
        }
        let today = clock.today();
        offline(self.name(), format!("Today is {}.", today.format("%A, %B %-d, %Y")))
    }
}

pub struct FixtureProvider {
    fixture: KnowledgeFixture,
}

impl FixtureProvider {
    pub fn new(fixture: KnowledgeFixture) -> Self {
        FixtureProvider { fixture }
    }
}

impl AssistantProvider for FixtureProvider {
    fn name(&self) -> &str {
        "fixture"
    }

    fn answer(&self, query: &AssistantQuery, clock: &dyn Clock) -> Option<AssistantAnswer> {
        let text = match &query.detected_intent {
            QueryIntent::OnThisDay => {
                let today = clock.today();
                match self.fixture.on_this_day(today) {
                    Some(event) => format!("On {}: {event}", today.format("%B %-d")),
                    None => format!(
                        "I do not have a history note for {} yet.",
                        today.format("%B %-d")
                    ),
                }
            }
            QueryIntent::Summarize { topic } => self.fixture.topic(topic)?.to_string(),
            QueryIntent::Translate {
                text,
                target_language,
            } => {
                let translated = self.fixture.translate(text, target_language)?;
                format!("In {target_language}, \"{text}\" is \"{translated}\".")
            }
            QueryIntent::Date | QueryIntent::Unknown => return None,
        };
        offline(self.name(), text)
    }
}

/// Providers tried in order; the first answer wins.
pub struct ProviderChain {
    providers: Vec<Box<dyn AssistantProvider>>,
    clock: Box<dyn Clock>,
}

impl ProviderChain {
    pub fn new(providers: Vec<Box<dyn AssistantProvider>>, clock: Box<dyn Clock>) -> Self {
        ProviderChain { providers, clock }
    }

    pub fn offline(fixture: KnowledgeFixture, clock: Box<dyn Clock>) -> Self {
        Self::new(
            vec![Box::new(DateProvider), Box::new(FixtureProvider::new(fixture))],
            clock,
        )
    }

    /// Always produces an answer; unhandled queries get a polite fallback.
    pub fn answer(&self, query: &AssistantQuery) -> AssistantAnswer {
        self.providers
            .iter()
            .find_map(|p| p.answer(query, self.clock.as_ref()))
            .unwrap_or_else(|| AssistantAnswer {
                text: FALLBACK_ANSWER.to_string(),
                provider: "fallback".into(),
                offline: true,
            })
    }

    pub fn ask(&self, text: &str) -> AssistantAnswer {
        self.answer(&parse_query(text))
    }
}

/// One-shot answer from the offline providers.
pub fn answer(query: &AssistantQuery, fixture: &KnowledgeFixture, clock: &dyn Clock) -> AssistantAnswer {
    DateProvider
        .answer(query, clock)
        .or_else(|| FixtureProvider::new(fixture.clone()).answer(query, clock))
        .unwrap_or_else(|| AssistantAnswer {
            text: FALLBACK_ANSWER.to_string(),
            provider: "fallback".into(),
            offline: true,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clock(y: i32, m: u32, d: u32) -> FixedClock {
        FixedClock(NaiveDate::from_ymd_opt(y, m, d).unwrap())
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_query("what is the date").detected_intent, QueryIntent::Date);
        assert_eq!(parse_query("What's the date?").detected_intent, QueryIntent::Date);
        assert_eq!(
            parse_query("tell me about rivers").detected_intent,
            QueryIntent::Summarize { topic: "rivers".into() }
        );
        assert_eq!(
            parse_query("Give me a summary of the moon").detected_intent,
            QueryIntent::Summarize { topic: "the moon".into() }
        );
        assert_eq!(parse_query("blah blah").detected_intent, QueryIntent::Unknown);
        assert_eq!(parse_query("what happened on this day").detected_intent, QueryIntent::OnThisDay);
        assert_eq!(parse_query("today in history").detected_intent, QueryIntent::OnThisDay);
        assert_eq!(
            parse_query("translate thank you to Spanish").detected_intent,
            QueryIntent::Translate {
                text: "thank you".into(),
                target_language: "spanish".into()
            }
        );
        assert_eq!(parse_query("translate").detected_intent, QueryIntent::Unknown);
        assert_eq!(parse_query("tell me about").detected_intent, QueryIntent::Unknown);
    }

    #[test]
    fn date_answer_uses_injected_clock() {
        let fixture = KnowledgeFixture::sample();
        let a = answer(&parse_query("what is the date"), &fixture, &clock(2024, 3, 1));
        assert!(a.text.contains("March 1, 2024"), "{}", a.text);
        assert_eq!(a.provider, "date");
    }

    #[test]
    fn summaries_are_verbatim_or_fallback() {
        let fixture = KnowledgeFixture::sample();
        let c = clock(2024, 3, 1);
        let a = answer(&parse_query("tell me about Rivers"), &fixture, &c);
        assert_eq!(a.text, fixture.topics["rivers"]);
        let b = answer(&parse_query("tell me about the moon"), &fixture, &c);
        assert_eq!(b.text, fixture.topics["moon"]);
        let missing = answer(&parse_query("tell me about volcanoes"), &fixture, &c);
        assert_eq!(missing.text, FALLBACK_ANSWER);
        assert!(missing.offline);
    }

    #[test]
    fn on_this_day_and_translation() {
        let fixture = KnowledgeFixture::sample();
        let a = answer(&parse_query("today in history"), &fixture, &clock(2023, 7, 20));
        assert!(a.text.contains("Apollo 11"));
        let none = answer(&parse_query("today in history"), &fixture, &clock(2023, 7, 21));
        assert!(none.text.contains("July 21"));
        let t = answer(&parse_query("translate water to French"), &fixture, &clock(2023, 1, 1));
        assert!(t.text.contains("\"eau\""));
        let words = answer(&parse_query("translate red book into spanish"), &fixture, &clock(2023, 1, 1));
        assert!(words.text.contains("\"rojo libro\""));
        let unknown = answer(&parse_query("translate spaceship to french"), &fixture, &clock(2023, 1, 1));
        assert_eq!(unknown.text, FALLBACK_ANSWER);
    }

    struct Canned;
    impl AssistantProvider for Canned {
        fn name(&self) -> &str {
            "canned"
        }
        fn answer(&self, q: &AssistantQuery, _: &dyn Clock) -> Option<AssistantAnswer> {
            matches!(q.detected_intent, QueryIntent::Unknown).then(|| AssistantAnswer {
                text: "from the network".into(),
                provider: "canned".into(),
                offline: false,
            })
        }
    }

    #[test]
    fn chain_tries_providers_in_order() {
        let chain = ProviderChain::new(
            vec![Box::new(DateProvider), Box::new(Canned)],
            Box::new(clock(2024, 3, 1)),
        );
        assert_eq!(chain.ask("blah").provider, "canned");
        assert_eq!(chain.ask("what is the date").provider, "date");
    }

    proptest! {
        #[test]
        fn answer_never_fails_and_is_deterministic(text in ".{0,60}", day in 1u32..28, month in 1u32..13) {
            let fixture = KnowledgeFixture::sample();
            let c = clock(2022, month, day);
            let q = parse_query(&text);
            let a = answer(&q, &fixture, &c);
            prop_assert!(!a.text.is_empty());
            prop_assert_eq!(a, answer(&parse_query(&text), &fixture, &c));
        }
    }
}
