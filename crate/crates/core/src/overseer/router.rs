use serde::{Deserialize, Serialize};

use crate::gait::{TaskCommand, TurnDirection};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Normal,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", content = "command", rename_all = "snake_case")]
pub enum Route {
    Task(TaskCommand),
    Chat,
    Assistant,
    ExitAssistant,
    Shutdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rule {
    Stop,
    Shutdown,
    ExitAssistant,
    HomeAssistant,
    PickUp,
    TurnLeft,
    TurnRight,
    Turn,
    Walk,
    Run,
}

/// Command phrases in priority order; ties on length go to the earlier rule.
const RULES: &[(&str, Rule)] = &[
    ("stop", Rule::Stop),
    ("shutdown", Rule::Shutdown),
    ("shut down", Rule::Shutdown),
    ("exit assistant", Rule::ExitAssistant),
    ("home assistant", Rule::HomeAssistant),
    ("pick up", Rule::PickUp),
    ("pickup", Rule::PickUp),
    ("turn left", Rule::TurnLeft),
    ("turn right", Rule::TurnRight),
    ("turn", Rule::Turn),
    ("walk", Rule::Walk),
    ("run", Rule::Run),
];

/// Lowercase, punctuation stripped, single spaces.
pub fn normalize_transcript(text: &str) -> String {
    crate::intent::normalize_text(text).join(" ")
}

/// Word index where `phrase` occurs in `words`, if it does.
fn find_phrase(words: &[&str], phrase: &[&str]) -> Option<usize> {
    (0..=words.len().checked_sub(phrase.len())?).find(|&i| words[i..i + phrase.len()] == *phrase)
}

/// Maps a transcript to its handler. Pure in `(text, mode)`.
///
/// Matching is by whole words; when several command phrases occur the
/// longest wins, so "turn left" beats "turn".
pub fn route(text: &str, mode: Mode) -> Route {
    let norm = normalize_transcript(text);
    let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    let mut best: Option<(usize, usize, Rule)> = None;
    for (pattern, rule) in RULES {
        let phrase: Vec<&str> = pattern.split(' ').collect();
        if let Some(at) = find_phrase(&words, &phrase) {
            if best.is_none_or(|(len, _, _)| pattern.len() > len) {
                best = Some((pattern.len(), at + phrase.len(), *rule));
            }
        }
    }
    let Some((_, end, rule)) = best else {
        return match mode {
            Mode::Normal => Route::Chat,
            Mode::Assistant => Route::Assistant,
        };
    };
    match rule {
        Rule::Stop => Route::Task(TaskCommand::Stop),
        Rule::Shutdown => Route::Shutdown,
        Rule::ExitAssistant => Route::ExitAssistant,
        Rule::HomeAssistant => match mode {
            Mode::Normal => Route::Task(TaskCommand::AssistantMode),
            Mode::Assistant => Route::ExitAssistant,
        },
        Rule::PickUp => {
            let object = words[end..].join(" ");
            Route::Task(TaskCommand::PickUp(if object.is_empty() {
                "something".into()
            } else {
                object
            }))
        }
        Rule::TurnLeft | Rule::Turn => Route::Task(TaskCommand::Turn(TurnDirection::Left)),
        Rule::TurnRight => Route::Task(TaskCommand::Turn(TurnDirection::Right)),
        Rule::Walk => Route::Task(TaskCommand::Walk),
        Rule::Run => Route::Task(TaskCommand::Run),
    }
}
