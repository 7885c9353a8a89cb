use std::path::Path;

use crossbeam_channel::Receiver;

use super::OverseerError;

/// One utterance of a transcript script, delivered at session time `at`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptLine {
    pub at: f64,
    pub text: String,
}

/// Parses a transcript script.
///
/// One utterance per line. `#` starts a comment line and blank lines are
/// skipped. A line may begin with `@<seconds>` to fix its delivery time;
/// otherwise it is delivered `gap` seconds after the previous one (the
/// first at 0).
pub fn parse_script(text: &str, gap: f64) -> Result<Vec<ScriptLine>, OverseerError> {
    let mut lines = Vec::new();
    let mut last: Option<f64> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| OverseerError::InvalidScript {
            line: n + 1,
            message: m.to_string(),
        };
        let (at, utterance) = match line.strip_prefix('@') {
            Some(rest) => {
                let (time, utterance) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let at: f64 = time.parse().map_err(|_| bad("bad @time"))?;
                if !at.is_finite() || at < 0.0 {
                    return Err(bad("@time must be a non-negative number"));
                }
                if last.is_some_and(|l| at < l) {
                    return Err(bad("@time goes backwards"));
                }
                (at, utterance.trim())
            }
            None => (last.map_or(0.0, |l| l + gap), line),
        };
        if utterance.is_empty() {
            return Err(bad("missing utterance"));
        }
        last = Some(at);
        lines.push(ScriptLine {
            at,
            text: utterance.to_string(),
        });
    }
    Ok(lines)
}

pub fn load_script(path: impl AsRef<Path>, gap: f64) -> Result<Vec<ScriptLine>, OverseerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| OverseerError::io(path, e))?;
    parse_script(&text, gap)
}

/// Where transcripts come from. Every source feeds the same route/dispatch
/// path; only delivery timing differs.
pub enum TranscriptSource {
    /// Timed lines, replayed in session time.
    Script(Vec<ScriptLine>),
    /// Live text (stdin, console). Ends when every sender is dropped.
    Channel(Receiver<String>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_and_comments() {
        let s = parse_script("# demo\nhello\n\n@2.5 walk\nstop\n", 1.0).unwrap();
        assert_eq!(
            s,
            vec![
                ScriptLine { at: 0.0, text: "hello".into() },
                ScriptLine { at: 2.5, text: "walk".into() },
                ScriptLine { at: 3.5, text: "stop".into() },
            ]
        );
        assert!(parse_script("", 1.0).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_stamps() {
        assert!(parse_script("@x walk", 1.0).is_err());
        assert!(parse_script("@3 walk\n@1 stop", 1.0).is_err());
        assert!(parse_script("@3", 1.0).is_err());
        match parse_script("ok\n@-1 walk", 1.0) {
            Err(OverseerError::InvalidScript { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
