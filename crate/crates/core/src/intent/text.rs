use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{IntentCorpus, IntentError};

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace. No stemming.
pub fn normalize_text(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|word| {
            word.chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Sorted, deduplicated token list; index order is the input-feature order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn build(corpus: &IntentCorpus) -> Result<Self, IntentError> {
        let set: BTreeSet<String> = corpus
            .intents
            .iter()
            .flat_map(|i| i.patterns.iter())
            .flat_map(|p| normalize_text(p))
            .collect();
        if set.is_empty() {
            return Err(IntentError::EmptyCorpus);
        }
        Ok(Vocabulary {
            tokens: set.into_iter().collect(),
        })
    }

    /// Accepts an explicit token list; it must already be normalized,
    /// strictly ascending and nonempty.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, IntentError> {
        if tokens.is_empty() {
            return Err(IntentError::EmptyCorpus);
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IntentError::CorruptFile(
                "vocabulary is not strictly ascending".into(),
            ));
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || normalize_text(t).first() != Some(*t))
        {
            return Err(IntentError::CorruptFile(format!(
                "vocabulary token {bad:?} is not normalized"
            )));
        }
        Ok(Vocabulary { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .ok()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = IntentError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Binary bag-of-words over a [`Vocabulary`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> FeatureVector {
    let mut values = vec![0.0; vocab.len()];
    for token in tokens {
        if let Some(i) = vocab.index_of(token.as_ref()) {
            values[i] = 1.0;
        }
    }
    FeatureVector(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::Intent;
    use proptest::prelude::*;

    fn corpus(patterns: &[&[&str]]) -> IntentCorpus {
        IntentCorpus {
            version: 1,
            intents: patterns
                .iter()
                .enumerate()
                .map(|(i, ps)| Intent {
                    tag: format!("t{i}"),
                    patterns: ps.iter().map(|s| s.to_string()).collect(),
                    responses: vec!["r".into()],
                    context: None,
                })
                .collect(),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("Pick up something!"), ["pick", "up", "something"]);
        assert!(normalize_text("").is_empty());
        assert_eq!(normalize_text("How ARE you?"), ["how", "are", "you"]);
        assert_eq!(normalize_text("  ... ?! "), Vec::<String>::new());
    }

    #[test]
    fn vocabulary_examples() {
        let v = Vocabulary::build(&corpus(&[&["hi there"], &["there you go"]])).unwrap();
        assert_eq!(v.tokens(), ["go", "hi", "there", "you"]);
        let v = Vocabulary::build(&corpus(&[&["a a a"], &["A"]])).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert!(matches!(
            Vocabulary::build(&corpus(&[&["?!"], &["..."]])),
            Err(IntentError::EmptyCorpus)
        ));
    }

    #[test]
    fn bundled_vocabulary_has_118_tokens() {
        let v = Vocabulary::build(&IntentCorpus::bundled()).unwrap();
        assert_eq!(v.len(), 118);
    }

    #[test]
    fn vectorize_examples() {
        let vocab = Vocabulary::from_tokens(
            ["are", "hello", "how", "you"].map(String::from).to_vec(),
        )
        .unwrap();
        assert_eq!(
            vectorize(&["hello", "you", "hello"], &vocab).0,
            [0.0, 1.0, 0.0, 1.0]
        );
        assert_eq!(vectorize::<&str>(&[], &vocab).0, [0.0; 4]);
        assert_eq!(vectorize(&["zebra", "quux"], &vocab).0, [0.0; 4]);
    }

    #[test]
    fn from_tokens_rejects_unsorted_or_unnormalized() {
        assert!(Vocabulary::from_tokens(vec!["b".into(), "a".into()]).is_err());
        assert!(Vocabulary::from_tokens(vec!["a".into(), "a".into()]).is_err());
        assert!(Vocabulary::from_tokens(vec!["Hello".into()]).is_err());
        assert!(Vocabulary::from_tokens(vec!["it's".into()]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_tokens_are_clean(text in ".{0,64}") {
            for t in normalize_text(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_alphanumeric()));
                prop_assert_eq!(normalize_text(&t), vec![t.clone()]);
            }
        }

        #[test]
        fn out_of_vocab_tokens_do_not_change_features(
            known in proptest::collection::vec(0usize..4, 0..6),
            unknown in proptest::collection::vec("[q-z]{5,8}", 0..6),
        ) {
            let vocab = Vocabulary::from_tokens(
                ["are", "hello", "how", "you"].map(String::from).to_vec(),
            ).unwrap();
            let tokens: Vec<String> = known.iter().map(|&i| vocab.tokens()[i].clone()).collect();
            let mut extended = tokens.clone();
            extended.extend(unknown);
            prop_assert_eq!(vectorize(&tokens, &vocab), vectorize(&extended, &vocab));
        }
    }
}
