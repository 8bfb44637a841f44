use serde::{Deserialize, Serialize};

use crate::data::LabeledSentence;
use crate::error::{Error, Result};
use crate::tags::{make_tag, OUTSIDE};
use crate::tokenizer::EncodedInput;

/// BIOES tag inventory. `O` is id 0, then `B`, `I`, `E`, `S` for each
/// entity type in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagScheme {
    entity_types: Vec<String>,
    tags: Vec<String>,
}

impl TagScheme {
    pub fn new<S: AsRef<str>>(entity_types: &[S]) -> Result<Self> {
        let mut types: Vec<String> = entity_types
            .iter()
            .map(|t| t.as_ref().to_string())
            .collect();
        types.sort();
        types.dedup();
        if let Some(bad) = types
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::config(format!("invalid entity type {bad:?}")));
        }
        let mut tags = vec![OUTSIDE.to_string()];
        for t in &types {
            for p in ['B', 'I', 'E', 'S'] {
                tags.push(make_tag(p, t));
            }
        }
        Ok(TagScheme {
            entity_types: types,
            tags,
        })
    }

    /// Scheme covering every entity type seen in `sentences`.
    pub fn from_sentences(sentences: &[LabeledSentence]) -> Result<Self> {
        let types: Vec<&str> = sentences
            .iter()
            .flat_map(|s| s.tags.iter())
            .filter_map(|t| t.split_once('-').map(|(_, k)| k))
            .collect();
        Self::new(&types)
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn id(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }
}

/// Per-subtoken tag ids: the first subtoken of each word carries its tag,
/// everything else is `None` (ignored). Words dropped by truncation are
/// simply absent.
pub fn align_labels(
    sentence: &LabeledSentence,
    encoded: &EncodedInput,
    scheme: &TagScheme,
) -> Result<Vec<Option<usize>>> {
    let n = sentence.words.len();
    let mut labels = vec![None; encoded.len()];
    let mut last: Option<usize> = None;
    for (pos, word) in encoded.word_index.iter().enumerate() {
        let Some(w) = *word else { continue };
        if w >= n || encoded.segments[pos] != 0 || last.is_some_and(|l| w < l) {
            return Err(Error::Consistency(format!(
                "subtoken {pos} maps to word {w} of a {n}-word sentence"
            )));
        }
        if last != Some(w) {
            let tag = &sentence.tags[w];
            labels[pos] =
                Some(scheme.id(tag).ok_or_else(|| {
                    Error::input(format!("tag {tag:?} is not in the tag scheme"))
                })?);
            last = Some(w);
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{encode_words, Vocabulary};

    #[test]
    fn ids_are_fixed() {
        let s = TagScheme::new(&["Gene", "Disease", "Gene"]).unwrap();
        assert_eq!(s.id("O"), Some(0));
        assert_eq!(
            s.tags()[1..5],
            ["B-Disease", "I-Disease", "E-Disease", "S-Disease"]
        );
        assert_eq!(s.len(), 9);
        for (i, t) in s.tags().iter().enumerate() {
            assert_eq!(s.id(t), Some(i));
        }
    }

    #[test]
    fn first_subtoken_carries_label() {
        let v = Vocabulary::from_tokens([
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "b", "##c", "##d",
        ])
        .unwrap();
        let scheme = TagScheme::new(&["G"]).unwrap();
        let s = LabeledSentence::new(
            vec!["a".into(), "bcd".into()],
            vec!["O".into(), "S-G".into()],
        )
        .unwrap();
        let enc = encode_words(&s.words, &v, 8).unwrap();
        let labels = align_labels(&s, &enc, &scheme).unwrap();
        assert_eq!(
            labels,
            [
                None,
                Some(0),
                Some(scheme.id("S-G").unwrap()),
                None,
                None,
                None,
                None,
                None
            ]
        );
    }
}
