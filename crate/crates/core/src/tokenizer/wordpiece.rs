use super::vocab::{Vocabulary, CONTINUATION_PREFIX, UNK};

pub const DEFAULT_MAX_WORD_CHARS: usize = 100;

/// One WordPiece piece: its vocabulary id, surface string (with `##` on
/// non-initial pieces) and char span inside the word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub id: u32,
    pub token: String,
    pub start: usize,
    pub end: usize,
}

/// Greedy longest-match-first segmentation. A word that cannot be fully
/// covered, or that is longer than `max_word_chars`, becomes a single `[UNK]`
/// spanning the whole word.
pub fn wordpiece_pieces(word: &str, vocab: &Vocabulary, max_word_chars: usize) -> Vec<Piece> {
    let chars: Vec<char> = word.chars().collect();
    let unk = || {
        vec![Piece {
            id: vocab.special().unk,
            token: UNK.to_string(),
            start: 0,
            end: chars.len(),
        }]
    };
    if chars.len() > max_word_chars {
        return unk();
    }

    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION_PREFIX);
            }
            candidate.extend(&chars[start..end]);
            if let Some(id) = vocab.id(&candidate) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => {
                pieces.push(Piece {
                    id,
                    token: candidate.clone(),
                    start,
                    end,
                });
                start = end;
            }
            None => return unk(),
        }
    }
    pieces
}

pub fn wordpiece_split(word: &str, vocab: &Vocabulary, max_word_chars: usize) -> Vec<String> {
    wordpiece_pieces(word, vocab, max_word_chars)
        .into_iter()
        .map(|p| p.token)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocabulary {
        Vocabulary::from_tokens([
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "un", "##aff", "##able", "aff", "##a",
            "##b", "##l", "##e", "kinase",
        ])
        .unwrap()
    }

    #[test]
    fn greedy_longest_match() {
        assert_eq!(
            wordpiece_split("unaffable", &toy(), 100),
            ["un", "##aff", "##able"]
        );
    }

    #[test]
    fn whole_word_entry() {
        assert_eq!(wordpiece_split("kinase", &toy(), 100), ["kinase"]);
    }

    #[test]
    fn unmatched_character_gives_unk() {
        assert_eq!(wordpiece_split("unaffablez", &toy(), 100), ["[UNK]"]);
        assert_eq!(wordpiece_split("xyz", &toy(), 100), ["[UNK]"]);
    }

    #[test]
    fn overlong_word_gives_unk() {
        assert_eq!(wordpiece_split("kinase", &toy(), 5), ["[UNK]"]);
    }

    #[test]
    fn piece_spans_cover_word() {
        let pieces = wordpiece_pieces("unaffable", &toy(), 100);
        let spans: Vec<_> = pieces.iter().map(|p| (p.start, p.end)).collect();
        assert_eq!(spans, [(0, 2), (2, 5), (5, 9)]);
    }
}
