use serde::{Deserialize, Serialize};

use super::basic::basic_tokenize;
use super::vocab::{Vocabulary, CLS, PAD, SEP};
use super::wordpiece::{wordpiece_pieces, DEFAULT_MAX_WORD_CHARS};
use crate::error::{Error, Result};

/// Longest sequence any encoder in this crate accepts.
pub const MAX_SEQUENCE_LENGTH: usize = 512;

/// A packed, padded model input with alignment back to the source text.
///
/// All vectors have the same length. `word_index` is `None` for `[CLS]`,
/// `[SEP]` and padding; `offsets` are char ranges into the text the token
/// came from (text A or text B), `(0, 0)` for specials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub mask: Vec<u8>,
    pub subtokens: Vec<String>,
    pub word_index: Vec<Option<usize>>,
    pub offsets: Vec<(usize, usize)>,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-padding positions; padding is always a suffix.
    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m == 1).count()
    }

    /// Position of the first subtoken of every word (by word index) in the
    /// given segment, `None` for words lost to truncation.
    pub fn first_subtokens(&self, segment: u8, n_words: usize) -> Vec<Option<usize>> {
        let mut first = vec![None; n_words];
        for (pos, word) in self.word_index.iter().enumerate() {
            if let Some(w) = *word {
                if self.segments[pos] == segment && w < n_words && first[w].is_none() {
                    first[w] = Some(pos);
                }
            }
        }
        first
    }
}

/// A subtoken before packing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPiece {
    pub id: u32,
    pub token: String,
    pub word: usize,
    pub start: usize,
    pub end: usize,
}

/// Basic tokenization followed by WordPiece, with offsets into `text`.
pub fn tokenize_text(text: &str, vocab: &Vocabulary) -> Vec<TextPiece> {
    let mut out = Vec::new();
    for (w, word) in basic_tokenize(text).into_iter().enumerate() {
        for p in wordpiece_pieces(&word.text, vocab, DEFAULT_MAX_WORD_CHARS) {
            out.push(TextPiece {
                id: p.id,
                token: p.token,
                word: w,
                start: word.start + p.start,
                end: word.start + p.end,
            });
        }
    }
    out
}

/// Tokenize pre-split words (e.g. CoNLL tokens). Word indices refer to the
/// input slice; offsets refer to the words joined by single spaces. A word
/// that basic tokenization would split further keeps one word index.
pub fn tokenize_words<S: AsRef<str>>(words: &[S], vocab: &Vocabulary) -> Vec<TextPiece> {
    let mut out = Vec::new();
    let mut base = 0;
    for (w, word) in words.iter().enumerate() {
        let word = word.as_ref();
        for sub in basic_tokenize(word) {
            for p in wordpiece_pieces(&sub.text, vocab, DEFAULT_MAX_WORD_CHARS) {
                out.push(TextPiece {
                    id: p.id,
                    token: p.token,
                    word: w,
                    start: base + sub.start + p.start,
                    end: base + sub.start + p.end,
                });
            }
        }
        base += word.chars().count() + 1;
    }
    out
}

fn check_max_len(max_len: usize, specials: usize) -> Result<()> {
    if max_len < specials + 1 {
        return Err(Error::config(format!(
            "max_len {max_len} cannot hold {specials} special tokens plus one subtoken"
        )));
    }
    if max_len > MAX_SEQUENCE_LENGTH {
        return Err(Error::config(format!(
            "max_len {max_len} exceeds the maximum sequence length {MAX_SEQUENCE_LENGTH}"
        )));
    }
    Ok(())
}

/// Pack already-tokenized pieces as `[CLS] A [SEP]` or `[CLS] A [SEP] B [SEP]`,
/// truncating B first (A when there is no B) and padding to `max_len`.
pub fn pack(
    a: &[TextPiece],
    b: Option<&[TextPiece]>,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedInput> {
    let specials = if b.is_some() { 3 } else { 2 };
    check_max_len(max_len, specials)?;
    let budget = max_len - specials;
    let b_len = b.map_or(0, |b| b.len());
    let (a_keep, b_keep) = if a.len() + b_len <= budget {
        (a.len(), b_len)
    } else if a.len() < budget {
        (a.len(), budget - a.len())
    } else {
        (budget, 0)
    };

    let sp = vocab.special();
    let mut enc = EncodedInput {
        ids: Vec::with_capacity(max_len),
        segments: Vec::with_capacity(max_len),
        mask: Vec::with_capacity(max_len),
        subtokens: Vec::with_capacity(max_len),
        word_index: Vec::with_capacity(max_len),
        offsets: Vec::with_capacity(max_len),
    };
    let push_special = |enc: &mut EncodedInput, id: u32, token: &str, segment: u8| {
        enc.ids.push(id);
        enc.segments.push(segment);
        enc.mask.push(1);
        enc.subtokens.push(token.to_string());
        enc.word_index.push(None);
        enc.offsets.push((0, 0));
    };
    let push_piece = |enc: &mut EncodedInput, p: &TextPiece, segment: u8| {
        enc.ids.push(p.id);
        enc.segments.push(segment);
        enc.mask.push(1);
        enc.subtokens.push(p.token.clone());
        enc.word_index.push(Some(p.word));
        enc.offsets.push((p.start, p.end));
    };

    push_special(&mut enc, sp.cls, CLS, 0);
    for p in &a[..a_keep] {
        push_piece(&mut enc, p, 0);
    }
    push_special(&mut enc, sp.sep, SEP, 0);
    if let Some(b) = b {
        for p in &b[..b_keep] {
            push_piece(&mut enc, p, 1);
        }
        push_special(&mut enc, sp.sep, SEP, 1);
    }
    while enc.ids.len() < max_len {
        enc.ids.push(sp.pad);
        enc.segments.push(0);
        enc.mask.push(0);
        enc.subtokens.push(PAD.to_string());
        enc.word_index.push(None);
        enc.offsets.push((0, 0));
    }
    Ok(enc)
}

/// Encode one text, or a text pair, into a padded input of length `max_len`.
pub fn encode_sequence(
    text_a: &str,
    text_b: Option<&str>,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedInput> {
    let a = tokenize_text(text_a, vocab);
    let b = text_b.map(|t| tokenize_text(t, vocab));
    pack(&a, b.as_deref(), vocab, max_len)
}

/// Encode pre-split words as a single-segment input.
pub fn encode_words<S: AsRef<str>>(
    words: &[S],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedInput> {
    pack(&tokenize_words(words, vocab), None, vocab, max_len)
}

/// Encode a question against a passage as overlapping windows.
///
/// The question is capped at half the window. Passage windows advance by
/// `min(window, doc_stride)` subtokens so no passage subtoken is skipped.
/// Offsets of segment-1 tokens index into `passage`.
pub fn encode_windows(
    question: &str,
    passage: &str,
    vocab: &Vocabulary,
    max_len: usize,
    doc_stride: usize,
) -> Result<Vec<EncodedInput>> {
    check_max_len(max_len, 3)?;
    if doc_stride == 0 {
        return Err(Error::config("doc_stride must be positive"));
    }
    let mut q = tokenize_text(question, vocab);
    q.truncate((max_len - 3) / 2);
    let p = tokenize_text(passage, vocab);
    let window = max_len - 3 - q.len();

    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + window).min(p.len());
        out.push(pack(&q, Some(&p[start..end]), vocab, max_len)?);
        if end >= p.len() {
            break;
        }
        start += window.min(doc_stride);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::basic::char_slice;

    fn toy() -> Vocabulary {
        Vocabulary::from_tokens([
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "what", "binds", "?", "braf", "kinase",
            "the", "##s", "a", "cell", "Q", "C",
        ])
        .unwrap()
    }

    #[test]
    fn single_text_layout() {
        let v = toy();
        let enc = encode_sequence("the braf kinase", None, &v, 8).unwrap();
        assert_eq!(enc.len(), 8);
        assert_eq!(enc.ids[..5], [2, 10, 8, 9, 3]);
        assert_eq!(enc.ids[5..], [0, 0, 0]);
        assert_eq!(enc.mask.iter().filter(|&&m| m == 1).count(), 5);
        assert!(enc.segments.iter().all(|&s| s == 0));
        assert_eq!(enc.word_index[..5], [None, Some(0), Some(1), Some(2), None]);
        assert_eq!(enc.offsets[2], (4, 8));
    }

    #[test]
    fn pair_segments() {
        let v = toy();
        let enc = encode_sequence("Q", Some("C"), &v, 6).unwrap();
        assert_eq!(
            enc.subtokens,
            ["[CLS]", "Q", "[SEP]", "C", "[SEP]", "[PAD]"]
        );
        assert_eq!(enc.segments, [0, 0, 0, 1, 1, 0]);
        assert_eq!(enc.mask, [1, 1, 1, 1, 1, 0]);
    }

    #[test]
    fn second_text_truncated_first() {
        let v = toy();
        let long = vec!["cell"; 100].join(" ");
        let enc = encode_sequence("what binds", Some(&long), &v, 16).unwrap();
        assert_eq!(enc.mask.iter().map(|&m| m as usize).sum::<usize>(), 16);
        assert_eq!(enc.segments.iter().filter(|&&s| s == 0).count(), 4);
        assert_eq!(enc.subtokens[15], "[SEP]");
    }

    #[test]
    fn single_text_truncated() {
        let v = toy();
        let long = vec!["cell"; 50].join(" ");
        let enc = encode_sequence(&long, None, &v, 10).unwrap();
        assert_eq!(enc.real_len(), 10);
        assert_eq!(enc.subtokens[9], "[SEP]");
    }

    #[test]
    fn too_short_max_len_is_config_error() {
        let v = toy();
        assert!(matches!(
            encode_sequence("a", None, &v, 2),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            encode_sequence("a", Some("b"), &v, 3),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            encode_sequence("a", None, &v, 513),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn words_keep_caller_indices() {
        let v = toy();
        let enc = encode_words(&["braf", "kinases", "?"], &v, 8).unwrap();
        assert_eq!(enc.subtokens[1..5], ["braf", "kinase", "##s", "?"]);
        assert_eq!(enc.word_index[1..5], [Some(0), Some(1), Some(1), Some(2)]);
        let text = "braf kinases ?";
        for pos in 1..5 {
            let (s, e) = enc.offsets[pos];
            assert_eq!(
                char_slice(text, s, e),
                enc.subtokens[pos].trim_start_matches("##")
            );
        }
        assert_eq!(enc.first_subtokens(0, 3), [Some(1), Some(2), Some(4)]);
    }

    #[test]
    fn windows_cover_passage() {
        let v = toy();
        let passage = (0..30).map(|_| "cell").collect::<Vec<_>>().join(" ");
        let windows = encode_windows("what binds ?", &passage, &v, 12, 4).unwrap();
        // 12 - 3 - 3 = 6 passage tokens per window, stride 4.
        let mut seen = vec![false; 30];
        for w in &windows {
            for (pos, wi) in w.word_index.iter().enumerate() {
                if w.segments[pos] == 1 {
                    if let Some(i) = wi {
                        seen[*i] = true;
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(windows.len(), 7);
    }
}
