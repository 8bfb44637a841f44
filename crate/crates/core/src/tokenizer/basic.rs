//! Cased whitespace/punctuation splitting with character offsets.

use unicode_general_category::{get_general_category, GeneralCategory};

/// A word from [`basic_tokenize`]; `start..end` are char indices into the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn is_punctuation(c: char) -> bool {
    if matches!(c, '$' | '+' | '<' | '=' | '>' | '^' | '|' | '~') {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Control and format characters, plus NUL and the replacement character.
/// Whitespace controls (tab, newline) are not counted here.
pub fn is_dropped(c: char) -> bool {
    if c.is_whitespace() {
        return false;
    }
    c == '\u{0}'
        || c == char::REPLACEMENT_CHARACTER
        || matches!(
            get_general_category(c),
            GeneralCategory::Control | GeneralCategory::Format
        )
}

/// Split `text` into maximal non-whitespace runs, with every punctuation
/// character as its own word. Case is preserved and no normalization is
/// applied. Dropped characters act as separators so offsets stay exact.
pub fn basic_tokenize(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut start = 0;

    let flush = |current: &mut String, start: usize, end: usize, words: &mut Vec<Word>| {
        if !current.is_empty() {
            words.push(Word {
                text: std::mem::take(current),
                start,
                end,
            });
        }
    };

    for (pos, c) in text.chars().enumerate() {
        if c.is_whitespace() || is_dropped(c) {
            flush(&mut current, start, pos, &mut words);
        } else if is_punctuation(c) {
            flush(&mut current, start, pos, &mut words);
            words.push(Word {
                text: c.to_string(),
                start: pos,
                end: pos + 1,
            });
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(c);
        }
    }
    let end = text.chars().count();
    flush(&mut current, start, end, &mut words);
    words
}

/// Slice `text` by a char range.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let from = indices.nth(start).unwrap_or(text.len());
    let to = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        from
    };
    &text[from..to]
}
