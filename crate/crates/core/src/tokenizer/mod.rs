//! Cased basic tokenization and greedy WordPiece against a fixed vocabulary.

mod basic;
mod encode;
mod vocab;
mod wordpiece;

pub use basic::{basic_tokenize, char_slice, is_punctuation, Word};
pub use encode::{
    encode_sequence, encode_windows, encode_words, pack, tokenize_text, tokenize_words,
    EncodedInput, TextPiece, MAX_SEQUENCE_LENGTH,
};
pub use vocab::{SpecialIds, Vocabulary, CLS, CONTINUATION_PREFIX, MASK, PAD, SEP, UNK};
pub use wordpiece::{wordpiece_pieces, wordpiece_split, Piece, DEFAULT_MAX_WORD_CHARS};
