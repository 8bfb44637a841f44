use std::io::BufRead;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tokenizer::{
    basic_tokenize, encode_sequence, wordpiece_pieces, EncodedInput, Vocabulary,
    DEFAULT_MAX_WORD_CHARS,
};

/// Plain-text corpus: one sentence per line, blank lines between documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Vec<String>>,
}

impl Corpus {
    pub fn parse(text: &str) -> Self {
        let mut documents = Vec::new();
        let mut current: Vec<String> = Vec::new();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                if !current.is_empty() {
                    documents.push(std::mem::take(&mut current));
                }
            } else {
                current.push(line.to_string());
            }
        }
        if !current.is_empty() {
            documents.push(current);
        }
        Corpus { documents }
    }

    pub fn load<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::format(format!("corpus is not UTF-8 text: {e}")))?;
        Ok(Self::parse(&text))
    }

    pub fn load_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::config(format!(
                "cannot open corpus {}: {e}",
                path.as_ref().display()
            ))
        })?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn to_text(&self) -> String {
        let docs: Vec<String> = self
            .documents
            .iter()
            .map(|d| d.iter().map(|s| format!("{s}\n")).collect())
            .collect();
        docs.join("\n")
    }

    pub fn is_empty(&self) -> bool {
        self.documents.iter().all(|d| d.is_empty())
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    pub fn word_count(&self) -> usize {
        self.documents
            .iter()
            .flatten()
            .map(|s| basic_tokenize(s).len())
            .sum()
    }

    /// Keep a deterministic prefix of the shuffled document list. At least
    /// one document is kept for any positive fraction.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Corpus> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!(
                "corpus fraction {fraction} outside (0, 1]"
            )));
        }
        let mut order: Vec<usize> = (0..self.documents.len()).collect();
        order.shuffle(&mut substream(seed, "sweep.subsample"));
        let keep = ((self.documents.len() as f64 * fraction).round() as usize)
            .clamp(1.min(self.documents.len()), self.documents.len());
        let mut kept: Vec<usize> = order[..keep].to_vec();
        kept.sort_unstable();
        Ok(Corpus {
            documents: kept
                .into_iter()
                .map(|i| self.documents[i].clone())
                .collect(),
        })
    }

    /// Pack each document into `max_len` training inputs made of contiguous
    /// sentences. A sentence longer than one input is split at word
    /// boundaries; a single word longer than one input is truncated.
    pub fn pack(&self, vocab: &Vocabulary, max_len: usize) -> Result<Vec<EncodedInput>> {
        if self.is_empty() {
            return Err(Error::input("corpus has no sentences"));
        }
        let budget = max_len.saturating_sub(2).max(1);
        let mut out = Vec::new();
        for doc in &self.documents {
            let mut chunk: Vec<String> = Vec::new();
            let mut used = 0;
            let mut flush = |chunk: &mut Vec<String>, used: &mut usize| -> Result<()> {
                if !chunk.is_empty() {
                    out.push(encode_sequence(&chunk.join(" "), None, vocab, max_len)?);
                    chunk.clear();
                    *used = 0;
                }
                Ok(())
            };
            for sentence in doc {
                let words: Vec<(String, usize)> = basic_tokenize(sentence)
                    .into_iter()
                    .map(|w| {
                        let n = wordpiece_pieces(&w.text, vocab, DEFAULT_MAX_WORD_CHARS).len();
                        (w.text, n)
                    })
                    .collect();
                let total: usize = words.iter().map(|(_, n)| n).sum();
                if used + total > budget {
                    flush(&mut chunk, &mut used)?;
                }
                for (word, n) in words {
                    if used + n > budget {
                        flush(&mut chunk, &mut used)?;
                    }
                    chunk.push(word);
                    used += n;
                }
            }
            flush(&mut chunk, &mut used)?;
        }
        Ok(out)
    }
}
