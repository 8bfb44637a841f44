use std::collections::HashMap;
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const CONTINUATION_PREFIX: &str = "##";

/// Ids of the five reserved tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn contains(&self, id: u32) -> bool {
        id == self.pad || id == self.unk || id == self.cls || id == self.sep || id == self.mask
    }
}

/// Bidirectional token/id map. Ids are 0-based positions in the entry list.
///
/// Immutable once built; share it behind an `Arc` across threads.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    special: SpecialIds,
}

impl Vocabulary {
    /// Build from an ordered token list. Fails on duplicates, missing specials,
    /// or a list with no ordinary tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if entries.is_empty() {
            return Err(Error::format("vocabulary is empty"));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (line, token) in entries.iter().enumerate() {
            if token.is_empty() {
                return Err(Error::format(format!("empty token on line {}", line + 1)));
            }
            if let Some(first) = index.insert(token.clone(), line as u32) {
                return Err(Error::format(format!(
                    "duplicate token {token:?} on line {} (first seen on line {})",
                    line + 1,
                    first + 1
                )));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::format(format!("missing special token {name}")))
        };
        let special = SpecialIds {
            pad: lookup(PAD)?,
            unk: lookup(UNK)?,
            cls: lookup(CLS)?,
            sep: lookup(SEP)?,
            mask: lookup(MASK)?,
        };
        if entries.len() <= 5 {
            return Err(Error::format("vocabulary holds only the reserved tokens"));
        }
        Ok(Vocabulary {
            entries,
            index,
            special,
        })
    }

    /// Read the one-token-per-line format. A trailing `\r` is tolerated.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::format(format!("vocabulary is not UTF-8: {e}")))?;
            tokens.push(line.strip_suffix('\r').unwrap_or(&line).to_string());
        }
        Self::from_tokens(tokens)
    }

    pub fn load_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::config(format!(
                "cannot open vocabulary {}: {e}",
                path.as_ref().display()
            ))
        })?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn write<W: std::io::Write>(&self, mut sink: W) -> Result<()> {
        for token in &self.entries {
            writeln!(sink, "{token}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.special.contains(id)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Hex SHA-256 over the entry list; two vocabularies share a fingerprint
    /// iff they map every token to the same id.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for token in &self.entries {
            hasher.update(token.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .take(16)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
