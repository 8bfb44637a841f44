use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::{bioes_to_bio, check_tags, repair_bioes, Scheme};

/// One tagged sentence. Tags are held in BIOES.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl LabeledSentence {
    pub fn new(words: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if words.len() != tags.len() {
            return Err(Error::input(format!(
                "{} words but {} tags",
                words.len(),
                tags.len()
            )));
        }
        check_tags(&tags, Scheme::Bioes)?;
        Ok(LabeledSentence { words, tags })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConllParse {
    pub sentences: Vec<LabeledSentence>,
    /// Sentences whose tags had to be repaired (lenient mode only).
    pub repaired: usize,
}

/// Read CoNLL text whose tags follow `scheme`; the result is converted to
/// BIOES. In lenient mode invalid sequences are repaired with a warning
/// instead of rejected.
pub fn parse_conll<R: BufRead>(reader: R, scheme: Scheme, lenient: bool) -> Result<ConllParse> {
    let mut out = ConllParse::default();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    let mut first_line = 0;
    let finish = |words: &mut Vec<String>,
                  tags: &mut Vec<String>,
                  line: usize,
                  out: &mut ConllParse|
     -> Result<()> {
        if words.is_empty() {
            return Ok(());
        }
        let checked = check_tags(tags, scheme).and_then(|_| match scheme {
            Scheme::Bioes => Ok(tags.clone()),
            Scheme::Bio => crate::tags::bio_to_bioes(tags),
        });
        let canonical = match checked {
            Ok(t) => t,
            Err(e) if lenient => {
                log::warn!("sentence starting at line {line}: {e}; repaired");
                out.repaired += 1;
                repair_bioes(tags)
            }
            Err(e) => {
                return Err(Error::format(format!(
                    "sentence starting at line {line}: {e}"
                )))
            }
        };
        out.sentences.push(LabeledSentence {
            words: std::mem::take(words),
            tags: canonical,
        });
        tags.clear();
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::format(format!("line {}: {e}", i + 1)))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            finish(&mut words, &mut tags, first_line, &mut out)?;
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::format(format!(
                "line {}: expected a token and a tag, found {:?}",
                i + 1,
                trimmed
            )));
        }
        if words.is_empty() {
            first_line = i + 1;
        }
        words.push(fields[0].to_string());
        tags.push(fields[fields.len() - 1].to_string());
    }
    finish(&mut words, &mut tags, first_line, &mut out)?;
    Ok(out)
}

/// Write sentences as `token tag` lines, converting to `scheme`.
pub fn write_conll<W: Write>(
    sentences: &[LabeledSentence],
    mut sink: W,
    scheme: Scheme,
) -> Result<()> {
    for s in sentences {
        let tags = match scheme {
            Scheme::Bioes => s.tags.clone(),
            Scheme::Bio => bioes_to_bio(&s.tags)?,
        };
        for (w, t) in s.words.iter().zip(&tags) {
            writeln!(sink, "{w} {t}")?;
        }
        writeln!(sink)?;
    }
    Ok(())
}
