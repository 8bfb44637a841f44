use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered relation labels. The first label is the negative class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationLabelSet {
    pub labels: Vec<String>,
    /// Placeholders (e.g. `@GENE$`) every sentence must contain.
    #[serde(default)]
    pub placeholders: Vec<String>,
}

impl RelationLabelSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::config(
                "a relation label set needs at least two labels",
            ));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::config(format!("duplicate relation label {l:?}")));
            }
        }
        Ok(RelationLabelSet {
            labels,
            placeholders: Vec::new(),
        })
    }

    /// The usual binary set `{0, 1}` with `0` negative.
    pub fn binary() -> Self {
        Self::new(["0", "1"]).unwrap()
    }

    pub fn with_placeholders<S: Into<String>>(mut self, tags: impl IntoIterator<Item = S>) -> Self {
        self.placeholders = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn negative(&self) -> &str {
        &self.labels[0]
    }

    pub fn positive(&self) -> &[String] {
        &self.labels[1..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationExample {
    pub id: String,
    /// Sentence with its target entities already anonymized.
    pub sentence: String,
    pub label: String,
}

/// Read `id<TAB>sentence<TAB>label` rows; a first row starting with `id` is a header.
pub fn parse_re_tsv<R: BufRead>(
    reader: R,
    labels: &RelationLabelSet,
) -> Result<Vec<RelationExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::format(format!("line {}: {e}", i + 1)))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols[0] == "id" {
            continue;
        }
        if cols.len() != 3 {
            return Err(Error::format(format!(
                "line {}: expected 3 tab-separated columns, found {}",
                i + 1,
                cols.len()
            )));
        }
        let label = cols[2].trim();
        if labels.id(label).is_none() {
            return Err(Error::format(format!(
                "line {}: label {label:?} is not one of {:?}",
                i + 1,
                labels.labels
            )));
        }
        if let Some(p) = labels
            .placeholders
            .iter()
            .find(|p| !cols[1].contains(p.as_str()))
        {
            return Err(Error::format(format!(
                "line {}: sentence lacks placeholder {p}",
                i + 1
            )));
        }
        out.push(RelationExample {
            id: cols[0].to_string(),
            sentence: cols[1].to_string(),
            label: label.to_string(),
        });
    }
    Ok(out)
}

pub fn write_re_tsv<W: Write>(examples: &[RelationExample], mut sink: W) -> Result<()> {
    writeln!(sink, "id\tsentence\tlabel")?;
    for e in examples {
        if [&e.id, &e.sentence, &e.label]
            .iter()
            .any(|f| f.contains(['\t', '\n']))
        {
            return Err(Error::input(format!(
                "example {:?} contains a tab or newline",
                e.id
            )));
        }
        writeln!(sink, "{}\t{}\t{}", e.id, e.sentence, e.label)?;
    }
    Ok(())
}
