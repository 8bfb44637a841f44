use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tags::{check_tags, Scheme, Tag};

/// An entity over word indices `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, kind: impl Into<String>) -> Self {
        debug_assert!(start <= end);
        EntitySpan {
            start,
            end,
            kind: kind.into(),
        }
    }
}

/// Entities of a valid BIOES sequence, in order of position.
pub fn spans_from_tags<S: AsRef<str>>(tags: &[S]) -> Result<Vec<EntitySpan>> {
    check_tags(tags, Scheme::Bioes)?;
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, t) in tags.iter().enumerate() {
        match Tag::parse(t.as_ref())? {
            Tag::Single(k) => spans.push(EntitySpan::new(i, i, k)),
            Tag::Begin(_) => start = i,
            Tag::End(k) => spans.push(EntitySpan::new(start, i, k)),
            Tag::Inside(_) | Tag::Outside => {}
        }
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts() {
        assert_eq!(
            spans_from_tags(&["B-D", "E-D", "O", "S-G"]).unwrap(),
            [EntitySpan::new(0, 1, "D"), EntitySpan::new(3, 3, "G")]
        );
        assert!(spans_from_tags(&["O", "O"]).unwrap().is_empty());
        assert!(spans_from_tags(&["B-D"]).is_err());
    }
}
