use crate::error::{Error, Result};
use crate::tokenizer::char_slice;

/// Default placeholder template; `TYPE` is replaced by the entity type.
pub const DEFAULT_TAG_FORMAT: &str = "@TYPE$";

/// Replace each `(start, end, type)` char span with its typed placeholder.
/// Spans are applied right to left so earlier offsets stay valid.
pub fn anonymize_entities<S: AsRef<str>>(
    sentence: &str,
    spans: &[(usize, usize, S)],
    tag_format: &str,
) -> Result<String> {
    let len = sentence.chars().count();
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| (spans[i].0, spans[i].1));
    for (n, &i) in order.iter().enumerate() {
        let (s, e, _) = &spans[i];
        if s >= e || *e > len {
            return Err(Error::input(format!(
                "span ({s}, {e}) is outside a {len}-char sentence"
            )));
        }
        if let Some(&j) = order.get(n + 1) {
            if spans[j].0 < *e {
                return Err(Error::input(format!(
                    "spans ({s}, {e}) and ({}, {}) overlap",
                    spans[j].0, spans[j].1
                )));
            }
        }
    }
    let mut out = sentence.to_string();
    for &i in order.iter().rev() {
        let (s, e, kind) = &spans[i];
        let tag = tag_format.replace("TYPE", kind.as_ref());
        let head = char_slice(&out, 0, *s).to_string();
        let tail = char_slice(&out, *e, out.chars().count()).to_string();
        out = format!("{head}{tag}{tail}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spans_identity() {
        let none: [(usize, usize, &str); 0] = [];
        assert_eq!(
            anonymize_entities("abc", &none, DEFAULT_TAG_FORMAT).unwrap(),
            "abc"
        );
    }

    #[test]
    fn overlap_and_bounds() {
        assert!(matches!(
            anonymize_entities("abcdef", &[(0, 3, "A"), (2, 5, "B")], DEFAULT_TAG_FORMAT),
            Err(Error::Input(_))
        ));
        assert!(anonymize_entities("abc", &[(1, 4, "A")], DEFAULT_TAG_FORMAT).is_err());
        assert!(anonymize_entities("abc", &[(1, 1, "A")], DEFAULT_TAG_FORMAT).is_err());
    }

    #[test]
    fn length_identity() {
        let s = "ab cd ef";
        let spans = [(6, 8, "X"), (0, 2, "LONG")];
        let out = anonymize_entities(s, &spans, DEFAULT_TAG_FORMAT).unwrap();
        assert_eq!(out, "@LONG$ cd @X$");
        assert_eq!(out.chars().count(), 8 - 4 + "@LONG$".len() + "@X$".len());
    }
}
