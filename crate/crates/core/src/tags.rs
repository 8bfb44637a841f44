//! Tag strings of the `B-Type` family and the BIO/BIOES schemes over them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Bio,
    Bioes,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bio => "bio",
            Scheme::Bioes => "bioes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bio" | "iob2" => Ok(Scheme::Bio),
            "bioes" | "iobes" => Ok(Scheme::Bioes),
            other => Err(Error::config(format!("unknown tag scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed tag: `O` or a prefix letter with an entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
    End(&'a str),
    Single(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(tag: &'a str) -> Result<Self> {
        if tag == OUTSIDE {
            return Ok(Tag::Outside);
        }
        let (prefix, kind) = tag
            .split_once('-')
            .filter(|(_, k)| !k.is_empty())
            .ok_or_else(|| Error::format(format!("malformed tag {tag:?}")))?;
        Ok(match prefix {
            "B" => Tag::Begin(kind),
            "I" => Tag::Inside(kind),
            "E" => Tag::End(kind),
            "S" => Tag::Single(kind),
            _ => return Err(Error::format(format!("malformed tag {tag:?}"))),
        })
    }

    pub fn kind(self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(k) | Tag::Inside(k) | Tag::End(k) | Tag::Single(k) => Some(k),
        }
    }
}

pub fn make_tag(prefix: char, kind: &str) -> String {
    format!("{prefix}-{kind}")
}

fn invalid(pos: usize, tag: &str, scheme: Scheme, why: &str) -> Error {
    Error::format(format!(
        "tag {tag:?} at position {pos} is invalid under {scheme}: {why}"
    ))
}

/// Validate a sequence under `scheme`, naming the first offending position.
pub fn check_tags<S: AsRef<str>>(tags: &[S], scheme: Scheme) -> Result<()> {
    // open entity type, if inside one
    let mut open: Option<&str> = None;
    for (pos, raw) in tags.iter().enumerate() {
        let raw = raw.as_ref();
        let tag = Tag::parse(raw).map_err(|_| invalid(pos, raw, scheme, "malformed"))?;
        match scheme {
            Scheme::Bio => match tag {
                Tag::Outside => open = None,
                Tag::Begin(k) => open = Some(k),
                Tag::Inside(k) if open == Some(k) => {}
                Tag::Inside(_) => {
                    return Err(invalid(pos, raw, scheme, "no open entity of this type"))
                }
                Tag::End(_) | Tag::Single(_) => {
                    return Err(invalid(pos, raw, scheme, "prefix not in scheme"))
                }
            },
            Scheme::Bioes => {
                match (open, tag) {
                    (Some(_), Tag::Outside | Tag::Begin(_) | Tag::Single(_)) => {
                        return Err(invalid(pos, raw, scheme, "previous entity was not closed"))
                    }
                    (Some(o), Tag::Inside(k) | Tag::End(k)) if o != k => {
                        return Err(invalid(
                            pos,
                            raw,
                            scheme,
                            "type differs from the open entity",
                        ))
                    }
                    (None, Tag::Inside(_) | Tag::End(_)) => {
                        return Err(invalid(pos, raw, scheme, "no open entity"))
                    }
                    _ => {}
                }
                open = match tag {
                    Tag::Begin(k) | Tag::Inside(k) => Some(k),
                    _ => None,
                };
            }
        }
    }
    if scheme == Scheme::Bioes {
        if let Some(k) = open {
            return Err(Error::format(format!(
                "entity of type {k:?} still open at end of sequence under bioes"
            )));
        }
    }
    Ok(())
}

pub fn is_valid<S: AsRef<str>>(tags: &[S], scheme: Scheme) -> bool {
    check_tags(tags, scheme).is_ok()
}

pub fn bio_to_bioes<S: AsRef<str>>(tags: &[S]) -> Result<Vec<String>> {
    check_tags(tags, Scheme::Bio)?;
    let parsed: Vec<Tag> = tags
        .iter()
        .map(|t| Tag::parse(t.as_ref()).unwrap())
        .collect();
    Ok(parsed
        .iter()
        .enumerate()
        .map(|(i, tag)| {
            let continues = matches!(parsed.get(i + 1), Some(Tag::Inside(_)));
            match *tag {
                Tag::Outside => OUTSIDE.to_string(),
                Tag::Begin(k) if continues => make_tag('B', k),
                Tag::Begin(k) => make_tag('S', k),
                Tag::Inside(k) if continues => make_tag('I', k),
                Tag::Inside(k) => make_tag('E', k),
                _ => unreachable!("checked as bio"),
            }
        })
        .collect())
}

pub fn bioes_to_bio<S: AsRef<str>>(tags: &[S]) -> Result<Vec<String>> {
    check_tags(tags, Scheme::Bioes)?;
    Ok(tags
        .iter()
        .map(|t| match Tag::parse(t.as_ref()).unwrap() {
            Tag::Outside => OUTSIDE.to_string(),
            Tag::Begin(k) | Tag::Single(k) => make_tag('B', k),
            Tag::Inside(k) | Tag::End(k) => make_tag('I', k),
        })
        .collect())
}

/// Turn an arbitrary tag sequence into a valid BIOES one.
///
/// `I`/`E` with no open entity of that type start a new entity (as `B`/`S`);
/// an entity left open by the next tag or the end of the sentence is closed
/// on its last token (`B` becomes `S`, `I` becomes `E`). Malformed strings
/// are read as `O`.
pub fn repair_bioes<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let parsed: Vec<Tag> = tags
        .iter()
        .map(|t| Tag::parse(t.as_ref()).unwrap_or(Tag::Outside))
        .collect();
    // First pass: decide for each token whether it starts and/or continues.
    let mut out: Vec<(char, Option<&str>)> = Vec::with_capacity(parsed.len());
    let mut open: Option<&str> = None;
    for tag in &parsed {
        let (starts, kind, closes) = match *tag {
            Tag::Outside => {
                out.push(('O', None));
                open = None;
                continue;
            }
            Tag::Begin(k) => (true, k, false),
            Tag::Single(k) => (true, k, true),
            Tag::Inside(k) => (open != Some(k), k, false),
            Tag::End(k) => (open != Some(k), k, true),
        };
        out.push((if starts { 'B' } else { 'I' }, Some(kind)));
        open = if closes { None } else { Some(kind) };
        if closes {
            let last = out.last_mut().unwrap();
            last.0 = if starts { 'S' } else { 'E' };
        }
    }
    // Second pass: close entities that the following token does not continue.
    let n = out.len();
    for i in 0..n {
        let (p, k) = out[i];
        if p == 'B' || p == 'I' {
            let continued = i + 1 < n && matches!(out[i + 1], ('I' | 'E', kk) if kk == k);
            if !continued {
                out[i].0 = if p == 'B' { 'S' } else { 'E' };
            }
        }
    }
    out.into_iter()
        .map(|(p, k)| match k {
            None => OUTSIDE.to_string(),
            Some(k) => make_tag(p, k),
        })
        .collect()
}
