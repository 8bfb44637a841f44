use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::Normalizer;
use crate::tokenizer::char_slice;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Character (not byte) index into the passage.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub passage: String,
    pub answers: Vec<Answer>,
}

impl QAExample {
    /// Every answer must equal the passage slice at its start.
    pub fn validate(&self) -> Result<()> {
        let n = self.passage.chars().count();
        for a in &self.answers {
            let end = a.start + a.text.chars().count();
            if end > n || char_slice(&self.passage, a.start, end) != a.text {
                return Err(Error::format(format!(
                    "question {}: answer {:?} does not occur at character {}",
                    self.id, a.text, a.start
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SquadFile {
    #[serde(default = "squad_version")]
    version: String,
    data: Vec<SquadArticle>,
}

fn squad_version() -> String {
    "1.1".into()
}

#[derive(Serialize, Deserialize)]
struct SquadArticle {
    #[serde(default)]
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQuestion>,
}

#[derive(Serialize, Deserialize)]
struct SquadQuestion {
    id: String,
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
}

#[derive(Serialize, Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

/// Read SQuAD-v1.1-shaped JSON.
pub fn parse_squad(text: &str) -> Result<Vec<QAExample>> {
    let file: SquadFile = serde_json::from_str(text)
        .map_err(|e| Error::format(format!("not SQuAD-shaped JSON: {e}")))?;
    let mut out = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            for q in para.qas {
                let ex = QAExample {
                    id: q.id,
                    question: q.question,
                    passage: para.context.clone(),
                    answers: q
                        .answers
                        .into_iter()
                        .map(|a| Answer {
                            text: a.text,
                            start: a.answer_start,
                        })
                        .collect(),
                };
                ex.validate()?;
                out.push(ex);
            }
        }
    }
    Ok(out)
}

/// Write SQuAD-v1.1-shaped JSON; consecutive examples sharing a passage
/// share a paragraph.
pub fn write_squad(examples: &[QAExample], title: &str) -> Result<String> {
    let mut paragraphs: Vec<SquadParagraph> = Vec::new();
    for e in examples {
        let q = SquadQuestion {
            id: e.id.clone(),
            question: e.question.clone(),
            answers: e
                .answers
                .iter()
                .map(|a| SquadAnswer {
                    text: a.text.clone(),
                    answer_start: a.start,
                })
                .collect(),
        };
        match paragraphs.last_mut() {
            Some(p) if p.context == e.passage => p.qas.push(q),
            _ => paragraphs.push(SquadParagraph {
                context: e.passage.clone(),
                qas: vec![q],
            }),
        }
    }
    let file = SquadFile {
        version: squad_version(),
        data: vec![SquadArticle {
            title: title.into(),
            paragraphs,
        }],
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// All character starts of `needle` in `haystack` after normalization,
/// reported as `(start, end)` character ranges of the original text.
pub fn find_normalized(
    haystack: &str,
    needle: &str,
    normalizer: &Normalizer,
) -> Vec<(usize, usize)> {
    let target: Vec<char> = normalizer.apply(needle).chars().collect();
    if target.is_empty() {
        return Vec::new();
    }
    let (text, origin) = normalizer.map_text(haystack);
    let chars: Vec<char> = text.chars().collect();
    let mut found = Vec::new();
    for s in 0..chars.len().saturating_sub(target.len() - 1) {
        if chars[s..s + target.len()] == target[..] {
            let range = (origin[s], origin[s + target.len() - 1] + 1);
            if found.last() != Some(&range) {
                found.push(range);
            }
        }
    }
    found
}

/// Keep examples whose normalized gold answer occurs in the normalized passage.
pub fn filter_unanswerable(
    examples: Vec<QAExample>,
    normalizer: &Normalizer,
) -> (Vec<QAExample>, usize) {
    let before = examples.len();
    let kept: Vec<QAExample> = examples
        .into_iter()
        .filter(|e| {
            let passage = normalizer.map_text(&e.passage).0;
            e.answers.iter().any(|a| {
                let needle = normalizer.apply(&a.text);
                !needle.is_empty() && passage.contains(&needle)
            })
        })
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// A BioASQ-shaped question record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioasqQuestion {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub body: String,
    /// A string, a list of strings, or a list of synonym lists.
    #[serde(default)]
    pub exact_answer: Value,
    #[serde(default)]
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct BioasqConversion {
    pub examples: Vec<QAExample>,
    /// (question, passage) pairs with no occurrence of any gold answer.
    pub dropped: usize,
    pub skipped_non_factoid: usize,
}

/// Parse `{"questions": [...]}` or a bare list of question records.
pub fn parse_bioasq(text: &str) -> Result<Vec<BioasqQuestion>> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::format(format!("not BioASQ JSON: {e}")))?;
    let list = match v {
        Value::Object(mut m) => m
            .remove("questions")
            .ok_or_else(|| Error::format("BioASQ JSON lacks a \"questions\" array"))?,
        other => other,
    };
    serde_json::from_value(list)
        .map_err(|e| Error::format(format!("bad BioASQ question record: {e}")))
}

fn answer_strings(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => out.push(s.clone()),
        Value::Array(items) => items.iter().for_each(|i| answer_strings(i, out)),
        _ => {}
    }
}

fn document_key(doc: &str) -> &str {
    doc.rsplit('/').next().unwrap_or(doc)
}

/// Convert factoid questions into extractive examples, one per referenced
/// passage that contains a gold answer.
pub fn bioasq_to_extractive(
    questions: &[BioasqQuestion],
    passages: &BTreeMap<String, String>,
    normalizer: &Normalizer,
) -> Result<BioasqConversion> {
    let lookup = |doc: &str| {
        passages
            .get(doc)
            .or_else(|| passages.get(document_key(doc)))
    };
    let dangling: Vec<String> = questions
        .iter()
        .filter(|q| q.kind == "factoid")
        .flat_map(|q| q.documents.iter())
        .filter(|d| lookup(d).is_none())
        .cloned()
        .collect();
    if !dangling.is_empty() {
        return Err(Error::Reference(format!(
            "unknown passage ids: {}",
            dangling.join(", ")
        )));
    }
    let mut out = BioasqConversion::default();
    for q in questions {
        if q.kind != "factoid" {
            out.skipped_non_factoid += 1;
            continue;
        }
        let mut golds = Vec::new();
        answer_strings(&q.exact_answer, &mut golds);
        for doc in &q.documents {
            let passage = lookup(doc).unwrap();
            let mut spans: Vec<(usize, usize)> = golds
                .iter()
                .flat_map(|g| find_normalized(passage, g, normalizer))
                .collect();
            spans.sort_unstable();
            spans.dedup();
            if spans.is_empty() {
                out.dropped += 1;
                continue;
            }
            out.examples.push(QAExample {
                id: format!("{}_{}", q.id, document_key(doc)),
                question: q.body.clone(),
                passage: passage.clone(),
                answers: spans
                    .into_iter()
                    .map(|(s, e)| Answer {
                        text: char_slice(passage, s, e).to_string(),
                        start: s,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(passage: &str, answer: &str) -> QAExample {
        QAExample {
            id: "q".into(),
            question: "what?".into(),
            passage: passage.into(),
            answers: vec![Answer {
                text: answer.into(),
                start: 0,
            }],
        }
    }

    #[test]
    fn squad_roundtrip() {
        let ex = vec![QAExample {
            id: "q1".into(),
            question: "Which?".into(),
            passage: "née alpha beta".into(),
            answers: vec![Answer {
                text: "alpha".into(),
                start: 4,
            }],
        }];
        let json = write_squad(&ex, "t").unwrap();
        assert_eq!(parse_squad(&json).unwrap(), ex);
        let bad = json.replace("\"answer_start\": 4", "\"answer_start\": 3");
        assert!(parse_squad(&bad).is_err());
    }

    #[test]
    fn unanswerable_filter() {
        let n = Normalizer::default();
        let kept = vec![
            example("eruptions of erythrasma occur", "erythrasma"),
            example("nothing here", "erythrasma"),
            example("ERYTHRASMA cases", "Erythrasma"),
        ];
        let (kept, dropped) = filter_unanswerable(kept, &n);
        assert_eq!((kept.len(), dropped), (2, 1));
        let (_, dropped) = filter_unanswerable(
            vec![example("ERYTHRASMA cases", "Erythrasma")],
            &Normalizer { case_fold: false },
        );
        assert_eq!(dropped, 1);
    }

    #[test]
    fn bioasq_conversion() {
        let questions = parse_bioasq(
            r#"{"questions": [
                {"id": "a", "type": "factoid", "body": "Q1?", "exact_answer": [["Beta"]], "documents": ["http://x/pubmed/1"]},
                {"id": "b", "type": "factoid", "body": "Q2?", "exact_answer": "gamma", "documents": ["1", "2"]},
                {"id": "c", "type": "list", "body": "Q3?", "exact_answer": [], "documents": []}
            ]}"#,
        )
        .unwrap();
        let passages: BTreeMap<String, String> = [
            ("1".to_string(), "Alpha  beta and BETA.".to_string()),
            ("2".to_string(), "gamma".to_string()),
        ]
        .into();
        let out = bioasq_to_extractive(&questions, &passages, &Normalizer::default()).unwrap();
        assert_eq!(out.skipped_non_factoid, 1);
        assert_eq!(out.dropped, 1);
        assert_eq!(out.examples.len(), 2);
        let a = &out.examples[0];
        assert_eq!(a.id, "a_1");
        assert_eq!(
            a.answers,
            [
                Answer {
                    text: "beta".into(),
                    start: 7
                },
                Answer {
                    text: "BETA".into(),
                    start: 16
                }
            ]
        );
        a.validate().unwrap();

        let mut missing = questions.clone();
        missing[1].documents.push("9".into());
        assert!(matches!(
            bioasq_to_extractive(&missing, &passages, &Normalizer::default()),
            Err(Error::Reference(m)) if m.contains('9')
        ));
    }
}
