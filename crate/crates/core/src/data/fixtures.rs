//! Synthetic corpora and task datasets built from word pools and sentence
//! frames.
//!
//! Two kinds of domain vocabulary exist: gene names (entities) and process
//! terms (not entities). In the NER data both fill the same slots, so a
//! tagger can only tell them apart by what it knows about the word itself.
//! The domain corpus uses them in distinct frames; the general corpus never
//! uses them at all. Dev and test NER sentences draw genes and process terms
//! that the NER training sentences never contain.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Normalizer;
use crate::pretrain::Corpus;
use crate::rng::{substream, StreamRng};
use crate::tags::Scheme;
use crate::tokenizer::{Vocabulary, CLS, MASK, PAD, SEP, UNK};

use super::conll::{write_conll, LabeledSentence};
use super::qa::{write_squad, Answer, BioasqQuestion, QAExample};
use super::relation::{write_re_tsv, RelationExample};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pools {
    pub general: Vec<String>,
    /// Non-entity domain terms.
    pub domain: Vec<String>,
    pub genes: Vec<String>,
    pub diseases: Vec<String>,
}

/// How many synthetic words to add to each pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSizes {
    pub general: usize,
    pub domain: usize,
    pub genes: usize,
    pub diseases: usize,
}

impl Default for PoolSizes {
    fn default() -> Self {
        PoolSizes {
            general: 120,
            domain: 24,
            genes: 24,
            diseases: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    pub general_documents: usize,
    pub domain_documents: usize,
    pub sentences_per_document: usize,
    pub ner_train: usize,
    pub ner_dev: usize,
    pub ner_test: usize,
    pub re_train: usize,
    pub re_dev: usize,
    pub re_test: usize,
    pub qa_train: usize,
    pub qa_dev: usize,
    pub qa_test: usize,
    pub qa_intermediate: usize,
    pub bioasq_questions: usize,
    /// Fraction of BioASQ-shaped questions whose passage lacks the answer.
    pub bioasq_unanswerable: f64,
    /// Fraction of each domain pool reserved for NER dev and test.
    pub heldout_fraction: f64,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            general_documents: 150,
            domain_documents: 150,
            sentences_per_document: 8,
            ner_train: 200,
            ner_dev: 100,
            ner_test: 200,
            re_train: 200,
            re_dev: 50,
            re_test: 100,
            qa_train: 150,
            qa_dev: 50,
            qa_test: 50,
            qa_intermediate: 100,
            bioasq_questions: 100,
            bioasq_unanswerable: 0.3,
            heldout_fraction: 0.5,
        }
    }
}

/// Fixture recipe, normally read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureRecipe {
    pub seed: u64,
    /// Reject pools that share words with each other or with the frames.
    pub require_disjoint: bool,
    pub pools: Pools,
    pub generate: PoolSizes,
    pub sizes: Sizes,
}

impl Default for FixtureRecipe {
    fn default() -> Self {
        FixtureRecipe {
            seed: 0,
            require_disjoint: true,
            pools: Pools::default(),
            generate: PoolSizes::default(),
            sizes: Sizes::default(),
        }
    }
}

impl FixtureRecipe {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("fixture recipe: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("fixture recipe: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Fixtures {
    pub vocab: Vec<String>,
    pub general_corpus: Corpus,
    pub domain_corpus: Corpus,
    pub ner: Split<LabeledSentence>,
    pub re: Split<RelationExample>,
    pub qa: Split<QAExample>,
    /// General-language span questions for a first QA phase.
    pub qa_intermediate: Vec<QAExample>,
    pub bioasq_questions: Vec<BioasqQuestion>,
    pub bioasq_passages: BTreeMap<String, String>,
    /// Number of BioASQ-shaped questions built without their answer.
    pub bioasq_unanswerable: usize,
    /// Every word that may only appear in domain text.
    pub domain_terms: BTreeSet<String>,
    pub pools: Pools,
}

// Slots: {W} general word, {G} gene, {P} process term, {D} disease,
// {N} number, {X} gene or process term.
const GENERAL_FRAMES: &[&str] = &[
    "the {W} was found near the {W} .",
    "we measured {W} levels in the {W} samples .",
    "{W} was associated with {W} in this study .",
    "the role of {W} in {W} remains unclear .",
    "changes in {W} were detected after {N} days .",
    "{W} and {W} were analyzed in {W} cells .",
    "the {W} is located on the {W} .",
    "{W} occurs during the {W} phase .",
    "the rate of {W} increased after treatment .",
    "patients with {W} were treated with {W} .",
    "a {W} protein is expressed in the {W} .",
    "mutations in the {W} were found in {N} cases .",
];

const GENE_FRAMES: &[&str] = &[
    "mutations in {G} were found in patients with {D} .",
    "{G} encodes a protein expressed in the {W} .",
    "the {G} gene is located on chromosome {N} .",
    "expression of {G} was reduced in {D} tissue .",
    "{G} binds {G} in the {W} .",
    "the {G} gene was studied in {W} cells .",
    "{G} is a gene .",
    "knockdown of {G} impairs {W} growth .",
];

const PROCESS_FRAMES: &[&str] = &[
    "{P} occurs during the {W} phase .",
    "the rate of {P} increased after treatment .",
    "{P} was observed in {W} cells .",
    "inhibition of {P} slows the {W} .",
    "{G} regulates {P} in {W} cells .",
    "the {P} process was studied in {W} cells .",
    "{P} is a process .",
];

const DISEASE_FRAMES: &[&str] = &[
    "patients with {D} were treated with {W} .",
    "{D} is a common disorder of the {W} .",
];

const NER_FRAMES: &[&str] = &[
    "we measured {X} levels in the {W} samples .",
    "{X} was associated with {D} in this study .",
    "the role of {X} in {D} remains unclear .",
    "changes in {X} were detected after {N} days .",
    "{X} and {X} were analyzed in {W} cells .",
];

const RE_POSITIVE: &[&str] = &[
    "mutations in @GENE$ cause @DISEASE$ in {W} patients .",
    "@GENE$ variants increase the risk of @DISEASE$ .",
    "loss of @GENE$ leads to @DISEASE$ .",
];

const RE_NEGATIVE: &[&str] = &[
    "@GENE$ was measured in patients without @DISEASE$ .",
    "@GENE$ and @DISEASE$ were studied in separate {W} cohorts .",
    "no link between @GENE$ and @DISEASE$ was found .",
];

const EXTRA_WORDS: &[&str] = &[
    "which", "gene", "is", "mutated", "in", "patients", "with", "what", "was", "found", "near",
    "the", "?", "GENE", "DISEASE", "@", "$", "syndrome", "cause", "variants", "increase", "risk",
    "of", "loss", "leads", "to", "measured", "without", "and", "were", "studied", "separate",
    "cohorts", "no", "link", "between", "does", "affect",
];

const SYLLABLES: &[&str] = &[
    "ba", "ko", "mi", "ru", "te", "lo", "na", "si", "de", "fu", "ga", "pe", "zo", "ri", "ta", "ve",
    "mo", "lu", "ne", "ka", "po", "di", "sa", "ho",
];

fn frame_words() -> BTreeSet<String> {
    let frames = [
        GENERAL_FRAMES,
        GENE_FRAMES,
        PROCESS_FRAMES,
        DISEASE_FRAMES,
        NER_FRAMES,
        RE_POSITIVE,
        RE_NEGATIVE,
    ];
    let mut words: BTreeSet<String> = frames
        .iter()
        .flat_map(|f| f.iter())
        .flat_map(|f| f.split_whitespace())
        .filter(|w| !w.starts_with('{') && !w.starts_with('@'))
        .map(String::from)
        .collect();
    words.extend(EXTRA_WORDS.iter().map(|s| s.to_string()));
    words
}

fn syllables(rng: &mut StreamRng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn pseudo_word(kind: &str, rng: &mut StreamRng) -> String {
    match kind {
        "general" => syllables(rng, 2, 3),
        "domain" => {
            let suffix = ["osis", "ation", "ysis", "esis"].choose(rng).unwrap();
            format!("{}{suffix}", syllables(rng, 1, 2))
        }
        "genes" => {
            let letters: String = (0..rng.random_range(2..=3))
                .map(|_| (b'A' + rng.random_range(0..26u8)) as char)
                .collect();
            format!("{letters}{}", rng.random_range(1..=9))
        }
        _ => {
            let suffix = ["itis", "emia", "opathy", "oma"].choose(rng).unwrap();
            format!("{}{suffix}", syllables(rng, 1, 2))
        }
    }
}

fn fill_pool(
    explicit: &[String],
    extra: usize,
    kind: &str,
    taken: &mut BTreeSet<String>,
    seed: u64,
) -> Vec<String> {
    let mut rng = substream(seed, &format!("fixtures.pool.{kind}"));
    let mut pool = explicit.to_vec();
    let mut attempts = 0;
    while pool.len() < explicit.len() + extra {
        let w = pseudo_word(kind, &mut rng);
        attempts += 1;
        if taken.insert(w.clone()) {
            pool.push(w);
        } else if attempts > 100 * (extra + 1) {
            break;
        }
    }
    pool
}

fn check_disjoint(recipe: &FixtureRecipe) -> Result<()> {
    let p = &recipe.pools;
    let named = [
        ("general", &p.general),
        ("domain", &p.domain),
        ("genes", &p.genes),
        ("diseases", &p.diseases),
    ];
    let frames = frame_words();
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for (name, pool) in named {
        for w in pool {
            if w.is_empty()
                || w.chars()
                    .any(|c| c.is_whitespace() || (c.is_ascii_punctuation()))
            {
                return Err(Error::config(format!(
                    "pool {name}: {w:?} is not a single plain word"
                )));
            }
            if let Some(other) = seen.insert(w, name) {
                if other != name || recipe.require_disjoint {
                    return Err(Error::config(format!(
                        "word {w:?} appears in pools {other} and {name}"
                    )));
                }
            }
            if recipe.require_disjoint && name != "general" && frames.contains(w) {
                return Err(Error::config(format!(
                    "domain word {w:?} from pool {name} also occurs in the sentence frames"
                )));
            }
        }
    }
    Ok(())
}

/// Split a pool into the part used for NER training and the held-out rest.
fn split_pool(pool: &[String], fraction: f64, rng: &mut StreamRng) -> (Vec<String>, Vec<String>) {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    let held = ((pool.len() as f64) * fraction).round() as usize;
    let held = held.min(pool.len().saturating_sub(1));
    let train = shuffled.split_off(held);
    (train, shuffled)
}

struct Filler<'a> {
    general: &'a [String],
    genes: &'a [String],
    processes: &'a [String],
    diseases: &'a [String],
}

/// A filled frame: words plus the entity (if any) each word belongs to.
struct Filled {
    words: Vec<String>,
    tags: Vec<String>,
}

impl Filler<'_> {
    fn fill(&self, frame: &str, rng: &mut StreamRng) -> Filled {
        let mut out = Filled {
            words: Vec::new(),
            tags: Vec::new(),
        };
        let mut push = |w: String, tag: String| {
            out.words.push(w);
            out.tags.push(tag);
        };
        for slot in frame.split_whitespace() {
            match slot {
                "{W}" => push(pick(self.general, rng), "O".into()),
                "{N}" => push(rng.random_range(1..=22).to_string(), "O".into()),
                "{G}" => push(pick(self.genes, rng), "S-Gene".into()),
                "{P}" => push(pick(self.processes, rng), "O".into()),
                "{X}" => {
                    if rng.random_bool(0.5) {
                        push(pick(self.genes, rng), "S-Gene".into())
                    } else {
                        push(pick(self.processes, rng), "O".into())
                    }
                }
                "{D}" => {
                    let d = pick(self.diseases, rng);
                    if rng.random_bool(0.2) {
                        push(d, "B-Disease".into());
                        push("syndrome".into(), "E-Disease".into());
                    } else {
                        push(d, "S-Disease".into());
                    }
                }
                w => push(w.to_string(), "O".into()),
            }
        }
        out
    }
}

fn pick(pool: &[String], rng: &mut StreamRng) -> String {
    pool.choose(rng).cloned().unwrap_or_else(|| "none".into())
}

fn corpus(
    documents: usize,
    per_doc: usize,
    frames: &[(&[&str], f64)],
    filler: &Filler,
    rng: &mut StreamRng,
) -> Corpus {
    let weights: f64 = frames.iter().map(|f| f.1).sum();
    let docs = (0..documents)
        .map(|_| {
            (0..per_doc)
                .map(|_| {
                    let mut r = rng.random::<f64>() * weights;
                    let mut group = frames[0].0;
                    for (g, w) in frames {
                        if r < *w {
                            group = g;
                            break;
                        }
                        r -= w;
                    }
                    let frame = group.choose(rng).unwrap();
                    filler.fill(frame, rng).words.join(" ")
                })
                .collect()
        })
        .collect();
    Corpus { documents: docs }
}

fn sentences(text: &[String]) -> String {
    text.join(" ")
}

/// Build every fixture from `recipe`; the output depends only on the recipe
/// and `seed`.
pub fn generate_fixtures(recipe: &FixtureRecipe, seed: u64) -> Result<Fixtures> {
    check_disjoint(recipe)?;
    let s = &recipe.sizes;
    if !(0.0..=1.0).contains(&s.bioasq_unanswerable) || !(0.0..1.0).contains(&s.heldout_fraction) {
        return Err(Error::config("fixture fractions must lie in [0, 1]"));
    }
    let mut taken: BTreeSet<String> = frame_words();
    let p = &recipe.pools;
    for w in p
        .general
        .iter()
        .chain(&p.domain)
        .chain(&p.genes)
        .chain(&p.diseases)
    {
        taken.insert(w.clone());
    }
    let g = &recipe.generate;
    let general = fill_pool(&p.general, g.general, "general", &mut taken, seed);
    let processes = fill_pool(&p.domain, g.domain, "domain", &mut taken, seed);
    let genes = fill_pool(&p.genes, g.genes, "genes", &mut taken, seed);
    let diseases = fill_pool(&p.diseases, g.diseases, "diseases", &mut taken, seed);
    if general.is_empty() || processes.is_empty() || genes.len() < 2 || diseases.len() < 2 {
        return Err(Error::config(
            "pools need at least one general word, one domain term, two genes and two diseases",
        ));
    }

    let mut rng = substream(seed, "fixtures.split");
    let (gene_train, gene_held) = split_pool(&genes, s.heldout_fraction, &mut rng);
    let (proc_train, proc_held) = split_pool(&processes, s.heldout_fraction, &mut rng);
    let (dis_train, dis_held) = split_pool(&diseases, s.heldout_fraction, &mut rng);

    let all = Filler {
        general: &general,
        genes: &genes,
        processes: &processes,
        diseases: &diseases,
    };
    let general_only = Filler {
        general: &general,
        genes: &general,
        processes: &general,
        diseases: &general,
    };

    let mut rng = substream(seed, "fixtures.general");
    let general_corpus = corpus(
        s.general_documents,
        s.sentences_per_document,
        &[(GENERAL_FRAMES, 1.0)],
        &general_only,
        &mut rng,
    );
    let mut rng = substream(seed, "fixtures.domain");
    let domain_corpus = corpus(
        s.domain_documents,
        s.sentences_per_document,
        &[
            (GENE_FRAMES, 0.45),
            (PROCESS_FRAMES, 0.4),
            (DISEASE_FRAMES, 0.15),
        ],
        &all,
        &mut rng,
    );

    let ner_train_filler = Filler {
        general: &general,
        genes: &gene_train,
        processes: &proc_train,
        diseases: &dis_train,
    };
    let ner_held_filler = Filler {
        general: &general,
        genes: &gene_held,
        processes: &proc_held,
        diseases: &dis_held,
    };
    let mut rng = substream(seed, "fixtures.ner");
    let mut ner_set = |n: usize, filler: &Filler| -> Vec<LabeledSentence> {
        (0..n)
            .map(|_| {
                let f = filler.fill(NER_FRAMES.choose(&mut rng).unwrap(), &mut rng);
                LabeledSentence {
                    words: f.words,
                    tags: f.tags,
                }
            })
            .collect()
    };
    let ner = Split {
        train: ner_set(s.ner_train, &ner_train_filler),
        dev: ner_set(s.ner_dev, &ner_held_filler),
        test: ner_set(s.ner_test, &ner_held_filler),
    };

    let mut rng = substream(seed, "fixtures.re");
    let mut re_set = |n: usize, prefix: &str| -> Vec<RelationExample> {
        (0..n)
            .map(|i| {
                let positive = rng.random_bool(0.5);
                let frames = if positive { RE_POSITIVE } else { RE_NEGATIVE };
                let f = all.fill(frames.choose(&mut rng).unwrap(), &mut rng);
                RelationExample {
                    id: format!("{prefix}{i}"),
                    sentence: f.words.join(" "),
                    label: if positive { "1" } else { "0" }.into(),
                }
            })
            .collect()
    };
    let re = Split {
        train: re_set(s.re_train, "train-"),
        dev: re_set(s.re_dev, "dev-"),
        test: re_set(s.re_test, "test-"),
    };

    let normalizer = Normalizer::default();
    let mut rng = substream(seed, "fixtures.qa");
    let qa = Split {
        train: qa_set(s.qa_train, "train-", &all, &mut rng),
        dev: qa_set(s.qa_dev, "dev-", &all, &mut rng),
        test: qa_set(s.qa_test, "test-", &all, &mut rng),
    };
    let qa_intermediate = (0..s.qa_intermediate)
        .map(|i| {
            let target = pick(&general, &mut rng);
            let place = loop {
                let w = pick(&general, &mut rng);
                if w != target || general.len() == 1 {
                    break w;
                }
            };
            let mut passage: Vec<String> = (0..3)
                .map(|_| {
                    general_only
                        .fill(GENERAL_FRAMES.choose(&mut rng).unwrap(), &mut rng)
                        .words
                        .join(" ")
                })
                .filter(|s| !s.contains(&format!("near the {place} ")))
                .collect();
            let at = rng.random_range(0..=passage.len());
            passage.insert(at, format!("the {target} was found near the {place} ."));
            let prefix: usize = passage[..at].iter().map(|s| s.chars().count() + 1).sum();
            QAExample {
                id: format!("inter-{i}"),
                question: format!("what was found near the {place} ?"),
                passage: sentences(&passage),
                answers: vec![Answer {
                    text: target,
                    start: prefix + 4,
                }],
            }
        })
        .collect();

    let mut rng = substream(seed, "fixtures.bioasq");
    let unanswerable = (s.bioasq_questions as f64 * s.bioasq_unanswerable).round() as usize;
    let mut answerable_flags: Vec<bool> =
        (0..s.bioasq_questions).map(|i| i >= unanswerable).collect();
    answerable_flags.shuffle(&mut rng);
    let mut bioasq_questions = Vec::new();
    let mut bioasq_passages = BTreeMap::new();
    for (i, answerable) in answerable_flags.into_iter().enumerate() {
        let ex = qa_example(&format!("bioasq-{i}"), &all, &mut rng, answerable);
        let doc = format!("{}", 100_000 + i);
        let mut answer = ex.answers[0].text.clone();
        if !answerable {
            // any gene the passage does not mention, even as a substring
            let text = normalizer.map_text(&ex.passage).0;
            let free: Vec<&String> = genes
                .iter()
                .filter(|g| !text.contains(&normalizer.apply(g)))
                .collect();
            answer = free
                .choose(&mut rng)
                .map(|g| g.to_string())
                .ok_or_else(|| Error::config("gene pool too small for unanswerable questions"))?;
        }
        bioasq_questions.push(BioasqQuestion {
            id: format!("q{i}"),
            kind: "factoid".into(),
            body: ex.question,
            exact_answer: serde_json::json!([[answer]]),
            documents: vec![format!("http://www.ncbi.nlm.nih.gov/pubmed/{doc}")],
        });
        bioasq_passages.insert(doc, ex.passage);
    }
    if s.bioasq_questions > 0 {
        bioasq_questions.push(BioasqQuestion {
            id: "yesno-0".into(),
            kind: "yesno".into(),
            body: format!("does {} affect {} ?", genes[0], diseases[0]),
            exact_answer: serde_json::json!("yes"),
            documents: Vec::new(),
        });
    }

    let mut domain_terms: BTreeSet<String> = BTreeSet::new();
    domain_terms.extend(processes.iter().cloned());
    domain_terms.extend(genes.iter().cloned());
    domain_terms.extend(diseases.iter().cloned());

    let vocab = build_vocab(&general, &processes, &genes, &diseases);
    Ok(Fixtures {
        vocab,
        general_corpus,
        domain_corpus,
        ner,
        re,
        qa,
        qa_intermediate,
        bioasq_questions,
        bioasq_passages,
        bioasq_unanswerable: unanswerable,
        domain_terms,
        pools: Pools {
            general,
            domain: processes,
            genes,
            diseases,
        },
    })
}

/// A passage of domain sentences containing (or, if `answerable` is false,
/// lacking) the sentence that answers "which gene is mutated in ...".
fn qa_example(id: &str, filler: &Filler, rng: &mut StreamRng, answerable: bool) -> QAExample {
    let gene = pick(filler.genes, rng);
    let disease = pick(filler.diseases, rng);
    let mut passage: Vec<String> = Vec::new();
    while passage.len() < 3 {
        let group = [GENE_FRAMES, PROCESS_FRAMES, DISEASE_FRAMES][rng.random_range(0..3)];
        let sentence = filler.fill(group.choose(rng).unwrap(), rng).words.join(" ");
        let mentions_disease = sentence.split(' ').any(|w| w == disease);
        let mentions_gene = sentence.split(' ').any(|w| w == gene);
        if !mentions_disease && !mentions_gene {
            passage.push(sentence);
        }
    }
    let key = format!("mutations in {gene} were found in patients with {disease} .");
    let at = rng.random_range(0..=passage.len());
    if answerable {
        passage.insert(at, key);
    }
    let start = if answerable {
        passage[..at]
            .iter()
            .map(|s| s.chars().count() + 1)
            .sum::<usize>()
            + "mutations in ".len()
    } else {
        0
    };
    QAExample {
        id: id.into(),
        question: format!("which gene is mutated in patients with {disease} ?"),
        passage: sentences(&passage),
        answers: vec![Answer { text: gene, start }],
    }
}

fn qa_set(n: usize, prefix: &str, filler: &Filler, rng: &mut StreamRng) -> Vec<QAExample> {
    (0..n)
        .map(|i| qa_example(&format!("{prefix}{i}"), filler, rng, true))
        .collect()
}

fn build_vocab(
    general: &[String],
    processes: &[String],
    genes: &[String],
    diseases: &[String],
) -> Vec<String> {
    let mut out: Vec<String> = [PAD, UNK, CLS, SEP, MASK]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut seen: BTreeSet<String> = out.iter().cloned().collect();
    let mut add = |w: String, out: &mut Vec<String>| {
        if seen.insert(w.clone()) {
            out.push(w);
        }
    };
    for c in ".,;:?!()[]-/@$%'\"".chars() {
        add(c.to_string(), &mut out);
    }
    for c in ('0'..='9').chain('a'..='z').chain('A'..='Z') {
        add(c.to_string(), &mut out);
        add(format!("##{c}"), &mut out);
    }
    for w in frame_words() {
        add(w, &mut out);
    }
    for w in general.iter().chain(processes).chain(genes).chain(diseases) {
        add(w.clone(), &mut out);
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    vocab_size: usize,
    general_corpus_words: usize,
    domain_corpus_words: usize,
    ner: [usize; 3],
    re: [usize; 3],
    qa: [usize; 3],
    qa_intermediate: usize,
    bioasq_questions: usize,
    bioasq_unanswerable: usize,
    domain_terms: &'a BTreeSet<String>,
}

impl Fixtures {
    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::from_tokens(self.vocab.clone())
    }

    /// Every output file as `(relative path, contents)`, in a fixed order.
    pub fn files(&self, seed: u64) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = Vec::new();
        let mut vocab = String::new();
        for t in &self.vocab {
            vocab.push_str(t);
            vocab.push('\n');
        }
        files.push(("vocab.txt".into(), vocab.into_bytes()));
        files.push((
            "corpus/general.txt".into(),
            self.general_corpus.to_text().into_bytes(),
        ));
        files.push((
            "corpus/domain.txt".into(),
            self.domain_corpus.to_text().into_bytes(),
        ));
        for (name, set) in [
            ("train", &self.ner.train),
            ("dev", &self.ner.dev),
            ("test", &self.ner.test),
        ] {
            let mut buf = Vec::new();
            write_conll(set, &mut buf, Scheme::Bio)?;
            files.push((format!("ner/{name}.conll"), buf));
        }
        for (name, set) in [
            ("train", &self.re.train),
            ("dev", &self.re.dev),
            ("test", &self.re.test),
        ] {
            let mut buf = Vec::new();
            write_re_tsv(set, &mut buf)?;
            files.push((format!("re/{name}.tsv"), buf));
        }
        for (name, set) in [
            ("train", &self.qa.train),
            ("dev", &self.qa.dev),
            ("test", &self.qa.test),
            ("intermediate", &self.qa_intermediate),
        ] {
            files.push((
                format!("qa/{name}.json"),
                write_squad(set, name)?.into_bytes(),
            ));
        }
        let questions = serde_json::json!({ "questions": self.bioasq_questions });
        files.push((
            "qa/bioasq.json".into(),
            serde_json::to_string_pretty(&questions)?.into_bytes(),
        ));
        files.push((
            "qa/passages.json".into(),
            serde_json::to_string_pretty(&self.bioasq_passages)?.into_bytes(),
        ));
        let manifest = Manifest {
            seed,
            vocab_size: self.vocab.len(),
            general_corpus_words: self.general_corpus.word_count(),
            domain_corpus_words: self.domain_corpus.word_count(),
            ner: [
                self.ner.train.len(),
                self.ner.dev.len(),
                self.ner.test.len(),
            ],
            re: [self.re.train.len(), self.re.dev.len(), self.re.test.len()],
            qa: [self.qa.train.len(), self.qa.dev.len(), self.qa.test.len()],
            qa_intermediate: self.qa_intermediate.len(),
            bioasq_questions: self
                .bioasq_questions
                .iter()
                .filter(|q| q.kind == "factoid")
                .count(),
            bioasq_unanswerable: self.bioasq_unanswerable,
            domain_terms: &self.domain_terms,
        };
        files.push((
            "manifest.json".into(),
            serde_json::to_string_pretty(&manifest)?.into_bytes(),
        ));
        Ok(files)
    }

    pub fn write_to(&self, dir: &Path, seed: u64) -> Result<Vec<String>> {
        let mut written = Vec::new();
        for (rel, bytes) in self.files(seed)? {
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes)?;
            written.push(rel);
        }
        Ok(written)
    }
}
