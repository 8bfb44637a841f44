//! Invariants checked against brute-force oracles on random inputs.

mod common;

use std::collections::BTreeSet;

use minibert::data::{
    kfold_split, parse_conll, parse_re_tsv, parse_squad, write_conll, write_re_tsv, write_squad,
    Answer, LabeledSentence, QAExample, RelationExample, RelationLabelSet, Scheme,
};
use minibert::eval::{entity_prf, spans_from_tags, EntitySpan};
use minibert::heads::{extract_span, ner_decode, TagScheme};
use minibert::tags::{bio_to_bioes, bioes_to_bio, is_valid, repair_bioes};
use minibert::tokenizer::{
    char_slice, encode_words, tokenize_text, wordpiece_split, Vocabulary, UNK,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn vocab_from(pieces: &BTreeSet<String>) -> Vocabulary {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.push("zz".into());
    tokens.extend(pieces.iter().cloned());
    Vocabulary::from_tokens(tokens).unwrap()
}

/// The unique split in which every piece is in the vocabulary and no longer
/// vocabulary piece starts at the same place; `[UNK]` if there is none.
fn wordpiece_oracle(word: &str, vocab: &Vocabulary) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let piece = |a: usize, b: usize| {
        let s: String = chars[a..b].iter().collect();
        if a == 0 {
            s
        } else {
            format!("##{s}")
        }
    };
    for cuts in 0u32..(1 << (n - 1)) {
        let mut bounds = vec![0];
        bounds.extend((1..n).filter(|k| cuts & (1 << (k - 1)) != 0));
        bounds.push(n);
        let ok = bounds.windows(2).all(|w| {
            vocab.contains(&piece(w[0], w[1]))
                && (w[1] + 1..=n).all(|b| !vocab.contains(&piece(w[0], b)))
        });
        if ok {
            return bounds.windows(2).map(|w| piece(w[0], w[1])).collect();
        }
    }
    vec![UNK.to_string()]
}

fn piece_set() -> impl Strategy<Value = BTreeSet<String>> {
    prop::collection::btree_set(("(##)?[abc]{1,3}").prop_map(|s| s.to_string()), 0..20)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn wordpiece_matches_oracle(pieces in piece_set(), word in "[abc]{1,8}") {
        let vocab = vocab_from(&pieces);
        prop_assert_eq!(wordpiece_split(&word, &vocab, 100), wordpiece_oracle(&word, &vocab));
    }

    #[test]
    fn offsets_slice_the_source(text in "[ab \\.,\t\u{e9}\u{200b}x]{0,30}") {
        let mut pieces: BTreeSet<String> = ["a", "b", "##a", "##b", ".", ","].iter().map(|s| s.to_string()).collect();
        pieces.insert("\u{e9}".into());
        let vocab = vocab_from(&pieces);
        let words: Vec<String> = text.split(|c: char| c.is_whitespace() || c == '\u{200b}').map(String::from).collect();
        for p in tokenize_text(&text, &vocab) {
            let slice = char_slice(&text, p.start, p.end);
            if p.token == UNK {
                prop_assert!(words.iter().any(|w| w.contains(slice)));
                prop_assert!(!slice.is_empty());
            } else {
                prop_assert_eq!(slice, p.token.trim_start_matches("##"));
            }
        }
    }

    #[test]
    fn bio_bioes_round_trip(seed in any::<u64>(), len in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tags = random_bioes(&mut rng, len, &["Gene", "Disease"]);
        let bio = bioes_to_bio(&tags).unwrap();
        prop_assert!(is_valid(&bio, Scheme::Bio));
        let back = bio_to_bioes(&bio).unwrap();
        prop_assert_eq!(&back, &tags);
        prop_assert_eq!(spans_from_tags(&back).unwrap(), spans_oracle(&tags));
    }

    #[test]
    fn repair_always_yields_valid_bioes(raw in prop::collection::vec("O|[BIES]-(A|B)", 0..20)) {
        let fixed = repair_bioes(&raw);
        prop_assert_eq!(fixed.len(), raw.len());
        prop_assert!(is_valid(&fixed, Scheme::Bioes));
        if is_valid(&raw, Scheme::Bioes) {
            prop_assert_eq!(fixed, raw);
        }
    }

    #[test]
    fn entity_prf_is_symmetric(seed in any::<u64>(), n in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spans = |rng: &mut ChaCha8Rng| -> Vec<Vec<EntitySpan>> {
            (0..n).map(|_| spans_oracle(&random_bioes(rng, 8, &["A", "B"]))).collect()
        };
        let (g, p) = (spans(&mut rng), spans(&mut rng));
        let ab = entity_prf(&g, &p).unwrap();
        let ba = entity_prf(&p, &g).unwrap();
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
        let (op, or, of) = prf_oracle(&g, &p);
        prop_assert_eq!((ab.precision, ab.recall), (op, or));
        prop_assert!((ab.f1 - of).abs() < 1e-12);
    }

    #[test]
    fn kfold_partitions(n in 2usize..60, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0; n];
        for (train, test) in &folds {
            prop_assert_eq!(train.len() + test.len(), n);
            let t: BTreeSet<_> = test.iter().collect();
            prop_assert!(train.iter().all(|i| !t.contains(i)));
            for &i in test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.1.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn conll_round_trip(seed in any::<u64>(), n in 0usize..5, bio in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences: Vec<LabeledSentence> = (0..n)
            .map(|i| {
                let len = 1 + (seed as usize + i) % 7;
                let tags = random_bioes(&mut rng, len, &["Gene", "Chemical"]);
                let words = (0..len).map(|k| format!("w{i}_{k}(")).collect();
                LabeledSentence::new(words, tags).unwrap()
            })
            .collect();
        let scheme = if bio { Scheme::Bio } else { Scheme::Bioes };
        let mut buf = Vec::new();
        write_conll(&sentences, &mut buf, scheme).unwrap();
        let back = parse_conll(&buf[..], scheme, false).unwrap();
        prop_assert_eq!(back.sentences, sentences);
    }

    #[test]
    fn relation_tsv_round_trip(rows in prop::collection::vec(("[a-z0-9]{1,6}", "[a-zA-Z ,.]{1,30}", any::<bool>()), 0..8)) {
        let examples: Vec<RelationExample> = rows
            .iter()
            .enumerate()
            .map(|(i, (id, s, pos))| RelationExample {
                id: format!("{id}{i}"),
                sentence: format!("@GENE$ {} @DISEASE$", s.trim()),
                label: if *pos { "1" } else { "0" }.into(),
            })
            .collect();
        let mut buf = Vec::new();
        write_re_tsv(&examples, &mut buf).unwrap();
        let labels = RelationLabelSet::binary().with_placeholders(["@GENE$", "@DISEASE$"]);
        prop_assert_eq!(parse_re_tsv(&buf[..], &labels).unwrap(), examples);
    }

    #[test]
    fn squad_round_trip(items in prop::collection::vec(("[a-z?]{1,10}", "[a-z \u{e9}\"\\\\]{1,40}", 0usize..40, 1usize..5), 0..5)) {
        let examples: Vec<QAExample> = items
            .iter()
            .enumerate()
            .map(|(i, (q, p, s, l))| {
                let n = p.chars().count();
                let start = s % n;
                let end = (start + l).min(n);
                QAExample {
                    id: format!("q{i}"),
                    question: q.clone(),
                    passage: p.clone(),
                    answers: vec![Answer { text: char_slice(p, start, end).to_string(), start }],
                }
            })
            .collect();
        let json = write_squad(&examples, "t").unwrap();
        prop_assert_eq!(parse_squad(&json).unwrap(), examples);
    }
}

#[test]
fn decode_is_valid_on_random_logits() {
    let vocab = letters_vocab();
    let scheme = TagScheme::new(&["Gene", "Disease", "Chemical"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    use rand::Rng;
    for _ in 0..200 {
        let n_words = rng.random_range(1..12);
        let words: Vec<&str> = (0..n_words)
            .map(|_| ["a", "ab", "cd", "zz", "acd"][rng.random_range(0..5)])
            .collect();
        let max_len = rng.random_range(3..16);
        let encoded = encode_words(&words, &vocab, max_len).unwrap();
        let logits: Vec<Vec<f32>> = (0..encoded.len())
            .map(|_| {
                (0..scheme.len())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect()
            })
            .collect();
        let tags = ner_decode(&logits, &encoded, n_words, &scheme);
        assert_eq!(tags.len(), n_words);
        assert!(is_valid(&tags, Scheme::Bioes), "{tags:?}");
    }
}

#[test]
fn extract_span_matches_enumeration() {
    let vocab = letters_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let inst = random_span_instance(&mut rng, &vocab);
        let expected = span_oracle(&inst);
        match extract_span(
            &inst.start,
            &inst.end,
            &inst.encoded,
            &inst.passage,
            inst.max_answer,
            inst.n_best,
        ) {
            Ok(got) => {
                let got: Vec<_> = got.iter().map(|c| (c.score, c.start, c.end)).collect();
                assert_eq!(got, expected);
            }
            Err(_) => assert!(expected.is_empty()),
        }
    }
}
