//! Acceptance criteria 1-10. Runs without the libtest harness and prints one
//! line per criterion; the process fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use minibert::data::{bioasq_to_extractive, generate_fixtures, FixtureRecipe};
use minibert::encoder::{
    cast_params, load_checkpoint, save_checkpoint, zeros_like, EncoderConfig, Params, Tensor,
    WeightStore,
};
use minibert::error::Category;
use minibert::eval::{entity_prf, normalize_answer, qa_metrics, spans_from_tags, Normalizer};
use minibert::heads::{
    anonymize_entities, evaluate_ner, extract_span, finetune, FinetuneConfig, TaskData,
    DEFAULT_TAG_FORMAT,
};
use minibert::pretrain::{
    apply_masking, mlm_objective, train_mlm, MaskAction, MaskingPolicy, PretrainConfig,
};
use minibert::tokenizer::{encode_sequence, encode_words, tokenize_text, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Outcome {
    ensure(
        elapsed.as_secs_f64() < limit_secs,
        format!(
            "runtime {:.2}s (limit {limit_secs}s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn c1_tokenizer() -> Outcome {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/assets/bert-base-cased-vocab.txt"
    );
    let vocab = Vocabulary::load_path(path).map_err(|e| e.to_string())?;
    let got: Vec<String> = tokenize_text("Immunoglobulin", &vocab)
        .into_iter()
        .map(|p| p.token)
        .collect();
    let want = ["I", "##mm", "##uno", "##g", "##lo", "##bul", "##in"];
    ensure(
        got == want,
        format!("{} entries, pieces {got:?}", vocab.len()),
    )
}

fn c2_gradients() -> Outcome {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(["gene", "binds", "the", "kinase", "cell", "braf", "protein"].map(String::from));
    let v = Vocabulary::from_tokens(tokens).unwrap();
    let cfg = tiny_config(&v);
    let store = WeightStore::init(&cfg).unwrap();
    let inputs = vec![
        encode_sequence("the braf kinase binds", Some("gene protein"), &v, 12).unwrap(),
        encode_sequence("cell protein the gene braf", None, &v, 12).unwrap(),
    ];
    let policy = MaskingPolicy {
        mask_fraction: 0.5,
        seed: 1,
        ..Default::default()
    };
    let batch = apply_masking(&inputs, &policy, &v);
    let mut params: Params<f64> = cast_params(&store.tensors);
    let mut grads: Params<f64> = zeros_like(&params);
    mlm_objective(&cfg, &params, &batch, None, Some(&mut grads), false).unwrap();
    let errors = relative_errors(&mut params, &grads, |p| {
        mlm_objective(&cfg, p, &batch, None, None, false)
            .unwrap()
            .loss
    });
    let (worst, rel) = errors
        .iter()
        .map(|(n, _, r)| (n.clone(), *r))
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    ensure(
        rel < 1e-4 && errors.len() == store.tensors.len(),
        format!(
            "{} tensors, worst {worst} at {rel:.2e} (limit 1e-4)",
            errors.len()
        ),
    )
}

fn c3_masking() -> Outcome {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend((0..50).map(|i| format!("w{i}")));
    let v = Vocabulary::from_tokens(tokens).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut maskable = 0usize;
    let mut counts = [0usize; 3];
    let mut selected = 0usize;
    for batch_seed in 0..40u64 {
        let batch: Vec<_> = (0..64)
            .map(|_| {
                let n = rng.random_range(20..62);
                let words: Vec<String> = (0..n)
                    .map(|_| format!("w{}", rng.random_range(0..50)))
                    .collect();
                encode_words(&words, &v, 64).unwrap()
            })
            .collect();
        maskable += batch.iter().map(|e| e.real_len() - 2).sum::<usize>();
        let masked = apply_masking(
            &batch,
            &MaskingPolicy {
                seed: batch_seed,
                ..Default::default()
            },
            &v,
        );
        selected += masked.mask_positions.len();
        for a in &masked.actions {
            counts[match a {
                MaskAction::Mask => 0,
                MaskAction::Random => 1,
                MaskAction::Keep => 2,
            }] += 1;
        }
    }
    let fraction = selected as f64 / maskable as f64;
    let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / selected as f64).collect();
    let ok = maskable >= 100_000
        && (fraction - 0.15).abs() <= 0.01
        && (shares[0] - 0.8).abs() <= 0.02
        && (shares[1] - 0.1).abs() <= 0.02
        && (shares[2] - 0.1).abs() <= 0.02;
    ensure(
        ok,
        format!(
            "{maskable} maskable, selected {fraction:.4}, mask/random/keep {:.4}/{:.4}/{:.4}",
            shares[0], shares[1], shares[2]
        ),
    )
}

fn c4_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let types = ["Gene", "Disease", "Chemical"];
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for k in 0..1000 {
        let len = rng.random_range(0..25);
        let tags = random_bioes(&mut rng, len, &types);
        let spans = spans_from_tags(&tags).map_err(|e| e.to_string())?;
        if spans != spans_oracle(&tags) {
            return Err(format!("span mismatch on {tags:?}"));
        }
        if k % 2 == 0 {
            gold.push(spans);
        } else {
            pred.push(spans);
        }
    }
    for n in [0, 1, 10, 500] {
        let got = entity_prf(&gold[..n], &pred[..n]).map_err(|e| e.to_string())?;
        let want = prf_oracle(&gold[..n], &pred[..n]);
        if (got.precision, got.recall) != (want.0, want.1) || (got.f1 - want.2).abs() > 1e-12 {
            return Err(format!(
                "prf mismatch at {n} sentences: {got:?} vs {want:?}"
            ));
        }
    }
    let vocab = letters_vocab();
    let mut checked = 0;
    for _ in 0..500 {
        let inst = random_span_instance(&mut rng, &vocab);
        let want = span_oracle(&inst);
        let got = match extract_span(
            &inst.start,
            &inst.end,
            &inst.encoded,
            &inst.passage,
            inst.max_answer,
            inst.n_best,
        ) {
            Ok(c) => c.iter().map(|c| (c.score, c.start, c.end)).collect(),
            Err(_) => Vec::new(),
        };
        if got != want {
            return Err(format!("extract_span mismatch: {got:?} vs {want:?}"));
        }
        checked += 1;
    }
    Ok(format!(
        "1000 tag sequences, 4 PRF pools, {checked} span instances agree"
    ))
}

fn c5_metric_identities() -> Outcome {
    let norm = |s: &str| normalize_answer(s);
    let ranked = vec![vec!["a", "x"], vec!["x", "b"], vec!["x", "y"]];
    let gold = vec![vec!["a"], vec!["b"], vec!["c"]];
    let hand = qa_metrics(&ranked, &gold, &norm, 5).map_err(|e| e.to_string())?;
    if (hand.strict, hand.lenient, hand.mrr) != (1.0 / 3.0, 2.0 / 3.0, 0.5) {
        return Err(format!("hand example gave {hand:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["a", "b", "c", "d", "e", "f"];
    for _ in 0..10_000 {
        let q = rng.random_range(1..8);
        let ranked: Vec<Vec<&str>> = (0..q)
            .map(|_| {
                (0..rng.random_range(0..8))
                    .map(|_| words[rng.random_range(0..6)])
                    .collect()
            })
            .collect();
        let gold: Vec<Vec<&str>> = (0..q)
            .map(|_| vec![words[rng.random_range(0..6)]])
            .collect();
        let s =
            qa_metrics(&ranked, &gold, &norm, rng.random_range(1..8)).map_err(|e| e.to_string())?;
        if !(s.strict <= s.mrr + 1e-12 && s.mrr <= s.lenient + 1e-12) {
            return Err(format!("ordering broken: {s:?}"));
        }
    }
    Ok("hand example (1/3, 2/3, 0.5); 10000 fuzzed sets ordered".into())
}

fn c6_anonymization() -> Outcome {
    let sentence = "Serine at position 986 of WT1 may be an independent genetic predictor of angiographic CAD.";
    let gene = sentence.find("WT1").unwrap();
    let disease = sentence.find("CAD").unwrap();
    let out = anonymize_entities(
        sentence,
        &[(gene, gene + 3, "GENE"), (disease, disease + 3, "DISEASE")],
        DEFAULT_TAG_FORMAT,
    )
    .map_err(|e| e.to_string())?;
    let want = "Serine at position 986 of @GENE$ may be an independent genetic predictor of angiographic @DISEASE$.";
    ensure(out == want, out)
}

fn random_store(rng: &mut ChaCha8Rng) -> WeightStore {
    let heads = rng.random_range(1..4);
    let cfg = EncoderConfig {
        vocab_size: rng.random_range(6..40),
        hidden: heads * rng.random_range(1..5),
        layers: rng.random_range(1..3),
        heads,
        ff_dim: rng.random_range(1..12),
        max_positions: rng.random_range(3..20),
        layernorm_epsilon: rng.random_range(1e-12..1e-3),
        init_std: rng.random_range(0.01..1.0),
        seed: rng.random(),
    };
    let mut store = WeightStore::init(&cfg).unwrap();
    for t in store.tensors.values_mut() {
        for x in t.data_mut() {
            *x = f32::from_bits(rng.random());
        }
    }
    if rng.random_bool(0.5) {
        store = store.with_vocab_fingerprint(format!("{:016x}", rng.random::<u64>()));
    }
    for i in 0..rng.random_range(0..4) {
        store.metadata.insert(
            format!("k{i}=\\x"),
            format!("line\nnext \\ {}", rng.random::<u32>()),
        );
    }
    if rng.random_bool(0.3) {
        let h = cfg.hidden;
        store.tensors.insert(
            "head.ner.weight".into(),
            Tensor::from_vec(&[h, 3], vec![0.5; h * 3]).unwrap(),
        );
        store
            .tensors
            .insert("head.ner.bias".into(), Tensor::zeros(&[3]));
    }
    store
}

fn find(haystack: &[u8], needle: &[u8]) -> usize {
    haystack
        .windows(needle.len())
        .position(|w| w == needle)
        .unwrap()
}

fn c7_checkpoints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rejected = 0;
    for i in 0..50 {
        let store = random_store(&mut rng);
        let mut bytes = Vec::new();
        save_checkpoint(&store, &mut bytes).map_err(|e| e.to_string())?;
        let back = load_checkpoint(&bytes[..]).map_err(|e| format!("store {i}: {e}"))?;
        if !back.bit_eq(&store) || back.config != store.config || back.metadata != store.metadata {
            return Err(format!("store {i} changed on round trip"));
        }

        let expect = |b: &[u8], category: Category, what: &str| -> Result<(), String> {
            match load_checkpoint(b) {
                Err(e) if e.category() == category => Ok(()),
                Err(e) => Err(format!(
                    "store {i}, {what}: wrong category {:?} ({e})",
                    e.category()
                )),
                Ok(_) => Err(format!("store {i}, {what}: accepted")),
            }
        };
        let mut magic = bytes.clone();
        magic[0] = b'X';
        expect(&magic, Category::Data, "bad magic")?;
        let mut version = bytes.clone();
        version[4] = 9;
        expect(&version, Category::Data, "bad version")?;
        let cut = rng.random_range(0..bytes.len());
        expect(&bytes[..cut], Category::Data, "truncated")?;
        // first dim of the token embedding, one past its name and rank
        let mut shape = bytes.clone();
        let at = find(&shape, b"embeddings.token") + "embeddings.token".len() + 4;
        shape[at] = shape[at].wrapping_add(1);
        match load_checkpoint(&shape[..]) {
            Err(minibert::Error::Corruption(_)) => {}
            other => return Err(format!("store {i}, shape edit: {other:?}")),
        }
        if !matches!(load_checkpoint(&magic[..]), Err(minibert::Error::Format(_))) {
            return Err(format!("store {i}: bad magic is not a format error"));
        }
        if !matches!(
            load_checkpoint(&bytes[..cut]),
            Err(minibert::Error::Corruption(_)) | Err(minibert::Error::Format(_))
        ) {
            return Err(format!("store {i}: truncation at {cut} misreported"));
        }
        rejected += 4;
    }
    Ok(format!(
        "50 stores bit-identical, {rejected} corrupted streams rejected"
    ))
}

// Reference run (5 seeds, medians): general-only 0.678, first domain
// checkpoint 0.667, final domain checkpoint 0.758.
const DOMAIN_MARGIN_BAND: (f64, f64) = (0.02, 0.18);
const SWEEP_GAIN_BAND: (f64, f64) = (0.0, 0.20);
const SEEDS: u64 = 5;

struct DomainRun {
    general: Vec<f64>,
    first: Vec<f64>,
    last: Vec<f64>,
    elapsed: Duration,
}

fn domain_runs() -> DomainRun {
    let t0 = Instant::now();
    let (mut general, mut first, mut last) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let f = generate_fixtures(&FixtureRecipe::default(), seed).unwrap();
        let v = f.vocabulary().unwrap();
        let mut cfg = PretrainConfig {
            steps: 600,
            batch_size: 16,
            max_len: 32,
            learning_rate: 3e-3,
            seed,
            encoder: EncoderConfig {
                hidden: 32,
                layers: 2,
                heads: 2,
                ff_dim: 64,
                max_positions: 32,
                seed,
                ..Default::default()
            },
            ..Default::default()
        };
        let base = train_mlm(&f.general_corpus, &cfg, &v, None).unwrap();
        cfg.steps = 1200;
        cfg.checkpoint_every = 300;
        let domain = train_mlm(&f.domain_corpus, &cfg, &v, Some(&base.weights)).unwrap();
        let ft = FinetuneConfig {
            batch_size: 16,
            learning_rate: 1e-3,
            epochs: 20,
            seed,
            max_len: 32,
            allow_off_grid: true,
            ..Default::default()
        };
        let score = |init: &WeightStore| {
            let task = TaskData::Ner {
                train: &f.ner.train,
                dev: &f.ner.dev,
                scheme: None,
            };
            let out = finetune(task, init, &v, &ft).unwrap();
            evaluate_ner(&out.weights, &v, &f.ner.test, 32).unwrap().f1
        };
        general.push(score(&base.weights));
        first.push(score(&domain.checkpoints[0].1));
        last.push(score(&domain.weights));
    }
    DomainRun {
        general,
        first,
        last,
        elapsed: t0.elapsed(),
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s[s.len() / 2]
}

fn fmt(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c8_domain(run: &DomainRun) -> Outcome {
    let margin = median(&run.last) - median(&run.general);
    ensure(
        margin > 0.0 && margin >= DOMAIN_MARGIN_BAND.0 && margin <= DOMAIN_MARGIN_BAND.1,
        format!(
            "median F1 {:.3} vs {:.3}, margin {margin:+.3} (band {DOMAIN_MARGIN_BAND:?}); domain [{}] general [{}]",
            median(&run.last),
            median(&run.general),
            fmt(&run.last),
            fmt(&run.general)
        ),
    )
}

fn c9_sweep(run: &DomainRun) -> Outcome {
    let gain = median(&run.last) - median(&run.first);
    ensure(
        gain >= SWEEP_GAIN_BAND.0 && gain <= SWEEP_GAIN_BAND.1,
        format!(
            "median F1 final {:.3} vs first checkpoint {:.3}, gain {gain:+.3} (band {SWEEP_GAIN_BAND:?}); first [{}]",
            median(&run.last),
            median(&run.first),
            fmt(&run.first)
        ),
    )
}

fn c10_unanswerable() -> Outcome {
    let mut recipe = FixtureRecipe::default();
    recipe.sizes.bioasq_questions = 200;
    recipe.sizes.bioasq_unanswerable = 0.3;
    let f = generate_fixtures(&recipe, 10).map_err(|e| e.to_string())?;
    let out = bioasq_to_extractive(
        &f.bioasq_questions,
        &f.bioasq_passages,
        &Normalizer::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        out.dropped == f.bioasq_unanswerable && f.bioasq_unanswerable == 60,
        format!(
            "constructed {}, dropped {}, kept {}",
            f.bioasq_unanswerable,
            out.dropped,
            out.examples.len()
        ),
    )
}

fn report(id: usize, name: &str, limit: f64, run: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let outcome = run();
    line(id, name, outcome, t0.elapsed(), limit)
}

fn line(id: usize, name: &str, outcome: Outcome, elapsed: Duration, limit: f64) -> bool {
    let outcome = outcome.and_then(|d| within(elapsed, limit).map(|_| d));
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!(
        "[{tag}] criterion {id:>2} {name}: {detail} ({:.2}s)",
        elapsed.as_secs_f64()
    );
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "tokenizer fixture", 1.0, c1_tokenizer);
    ok &= report(2, "gradient correctness", 60.0, c2_gradients);
    ok &= report(3, "masking statistics", 10.0, c3_masking);
    ok &= report(4, "metric oracles", 30.0, c4_oracles);
    ok &= report(5, "metric identities", 5.0, c5_metric_identities);
    ok &= report(6, "anonymization fixture", 5.0, c6_anonymization);
    ok &= report(7, "checkpoint round trip", 10.0, c7_checkpoints);
    let run = domain_runs();
    // both criteria share one set of runs, so each is charged the full time
    ok &= line(8, "domain adaptation", c8_domain(&run), run.elapsed, 600.0);
    ok &= line(
        9,
        "checkpoint sweep trend",
        c9_sweep(&run),
        run.elapsed,
        600.0,
    );
    ok &= report(10, "unanswerable filtering", 5.0, c10_unanswerable);
    if !ok {
        std::process::exit(1);
    }
}
