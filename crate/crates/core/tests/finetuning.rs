//! End-to-end fine-tuning on generated task data.

use minibert::data::{generate_fixtures, FixtureRecipe, Fixtures, RelationLabelSet};
use minibert::encoder::{init_tensor, EncoderConfig, Tensor, WeightStore};
use minibert::heads::{
    evaluate_ner, finetune, head_names, predict_ner, FinetuneConfig, TagScheme, TaskData,
};
use minibert::rng::derive_seed;
use minibert::tokenizer::Vocabulary;

fn fixtures() -> (Fixtures, Vocabulary) {
    let mut recipe = FixtureRecipe::default();
    recipe.sizes.general_documents = 0;
    recipe.sizes.domain_documents = 0;
    let f = generate_fixtures(&recipe, 1).unwrap();
    let v = f.vocabulary().unwrap();
    (f, v)
}

fn fresh(vocab: &Vocabulary) -> WeightStore {
    let cfg = EncoderConfig {
        vocab_size: vocab.len(),
        hidden: 32,
        layers: 2,
        heads: 2,
        ff_dim: 64,
        max_positions: 64,
        seed: 3,
        ..Default::default()
    };
    WeightStore::init(&cfg)
        .unwrap()
        .with_vocab_fingerprint(vocab.fingerprint())
}

fn config(epochs: usize) -> FinetuneConfig {
    FinetuneConfig {
        batch_size: 10,
        learning_rate: 1e-3,
        epochs,
        seed: 7,
        max_len: 64,
        allow_off_grid: true,
        ..Default::default()
    }
}

// Reference run: train F1 1.000 after 25 epochs.
#[test]
fn ner_memorizes_a_toy_set() {
    let (f, v) = fixtures();
    let train = &f.ner.train[..40];
    let out = finetune(
        TaskData::Ner {
            train,
            dev: train,
            scheme: None,
        },
        &fresh(&v),
        &v,
        &FinetuneConfig {
            learning_rate: 1e-2,
            ..config(25)
        },
    )
    .unwrap();
    let on_train = evaluate_ner(&out.weights, &v, train, 64).unwrap();
    println!("train F1 {:.3}", on_train.f1);
    assert!(on_train.f1 >= 0.95);
    assert_eq!(out.log.epochs.len(), 25);
}

#[test]
fn same_seed_gives_the_same_report() {
    let (f, v) = fixtures();
    let labels = RelationLabelSet::binary().with_placeholders(["@GENE$", "@DISEASE$"]);
    let run = || {
        finetune(
            TaskData::Re {
                train: &f.re.train[..30],
                dev: &f.re.dev[..10],
                labels: &labels,
            },
            &fresh(&v),
            &v,
            &config(2),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert!(a.weights.bit_eq(&b.weights));
}

#[test]
fn zero_epochs_leave_the_encoder_untouched() {
    let (f, v) = fixtures();
    let init = fresh(&v);
    let cfg = config(0);
    let out = finetune(
        TaskData::Ner {
            train: &f.ner.train[..10],
            dev: &f.ner.dev[..10],
            scheme: None,
        },
        &init,
        &v,
        &cfg,
    )
    .unwrap();

    // the same store built by hand: init encoder plus a freshly drawn head
    let all: Vec<_> = f.ner.train[..10]
        .iter()
        .chain(&f.ner.dev[..10])
        .cloned()
        .collect();
    let scheme = TagScheme::from_sentences(&all).unwrap();
    let mut expected = init.clone();
    let (w, b) = head_names("ner");
    let seed = derive_seed(cfg.seed, "finetune.init");
    expected.tensors.insert(
        w.clone(),
        init_tensor(&w, &[32, scheme.len()], seed, cfg.head_init_std as f64),
    );
    expected.tensors.insert(b, Tensor::zeros(&[scheme.len()]));
    expected.metadata.insert(
        "head.ner.tags".into(),
        serde_json::to_string(scheme.tags()).unwrap(),
    );

    for (name, t) in &init.tensors {
        assert_eq!(out.weights.tensors[name].data(), t.data(), "{name} changed");
    }
    let got = predict_ner(&out.weights, &v, &f.ner.test, 64).unwrap();
    let want = predict_ner(&expected, &v, &f.ner.test, 64).unwrap();
    assert_eq!(got, want);
}

#[test]
fn qa_chain_logs_both_phases() {
    let (f, v) = fixtures();
    let out = finetune(
        TaskData::Qa {
            intermediate: Some(&f.qa_intermediate[..12]),
            train: &f.qa.train[..12],
            dev: &f.qa.dev[..6],
        },
        &fresh(&v),
        &v,
        &config(2),
    )
    .unwrap();
    let names: Vec<&str> = out.log.phases.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["intermediate", "target"]);
    let (a, b) = (&out.log.phases[0], &out.log.phases[1]);
    assert_eq!(a.first_step, 1);
    assert_eq!(b.first_step, a.last_step + 1);
    assert!(out.report.datasets[0].metrics.primary() >= 0.0);
}
