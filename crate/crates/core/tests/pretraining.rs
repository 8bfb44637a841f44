//! Masked-LM training on a generated corpus.

use minibert::data::{generate_fixtures, FixtureRecipe};
use minibert::encoder::EncoderConfig;
use minibert::pretrain::{evaluate_mlm, train_mlm, Corpus, MaskingPolicy, PretrainConfig};
use minibert::tokenizer::Vocabulary;

// Reference run (seed 0): step 1 loss 5.44, step 300 loss 2.37 (ratio 0.435).
const LOSS_RATIO_BAND: (f32, f32) = (0.30, 0.50);

fn setup() -> (Corpus, Corpus, Vocabulary) {
    let mut recipe = FixtureRecipe::default();
    recipe.generate.general = 10;
    recipe.generate.genes = 8;
    recipe.generate.domain = 8;
    recipe.generate.diseases = 8;
    recipe.sizes.general_documents = 165;
    let f = generate_fixtures(&recipe, 0).unwrap();
    let mut train = f.general_corpus.clone();
    let held = train.documents.split_off(150);
    (train, Corpus { documents: held }, f.vocabulary().unwrap())
}

fn config() -> PretrainConfig {
    PretrainConfig {
        steps: 300,
        batch_size: 32,
        max_len: 32,
        learning_rate: 1e-2,
        seed: 0,
        encoder: EncoderConfig {
            hidden: 64,
            layers: 2,
            heads: 2,
            ff_dim: 128,
            max_positions: 32,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn loss_halves_and_beats_chance_on_held_out_text() {
    let (train, held, vocab) = setup();
    let bytes = train.to_text().len();
    assert!(
        (45_000..=55_000).contains(&bytes),
        "corpus is {bytes} bytes"
    );

    let out = train_mlm(&train, &config(), &vocab, None).unwrap();
    assert_eq!(out.log.len(), 300);
    let first = out.log[0].loss;
    let last = out.log[299].loss;
    let ratio = last / first;
    println!("step 1 loss {first:.3}, step 300 loss {last:.3}, ratio {ratio:.3}");
    assert!(
        ratio >= LOSS_RATIO_BAND.0 && ratio <= LOSS_RATIO_BAND.1,
        "loss ratio {ratio} outside {LOSS_RATIO_BAND:?}"
    );

    let inputs = held.pack(&vocab, 32).unwrap();
    let policy = MaskingPolicy {
        seed: 99,
        ..Default::default()
    };
    let (_, accuracy) = evaluate_mlm(&inputs, &out.weights, &vocab, &policy).unwrap();
    let chance = 1.0 / vocab.len() as f32;
    println!("held-out masked accuracy {accuracy:.3} (chance {chance:.4})");
    assert!(accuracy > chance);
}

#[test]
fn continued_run_is_reproducible() {
    let (train, held, vocab) = setup();
    let mut cfg = config();
    cfg.steps = 20;
    let general = train_mlm(&train, &cfg, &vocab, None).unwrap();
    cfg.checkpoint_every = 5;
    let a = train_mlm(&held, &cfg, &vocab, Some(&general.weights)).unwrap();
    let b = train_mlm(&held, &cfg, &vocab, Some(&general.weights)).unwrap();
    assert!(a.weights.bit_eq(&b.weights));
    let steps: Vec<usize> = a.checkpoints.iter().map(|c| c.0).collect();
    assert_eq!(steps, vec![5, 10, 15]);
    assert_eq!(
        a.weights.vocab_fingerprint,
        general.weights.vocab_fingerprint
    );
}
