use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::{encoder_layout, zeros_like, Dropout, EncoderConfig, Params, WeightStore};
use crate::error::{Error, Result};
use crate::optim::{AdamW, AdamWConfig, LinearSchedule};
use crate::rng::{derive_seed, substream, StreamRng};
use crate::tokenizer::{EncodedInput, Vocabulary};

use super::corpus::Corpus;
use super::loss::{mlm_loss, mlm_objective};
use super::masking::{apply_masking, MaskingPolicy};

/// Full-scale reference values; desk-scale runs use far smaller settings.
pub const REFERENCE_BATCH_SIZE: usize = 192;
pub const REFERENCE_MAX_LEN: usize = 512;
pub const REFERENCE_STEPS_PUBMED: usize = 200_000;
pub const REFERENCE_STEPS_PMC: usize = 270_000;
pub const REFERENCE_STEPS_PUBMED_PMC: usize = 470_000;
pub const REFERENCE_STEPS_LONG: usize = 1_000_000;
pub const REFERENCE_PUBMED_WORDS: u64 = 4_500_000_000;
pub const REFERENCE_PMC_WORDS: u64 = 13_500_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub learning_rate: f32,
    pub warmup_fraction: f32,
    pub optimizer: AdamWConfig,
    pub dropout: f32,
    pub seed: u64,
    /// Save an intermediate checkpoint every this many steps; `0` disables.
    pub checkpoint_every: usize,
    /// Masking rates. Its `seed` is ignored: every step draws a fresh mask
    /// seed from `seed` and the step number.
    pub masking: MaskingPolicy,
    /// Architecture for a from-scratch run, and the shape contract an init
    /// checkpoint must satisfy. `vocab_size` is taken from the vocabulary.
    pub encoder: EncoderConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 300,
            batch_size: 16,
            max_len: 32,
            learning_rate: 1e-4,
            warmup_fraction: 0.01,
            optimizer: AdamWConfig::default(),
            dropout: 0.1,
            seed: 0,
            checkpoint_every: 0,
            masking: MaskingPolicy::default(),
            encoder: EncoderConfig::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("pretrain.steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("pretrain.batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("pretrain.warmup_fraction must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("pretrain.learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("pretrain.dropout must lie in [0, 1)"));
        }
        if self.max_len < 3 {
            return Err(Error::config("pretrain.max_len must be at least 3"));
        }
        self.masking.validate()
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f32,
    pub accuracy: f32,
    pub learning_rate: f32,
    pub grad_norm: f32,
    /// Seconds since the trainer was created.
    pub wall_clock: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub weights: WeightStore,
    pub log: Vec<StepRecord>,
    /// `(step, weights)` for each intermediate checkpoint.
    pub checkpoints: Vec<(usize, WeightStore)>,
}

/// Step-by-step masked-LM trainer.
pub struct MlmTrainer<'v> {
    config: PretrainConfig,
    vocab: &'v Vocabulary,
    instances: Vec<EncodedInput>,
    base: WeightStore,
    params: Params<f32>,
    optimizer: AdamW,
    schedule: LinearSchedule,
    order: Vec<usize>,
    cursor: usize,
    order_rng: StreamRng,
    dropout_rng: StreamRng,
    step: usize,
    started: Instant,
}

impl<'v> MlmTrainer<'v> {
    /// Prepare a run. With `init` the run continues from those weights,
    /// which must match `config.encoder` tensor for tensor and carry the
    /// fingerprint of `vocab`.
    pub fn new(
        corpus: &Corpus,
        config: PretrainConfig,
        vocab: &'v Vocabulary,
        init: Option<&WeightStore>,
    ) -> Result<Self> {
        config.validate()?;
        let mut encoder = config.encoder.clone();
        encoder.vocab_size = vocab.len();
        encoder.validate()?;
        if config.max_len > encoder.max_positions {
            return Err(Error::config(format!(
                "max_len {} exceeds the encoder's {} positions",
                config.max_len, encoder.max_positions
            )));
        }
        let base = match init {
            Some(init) => {
                check_transfer(init, &encoder, vocab)?;
                let mut base = init.clone();
                base.tensors = init.encoder_tensors();
                base.metadata.retain(|k, _| !k.starts_with("head."));
                base
            }
            None => WeightStore::init(&encoder)?.with_vocab_fingerprint(vocab.fingerprint()),
        };
        let instances = corpus.pack(vocab, config.max_len)?;
        let params = base.tensors.clone();
        let optimizer = AdamW::new(config.optimizer.clone(), &params);
        let schedule =
            LinearSchedule::new(config.learning_rate, config.steps, config.warmup_fraction);
        let order_rng = substream(config.seed, "pretrain.order");
        let dropout_rng = substream(config.seed, "pretrain.dropout");
        Ok(MlmTrainer {
            order: Vec::new(),
            cursor: 0,
            config,
            vocab,
            instances,
            base,
            params,
            optimizer,
            schedule,
            order_rng,
            dropout_rng,
            step: 0,
            started: Instant::now(),
        })
    }

    pub fn instances(&self) -> &[EncodedInput] {
        &self.instances
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Snapshot of the current weights.
    pub fn weights(&self) -> WeightStore {
        let mut store = self.base.clone();
        store.tensors = self.params.clone();
        if self.step > 0 {
            store
                .metadata
                .insert("pretrain.steps".into(), self.step.to_string());
        }
        store
    }

    fn next_batch(&mut self) -> Vec<EncodedInput> {
        let mut batch = Vec::with_capacity(self.config.batch_size);
        while batch.len() < self.config.batch_size {
            if self.cursor == self.order.len() {
                self.order = (0..self.instances.len()).collect();
                self.order.shuffle(&mut self.order_rng);
                self.cursor = 0;
            }
            batch.push(self.instances[self.order[self.cursor]].clone());
            self.cursor += 1;
        }
        batch
    }

    /// Run one optimizer step. Masks are re-drawn for every batch.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.step >= self.config.steps {
            return Err(Error::config(format!(
                "all {} steps already taken",
                self.config.steps
            )));
        }
        self.step += 1;
        let batch = self.next_batch();
        let seed = derive_seed(self.config.seed, &format!("pretrain.mask.{}", self.step));
        let masked = apply_masking(&batch, &self.config.masking.with_seed(seed), self.vocab);
        let mut grads: Params<f32> = zeros_like(&self.params);
        let mut dropout = Dropout {
            rate: self.config.dropout,
            rng: &mut self.dropout_rng,
        };
        let stats = mlm_objective(
            &self.base.config,
            &self.params,
            &masked,
            Some(&mut dropout),
            Some(&mut grads),
            false,
        )?;
        if !stats.loss.is_finite() {
            return Err(Error::Consistency(format!(
                "non-finite loss at step {}",
                self.step
            )));
        }
        let lr = self.schedule.rate(self.step);
        let grad_norm = self.optimizer.update(&mut self.params, &grads, lr);
        Ok(StepRecord {
            step: self.step,
            loss: stats.loss,
            accuracy: stats.accuracy(),
            learning_rate: lr,
            grad_norm,
            wall_clock: self.started.elapsed().as_secs_f64(),
        })
    }

    /// Run the remaining steps. `on_record` sees every step record and
    /// `on_checkpoint` every intermediate snapshot as it is produced.
    pub fn run(
        mut self,
        mut on_record: impl FnMut(&StepRecord) -> Result<()>,
        mut on_checkpoint: impl FnMut(usize, &WeightStore) -> Result<()>,
    ) -> Result<PretrainOutcome> {
        let mut log = Vec::with_capacity(self.config.steps);
        let mut checkpoints = Vec::new();
        while self.step < self.config.steps {
            let record = self.step()?;
            on_record(&record)?;
            log.push(record);
            let every = self.config.checkpoint_every;
            if every > 0 && self.step % every == 0 && self.step < self.config.steps {
                let snapshot = self.weights();
                on_checkpoint(self.step, &snapshot)?;
                checkpoints.push((self.step, snapshot));
            }
        }
        Ok(PretrainOutcome {
            weights: self.weights(),
            log,
            checkpoints,
        })
    }
}

/// Check that `init` can seed a run with `encoder` over `vocab`.
pub fn check_transfer(
    init: &WeightStore,
    encoder: &EncoderConfig,
    vocab: &Vocabulary,
) -> Result<()> {
    let mismatched = init.shape_mismatches(encoder);
    if !mismatched.is_empty() {
        return Err(Error::Transfer(format!(
            "init checkpoint does not fit the configured encoder: {}",
            mismatched.join("; ")
        )));
    }
    if init.config.layers != encoder.layers || init.config.heads != encoder.heads {
        return Err(Error::Transfer(format!(
            "init checkpoint has {} layers / {} heads, run expects {} / {}",
            init.config.layers, init.config.heads, encoder.layers, encoder.heads
        )));
    }
    match &init.vocab_fingerprint {
        Some(f) if *f == vocab.fingerprint() => Ok(()),
        Some(f) => Err(Error::Transfer(format!(
            "vocabulary fingerprint {} differs from the checkpoint's {f}",
            vocab.fingerprint()
        ))),
        None => Err(Error::Transfer(
            "init checkpoint carries no vocabulary fingerprint".into(),
        )),
    }
}

/// Train for `config.steps` steps and return the final weights and log.
pub fn train_mlm(
    corpus: &Corpus,
    config: &PretrainConfig,
    vocab: &Vocabulary,
    init: Option<&WeightStore>,
) -> Result<PretrainOutcome> {
    MlmTrainer::new(corpus, config.clone(), vocab, init)?.run(|_| Ok(()), |_, _| Ok(()))
}

/// Masked-token loss and accuracy on held-out inputs with a fixed mask draw.
pub fn evaluate_mlm(
    inputs: &[EncodedInput],
    weights: &WeightStore,
    vocab: &Vocabulary,
    policy: &MaskingPolicy,
) -> Result<(f32, f32)> {
    let masked = apply_masking(inputs, policy, vocab);
    let out = mlm_loss(&masked, weights)?;
    Ok((out.loss, out.accuracy))
}

/// Layout the config would produce, for dry runs.
pub fn planned_layout(config: &PretrainConfig, vocab: &Vocabulary) -> Vec<(String, Vec<usize>)> {
    let mut encoder = config.encoder.clone();
    encoder.vocab_size = vocab.len();
    encoder_layout(&encoder)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let mut t: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        t.extend((0..30).map(|i| format!("w{i}")));
        Vocabulary::from_tokens(t).unwrap()
    }

    fn corpus() -> Corpus {
        let mut text = String::new();
        for d in 0..12 {
            for s in 0..4 {
                let a = (d * 7 + s * 3) % 10;
                text.push_str(&format!("w{a} w{} w{} .\n", a + 10, a + 20));
            }
            text.push('\n');
        }
        Corpus::parse(&text)
    }

    fn config() -> PretrainConfig {
        PretrainConfig {
            steps: 6,
            batch_size: 4,
            max_len: 16,
            learning_rate: 1e-3,
            checkpoint_every: 2,
            encoder: EncoderConfig {
                hidden: 8,
                layers: 1,
                heads: 2,
                ff_dim: 16,
                max_positions: 16,
                ..EncoderConfig::default()
            },
            ..PretrainConfig::default()
        }
    }

    #[test]
    fn runs_exact_steps_and_checkpoints() {
        let v = vocab();
        let out = train_mlm(&corpus(), &config(), &v, None).unwrap();
        assert_eq!(out.log.len(), 6);
        assert_eq!(
            out.log.iter().map(|r| r.step).collect::<Vec<_>>(),
            [1, 2, 3, 4, 5, 6]
        );
        assert_eq!(
            out.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(),
            [2, 4]
        );
        assert_eq!(
            out.weights.vocab_fingerprint.as_deref(),
            Some(v.fingerprint().as_str())
        );
        out.weights.validate().unwrap();
    }

    #[test]
    fn deterministic_under_seed() {
        let v = vocab();
        let a = train_mlm(&corpus(), &config(), &v, None).unwrap();
        let b = train_mlm(&corpus(), &config(), &v, None).unwrap();
        assert!(a.weights.bit_eq(&b.weights));
        let mut other = config();
        other.seed = 1;
        let c = train_mlm(&corpus(), &other, &v, None).unwrap();
        assert!(!a.weights.bit_eq(&c.weights));
    }

    #[test]
    fn continued_run_starts_from_init() {
        let v = vocab();
        let init = train_mlm(&corpus(), &config(), &v, None).unwrap().weights;
        let trainer = MlmTrainer::new(&corpus(), config(), &v, Some(&init)).unwrap();
        assert!(trainer.weights().bit_eq(&init));
        let out = trainer.run(|_| Ok(()), |_, _| Ok(())).unwrap();
        assert!(!out.weights.bit_eq(&init));
    }

    #[test]
    fn transfer_checks() {
        let v = vocab();
        let init = train_mlm(&corpus(), &config(), &v, None).unwrap().weights;
        let mut wider = config();
        wider.encoder.hidden = 12;
        wider.encoder.heads = 3;
        let err = MlmTrainer::new(&corpus(), wider, &v, Some(&init))
            .err()
            .unwrap();
        assert!(
            matches!(err, Error::Transfer(ref m) if m.contains("embeddings.token")),
            "{err}"
        );

        let other_vocab = {
            let mut t: Vec<String> = v.entries().iter().map(|s| s.to_string()).collect();
            t.push("extra".into());
            Vocabulary::from_tokens(t).unwrap()
        };
        let err = MlmTrainer::new(&corpus(), config(), &other_vocab, Some(&init))
            .err()
            .unwrap();
        assert!(matches!(err, Error::Transfer(_)));
    }

    #[test]
    fn empty_corpus_and_bad_config() {
        let v = vocab();
        assert!(matches!(
            train_mlm(&Corpus::default(), &config(), &v, None),
            Err(Error::Input(_))
        ));
        let mut c = config();
        c.steps = 0;
        assert!(matches!(
            train_mlm(&corpus(), &c, &v, None),
            Err(Error::Config(_))
        ));
        c.steps = 1;
        c.warmup_fraction = 1.0;
        assert!(matches!(
            train_mlm(&corpus(), &c, &v, None),
            Err(Error::Config(_))
        ));
    }
}
