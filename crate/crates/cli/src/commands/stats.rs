use minibert::pretrain::Corpus;
use minibert::tokenizer::{
    basic_tokenize, wordpiece_pieces, Vocabulary, DEFAULT_MAX_WORD_CHARS, UNK,
};
use minibert::Result;
use serde::Serialize;

use super::{print_plan, write};
use crate::config::require;
use crate::Ctx;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub sentences: usize,
    pub words: usize,
    pub subtokens: usize,
    /// Subtokens per word.
    pub fertility: f64,
    /// Fraction of words split into more than one piece.
    pub split_rate: f64,
    /// Fraction of words mapped to the unknown token.
    pub unk_rate: f64,
}

pub fn corpus_stats(corpus: &Corpus, vocab: &Vocabulary) -> CorpusStats {
    let mut s = CorpusStats {
        documents: corpus.documents.len(),
        ..Default::default()
    };
    let (mut split, mut unk) = (0usize, 0usize);
    for sentence in corpus.documents.iter().flatten() {
        s.sentences += 1;
        for word in basic_tokenize(sentence) {
            let pieces = wordpiece_pieces(&word.text, vocab, DEFAULT_MAX_WORD_CHARS);
            s.words += 1;
            s.subtokens += pieces.len();
            split += usize::from(pieces.len() > 1);
            unk += usize::from(pieces.len() == 1 && pieces[0].token == UNK);
        }
    }
    if s.words > 0 {
        let w = s.words as f64;
        s.fertility = s.subtokens as f64 / w;
        s.split_rate = split as f64 / w;
        s.unk_rate = unk as f64 / w;
    }
    s
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let corpus_path = require(&cfg.paths.corpus, "corpus")?;
    let vocab_path = require(&cfg.paths.vocab, "vocab")?;
    let vocab = Vocabulary::load_path(&vocab_path)?;
    let corpus = Corpus::load_path(&corpus_path)?;
    if ctx.dry_run {
        print_plan(
            "corpus-stats",
            &[
                format!("corpus: {}", corpus_path.display()),
                format!("vocab: {} ({} tokens)", vocab_path.display(), vocab.len()),
            ],
            &cfg.to_toml()?,
        );
        return Ok(());
    }
    let s = corpus_stats(&corpus, &vocab);
    println!("{:<12} {:>12}", "documents", s.documents);
    println!("{:<12} {:>12}", "sentences", s.sentences);
    println!("{:<12} {:>12}", "words", s.words);
    println!("{:<12} {:>12}", "subtokens", s.subtokens);
    println!("{:<12} {:>12.4}", "fertility", s.fertility);
    println!("{:<12} {:>12.4}", "split rate", s.split_rate);
    println!("{:<12} {:>12.4}", "unk rate", s.unk_rate);
    write(
        &ctx.out,
        "corpus_stats.json",
        serde_json::to_string_pretty(&s)?,
    )?;
    Ok(())
}
