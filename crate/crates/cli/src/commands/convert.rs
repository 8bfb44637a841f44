use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::ValueEnum;
use minibert::data::{
    bioasq_to_extractive, filter_unanswerable, parse_bioasq, parse_conll, parse_squad, write_conll,
    write_squad, Scheme,
};
use minibert::eval::Normalizer;
use minibert::{Error, Result};

use super::print_plan;
use crate::config::exists;
use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    ConllBio,
    ConllBioes,
    Bioasq,
    Squad,
}

impl Format {
    fn scheme(self) -> Option<Scheme> {
        match self {
            Format::ConllBio => Some(Scheme::Bio),
            Format::ConllBioes => Some(Scheme::Bioes),
            _ => None,
        }
    }
}

pub struct Request {
    pub from: Format,
    pub to: Format,
    pub input: PathBuf,
    pub output: PathBuf,
    pub passages: Option<PathBuf>,
    pub lenient: bool,
}

fn read(p: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(p)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))
}

pub fn run(ctx: &Ctx, req: Request) -> Result<()> {
    exists(&req.input, "--input")?;
    let supported = matches!(
        (req.from, req.to),
        (
            Format::ConllBio | Format::ConllBioes,
            Format::ConllBio | Format::ConllBioes
        ) | (Format::Bioasq, Format::Squad)
            | (Format::Squad, Format::Squad)
    );
    if !supported {
        return Err(Error::Config(format!(
            "no conversion from {:?} to {:?}",
            req.from, req.to
        )));
    }
    if req.from == Format::Bioasq {
        match &req.passages {
            Some(p) => exists(p, "--passages")?,
            None => return Err(Error::Config("bioasq input needs --passages".into())),
        }
    }
    if ctx.dry_run {
        print_plan(
            "convert",
            &[format!(
                "{} ({:?}) -> {} ({:?})",
                req.input.display(),
                req.from,
                req.output.display(),
                req.to
            )],
            &ctx.cfg.to_toml()?,
        );
        return Ok(());
    }

    let normalizer = Normalizer::default();
    let (bytes, note) = match (req.from.scheme(), req.to.scheme()) {
        (Some(from), Some(to)) => {
            let file = File::open(&req.input)?;
            let parsed = parse_conll(BufReader::new(file), from, req.lenient)?;
            if parsed.repaired > 0 {
                log::warn!(
                    "repaired {} sentences with invalid tag sequences",
                    parsed.repaired
                );
            }
            let mut buf = Vec::new();
            write_conll(&parsed.sentences, &mut buf, to)?;
            let note = format!(
                "{} sentences, {} repaired",
                parsed.sentences.len(),
                parsed.repaired
            );
            (buf, note)
        }
        _ if req.from == Format::Bioasq => {
            let questions = parse_bioasq(&read(&req.input)?)?;
            let passages: BTreeMap<String, String> =
                serde_json::from_str(&read(req.passages.as_ref().unwrap())?)
                    .map_err(|e| Error::Format(format!("passages: {e}")))?;
            let conv = bioasq_to_extractive(&questions, &passages, &normalizer)?;
            let note = format!(
                "{} examples from {} questions; dropped {} passages without an answer, skipped {} non-factoid questions",
                conv.examples.len(),
                questions.len(),
                conv.dropped,
                conv.skipped_non_factoid
            );
            (write_squad(&conv.examples, "bioasq")?.into_bytes(), note)
        }
        _ => {
            let examples = parse_squad(&read(&req.input)?)?;
            let (kept, dropped) = filter_unanswerable(examples, &normalizer);
            let note = format!(
                "{} examples kept, {dropped} without an answer dropped",
                kept.len()
            );
            (write_squad(&kept, "converted")?.into_bytes(), note)
        }
    };
    if let Some(parent) = req.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&req.output, bytes)?;
    println!("{note}");
    log::info!("wrote {}", req.output.display());
    Ok(())
}
