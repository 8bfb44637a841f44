//! Dataset formats (CoNLL, relation TSV, SQuAD and BioASQ JSON), k-fold
//! splitting and synthetic fixtures.

mod conll;
mod fixtures;
mod kfold;
mod qa;
mod relation;

pub use crate::tags::{bio_to_bioes, bioes_to_bio, Scheme};
pub use conll::{parse_conll, write_conll, ConllParse, LabeledSentence};
pub use fixtures::{generate_fixtures, FixtureRecipe, Fixtures, PoolSizes, Pools, Sizes, Split};
pub use kfold::kfold_split;
pub use qa::{
    bioasq_to_extractive, filter_unanswerable, find_normalized, parse_bioasq, parse_squad,
    write_squad, Answer, BioasqConversion, BioasqQuestion, QAExample,
};
pub use relation::{parse_re_tsv, write_re_tsv, RelationExample, RelationLabelSet};
