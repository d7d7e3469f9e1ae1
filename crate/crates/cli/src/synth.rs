//! Writes a self-contained planted fixture: profession and nationality
//! relations over shared heads, truth files, word vectors, a demonym table,
//! a sentence corpus and a `run.conf` for `pipeline`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relscore::ingest::{generate_planted_relation, LabeledTriples, TripleSet, Vocabulary};

use crate::commands::write_file;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub entities: usize,
    pub tails: usize,
    pub clusters: usize,
    pub seed: u64,
    pub vector_dim: usize,
    /// Training epochs written into `run.conf`.
    pub epochs: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            entities: 100,
            tails: 10,
            clusters: 5,
            seed: 42,
            vector_dim: 8,
            epochs: 50,
        }
    }
}

pub const PROFESSION_PREFIX: &str = "job_";
pub const COUNTRY_PREFIX: &str = "country_";

pub fn demonym_for(country_index: usize) -> String {
    format!("countrian{country_index:02}")
}

fn write_labels(path: &Path, labels: &LabeledTriples, vocab: &Vocabulary) -> Result<()> {
    write_file(path, |w| {
        for l in labels.iter() {
            let h = vocab.entity_name(l.triple.head).expect("generated id");
            let t = vocab.entity_name(l.triple.tail).expect("generated id");
            writeln!(w, "{h}\t{t}\t{}", l.score)?;
        }
        Ok(())
    })
}

fn write_kb(path: &Path, set: &TripleSet, vocab: &Vocabulary, relation: &str) -> Result<()> {
    let rel = vocab.relation_id(relation).expect("generated relation");
    write_file(path, |w| Ok(set.write_kb(vocab, rel, w)?))
}

/// Generates the fixture into `dir` and returns the `run.conf` path.
pub fn write_fixture(dir: &Path, opts: &SynthOptions) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut vocab = Vocabulary::new();
    let (prof, prof_labels) = generate_planted_relation(
        &mut vocab,
        "profession",
        PROFESSION_PREFIX,
        opts.entities,
        opts.tails,
        opts.clusters,
        opts.seed,
    )?;
    let (nat, nat_labels) = generate_planted_relation(
        &mut vocab,
        "nationality",
        COUNTRY_PREFIX,
        opts.entities,
        opts.tails,
        opts.clusters,
        opts.seed.wrapping_add(1),
    )?;
    write_kb(&dir.join("profession.kb"), &prof, &vocab, "profession")?;
    write_kb(&dir.join("nationality.kb"), &nat, &vocab, "nationality")?;
    write_labels(&dir.join("profession.train"), &prof_labels, &vocab)?;
    write_labels(&dir.join("nationality.train"), &nat_labels, &vocab)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(2);

    // Jobs in the same cluster share a centre, so their vectors are close.
    write_file(&dir.join("vectors.txt"), |w| {
        let centres: Vec<Vec<f64>> = (0..opts.clusters)
            .map(|_| {
                (0..opts.vector_dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        writeln!(w, "{} {}", opts.tails, opts.vector_dim)?;
        for j in 0..opts.tails {
            let c = &centres[j % opts.clusters];
            let v: Vec<String> = c
                .iter()
                .map(|x| format!("{:.6}", x + rng.random_range(-0.5..0.5)))
                .collect();
            writeln!(w, "{PROFESSION_PREFIX}{j:02} {}", v.join(" "))?;
        }
        Ok(())
    })?;

    write_file(&dir.join("demonyms.tsv"), |w| {
        for j in 0..opts.tails {
            writeln!(w, "{COUNTRY_PREFIX}{j:02}\t{}", demonym_for(j))?;
        }
        Ok(())
    })?;

    // Each head mentions its primary country 0..=4 times and one distractor
    // country at most twice.
    write_file(&dir.join("sentences.tsv"), |w| {
        for l in nat_labels.iter().filter(|l| l.score > 2) {
            let head = vocab.entity_name(l.triple.head).expect("generated id");
            let country = vocab.entity_name(l.triple.tail).expect("generated id");
            let idx: usize = country[COUNTRY_PREFIX.len()..]
                .parse()
                .expect("generated name");
            let mut lines = Vec::new();
            for _ in 0..rng.random_range(0..=4) {
                lines.push(format!(
                    "{head} is a well known {} figure.",
                    demonym_for(idx)
                ));
            }
            let other = (idx + rng.random_range(1..opts.tails.max(2))) % opts.tails;
            for _ in 0..rng.random_range(0..=2) {
                lines.push(format!(
                    "{head} once toured with a {} band.",
                    demonym_for(other)
                ));
            }
            lines.push(format!("{head} gave an interview last year."));
            lines.shuffle(&mut rng);
            for s in lines {
                writeln!(w, "{head}\t{s}")?;
            }
        }
        Ok(())
    })?;

    let conf = dir.join("run.conf");
    write_file(&conf, |w| {
        writeln!(w, "# planted fixture, seed {}", opts.seed)?;
        for rel in ["profession", "nationality"] {
            writeln!(w, "kb.{rel} = {rel}.kb")?;
            writeln!(w, "train.{rel} = {rel}.train")?;
        }
        writeln!(w, "vectors = vectors.txt")?;
        writeln!(w, "sentences = sentences.tsv")?;
        writeln!(w, "demonyms = demonyms.tsv")?;
        writeln!(w, "out_dir = out")?;
        writeln!(w, "dim = 16")?;
        writeln!(w, "rel_dim = 16")?;
        writeln!(w, "epochs = {}", opts.epochs)?;
        writeln!(w, "batch = 64")?;
        writeln!(w, "lr = 0.001")?;
        writeln!(w, "margin = 1.0")?;
        writeln!(w, "seed = {}", opts.seed)?;
        Ok(())
    })?;
    Ok(conf)
}
