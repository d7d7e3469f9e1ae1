//! The pipeline stages as library functions. The binary only parses flags
//! and calls these.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use log::{info, warn};
use relscore::ingest::{
    country_token, load_word_vectors, merge_triple_sets, parse_demonyms, parse_kb, parse_sentences,
    parse_train, parse_triples, DemonymTable, EntityId, LabeledTriples, SentenceCorpus, TripleSet,
    Vocabulary,
};
use relscore::kg_model::{init_embeddings, rank_tails, train_from, LossHistory, TrainConfig};
use relscore::metrics::{evaluate, EvalReport};
use relscore::ranking::{
    adjust_profession_ranks, build_bow_counts, nationality_rank, RankAdjustTable, RankedList,
};
use relscore::scoring::{rank_to_score, write_output, ScoreMap, ScoredTriple};
use relscore::similarity::{build_similarity_matrix, VectorStore};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::tsv::RankTable;

/// A kb file and the relation its rows belong to, written `[relation=]path`.
/// Without an explicit relation the file stem is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbSpec {
    pub relation: String,
    pub path: PathBuf,
}

impl KbSpec {
    pub fn new(relation: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            relation: relation.into(),
            path: path.into(),
        }
    }
}

impl FromStr for KbSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some((rel, path)) = s.split_once('=') {
            if !rel.is_empty() && !rel.contains(['/', '\\']) {
                ensure!(!path.is_empty(), "empty path in {s:?}");
                return Ok(Self::new(rel, path));
            }
        }
        let path = PathBuf::from(s);
        let rel = path
            .file_stem()
            .and_then(|x| x.to_str())
            .filter(|x| !x.is_empty())
            .ok_or_else(|| anyhow!("cannot derive a relation name from {s:?}"))?
            .to_owned();
        Ok(Self {
            relation: rel,
            path,
        })
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Creates `path`, runs `body` on a buffered writer and flushes it.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(f);
    body(&mut out)
        .and_then(|_| out.flush().map_err(Into::into))
        .with_context(|| format!("writing {}", path.display()))
}

fn load_kb(spec: &KbSpec, vocab: &mut Vocabulary) -> Result<TripleSet> {
    parse_kb(open(&spec.path)?, &spec.relation, vocab)
        .with_context(|| format!("parsing {}", spec.path.display()))
}

/// Parses and merges the kb files and optional extra triples.
pub fn load_training_set(kbs: &[KbSpec], extra: Option<&Path>) -> Result<(Vocabulary, TripleSet)> {
    ensure!(!kbs.is_empty(), "at least one kb file is required");
    let mut vocab = Vocabulary::new();
    let mut all: Option<TripleSet> = None;
    let sources = kbs
        .iter()
        .map(|k| (k.path.clone(), Some(k)))
        .chain(extra.map(|p| (p.to_path_buf(), None)));
    for (path, spec) in sources {
        let set = match spec {
            Some(spec) => load_kb(spec, &mut vocab)?,
            None => parse_triples(open(&path)?, &mut vocab)
                .with_context(|| format!("parsing {}", path.display()))?,
        };
        all = Some(match all {
            None => set,
            Some(base) => merge_triple_sets(&base, &set)?,
        });
    }
    Ok((vocab, all.expect("at least one source")))
}

/// Trains a fresh store on the given files.
pub fn train_model(
    kbs: &[KbSpec],
    extra: Option<&Path>,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, LossHistory)> {
    let (vocab, triples) = load_training_set(kbs, extra)?;
    info!(
        "training on {} triples, {} entities, {} relations",
        triples.len(),
        vocab.n_entities(),
        vocab.n_relations()
    );
    let init = init_embeddings(&vocab, cfg)?;
    let log_every = (cfg.epochs / 10).max(1);
    let (store, history) = train_from(init, &triples, cfg, |epoch, _, loss| {
        if epoch % log_every == 0 || epoch + 1 == cfg.epochs {
            info!("epoch {epoch}: mean hinge loss {loss:.6}");
        }
    })?;
    Ok((Checkpoint::new(vocab, store)?, history))
}

/// `model.bin` becomes `model.margin-0.5.bin`.
pub fn margin_path(base: &Path, margin: f64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.margin-{margin}.{ext}"),
        None => format!("{stem}.margin-{margin}"),
    };
    base.with_file_name(name)
}

fn list_names(kind: &str, names: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = names
        .iter()
        .take(SHOWN)
        .cloned()
        .collect::<Vec<_>>()
        .join(", ");
    if names.len() > SHOWN {
        s.push_str(&format!(" and {} more", names.len() - SHOWN));
    }
    format!("unknown {kind}: {s}")
}

/// Ranks every kb head's tails under the checkpoint. Returns the kb rows and
/// one list per head.
pub fn rank_kb(ckpt: &Checkpoint, spec: &KbSpec) -> Result<(Vocabulary, RankTable)> {
    let mut vocab = ckpt.vocab.clone();
    let kb = load_kb(spec, &mut vocab)?;
    if vocab.n_relations() > ckpt.vocab.n_relations() {
        bail!(
            "{} in {}",
            list_names("relation", &vocab.relations()[ckpt.vocab.n_relations()..]),
            spec.path.display()
        );
    }
    if vocab.n_entities() > ckpt.vocab.n_entities() {
        bail!(
            "{} in {}",
            list_names("entities", &vocab.entities()[ckpt.vocab.n_entities()..]),
            spec.path.display()
        );
    }
    let lists = kb
        .groups()
        .map(|(h, r, tails)| rank_tails(&ckpt.store, h, r, tails))
        .collect::<relscore::Result<Vec<_>>>()?;
    Ok((
        vocab,
        RankTable {
            rows: kb.as_slice().to_vec(),
            lists,
        },
    ))
}

/// Inputs the adjust step may draw on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxPaths {
    pub vectors: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub demonyms: Option<PathBuf>,
}

pub enum AdjustRule {
    Profession(VectorStore),
    Nationality {
        corpus: SentenceCorpus,
        demonyms: DemonymTable,
        min_count: u64,
    },
    Identity,
}

impl AdjustRule {
    /// Picks the rule for `relation` and loads its inputs. With `strict`,
    /// inputs that do not apply to the relation are a usage error.
    pub fn load(
        relation: &str,
        aux: &AuxPaths,
        min_count: u64,
        strict: bool,
        vocab: &mut Vocabulary,
    ) -> Result<Self> {
        let given = |p: &Option<PathBuf>| p.is_some();
        match relation {
            "profession" => {
                if strict && (given(&aux.sentences) || given(&aux.demonyms)) {
                    bail!("sentences and demonyms apply to nationality, not profession");
                }
                let path = aux
                    .vectors
                    .as_deref()
                    .ok_or_else(|| anyhow!("relation profession needs a vectors file"))?;
                let vectors = load_word_vectors(open(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?;
                Ok(Self::Profession(vectors))
            }
            "nationality" => {
                if strict && given(&aux.vectors) {
                    bail!("vectors apply to profession, not nationality");
                }
                let (Some(s), Some(d)) = (aux.sentences.as_deref(), aux.demonyms.as_deref()) else {
                    bail!("relation nationality needs both a sentences and a demonyms file");
                };
                let corpus = parse_sentences(open(s)?, vocab)
                    .with_context(|| format!("parsing {}", s.display()))?;
                let demonyms =
                    parse_demonyms(open(d)?).with_context(|| format!("parsing {}", d.display()))?;
                Ok(Self::Nationality {
                    corpus,
                    demonyms,
                    min_count,
                })
            }
            other => {
                if strict && (given(&aux.vectors) || given(&aux.sentences) || given(&aux.demonyms))
                {
                    bail!("relation {other} takes no adjustment inputs");
                }
                warn!("no adjustment rule for relation {other}; ranks pass through unchanged");
                Ok(Self::Identity)
            }
        }
    }

    pub fn apply(&self, lists: &[RankedList], vocab: &Vocabulary) -> Result<Vec<RankedList>> {
        let name = |id: EntityId| {
            vocab
                .entity_name(id)
                .map(str::to_owned)
                .ok_or_else(|| anyhow!("entity id {} is not in the vocabulary", id.0))
        };
        lists
            .iter()
            .map(|list| match self {
                Self::Identity => Ok(list.clone()),
                Self::Profession(vectors) => {
                    let terms = list
                        .entries
                        .iter()
                        .map(|e| name(e.tail))
                        .collect::<Result<Vec<_>>>()?;
                    if terms.is_empty() {
                        return Ok(list.clone());
                    }
                    let sim = build_similarity_matrix(vectors, &terms)?;
                    Ok(adjust_profession_ranks(
                        list,
                        &sim,
                        &RankAdjustTable::default(),
                        vocab,
                    )?)
                }
                Self::Nationality {
                    corpus,
                    demonyms,
                    min_count,
                } => {
                    let candidates = list
                        .entries
                        .iter()
                        .map(|e| name(e.tail).map(|n| country_token(&n)))
                        .collect::<Result<Vec<_>>>()?;
                    let counts = build_bow_counts(corpus, list.head, demonyms, &candidates);
                    Ok(nationality_rank(list, &counts, *min_count, vocab)?)
                }
            })
            .collect()
    }
}

/// Rank-file rows turned into scores, in row order.
pub fn score_rows(table: &RankTable, map: &ScoreMap) -> Result<Vec<ScoredTriple>> {
    let ranks = table.rank_map();
    table
        .rows
        .iter()
        .map(|t| {
            let rank = ranks[t];
            Ok(ScoredTriple {
                head: t.head,
                relation: t.relation,
                tail: t.tail,
                score: rank_to_score(rank, map)?,
            })
        })
        .collect()
}

/// Evaluates predictions against truth, naming any uncovered triple.
pub fn evaluate_named(
    pred: &[ScoredTriple],
    truth: &LabeledTriples,
    vocab: &Vocabulary,
) -> Result<EvalReport> {
    evaluate(pred, truth).map_err(|e| match e {
        relscore::Error::MissingPrediction {
            head,
            relation,
            tail,
        } => {
            let ent = |i: usize| vocab.entities().get(i).map_or("?", String::as_str);
            let rel = vocab.relations().get(relation).map_or("?", String::as_str);
            anyhow!(
                "no prediction for truth triple ({}, {}, {})",
                ent(head),
                rel,
                ent(tail)
            )
        }
        other => other.into(),
    })
}

/// Reads a scores file as predictions for `relation`.
pub fn read_predictions(
    path: &Path,
    relation: &str,
    vocab: &mut Vocabulary,
) -> Result<Vec<ScoredTriple>> {
    let labels = parse_train(open(path)?, relation, vocab)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(labels
        .iter()
        .map(|l| ScoredTriple {
            head: l.triple.head,
            relation: l.triple.relation,
            tail: l.triple.tail,
            score: l.score,
        })
        .collect())
}

pub fn read_truth(path: &Path, relation: &str, vocab: &mut Vocabulary) -> Result<LabeledTriples> {
    parse_train(open(path)?, relation, vocab).with_context(|| format!("parsing {}", path.display()))
}

/// Files written by one pipeline run, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineArtifacts {
    pub model: PathBuf,
    pub files: Vec<PathBuf>,
    pub reports: Vec<(String, EvalReport)>,
}

fn stage<T>(name: &str, relation: Option<&str>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().with_context(|| match relation {
        Some(r) => format!("stage {name} ({r}) failed"),
        None => format!("stage {name} failed"),
    })
}

/// train, then rank, adjust, score (and evaluate when truth is configured)
/// for every configured relation.
pub fn run_pipeline(rc: &RunConfig) -> Result<PipelineArtifacts> {
    for (rel, _) in &rc.truths {
        ensure!(
            rc.kbs.iter().any(|(k, _)| k == rel),
            "train.{rel} has no matching kb.{rel}"
        );
    }
    fs::create_dir_all(&rc.out_dir)
        .with_context(|| format!("creating {}", rc.out_dir.display()))?;
    let specs: Vec<KbSpec> = rc
        .kbs
        .iter()
        .map(|(r, p)| KbSpec::new(r.clone(), p.clone()))
        .collect();
    let aux = AuxPaths {
        vectors: rc.vectors.clone(),
        sentences: rc.sentences.clone(),
        demonyms: rc.demonyms.clone(),
    };

    let mut out = PipelineArtifacts {
        model: rc.out_dir.join("model.bin"),
        ..Default::default()
    };
    let ckpt = stage("train", None, || {
        let (ckpt, hist) = train_model(&specs, rc.extra.as_deref(), &rc.train)?;
        if let Some(l) = hist.last() {
            info!("final epoch loss {l:.6}");
        }
        ckpt.save(&out.model)?;
        Ok(ckpt)
    })?;

    for spec in &specs {
        let rel = spec.relation.as_str();
        let path = |suffix: &str| rc.out_dir.join(format!("{rel}.{suffix}"));

        let (mut vocab, table) = stage("rank", Some(rel), || {
            let (vocab, table) = rank_kb(&ckpt, spec)?;
            let p = path("ranks.tsv");
            write_file(&p, |w| {
                crate::tsv::write_ranks(&table.rows, &table.lists, &vocab, w)
            })?;
            out.files.push(p);
            Ok((vocab, table))
        })?;

        let adjusted = stage("adjust", Some(rel), || {
            let rule = AdjustRule::load(rel, &aux, rc.min_count, false, &mut vocab)?;
            let lists = rule.apply(&table.lists, &vocab)?;
            let p = path("adjusted.tsv");
            write_file(&p, |w| {
                crate::tsv::write_ranks(&table.rows, &lists, &vocab, w)
            })?;
            out.files.push(p);
            Ok(RankTable {
                rows: table.rows.clone(),
                lists,
            })
        })?;

        let scored = stage("score", Some(rel), || {
            let scored = score_rows(&adjusted, &rc.score_map)?;
            let p = path("scores.tsv");
            write_file(&p, |w| Ok(write_output(&scored, &vocab, w)?))?;
            out.files.push(p);
            Ok(scored)
        })?;

        if let Some((_, truth_path)) = rc.truths.iter().find(|(r, _)| r == rel) {
            stage("evaluate", Some(rel), || {
                let truth = read_truth(truth_path, rel, &mut vocab)?;
                let report = evaluate_named(&scored, &truth, &vocab)?;
                let p = path("report.txt");
                write_file(&p, |w| Ok(write!(w, "{report}")?))?;
                out.files.push(p);
                out.reports.push((rel.to_owned(), report));
                Ok(())
            })?;
        }
    }
    Ok(out)
}
