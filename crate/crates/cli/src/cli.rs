//! Command-line definitions and dispatch.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use relscore::ingest::Vocabulary;
use relscore::kg_model::MARGIN_GRID;
use relscore::scoring::{write_output, ScoreMap};

use crate::checkpoint::Checkpoint;
use crate::commands::{
    evaluate_named, margin_path, rank_kb, read_predictions, read_truth, run_pipeline, score_rows,
    train_model, write_file, AdjustRule, AuxPaths, KbSpec,
};
use crate::config::{ConfigFile, RunConfig, TrainFlags};
use crate::synth::{write_fixture, SynthOptions};
use crate::tsv::{read_ranks_file, write_ranks, RankTable};

#[derive(Debug, Parser)]
#[command(
    name = "relscore",
    version,
    about = "Triple relevance scoring with TransR embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train embeddings and write a checkpoint
    Train {
        /// kb file as `[relation=]path`; the relation defaults to the file stem
        #[arg(long = "kb", required_unless_present = "config")]
        kbs: Vec<KbSpec>,
        /// Extra `head<TAB>relation<TAB>tail` triples
        #[arg(long)]
        extra: Option<PathBuf>,
        #[arg(long, default_value = "model.bin")]
        out: PathBuf,
        /// Train one checkpoint per margin in 0.2, 0.5, 1, 2
        #[arg(long = "margin-grid")]
        margin_grid: bool,
        /// `key = value` file; flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Rank each head's tails under a checkpoint
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        kb: KbSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-rank with word-vector similarity (profession) or mention counts (nationality)
    Adjust {
        #[arg(long)]
        ranks: PathBuf,
        /// Defaults to the single relation found in the rank file
        #[arg(long)]
        relation: Option<String>,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        demonyms: Option<PathBuf>,
        #[arg(long = "min-count", default_value_t = relscore::ranking::DEFAULT_MIN_COUNT)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map ranks to relevance scores
    Score {
        #[arg(long)]
        ranks: PathBuf,
        /// Rules as `rank:score,...`
        #[arg(long = "score-map")]
        score_map: Option<ScoreMap>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predicted scores with ground truth
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Defaults to the truth file stem
        #[arg(long)]
        relation: Option<String>,
        /// Also write the report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run train, rank, adjust, score and evaluate from a config file
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
        #[arg(long = "min-count")]
        min_count: Option<u64>,
        #[arg(long = "score-map")]
        score_map: Option<ScoreMap>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Write a planted fixture directory
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        entities: usize,
        #[arg(long, default_value_t = 10)]
        tails: usize,
        #[arg(long, default_value_t = 5)]
        clusters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Epochs written into run.conf
        #[arg(long, default_value_t = 50)]
        epochs: usize,
    },
}

fn single_relation(table: &RankTable, vocab: &Vocabulary) -> Result<String> {
    match table.relations().as_slice() {
        [r] => Ok(vocab.relation_name(*r).expect("interned").to_owned()),
        [] => bail!("rank file is empty; pass --relation"),
        _ => bail!("rank file holds several relations; pass --relation"),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Train {
            kbs,
            extra,
            out,
            margin_grid,
            config,
            train,
        } => {
            let file = config.as_deref().map(ConfigFile::load).transpose()?;
            let mut cfg = train.resolve(file.as_ref())?;
            let kbs = if kbs.is_empty() {
                let f = file.as_ref().expect("clap requires --kb or --config");
                f.relation_paths("kb")
                    .into_iter()
                    .map(|(r, p)| KbSpec::new(r, p))
                    .collect()
            } else {
                kbs
            };
            let extra = extra.or_else(|| file.as_ref().and_then(|f| f.path("extra")));
            let margins: Vec<Option<f64>> = if margin_grid {
                MARGIN_GRID.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for m in margins {
                let path = match m {
                    Some(m) => {
                        cfg.margin = m;
                        margin_path(&out, m)
                    }
                    None => out.clone(),
                };
                let (ckpt, hist) = train_model(&kbs, extra.as_deref(), &cfg)?;
                ckpt.save(&path)?;
                match hist.last() {
                    Some(l) => writeln!(stdout, "{}: final loss {l:.6}", path.display())?,
                    None => writeln!(stdout, "{}: no epochs run", path.display())?,
                }
            }
        }
        Command::Rank { model, kb, out } => {
            let ckpt = Checkpoint::load(&model)?;
            let (vocab, table) = rank_kb(&ckpt, &kb)?;
            write_file(&out, |w| write_ranks(&table.rows, &table.lists, &vocab, w))?;
            info!("ranked {} heads into {}", table.lists.len(), out.display());
        }
        Command::Adjust {
            ranks,
            relation,
            vectors,
            sentences,
            demonyms,
            min_count,
            out,
        } => {
            let mut vocab = Vocabulary::new();
            let table = read_ranks_file(&ranks, &mut vocab)?;
            let relation = match relation {
                Some(r) => r,
                None => single_relation(&table, &vocab)?,
            };
            let aux = AuxPaths {
                vectors,
                sentences,
                demonyms,
            };
            let rule = AdjustRule::load(&relation, &aux, min_count, true, &mut vocab)?;
            let lists = rule.apply(&table.lists, &vocab)?;
            write_file(&out, |w| write_ranks(&table.rows, &lists, &vocab, w))?;
        }
        Command::Score {
            ranks,
            score_map,
            out,
        } => {
            let mut vocab = Vocabulary::new();
            let table = read_ranks_file(&ranks, &mut vocab)?;
            let scored = score_rows(&table, &score_map.unwrap_or_default())?;
            write_file(&out, |w| Ok(write_output(&scored, &vocab, w)?))?;
        }
        Command::Evaluate {
            pred,
            truth,
            relation,
            out,
        } => {
            let relation = match relation {
                Some(r) => r,
                None => truth
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .map(str::to_owned)
                    .ok_or_else(|| {
                        anyhow!(
                            "cannot derive a relation from {}; pass --relation",
                            truth.display()
                        )
                    })?,
            };
            let mut vocab = Vocabulary::new();
            let truth_set = read_truth(&truth, &relation, &mut vocab)?;
            let predictions = read_predictions(&pred, &relation, &mut vocab)?;
            let report = evaluate_named(&predictions, &truth_set, &vocab)?;
            write!(stdout, "{report}")?;
            if let Some(p) = out {
                write_file(&p, |w| Ok(write!(w, "{report}")?))?;
            }
        }
        Command::Pipeline {
            config,
            out_dir,
            min_count,
            score_map,
            train,
        } => {
            let file = ConfigFile::load(&config)?;
            let rc = RunConfig::from_sources(Some(&file), &train, out_dir, min_count, score_map)?;
            let artifacts = run_pipeline(&rc)?;
            writeln!(stdout, "{}", artifacts.model.display())?;
            for f in &artifacts.files {
                writeln!(stdout, "{}", f.display())?;
            }
            for (rel, report) in &artifacts.reports {
                writeln!(stdout, "[{rel}]")?;
                write!(stdout, "{report}")?;
            }
        }
        Command::Synth {
            out,
            entities,
            tails,
            clusters,
            seed,
            epochs,
        } => {
            let opts = SynthOptions {
                entities,
                tails,
                clusters,
                seed,
                epochs,
                ..SynthOptions::default()
            };
            let conf = write_fixture(&out, &opts).context("writing fixture")?;
            writeln!(stdout, "{}", conf.display())?;
        }
    }
    Ok(())
}
