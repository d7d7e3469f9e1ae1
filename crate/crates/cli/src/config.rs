//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the config file. Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `kb.<relation>` | kb file for a relation |
//! | `train.<relation>` | labelled truth file for a relation |
//! | `extra` | extra `head relation tail` triples |
//! | `vectors`, `sentences`, `demonyms` | adjustment inputs |
//! | `out_dir` | pipeline output directory |
//! | `lr`, `batch`, `dim`, `rel_dim`, `margin`, `epochs`, `seed`, `parallel` | training |
//! | `min_count`, `score_map` | adjustment and scoring |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use relscore::kg_model::TrainConfig;
use relscore::ranking::DEFAULT_MIN_COUNT;
use relscore::scoring::ScoreMap;

const SCALAR_KEYS: &[&str] = &[
    "extra",
    "vectors",
    "sentences",
    "demonyms",
    "out_dir",
    "lr",
    "batch",
    "dim",
    "rel_dim",
    "margin",
    "epochs",
    "seed",
    "parallel",
    "min_count",
    "score_map",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
    base: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {lineno}: expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let known = SCALAR_KEYS.contains(&key)
                || key.strip_prefix("kb.").is_some_and(|r| !r.is_empty())
                || key.strip_prefix("train.").is_some_and(|r| !r.is_empty());
            if !known {
                bail!("line {lineno}: unknown key {key:?}");
            }
            if let Some((first, _)) = entries.insert(key.to_owned(), (lineno, value.to_owned())) {
                bail!("line {lineno}: key {key:?} already set on line {first}");
            }
        }
        Ok(Self {
            entries,
            base: base.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.resolve(v))
    }

    fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config line {line}: bad value for {key}: {e}")),
        }
    }

    /// `(relation, path)` pairs for keys `prefix.<relation>`, in key order.
    pub fn relation_paths(&self, prefix: &str) -> Vec<(String, PathBuf)> {
        let dotted = format!("{prefix}.");
        self.entries
            .iter()
            .filter_map(|(k, (_, v))| {
                k.strip_prefix(&dotted)
                    .map(|r| (r.to_owned(), self.resolve(v)))
            })
            .collect()
    }
}

/// Training options that may come from flags; `None` falls back to the config
/// file and then to the defaults.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct TrainFlags {
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    pub batch: Option<usize>,
    /// Entity dimension k
    #[arg(long)]
    pub dim: Option<usize>,
    /// Relation dimension d
    #[arg(long = "rel-dim")]
    pub rel_dim: Option<usize>,
    /// Hinge margin
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluate batch gradients on a thread pool (not bitwise reproducible)
    #[arg(long)]
    pub parallel: bool,
}

impl TrainFlags {
    pub fn resolve(&self, file: Option<&ConfigFile>) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(f) = file {
            set(&mut cfg.learning_rate, f.parsed("lr")?);
            set(&mut cfg.batch_size, f.parsed("batch")?);
            set(&mut cfg.entity_dim, f.parsed("dim")?);
            set(&mut cfg.relation_dim, f.parsed("rel_dim")?);
            set(&mut cfg.margin, f.parsed("margin")?);
            set(&mut cfg.epochs, f.parsed("epochs")?);
            set(&mut cfg.seed, f.parsed("seed")?);
            set(&mut cfg.parallel, f.parsed("parallel")?);
        }
        set(&mut cfg.learning_rate, self.lr);
        set(&mut cfg.batch_size, self.batch);
        set(&mut cfg.entity_dim, self.dim);
        set(&mut cfg.relation_dim, self.rel_dim);
        set(&mut cfg.margin, self.margin);
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.seed, self.seed);
        cfg.parallel |= self.parallel;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Everything `pipeline` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kbs: Vec<(String, PathBuf)>,
    pub truths: Vec<(String, PathBuf)>,
    pub extra: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub demonyms: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub min_count: u64,
    pub score_map: ScoreMap,
}

impl RunConfig {
    pub fn from_sources(
        file: Option<&ConfigFile>,
        flags: &TrainFlags,
        out_dir: Option<PathBuf>,
        min_count: Option<u64>,
        score_map: Option<ScoreMap>,
    ) -> Result<Self> {
        let train = flags.resolve(file)?;
        let empty = ConfigFile::default();
        let f = file.unwrap_or(&empty);
        let kbs = f.relation_paths("kb");
        if kbs.is_empty() {
            bail!("no kb.<relation> entries configured");
        }
        let out_dir = out_dir
            .or_else(|| f.path("out_dir"))
            .ok_or_else(|| anyhow!("no output directory: set out_dir or pass --out-dir"))?;
        let score_map = match score_map {
            Some(m) => m,
            None => f.parsed("score_map")?.unwrap_or_default(),
        };
        Ok(Self {
            kbs,
            truths: f.relation_paths("train"),
            extra: f.path("extra"),
            vectors: f.path("vectors"),
            sentences: f.path("sentences"),
            demonyms: f.path("demonyms"),
            out_dir,
            train,
            min_count: min_count
                .or(f.parsed("min_count")?)
                .unwrap_or(DEFAULT_MIN_COUNT),
            score_map,
        })
    }
}
