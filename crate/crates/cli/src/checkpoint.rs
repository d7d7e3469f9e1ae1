//! Binary model checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "TRSR" version k d n_entities n_relations
//! n_entities x (len, utf-8 bytes)     entity names
//! n_relations x (len, utf-8 bytes)    relation names
//! f32 x n_entities*k                  entity vectors
//! f32 x n_relations*d                 relation vectors
//! f32 x n_relations*k*d               projection matrices, row-major
//! ```
//!
//! Parameters are stored in single precision, so a loaded store holds the
//! f32-rounded values and saving it again reproduces the file exactly.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use relscore::ingest::Vocabulary;
use relscore::kg_model::EmbeddingStore;

pub const MAGIC: &[u8; 4] = b"TRSR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub store: EmbeddingStore,
}

fn put_u32<W: Write>(out: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).context("value does not fit the u32 checkpoint header")?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_floats<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    for &x in values {
        out.write_all(&(x as f32).to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).context("truncated checkpoint")?;
    Ok(u32::from_le_bytes(b))
}

fn get_names<R: Read>(input: &mut R, n: usize) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = get_u32(input)? as usize;
        let mut buf = vec![0u8; len];
        input
            .read_exact(&mut buf)
            .context("truncated checkpoint name")?;
        names.push(String::from_utf8(buf).context("checkpoint name is not valid UTF-8")?);
    }
    Ok(names)
}

fn get_floats<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 4];
    input
        .read_exact(&mut bytes)
        .context("truncated checkpoint parameters")?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

impl Checkpoint {
    pub fn new(vocab: Vocabulary, store: EmbeddingStore) -> Result<Self> {
        ensure!(
            vocab.n_entities() == store.n_entities() && vocab.n_relations() == store.n_relations(),
            "vocabulary has {}/{} entities/relations but the store has {}/{}",
            vocab.n_entities(),
            vocab.n_relations(),
            store.n_entities(),
            store.n_relations()
        );
        Ok(Self { vocab, store })
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        let s = &self.store;
        out.write_all(MAGIC)?;
        put_u32(out, VERSION as usize)?;
        for v in [
            s.entity_dim(),
            s.relation_dim(),
            s.n_entities(),
            s.n_relations(),
        ] {
            put_u32(out, v)?;
        }
        for name in self.vocab.entities().iter().chain(self.vocab.relations()) {
            put_u32(out, name.len())?;
            out.write_all(name.as_bytes())?;
        }
        put_floats(out, s.entity_data())?;
        put_floats(out, s.relation_data())?;
        put_floats(out, s.projection_data())?;
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .context("truncated checkpoint")?;
        ensure!(&magic == MAGIC, "not a checkpoint file (bad magic)");
        let version = get_u32(input)?;
        ensure!(
            version == VERSION,
            "unsupported checkpoint version {version}"
        );
        let k = get_u32(input)? as usize;
        let d = get_u32(input)? as usize;
        let n_ent = get_u32(input)? as usize;
        let n_rel = get_u32(input)? as usize;

        let entities = get_names(input, n_ent)?;
        let relations = get_names(input, n_rel)?;
        let vocab = Vocabulary::from_names(entities, relations)?;
        let ents = get_floats(input, n_ent * k)?;
        let rels = get_floats(input, n_rel * d)?;
        let projs = get_floats(input, n_rel * k * d)?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            bail!("trailing bytes after checkpoint parameters");
        }
        let store = EmbeddingStore::from_parts(k, d, ents, rels, projs)?;
        Checkpoint::new(vocab, store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out)
            .and_then(|_| out.flush().map_err(Into::into))
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(&mut BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
    }
}

/// Exact file size implied by a header; names are variable-length so they
/// are passed in as their total byte count.
pub fn expected_len(k: usize, d: usize, n_ent: usize, n_rel: usize, name_bytes: usize) -> usize {
    4 + 4 * 5 + 4 * (n_ent + n_rel) + name_bytes + 4 * (n_ent * k + n_rel * d + n_rel * k * d)
}
