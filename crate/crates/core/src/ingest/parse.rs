use std::io::BufRead;

use super::{
    tokenize, DemonymTable, LabeledTriple, LabeledTriples, SentenceCorpus, Triple, TripleSet,
    Vocabulary,
};
use crate::error::{Error, Result};
use crate::similarity::VectorStore;

/// Yields `(line_number, line)` for every non-blank line.
fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(Error::from(e))),
        })
}

fn split_fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != expected {
        return Err(Error::parse(
            lineno,
            format!(
                "expected {} tab-separated fields, found {}",
                expected,
                fields.len()
            ),
        ));
    }
    if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
        return Err(Error::parse(lineno, format!("field {} is empty", pos + 1)));
    }
    Ok(fields)
}

/// Parses `entity<TAB>value` lines into triples of `relation`.
pub fn parse_kb<R: BufRead>(
    reader: R,
    relation: &str,
    vocab: &mut Vocabulary,
) -> Result<TripleSet> {
    let rel = vocab.intern_relation(relation);
    let mut set = TripleSet::new(vocab);
    for record in records(reader) {
        let (lineno, line) = record?;
        let f = split_fields(&line, lineno, 2)?;
        let head = vocab.intern_entity(f[0]);
        let tail = vocab.intern_entity(f[1]);
        set.insert(Triple::new(head, rel, tail));
    }
    Ok(set)
}

/// Parses `entity<TAB>value<TAB>score` lines; scores must be integers in `0..=7`.
pub fn parse_train<R: BufRead>(
    reader: R,
    relation: &str,
    vocab: &mut Vocabulary,
) -> Result<LabeledTriples> {
    let rel = vocab.intern_relation(relation);
    let mut out = LabeledTriples::default();
    for record in records(reader) {
        let (lineno, line) = record?;
        let f = split_fields(&line, lineno, 3)?;
        let score: i64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("score {:?} is not an integer", f[2])))?;
        if !(0..=7).contains(&score) {
            return Err(Error::parse(
                lineno,
                format!("score {score} outside [0, 7]"),
            ));
        }
        let head = vocab.intern_entity(f[0]);
        let tail = vocab.intern_entity(f[1]);
        out.records.push(LabeledTriple {
            triple: Triple::new(head, rel, tail),
            score: score as u8,
        });
    }
    Ok(out)
}

/// Parses `head<TAB>relation<TAB>tail` lines (auxiliary triples over any relation).
pub fn parse_triples<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<TripleSet> {
    let mut parsed = Vec::new();
    for record in records(reader) {
        let (lineno, line) = record?;
        let f = split_fields(&line, lineno, 3)?;
        let head = vocab.intern_entity(f[0]);
        let rel = vocab.intern_relation(f[1]);
        let tail = vocab.intern_entity(f[2]);
        parsed.push(Triple::new(head, rel, tail));
    }
    let mut set = TripleSet::new(vocab);
    for t in parsed {
        set.insert(t);
    }
    Ok(set)
}

/// Parses `entity<TAB>sentence` lines into per-entity token sequences.
pub fn parse_sentences<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<SentenceCorpus> {
    let mut corpus = SentenceCorpus::default();
    for record in records(reader) {
        let (lineno, line) = record?;
        let (entity, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "missing tab between entity and sentence"))?;
        if entity.is_empty() {
            return Err(Error::parse(lineno, "empty entity field"));
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::parse(lineno, "sentence has no tokens"));
        }
        let id = vocab.intern_entity(entity);
        corpus.push(id, tokens);
    }
    Ok(corpus)
}

/// Parses `country<TAB>demonym` lines.
pub fn parse_demonyms<R: BufRead>(reader: R) -> Result<DemonymTable> {
    let mut table = DemonymTable::default();
    for record in records(reader) {
        let (lineno, line) = record?;
        let f = split_fields(&line, lineno, 2)?;
        if f[1].split_whitespace().count() != 1 {
            return Err(Error::parse(lineno, "demonym must be a single token"));
        }
        table.insert(f[0], f[1])?;
    }
    Ok(table)
}

/// Reads the plain-text vector layout: a `count dim` header, then
/// `token v1 ... v_dim` rows. A completely empty stream is an empty store.
pub fn load_word_vectors<R: BufRead>(reader: R) -> Result<VectorStore> {
    let mut lines = records(reader);
    let (header_line, header) = match lines.next() {
        None => return Ok(VectorStore::new(0)),
        Some(r) => r?,
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match parts.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) => (c, d),
            _ => return Err(Error::parse(header_line, "header must be `count dim`")),
        },
        _ => return Err(Error::parse(header_line, "header must be `count dim`")),
    };
    if dim == 0 && count > 0 {
        return Err(Error::parse(header_line, "dimension must be positive"));
    }

    let mut store = VectorStore::new(dim);
    let mut found = 0usize;
    for record in lines {
        let (lineno, line) = record?;
        let mut fields = line.split_whitespace();
        let token = match fields.next() {
            Some(t) => t,
            None => continue,
        };
        let values = fields
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::parse(lineno, "vector component is not a finite number"))?;
        if values.len() != dim {
            return Err(Error::parse(
                lineno,
                format!("expected {dim} components, found {}", values.len()),
            ));
        }
        if !store.insert(token.to_owned(), values) {
            return Err(Error::parse(lineno, format!("duplicate token {token:?}")));
        }
        found += 1;
    }
    if found != count {
        return Err(Error::CountMismatch {
            expected: count,
            found,
        });
    }
    Ok(store)
}

/// Set union; `base` order first, then the new triples of `extra`.
pub fn merge_triple_sets(base: &TripleSet, extra: &TripleSet) -> Result<TripleSet> {
    if base.lineage != extra.lineage {
        return Err(Error::VocabularyMismatch);
    }
    let mut merged = base.clone();
    for t in extra.iter() {
        merged.insert(*t);
    }
    Ok(merged)
}
