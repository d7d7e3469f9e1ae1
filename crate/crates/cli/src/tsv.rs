//! Rank files: `entity<TAB>relation<TAB>tail<TAB>rank`, one row per kb row,
//! in kb order.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use anyhow::{anyhow, bail, Context, Result};
use relscore::ingest::{EntityId, RelationId, Triple, Vocabulary};
use relscore::ranking::{Provenance, RankedEntry, RankedList};

/// Parsed rank file. `rows` keeps file order; `lists` holds one list per
/// `(head, relation)` in first-seen order with entries sorted by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<Triple>,
    pub lists: Vec<RankedList>,
}

impl RankTable {
    /// Relations in first-seen order.
    pub fn relations(&self) -> Vec<RelationId> {
        let mut out: Vec<RelationId> = Vec::new();
        for l in &self.lists {
            if !out.contains(&l.relation) {
                out.push(l.relation);
            }
        }
        out
    }

    pub fn rank_map(&self) -> HashMap<Triple, u32> {
        rank_map(&self.lists)
    }
}

fn rank_map(lists: &[RankedList]) -> HashMap<Triple, u32> {
    lists
        .iter()
        .flat_map(|l| {
            l.entries
                .iter()
                .map(move |e| (Triple::new(l.head, l.relation, e.tail), e.rank))
        })
        .collect()
}

fn name(vocab: &Vocabulary, id: EntityId) -> Result<&str> {
    vocab
        .entity_name(id)
        .ok_or_else(|| anyhow!("entity id {} is not in the vocabulary", id.0))
}

/// Writes one row per entry of `rows`, looking its rank up in `lists`.
pub fn write_ranks<W: Write>(
    rows: &[Triple],
    lists: &[RankedList],
    vocab: &Vocabulary,
    out: &mut W,
) -> Result<()> {
    let ranks = rank_map(lists);
    for t in rows {
        let Some(rank) = ranks.get(t) else {
            bail!(
                "no rank for row {} {}",
                name(vocab, t.head)?,
                name(vocab, t.tail)?
            );
        };
        let rel = vocab
            .relation_name(t.relation)
            .ok_or_else(|| anyhow!("relation id {} is not in the vocabulary", t.relation.0))?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            name(vocab, t.head)?,
            rel,
            name(vocab, t.tail)?,
            rank
        )?;
    }
    Ok(())
}

type RowRank = (u32, usize, EntityId);

pub fn read_ranks<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<RankTable> {
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    let mut slots: HashMap<(EntityId, RelationId), usize> = HashMap::new();
    // (rank, row index, tail) per (head, relation)
    let mut grouped: Vec<(EntityId, RelationId, Vec<RowRank>)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 || f.iter().any(|x| x.is_empty()) {
            bail!("line {lineno}: expected entity, relation, tail and rank separated by tabs");
        }
        let rank: u32 = f[3]
            .trim()
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| anyhow!("line {lineno}: rank {:?} is not a positive integer", f[3]))?;
        let t = Triple::new(
            vocab.intern_entity(f[0]),
            vocab.intern_relation(f[1]),
            vocab.intern_entity(f[2]),
        );
        if let Some(first) = seen.insert(t, lineno) {
            bail!("line {lineno}: duplicate of line {first}");
        }
        let slot = *slots.entry((t.head, t.relation)).or_insert_with(|| {
            grouped.push((t.head, t.relation, Vec::new()));
            grouped.len() - 1
        });
        grouped[slot].2.push((rank, rows.len(), t.tail));
        rows.push(t);
    }

    let lists = grouped
        .into_iter()
        .map(|(head, relation, mut entries)| {
            entries.sort();
            RankedList {
                head,
                relation,
                entries: entries
                    .into_iter()
                    .map(|(rank, _, tail)| RankedEntry { tail, rank })
                    .collect(),
                provenance: Provenance::Raw,
            }
        })
        .collect();
    Ok(RankTable { rows, lists })
}

/// Reads a rank file from disk.
pub fn read_ranks_file(path: &std::path::Path, vocab: &mut Vocabulary) -> Result<RankTable> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_ranks(std::io::BufReader::new(file), vocab)
        .with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "a\tprofession\tx\t2\na\tprofession\ty\t1\nb\tprofession\tx\t1\n";

    #[test]
    fn row_order_survives_round_trip() {
        let mut v = Vocabulary::new();
        let t = read_ranks(SAMPLE.as_bytes(), &mut v).unwrap();
        assert_eq!(t.lists.len(), 2);
        assert_eq!(t.lists[0].entries[0].rank, 1);
        assert_eq!(v.entity_name(t.lists[0].entries[0].tail), Some("y"));
        let mut out = Vec::new();
        write_ranks(&t.rows, &t.lists, &v, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SAMPLE);
    }

    #[test]
    fn malformed_rows_report_line() {
        let mut v = Vocabulary::new();
        let err = read_ranks("a\tp\tx\t1\na\tp\ty\n".as_bytes(), &mut v).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        let err = read_ranks("a\tp\tx\t0\n".as_bytes(), &mut v).unwrap_err();
        assert!(err.to_string().starts_with("line 1"));
        assert!(read_ranks("a\tp\tx\t1\na\tp\tx\t2\n".as_bytes(), &mut v).is_err());
    }

    #[test]
    fn tied_ranks_keep_file_order() {
        let mut v = Vocabulary::new();
        let t = read_ranks("a\tp\tz\t1\na\tp\ty\t1\n".as_bytes(), &mut v).unwrap();
        let tails: Vec<_> = t.lists[0]
            .entries
            .iter()
            .map(|e| v.entity_name(e.tail).unwrap())
            .collect();
        assert_eq!(tails, vec!["z", "y"]);
    }
}
