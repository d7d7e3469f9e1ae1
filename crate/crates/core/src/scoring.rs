//! Step-down mapping from ranks to relevance scores, and the submission writer.

use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{name_of, EntityId, RelationId, Triple, Vocabulary};
use crate::ranking::RankedList;

/// Rank thresholds and the score given from each threshold on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMap {
    rules: Vec<(u32, u8)>,
}

impl Default for ScoreMap {
    /// Rank 1 scores 5, rank 2 scores 3, every later rank scores 2.
    fn default() -> Self {
        Self {
            rules: vec![(1, 5), (2, 3), (3, 2)],
        }
    }
}

impl ScoreMap {
    /// `rules` are `(min_rank, score)` pairs: strictly increasing ranks
    /// starting at 1, non-increasing scores within `0..=7`.
    pub fn new(rules: Vec<(u32, u8)>) -> Result<Self> {
        match rules.first() {
            Some((1, _)) => {}
            _ => return Err(Error::invalid("score map must start at rank 1")),
        }
        for w in rules.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("score map ranks must increase"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid(
                    "score map scores must not increase with rank",
                ));
            }
        }
        if rules.iter().any(|&(_, s)| s > 7) {
            return Err(Error::invalid("scores must lie in [0, 7]"));
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[(u32, u8)] {
        &self.rules
    }
}

impl FromStr for ScoreMap {
    type Err = Error;

    /// Parses `rank:score` pairs separated by commas, e.g. `1:5,2:3,3:2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (rank, score) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("score rule {part:?} is not rank:score")))?;
            let rank = rank
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad rank in {part:?}")))?;
            let score = score
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad score in {part:?}")))?;
            rules.push((rank, score));
        }
        ScoreMap::new(rules)
    }
}

pub fn rank_to_score(rank: u32, map: &ScoreMap) -> Result<u8> {
    if rank == 0 {
        return Err(Error::invalid("ranks start at 1"));
    }
    Ok(map
        .rules
        .iter()
        .rev()
        .find(|(min_rank, _)| rank >= *min_rank)
        .map(|&(_, s)| s)
        .expect("first rule starts at rank 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredTriple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub score: u8,
}

impl ScoredTriple {
    pub fn triple(&self) -> Triple {
        Triple::new(self.head, self.relation, self.tail)
    }
}

/// One scored triple per ranked entry, in list and entry order.
pub fn score_all(lists: &[RankedList], map: &ScoreMap) -> Result<Vec<ScoredTriple>> {
    let mut out = Vec::with_capacity(lists.iter().map(RankedList::len).sum());
    for list in lists {
        for e in &list.entries {
            out.push(ScoredTriple {
                head: list.head,
                relation: list.relation,
                tail: e.tail,
                score: rank_to_score(e.rank, map)?,
            });
        }
    }
    Ok(out)
}

/// Writes `entity<TAB>value<TAB>score` lines in the given order.
pub fn write_output<W: Write>(
    scored: &[ScoredTriple],
    vocab: &Vocabulary,
    out: &mut W,
) -> Result<()> {
    for s in scored {
        writeln!(
            out,
            "{}\t{}\t{}",
            name_of(vocab, s.head)?,
            name_of(vocab, s.tail)?,
            s.score
        )?;
    }
    Ok(())
}
