//! Per-entity rank adjustment after embedding-based ranking.
//!
//! Professions: every profession moves up or down by a shift looked up from
//! its similarity distance to the entity's top-ranked profession, clamped
//! at rank 1. All shifts are computed from the original ranks at once, so
//! ties are expected in the output.
//!
//! Nationalities: a bag-of-words count over the entity's sentences (with
//! demonyms replaced by their country) overrides the top rank whenever the
//! best country is mentioned at least `min_count` times.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::{
    country_token, name_of, DemonymTable, EntityId, RelationId, SentenceCorpus, Vocabulary,
};
use crate::similarity::SimilarityMatrix;

pub const DEFAULT_MIN_COUNT: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Straight from embedding scores: ranks `1..=n`, no ties.
    Raw,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedEntry {
    pub tail: EntityId,
    pub rank: u32,
}

/// Candidate tails of one `(head, relation)` pair, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub head: EntityId,
    pub relation: RelationId,
    pub entries: Vec<RankedEntry>,
    pub provenance: Provenance,
}

impl RankedList {
    pub fn rank_of(&self, tail: EntityId) -> Option<u32> {
        self.entries.iter().find(|e| e.tail == tail).map(|e| e.rank)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the ranks are exactly `1..=n` in some order.
    pub fn is_gapless(&self) -> bool {
        let mut ranks: Vec<u32> = self.entries.iter().map(|e| e.rank).collect();
        ranks.sort_unstable();
        ranks.iter().enumerate().all(|(i, &r)| r as usize == i + 1)
    }

    fn sort_by_rank(&mut self) {
        self.entries.sort_by_key(|e| e.rank);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftBucket {
    /// Inclusive upper distance bound; the lower bound is the previous
    /// bucket's upper bound (exclusive), or 0 (inclusive) for the first.
    pub upper: f64,
    pub shift: i32,
}

/// Similarity-distance buckets mapped to rank shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct RankAdjustTable {
    buckets: Vec<ShiftBucket>,
}

impl Default for RankAdjustTable {
    /// `[0, 0.2] -> 2`, `(0.2, 0.4] -> 1`, `(0.4, 0.7] -> 0`, `(0.7, 1] -> -1`.
    fn default() -> Self {
        Self {
            buckets: vec![
                ShiftBucket {
                    upper: 0.2,
                    shift: 2,
                },
                ShiftBucket {
                    upper: 0.4,
                    shift: 1,
                },
                ShiftBucket {
                    upper: 0.7,
                    shift: 0,
                },
                ShiftBucket {
                    upper: 1.0,
                    shift: -1,
                },
            ],
        }
    }
}

impl RankAdjustTable {
    pub fn new(buckets: Vec<ShiftBucket>) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::invalid(
                "rank adjust table needs at least one bucket",
            ));
        }
        let mut prev_upper = 0.0;
        let mut prev_shift = i32::MAX;
        for b in &buckets {
            if b.upper.is_nan() || b.upper <= prev_upper || b.upper > 1.0 {
                return Err(Error::invalid("bucket bounds must increase within (0, 1]"));
            }
            if b.shift > prev_shift {
                return Err(Error::invalid(
                    "bucket shifts must not increase with distance",
                ));
            }
            prev_upper = b.upper;
            prev_shift = b.shift;
        }
        if prev_upper != 1.0 {
            return Err(Error::invalid("last bucket must end at 1"));
        }
        Ok(Self { buckets })
    }

    pub fn buckets(&self) -> &[ShiftBucket] {
        &self.buckets
    }
}

/// Shift of the bucket containing `sd`. Distance 0 falls into the first bucket.
pub fn shift_for_distance(sd: f64, table: &RankAdjustTable) -> Result<i32> {
    if !(0.0..=1.0).contains(&sd) {
        return Err(Error::invalid(format!(
            "similarity distance {sd} outside [0, 1]"
        )));
    }
    table
        .buckets
        .iter()
        .find(|b| sd <= b.upper)
        .map(|b| b.shift)
        .ok_or_else(|| Error::invalid("rank adjust table does not cover the distance"))
}

/// `NewRank(p_i) = max(i - shift(SD(p_i, p_1)), 1)` for every entry at once.
pub fn adjust_profession_ranks(
    raw: &RankedList,
    sim: &SimilarityMatrix,
    table: &RankAdjustTable,
    vocab: &Vocabulary,
) -> Result<RankedList> {
    if raw.is_empty() {
        return Ok(raw.clone());
    }
    if !raw.is_gapless() {
        return Err(Error::invalid(
            "profession adjustment needs gapless ranks 1..n",
        ));
    }
    let mut names = Vec::with_capacity(raw.len());
    for e in &raw.entries {
        let name = name_of(vocab, e.tail)?;
        if sim.index_of(name).is_none() {
            return Err(Error::MissingTerm(name.to_owned()));
        }
        names.push(name);
    }
    let top = raw
        .entries
        .iter()
        .position(|e| e.rank == 1)
        .expect("gapless list has a rank-1 entry");

    let mut entries = Vec::with_capacity(raw.len());
    for (e, name) in raw.entries.iter().zip(&names) {
        let rank = if e.rank == 1 {
            1
        } else {
            let sd = sim
                .distance(name, names[top])
                .expect("both terms checked above");
            let shift = shift_for_distance(sd, table)?;
            (e.rank as i64 - shift as i64).max(1) as u32
        };
        entries.push((e.rank, RankedEntry { tail: e.tail, rank }));
    }
    entries.sort_by_key(|(original, e)| (e.rank, *original));
    Ok(RankedList {
        head: raw.head,
        relation: raw.relation,
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        provenance: Provenance::Adjusted,
    })
}

/// Mention counts of candidate country tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BowCounts {
    counts: Vec<(String, u64)>,
}

impl BowCounts {
    /// Count for a candidate, matched case-insensitively.
    pub fn get(&self, token: &str) -> u64 {
        let key = token.to_lowercase();
        self.counts
            .iter()
            .find(|(c, _)| c.to_lowercase() == key)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(c, n)| (c.as_str(), *n))
    }
}

/// Counts candidate countries over an entity's sentences after replacing
/// demonym tokens with their country token.
pub fn build_bow_counts(
    corpus: &SentenceCorpus,
    entity: EntityId,
    demonyms: &DemonymTable,
    candidates: &[String],
) -> BowCounts {
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut counts: Vec<(String, u64)> = Vec::new();
    for c in candidates {
        let key = c.to_lowercase();
        if let std::collections::hash_map::Entry::Vacant(slot) = slots.entry(key) {
            slot.insert(counts.len());
            counts.push((c.clone(), 0));
        }
    }
    for sentence in corpus.sentences(entity) {
        for token in sentence {
            let word = match demonyms.country_for(token) {
                Some(country) => country.to_lowercase(),
                None => token.to_lowercase(),
            };
            if let Some(&i) = slots.get(&word) {
                counts[i].1 += 1;
            }
        }
    }
    BowCounts { counts }
}

/// Moves the most-mentioned country to rank 1 when it has at least
/// `min_count` mentions; the rest keep their order at ranks `2..=n`.
pub fn nationality_rank(
    raw: &RankedList,
    counts: &BowCounts,
    min_count: u64,
    vocab: &Vocabulary,
) -> Result<RankedList> {
    let mut best: Option<(u64, EntityId, u32)> = None;
    for e in &raw.entries {
        let n = counts.get(&country_token(name_of(vocab, e.tail)?));
        let better = match best {
            None => true,
            Some((bn, bt, _)) => n > bn || (n == bn && e.tail < bt),
        };
        if better {
            best = Some((n, e.tail, e.rank));
        }
    }
    let (n, winner, winner_rank) = match best {
        Some(b) => b,
        None => return Ok(raw.clone()),
    };
    if n < min_count || winner_rank == 1 {
        return Ok(raw.clone());
    }

    let mut rest: Vec<RankedEntry> = raw
        .entries
        .iter()
        .copied()
        .filter(|e| e.tail != winner)
        .collect();
    rest.sort_by_key(|e| e.rank);
    let mut out = RankedList {
        head: raw.head,
        relation: raw.relation,
        entries: std::iter::once(RankedEntry {
            tail: winner,
            rank: 1,
        })
        .chain(rest.into_iter().enumerate().map(|(i, e)| RankedEntry {
            tail: e.tail,
            rank: i as u32 + 2,
        }))
        .collect(),
        provenance: Provenance::Adjusted,
    };
    out.sort_by_rank();
    Ok(out)
}
