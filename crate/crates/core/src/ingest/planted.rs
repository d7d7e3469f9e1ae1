//! Synthetic knowledge graphs with a known answer, for desk-scale runs.
//!
//! Entities are split round-robin into clusters. Every entity of cluster `c`
//! links to the cluster's primary tail `c` (planted score 7) and to one to
//! three distractor tails drawn uniformly from the remaining tails (planted
//! score 2). The tail order within an entity is shuffled.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledTriple, LabeledTriples, Triple, TripleSet, Vocabulary};
use crate::error::{Error, Result};

pub const PLANTED_PRIMARY_SCORE: u8 = 7;
pub const PLANTED_DISTRACTOR_SCORE: u8 = 2;

#[derive(Debug, Clone)]
pub struct PlantedKb {
    pub vocab: Vocabulary,
    pub triples: TripleSet,
    pub labels: LabeledTriples,
}

pub fn planted_entity_name(i: usize) -> String {
    format!("entity_{i:04}")
}

/// One planted `profession` relation over `entity_NNNN` heads and `tail_NN` tails.
pub fn generate_planted_kb(
    n_entities: usize,
    n_tails: usize,
    clusters: usize,
    seed: u64,
) -> Result<PlantedKb> {
    let mut vocab = Vocabulary::new();
    let (triples, labels) = generate_planted_relation(
        &mut vocab,
        "profession",
        "tail_",
        n_entities,
        n_tails,
        clusters,
        seed,
    )?;
    Ok(PlantedKb {
        vocab,
        triples,
        labels,
    })
}

/// Adds a planted relation to an existing vocabulary. Heads are named
/// `entity_NNNN`, so several relations generated into the same vocabulary
/// share their heads; tails are `{tail_prefix}{j:02}`.
pub fn generate_planted_relation(
    vocab: &mut Vocabulary,
    relation: &str,
    tail_prefix: &str,
    n_entities: usize,
    n_tails: usize,
    clusters: usize,
    seed: u64,
) -> Result<(TripleSet, LabeledTriples)> {
    if n_entities == 0 || n_tails == 0 || clusters == 0 {
        return Err(Error::invalid("planted KB counts must be positive"));
    }
    if clusters > n_tails {
        return Err(Error::invalid("clusters must not exceed n_tails"));
    }
    if n_entities < clusters {
        return Err(Error::invalid("n_entities must be at least clusters"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = vocab.intern_relation(relation);
    let tails: Vec<_> = (0..n_tails)
        .map(|j| vocab.intern_entity(&format!("{tail_prefix}{j:02}")))
        .collect();

    let mut set = TripleSet::new(vocab);
    let mut labels = LabeledTriples::default();
    for i in 0..n_entities {
        let head = vocab.intern_entity(&planted_entity_name(i));
        let primary = i % clusters;
        let n_distractors = rng.random_range(1..=3usize).min(n_tails - 1);

        let mut linked: Vec<(usize, u8)> = vec![(primary, PLANTED_PRIMARY_SCORE)];
        if n_distractors > 0 {
            // Sample among the other n_tails - 1 tails, skipping the primary.
            for k in index::sample(&mut rng, n_tails - 1, n_distractors) {
                let j = if k >= primary { k + 1 } else { k };
                linked.push((j, PLANTED_DISTRACTOR_SCORE));
            }
        }
        linked.shuffle(&mut rng);

        for (j, score) in linked {
            let triple = Triple::new(head, rel, tails[j]);
            set.insert(triple);
            labels.records.push(LabeledTriple { triple, score });
        }
    }
    Ok((set, labels))
}
