//! TransR knowledge-graph embeddings.
//!
//! Entities live in `R^k`, relations in `R^d`, and each relation owns a
//! `k x d` matrix projecting entities into its space (row-vector
//! convention, `h_r = h M_r`). A triple is scored by
//! `f_r(h, t) = ||h M_r + r - t M_r||^2`, lower meaning more plausible, and
//! trained with the margin ranking loss `[f(pos) + margin - f(neg)]_+`
//! against one filtered corruption per positive per epoch, minimized with
//! sparse Adam. After every update all touched vectors are clipped into the
//! unit ball and projection matrices are rescaled to keep projected entity
//! norms at most one.

mod adam;
mod constraints;
mod grad;
mod sampling;
mod store;
mod train;

pub use adam::{adam_step, AdamState};
pub use constraints::{
    enforce_all_norm_constraints, enforce_norm_constraints, max_constrained_norm, NORM_SLACK,
};
pub use grad::{gradients, hinge_loss, SparseGradient};
pub use sampling::{sample_negative, NEGATIVE_RETRIES};
pub use store::{hinge_term, init_embeddings, project, score_triple, EmbeddingStore};
pub use train::{train, train_from, LossHistory};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::ingest::{EntityId, RelationId, Triple};
use crate::ranking::{Provenance, RankedEntry, RankedList};

/// Margins swept by `--margin-grid`.
pub const MARGIN_GRID: [f64; 4] = [0.2, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub margin: f64,
    /// Entity dimension `k`.
    pub entity_dim: usize,
    /// Relation dimension `d`.
    pub relation_dim: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Evaluate batch gradients on the rayon pool. Not bitwise reproducible.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 256,
            epochs: 2000,
            margin: 1.0,
            entity_dim: 50,
            relation_dim: 50,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is accepted: it freezes the store, which is
        // handy for checking that training is a no-op.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::invalid("margin must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.entity_dim == 0 || self.relation_dim == 0 {
            return Err(Error::invalid("embedding dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::invalid("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// Sorts candidate tails by ascending score; exact ties go to the smaller
/// tail id. Ranks are `1..=n`.
pub fn rank_tails(
    store: &EmbeddingStore,
    head: EntityId,
    relation: RelationId,
    candidates: &[EntityId],
) -> Result<RankedList> {
    if candidates.is_empty() {
        return Err(Error::invalid("rank_tails needs at least one candidate"));
    }
    let mut seen = HashSet::with_capacity(candidates.len());
    let mut scored = Vec::with_capacity(candidates.len());
    for &tail in candidates {
        if !seen.insert(tail) {
            return Err(Error::invalid(format!("duplicate candidate tail {tail}")));
        }
        let f = score_triple(store, &Triple::new(head, relation, tail))?;
        scored.push((f, tail));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(RankedList {
        head,
        relation,
        entries: scored
            .into_iter()
            .enumerate()
            .map(|(i, (_, tail))| RankedEntry {
                tail,
                rank: i as u32 + 1,
            })
            .collect(),
        provenance: Provenance::Raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::generate_planted_kb;
    use proptest::prelude::*;

    fn line_store(scores: &[f64]) -> EmbeddingStore {
        // head at the origin, tail i at distance sqrt(score_i), r = 0, M = 1
        let mut ents = vec![0.0];
        ents.extend(scores.iter().map(|s| s.sqrt()));
        EmbeddingStore::from_parts(1, 1, ents, vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn rank_tails_orders_by_score() {
        let s = line_store(&[0.1, 2.0]);
        let (h, r) = (EntityId(0), RelationId(0));
        let l = rank_tails(&s, h, r, &[EntityId(2), EntityId(1)]).unwrap();
        assert_eq!(
            l.entries,
            vec![
                RankedEntry {
                    tail: EntityId(1),
                    rank: 1
                },
                RankedEntry {
                    tail: EntityId(2),
                    rank: 2
                }
            ]
        );
        let single = rank_tails(&s, h, r, &[EntityId(2)]).unwrap();
        assert_eq!(single.entries[0].rank, 1);
        assert!(rank_tails(&s, h, r, &[]).is_err());
        assert!(rank_tails(&s, h, r, &[EntityId(9)]).is_err());
    }

    #[test]
    fn rank_ties_break_on_tail_id() {
        let mut scores = vec![1.0; 10];
        scores[3] = 0.5;
        scores[8] = 0.5;
        let s = line_store(&scores);
        // store ids are offset by one: tail id 4 and 9 share the best score
        let l = rank_tails(&s, EntityId(0), RelationId(0), &[EntityId(9), EntityId(4)]).unwrap();
        assert_eq!(l.entries[0].tail, EntityId(4));
        assert_eq!(l.entries[1].tail, EntityId(9));
    }

    proptest! {
        #[test]
        fn rank_tails_is_a_permutation(scores in prop::collection::vec(0.0f64..4.0, 1..12)) {
            let s = line_store(&scores);
            let cands: Vec<_> = (1..=scores.len() as u32).rev().map(EntityId).collect();
            let l = rank_tails(&s, EntityId(0), RelationId(0), &cands).unwrap();
            let mut tails: Vec<_> = l.entries.iter().map(|e| e.tail).collect();
            tails.sort();
            let mut expected = cands.clone();
            expected.sort();
            prop_assert_eq!(tails, expected);
            let ranks: Vec<_> = l.entries.iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=scores.len() as u32).collect::<Vec<_>>());
        }

        #[test]
        fn score_is_nonnegative(vals in prop::collection::vec(-1.0f64..1.0, 2 * 3 + 2 + 3 * 2)) {
            let s = EmbeddingStore::from_parts(
                3, 2, vals[..6].to_vec(), vals[6..8].to_vec(), vals[8..].to_vec()).unwrap();
            let f = score_triple(&s, &Triple::new(EntityId(0), RelationId(0), EntityId(1))).unwrap();
            prop_assert!(f >= 0.0);
        }
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            entity_dim: 8,
            relation_dim: 8,
            epochs: 15,
            batch_size: 32,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_store_unchanged() {
        let kb = generate_planted_kb(30, 5, 3, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small_config()
        };
        let init = init_embeddings(&kb.vocab, &cfg).unwrap();
        let (trained, hist) = train(&kb.triples, &kb.vocab, &cfg).unwrap();
        assert_eq!(trained, init);
        assert_eq!(hist.len(), cfg.epochs);
    }

    #[test]
    fn training_is_deterministic() {
        let kb = generate_planted_kb(30, 5, 3, 1).unwrap();
        let a = train(&kb.triples, &kb.vocab, &small_config()).unwrap();
        let b = train(&kb.triples, &kb.vocab, &small_config()).unwrap();
        assert_eq!(a, b);
        assert!(a.1.epochs.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn parallel_mode_trains_within_constraints() {
        let kb = generate_planted_kb(30, 5, 3, 1).unwrap();
        let cfg = TrainConfig {
            parallel: true,
            ..small_config()
        };
        let (store, hist) = train(&kb.triples, &kb.vocab, &cfg).unwrap();
        assert_eq!(hist.len(), cfg.epochs);
        assert!(max_constrained_norm(&store) <= 1.0 + 1e-9);
    }

    #[test]
    fn empty_triples_rejected() {
        let kb = generate_planted_kb(3, 2, 1, 1).unwrap();
        let empty = crate::ingest::TripleSet::new(&kb.vocab);
        assert!(train(&empty, &kb.vocab, &small_config()).is_err());
    }

    #[test]
    fn training_reduces_loss_on_planted_kb() {
        let kb = generate_planted_kb(100, 10, 5, 7).unwrap();
        let cfg = TrainConfig {
            entity_dim: 16,
            relation_dim: 16,
            margin: 1.0,
            epochs: 200,
            seed: 7,
            ..TrainConfig::default()
        };
        let init = init_embeddings(&kb.vocab, &cfg).unwrap();
        let mut worst_norm = 0.0f64;
        let (store, hist) = train_from(init, &kb.triples, &cfg, |_, s, _| {
            worst_norm = worst_norm.max(max_constrained_norm(s));
        })
        .unwrap();
        assert!(store.is_finite());
        assert!(hist.tail_mean(0.1).unwrap() <= hist.head_mean(0.1).unwrap());
        assert!(worst_norm <= 1.0 + 1e-9);
    }
}
