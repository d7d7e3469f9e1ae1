use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{EntityId, Triple, TripleSet};

/// Draws beyond the first one before giving up.
pub const NEGATIVE_RETRIES: usize = 100;

/// Corrupts the head or the tail (probability one half each) with a uniform
/// entity, resampling while the corrupted triple is a known positive.
pub fn sample_negative<R: Rng + ?Sized>(
    triple: &Triple,
    n_entities: usize,
    positives: &TripleSet,
    rng: &mut R,
) -> Result<Triple> {
    if n_entities == 0 {
        return Err(Error::invalid("cannot sample negatives without entities"));
    }
    for _ in 0..=NEGATIVE_RETRIES {
        let replacement = EntityId(rng.random_range(0..n_entities) as u32);
        let candidate = if rng.random_bool(0.5) {
            Triple {
                head: replacement,
                ..*triple
            }
        } else {
            Triple {
                tail: replacement,
                ..*triple
            }
        };
        if !positives.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::NegativeSamplingExhausted {
        attempts: NEGATIVE_RETRIES + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RelationId, Vocabulary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn setup(n: usize) -> (Vocabulary, RelationId) {
        let mut v = Vocabulary::new();
        for i in 0..n {
            v.intern_entity(&format!("{}", (b'A' + i as u8) as char));
        }
        let r = v.intern_relation("r");
        (v, r)
    }

    #[test]
    fn corruptions_of_single_fact() {
        let (v, r) = setup(3);
        let (a, b, c) = (EntityId(0), EntityId(1), EntityId(2));
        let mut pos = TripleSet::new(&v);
        let fact = Triple::new(a, r, b);
        pos.insert(fact);

        // enumerate head and tail corruptions, filter positives
        let mut allowed = HashSet::new();
        for e in [a, b, c] {
            for t in [Triple { head: e, ..fact }, Triple { tail: e, ..fact }] {
                if !pos.contains(&t) {
                    allowed.insert(t);
                }
            }
        }
        assert_eq!(
            allowed,
            HashSet::from([
                Triple::new(b, r, b),
                Triple::new(c, r, b),
                Triple::new(a, r, a),
                Triple::new(a, r, c)
            ])
        );

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = HashSet::new();
        for _ in 0..400 {
            let neg = sample_negative(&fact, 3, &pos, &mut rng).unwrap();
            assert!(allowed.contains(&neg));
            seen.insert(neg);
        }
        assert_eq!(seen, allowed);
    }

    #[test]
    fn seeded_sequences_repeat() {
        let (v, r) = setup(3);
        let mut pos = TripleSet::new(&v);
        let fact = Triple::new(EntityId(0), r, EntityId(1));
        pos.insert(fact);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_negative(&fact, 3, &pos, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
    }

    #[test]
    fn complete_graph_exhausts_retries() {
        let (v, r) = setup(2);
        let mut pos = TripleSet::new(&v);
        for h in 0..2 {
            for t in 0..2 {
                pos.insert(Triple::new(EntityId(h), r, EntityId(t)));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fact = Triple::new(EntityId(0), r, EntityId(1));
        assert!(matches!(
            sample_negative(&fact, 2, &pos, &mut rng),
            Err(Error::NegativeSamplingExhausted { .. })
        ));
    }

    proptest! {
        #[test]
        fn never_emits_a_positive(
            n in 4usize..9,
            edges in prop::collection::vec((0u32..9, 0u32..9), 1..7),
            seed in any::<u64>(),
        ) {
            let (v, r) = setup(n);
            let mut pos = TripleSet::new(&v);
            for (h, t) in edges {
                pos.insert(Triple::new(EntityId(h % n as u32), r, EntityId(t % n as u32)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for fact in pos.iter() {
                let neg = sample_negative(fact, n, &pos, &mut rng).unwrap();
                prop_assert!(!pos.contains(&neg));
                prop_assert_eq!(neg.relation, fact.relation);
                prop_assert!(neg.head == fact.head || neg.tail == fact.tail);
            }
        }
    }
}
