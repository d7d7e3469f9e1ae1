use super::store::{l2, project, EmbeddingStore};
use crate::ingest::{EntityId, RelationId};

/// Vectors are rescaled only once their norm exceeds `1 + NORM_SLACK`, which
/// keeps unit-normalized initial vectors bitwise untouched.
pub const NORM_SLACK: f64 = 1e-12;

fn clip_unit(v: &mut [f64]) {
    let n = l2(v);
    if n > 1.0 + NORM_SLACK {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Clips the listed entity and relation vectors into the unit ball, then for
/// each listed relation rescales its projection matrix uniformly so that
/// `||e M_r|| <= 1` for every listed entity `e`.
pub fn enforce_norm_constraints(
    store: &mut EmbeddingStore,
    entities: &[EntityId],
    relations: &[RelationId],
) {
    for &e in entities {
        clip_unit(store.entity_mut(e));
    }
    let d = store.relation_dim();
    for &r in relations {
        clip_unit(store.relation_mut(r));
        let m = store.projection(r);
        let worst = entities
            .iter()
            .map(|&e| l2(&project(store.entity(e), m, d).expect("store shapes conform")))
            .fold(0.0f64, f64::max);
        if worst > 1.0 + NORM_SLACK {
            store.projection_mut(r).iter_mut().for_each(|x| *x /= worst);
        }
    }
}

/// Applies [`enforce_norm_constraints`] to every entity and relation.
pub fn enforce_all_norm_constraints(store: &mut EmbeddingStore) {
    let entities: Vec<_> = (0..store.n_entities() as u32).map(EntityId).collect();
    let relations: Vec<_> = (0..store.n_relations() as u32).map(RelationId).collect();
    enforce_norm_constraints(store, &entities, &relations);
}

/// Largest norm over all five constrained families: `||h||`, `||t||`, `||r||`,
/// and `||e M_r||` for every entity/relation pair in the store.
pub fn max_constrained_norm(store: &EmbeddingStore) -> f64 {
    let d = store.relation_dim();
    let mut worst = 0.0f64;
    for e in 0..store.n_entities() as u32 {
        worst = worst.max(l2(store.entity(EntityId(e))));
    }
    for r in 0..store.n_relations() as u32 {
        let r = RelationId(r);
        worst = worst.max(l2(store.relation(r)));
        let m = store.projection(r);
        for e in 0..store.n_entities() as u32 {
            let p = project(store.entity(EntityId(e)), m, d).expect("store shapes conform");
            worst = worst.max(l2(&p));
        }
    }
    worst
}
