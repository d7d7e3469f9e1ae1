use std::collections::BTreeMap;

use super::store::{hinge_term, EmbeddingStore};
use crate::error::{Error, Result};
use crate::ingest::{EntityId, RelationId, Triple};

/// Row-sparse gradient over an [`EmbeddingStore`]. Rows are kept in id
/// order so that accumulation and updates are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGradient {
    pub entities: BTreeMap<EntityId, Vec<f64>>,
    pub relations: BTreeMap<RelationId, Vec<f64>>,
    /// Row-major `k x d` blocks.
    pub projections: BTreeMap<RelationId, Vec<f64>>,
}

fn add_row<K: Ord>(map: &mut BTreeMap<K, Vec<f64>>, key: K, len: usize) -> &mut Vec<f64> {
    map.entry(key).or_insert_with(|| vec![0.0; len])
}

fn merge_rows<K: Ord + Copy>(into: &mut BTreeMap<K, Vec<f64>>, from: &BTreeMap<K, Vec<f64>>) {
    for (k, row) in from {
        match into.get_mut(k) {
            Some(acc) => acc.iter_mut().zip(row).for_each(|(a, b)| *a += b),
            None => {
                into.insert(*k, row.clone());
            }
        }
    }
}

impl SparseGradient {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty() && self.projections.is_empty()
    }

    pub fn accumulate(&mut self, other: &SparseGradient) {
        merge_rows(&mut self.entities, &other.entities);
        merge_rows(&mut self.relations, &other.relations);
        merge_rows(&mut self.projections, &other.projections);
    }

    pub fn scale(&mut self, factor: f64) {
        self.entities
            .values_mut()
            .chain(self.relations.values_mut())
            .chain(self.projections.values_mut())
            .flat_map(|row| row.iter_mut())
            .for_each(|x| *x *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.entities
            .values()
            .chain(self.relations.values())
            .chain(self.projections.values())
            .flatten()
            .all(|x| x.is_finite())
    }

    /// Adds `sign * grad f_r(h, t)` for one triple.
    ///
    /// With `u = h M + r - t M`: `df/dh = 2 M u`, `df/dt = -2 M u`,
    /// `df/dr = 2 u`, `df/dM = 2 (h - t) u^T`.
    fn add_score_gradient(&mut self, store: &EmbeddingStore, t: &Triple, sign: f64) {
        let (k, d) = (store.entity_dim(), store.relation_dim());
        let u = store.residual(t);
        let m = store.projection(t.relation);
        let h = store.entity(t.head).to_vec();
        let tail = store.entity(t.tail).to_vec();

        let mu: Vec<f64> = m
            .chunks_exact(d)
            .map(|row| 2.0 * row.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>())
            .collect();

        let gh = add_row(&mut self.entities, t.head, k);
        gh.iter_mut().zip(&mu).for_each(|(g, x)| *g += sign * x);
        let gt = add_row(&mut self.entities, t.tail, k);
        gt.iter_mut().zip(&mu).for_each(|(g, x)| *g -= sign * x);

        let gr = add_row(&mut self.relations, t.relation, d);
        gr.iter_mut()
            .zip(&u)
            .for_each(|(g, x)| *g += sign * 2.0 * x);

        let gm = add_row(&mut self.projections, t.relation, k * d);
        for (i, row) in gm.chunks_exact_mut(d).enumerate() {
            let diff = 2.0 * sign * (h[i] - tail[i]);
            row.iter_mut().zip(&u).for_each(|(g, x)| *g += diff * x);
        }
    }
}

/// Hinge value `[f(pos) + margin - f(neg)]_+` for a positive/negative pair.
pub fn hinge_loss(store: &EmbeddingStore, pos: &Triple, neg: &Triple, margin: f64) -> Result<f64> {
    let f_pos = super::score_triple(store, pos)?;
    let f_neg = super::score_triple(store, neg)?;
    Ok(hinge_term(f_pos, f_neg, margin))
}

/// Analytic gradient of the hinge term; empty when the hinge is inactive.
pub fn gradients(
    store: &EmbeddingStore,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
) -> Result<SparseGradient> {
    Ok(gradients_with_loss(store, pos, neg, margin)?.0)
}

pub(crate) fn gradients_with_loss(
    store: &EmbeddingStore,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
) -> Result<(SparseGradient, f64)> {
    if pos.relation != neg.relation {
        return Err(Error::RelationMismatch);
    }
    let loss = hinge_loss(store, pos, neg, margin)?;
    let mut grad = SparseGradient::default();
    if loss > 0.0 {
        grad.add_score_gradient(store, pos, 1.0);
        grad.add_score_gradient(store, neg, -1.0);
    }
    Ok((grad, loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> EmbeddingStore {
        EmbeddingStore::from_parts(
            2,
            2,
            vec![0.1, 0.4, -0.3, 0.2, 0.5, -0.5],
            vec![0.2, -0.1],
            vec![0.9, 0.1, -0.2, 0.8],
        )
        .unwrap()
    }

    fn t(h: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(0), EntityId(tl))
    }

    #[test]
    fn inactive_hinge_has_no_gradient() {
        let s = store();
        let g = gradients(&s, &t(0, 1), &t(0, 2), 0.0).unwrap();
        let l = hinge_loss(&s, &t(0, 1), &t(0, 2), 0.0).unwrap();
        if l == 0.0 {
            assert!(g.is_empty());
        }
        let g = gradients(&s, &t(0, 1), &t(0, 2), -100.0).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn identical_pair_cancels() {
        let s = store();
        let g = gradients(&s, &t(0, 1), &t(0, 1), 0.0).unwrap();
        assert!(g.is_empty());
        // with a positive margin the hinge is active but the terms cancel
        let g = gradients(&s, &t(0, 1), &t(0, 1), 1.0).unwrap();
        assert!(g
            .entities
            .values()
            .chain(g.relations.values())
            .chain(g.projections.values())
            .flatten()
            .all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn relation_mismatch_is_rejected() {
        let s = EmbeddingStore::from_parts(2, 2, vec![0.0; 4], vec![0.0; 4], vec![0.0; 8]).unwrap();
        let neg = Triple::new(EntityId(0), RelationId(1), EntityId(1));
        assert!(matches!(
            gradients(&s, &t(0, 1), &neg, 1.0),
            Err(Error::RelationMismatch)
        ));
    }
}
