use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::{EntityId, RelationId, Triple, Vocabulary};

/// TransR parameters: entity vectors in `R^k`, relation vectors in `R^d`
/// and one row-major `k x d` projection matrix per relation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    k: usize,
    d: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
    projections: Vec<f64>,
}

impl EmbeddingStore {
    /// Assembles a store from flat parameter arrays (entity-major,
    /// relation-major, then row-major matrices per relation).
    pub fn from_parts(
        k: usize,
        d: usize,
        entities: Vec<f64>,
        relations: Vec<f64>,
        projections: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid("embedding dimensions must be positive"));
        }
        if !entities.len().is_multiple_of(k) {
            return Err(Error::ShapeMismatch {
                expected: entities.len() / k * k,
                found: entities.len(),
            });
        }
        if !relations.len().is_multiple_of(d) {
            return Err(Error::ShapeMismatch {
                expected: relations.len() / d * d,
                found: relations.len(),
            });
        }
        let n_rel = relations.len() / d;
        if projections.len() != n_rel * k * d {
            return Err(Error::ShapeMismatch {
                expected: n_rel * k * d,
                found: projections.len(),
            });
        }
        if entities
            .iter()
            .chain(&relations)
            .chain(&projections)
            .any(|x| !x.is_finite())
        {
            return Err(Error::invalid("embedding parameters must be finite"));
        }
        Ok(Self {
            k,
            d,
            entities,
            relations,
            projections,
        })
    }

    pub fn entity_dim(&self) -> usize {
        self.k
    }

    pub fn relation_dim(&self) -> usize {
        self.d
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len() / self.k
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len() / self.d
    }

    pub fn entity(&self, id: EntityId) -> &[f64] {
        let k = self.k;
        &self.entities[id.index() * k..(id.index() + 1) * k]
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut [f64] {
        let k = self.k;
        &mut self.entities[id.index() * k..(id.index() + 1) * k]
    }

    pub fn relation(&self, id: RelationId) -> &[f64] {
        let d = self.d;
        &self.relations[id.index() * d..(id.index() + 1) * d]
    }

    pub fn relation_mut(&mut self, id: RelationId) -> &mut [f64] {
        let d = self.d;
        &mut self.relations[id.index() * d..(id.index() + 1) * d]
    }

    /// Row-major `k x d` projection matrix of a relation.
    pub fn projection(&self, id: RelationId) -> &[f64] {
        let kd = self.k * self.d;
        &self.projections[id.index() * kd..(id.index() + 1) * kd]
    }

    pub fn projection_mut(&mut self, id: RelationId) -> &mut [f64] {
        let kd = self.k * self.d;
        &mut self.projections[id.index() * kd..(id.index() + 1) * kd]
    }

    pub fn entity_data(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_data(&self) -> &[f64] {
        &self.relations
    }

    pub fn projection_data(&self) -> &[f64] {
        &self.projections
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (
            &mut self.entities,
            &mut self.relations,
            &mut self.projections,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.entities
            .iter()
            .chain(&self.relations)
            .chain(&self.projections)
            .all(|x| x.is_finite())
    }

    pub(crate) fn check_entity(&self, id: EntityId) -> Result<()> {
        if id.index() < self.n_entities() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "entity",
                id: id.index(),
                len: self.n_entities(),
            })
        }
    }

    pub(crate) fn check_relation(&self, id: RelationId) -> Result<()> {
        if id.index() < self.n_relations() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "relation",
                id: id.index(),
                len: self.n_relations(),
            })
        }
    }

    pub(crate) fn check_triple(&self, t: &Triple) -> Result<()> {
        self.check_entity(t.head)?;
        self.check_relation(t.relation)?;
        self.check_entity(t.tail)
    }

    /// `h M_r + r - t M_r` for a validated triple.
    pub(crate) fn residual(&self, t: &Triple) -> Vec<f64> {
        let m = self.projection(t.relation);
        let mut u = self.relation(t.relation).to_vec();
        let (h, tail) = (self.entity(t.head), self.entity(t.tail));
        for (i, (hi, ti)) in h.iter().zip(tail).enumerate() {
            let diff = hi - ti;
            let row = &m[i * self.d..(i + 1) * self.d];
            for (uj, mij) in u.iter_mut().zip(row) {
                *uj += diff * mij;
            }
        }
        u
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Row-vector projection `vec * M` where `M` is row-major with `cols` columns.
pub fn project(vec: &[f64], matrix: &[f64], cols: usize) -> Result<Vec<f64>> {
    if cols == 0 || matrix.len() != vec.len() * cols {
        return Err(Error::ShapeMismatch {
            expected: vec.len() * cols,
            found: matrix.len(),
        });
    }
    let mut out = vec![0.0; cols];
    for (x, row) in vec.iter().zip(matrix.chunks_exact(cols)) {
        for (o, m) in out.iter_mut().zip(row) {
            *o += x * m;
        }
    }
    Ok(out)
}

/// TransR plausibility `||h M_r + r - t M_r||^2`; lower is more plausible.
pub fn score_triple(store: &EmbeddingStore, triple: &Triple) -> Result<f64> {
    store.check_triple(triple)?;
    Ok(store.residual(triple).iter().map(|x| x * x).sum())
}

/// `max(0, f_pos + margin - f_neg)`.
#[inline]
pub fn hinge_term(f_pos: f64, f_neg: f64, margin: f64) -> f64 {
    (f_pos + margin - f_neg).max(0.0)
}

fn unit_uniform(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let bound = 6.0 / (dim as f64).sqrt();
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-bound..bound)).collect();
        let n = l2(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform `[-6/sqrt(dim), 6/sqrt(dim)]` vectors rescaled to unit norm, and
/// identity-patterned projection matrices.
pub fn init_embeddings(vocab: &Vocabulary, config: &TrainConfig) -> Result<EmbeddingStore> {
    let (k, d) = (config.entity_dim, config.relation_dim);
    if k == 0 || d == 0 {
        return Err(Error::invalid("embedding dimensions must be positive"));
    }
    if vocab.n_entities() == 0 {
        return Err(Error::invalid("vocabulary has no entities"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let entities: Vec<f64> = (0..vocab.n_entities())
        .flat_map(|_| unit_uniform(&mut rng, k))
        .collect();
    let relations: Vec<f64> = (0..vocab.n_relations())
        .flat_map(|_| unit_uniform(&mut rng, d))
        .collect();
    let mut identity = vec![0.0; k * d];
    for i in 0..k.min(d) {
        identity[i * d + i] = 1.0;
    }
    let projections = identity.repeat(vocab.n_relations());
    Ok(EmbeddingStore {
        k,
        d,
        entities,
        relations,
        projections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(h: &[f64], r: &[f64], t: &[f64], m: &[f64]) -> EmbeddingStore {
        let k = h.len();
        let d = r.len();
        let mut ents = h.to_vec();
        ents.extend_from_slice(t);
        EmbeddingStore::from_parts(k, d, ents, r.to_vec(), m.to_vec()).unwrap()
    }

    const T01: Triple = Triple {
        head: EntityId(0),
        relation: RelationId(0),
        tail: EntityId(1),
    };

    #[test]
    fn projection_cases() {
        assert_eq!(
            project(&[1.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 2).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            project(&[1.0, 1.0], &[1.0, 0.0, 0.0, 0.0], 2).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            project(&[0.0, 0.0], &[0.3, -2.0, 5.0, 1.5], 2).unwrap(),
            vec![0.0, 0.0]
        );
        // 3-dim entity into 2-dim relation space
        assert_eq!(
            project(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2).unwrap(),
            vec![4.0, 5.0]
        );
        assert!(project(&[1.0, 2.0], &[1.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn score_cases() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let s = tiny(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &id);
        assert_eq!(score_triple(&s, &T01).unwrap(), 0.0);
        let s = tiny(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0], &id);
        assert_eq!(score_triple(&s, &T01).unwrap(), 5.0);
        let swapped = Triple::new(EntityId(1), RelationId(0), EntityId(0));
        assert_eq!(score_triple(&s, &swapped).unwrap(), 5.0);
        let bad = Triple::new(EntityId(2), RelationId(0), EntityId(0));
        assert!(matches!(
            score_triple(&s, &bad),
            Err(Error::InvalidId { .. })
        ));
    }

    #[test]
    fn hinge_cases() {
        assert_eq!(hinge_term(1.0, 5.0, 2.0), 0.0);
        assert_eq!(hinge_term(3.0, 2.0, 1.0), 2.0);
        for x in [0.0, 0.7, 13.0] {
            assert_eq!(hinge_term(x, x, 0.0), 0.0);
        }
    }

    fn vocab(n: usize, r: usize) -> Vocabulary {
        let mut v = Vocabulary::new();
        for i in 0..n {
            v.intern_entity(&format!("e{i}"));
        }
        for i in 0..r {
            v.intern_relation(&format!("r{i}"));
        }
        v
    }

    #[test]
    fn init_is_deterministic_and_unit_norm() {
        let v = vocab(20, 3);
        let cfg = TrainConfig {
            entity_dim: 8,
            relation_dim: 8,
            seed: 99,
            ..TrainConfig::default()
        };
        let a = init_embeddings(&v, &cfg).unwrap();
        let b = init_embeddings(&v, &cfg).unwrap();
        assert_eq!(a, b);
        for i in 0..20 {
            let e = a.entity(EntityId(i));
            assert!((l2(e) - 1.0).abs() < 1e-12);
            let p = project(e, a.projection(RelationId(0)), 8).unwrap();
            assert_eq!(p, e);
        }
        for r in 0..3 {
            assert!((l2(a.relation(RelationId(r))) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_rectangular_identity() {
        let v = vocab(2, 1);
        let cfg = TrainConfig {
            entity_dim: 3,
            relation_dim: 2,
            ..TrainConfig::default()
        };
        let s = init_embeddings(&v, &cfg).unwrap();
        assert_eq!(s.projection(RelationId(0)), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let zero = TrainConfig {
            entity_dim: 0,
            ..TrainConfig::default()
        };
        assert!(init_embeddings(&v, &zero).is_err());
        assert!(init_embeddings(&Vocabulary::new(), &cfg).is_err());
    }
}
