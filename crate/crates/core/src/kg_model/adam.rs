use std::collections::BTreeMap;

use super::grad::SparseGradient;
use super::store::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Moments {
    fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// Adam moments shaped like the store, one timestep per parameter group
/// (entities, relation vectors, projection matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    entities: Moments,
    relations: Moments,
    projections: Moments,
}

impl AdamState {
    pub fn new(store: &EmbeddingStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            entities: Moments::zeros(store.entity_data().len()),
            relations: Moments::zeros(store.relation_data().len()),
            projections: Moments::zeros(store.projection_data().len()),
        }
    }

    /// Timesteps of the entity, relation and projection groups.
    pub fn steps(&self) -> [u64; 3] {
        [
            self.entities.step,
            self.relations.step,
            self.projections.step,
        ]
    }

    pub fn second_moments_nonnegative(&self) -> bool {
        [&self.entities, &self.relations, &self.projections]
            .iter()
            .all(|g| g.v.iter().all(|&x| x >= 0.0))
    }
}

#[allow(clippy::too_many_arguments)]
fn update_group<K: Copy>(
    params: &mut [f64],
    moments: &mut Moments,
    rows: &BTreeMap<K, Vec<f64>>,
    row_len: usize,
    index: impl Fn(K) -> usize,
    lr: f64,
    (beta1, beta2, eps): (f64, f64, f64),
) {
    if rows.is_empty() {
        return;
    }
    moments.step += 1;
    let t = moments.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (&key, grad) in rows {
        let start = index(key) * row_len;
        let range = start..start + row_len;
        let theta = &mut params[range.clone()];
        let m = &mut moments.m[range.clone()];
        let v = &mut moments.v[range];
        for j in 0..row_len {
            let g = grad[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Bias-corrected Adam step over the rows present in `grads` only.
pub fn adam_step(
    store: &mut EmbeddingStore,
    state: &mut AdamState,
    grads: &SparseGradient,
    lr: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    let (k, d) = (store.entity_dim(), store.relation_dim());
    for (&id, row) in &grads.entities {
        store.check_entity(id)?;
        if row.len() != k {
            return Err(Error::ShapeMismatch {
                expected: k,
                found: row.len(),
            });
        }
    }
    for (&id, row) in &grads.relations {
        store.check_relation(id)?;
        if row.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                found: row.len(),
            });
        }
    }
    for (&id, row) in &grads.projections {
        store.check_relation(id)?;
        if row.len() != k * d {
            return Err(Error::ShapeMismatch {
                expected: k * d,
                found: row.len(),
            });
        }
    }

    let betas = (state.beta1, state.beta2, state.eps);
    let (ents, rels, projs) = store.params_mut();
    update_group(
        ents,
        &mut state.entities,
        &grads.entities,
        k,
        |id| id.index(),
        lr,
        betas,
    );
    update_group(
        rels,
        &mut state.relations,
        &grads.relations,
        d,
        |id| id.index(),
        lr,
        betas,
    );
    update_group(
        projs,
        &mut state.projections,
        &grads.projections,
        k * d,
        |id| id.index(),
        lr,
        betas,
    );
    Ok(())
}
