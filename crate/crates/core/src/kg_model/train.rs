use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::constraints::{enforce_all_norm_constraints, enforce_norm_constraints};
use super::grad::{gradients_with_loss, SparseGradient};
use super::sampling::sample_negative;
use super::store::{init_embeddings, EmbeddingStore};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::{Triple, TripleSet, Vocabulary};

/// Mean hinge loss of every epoch, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub epochs: Vec<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().copied()
    }

    /// Mean over the first `ceil(fraction * n)` epochs.
    pub fn head_mean(&self, fraction: f64) -> Option<f64> {
        let n = self.window(fraction)?;
        Some(self.epochs[..n].iter().sum::<f64>() / n as f64)
    }

    /// Mean over the last `ceil(fraction * n)` epochs.
    pub fn tail_mean(&self, fraction: f64) -> Option<f64> {
        let n = self.window(fraction)?;
        let tail = &self.epochs[self.epochs.len() - n..];
        Some(tail.iter().sum::<f64>() / n as f64)
    }

    fn window(&self, fraction: f64) -> Option<usize> {
        if self.epochs.is_empty() {
            return None;
        }
        let n = ((self.epochs.len() as f64) * fraction).ceil() as usize;
        Some(n.clamp(1, self.epochs.len()))
    }
}

/// Initializes a store from `config.seed` and trains it.
pub fn train(
    triples: &TripleSet,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<(EmbeddingStore, LossHistory)> {
    let store = init_embeddings(vocab, config)?;
    train_from(store, triples, config, |_, _, _| {})
}

/// Trains an existing store. `on_epoch(epoch, store, mean_loss)` runs after
/// each epoch's constraint sweep.
pub fn train_from<F>(
    mut store: EmbeddingStore,
    triples: &TripleSet,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<(EmbeddingStore, LossHistory)>
where
    F: FnMut(usize, &EmbeddingStore, f64),
{
    config.validate()?;
    if triples.is_empty() {
        return Err(Error::invalid("cannot train on an empty triple set"));
    }
    for t in triples.iter() {
        store.check_triple(t)?;
    }

    let n_entities = store.n_entities();
    let mut adam = AdamState::new(&store, config.beta1, config.beta2, config.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let positives = triples.as_slice();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut history = LossHistory::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(config.batch_size) {
            let mut pairs: Vec<(Triple, Triple)> = Vec::with_capacity(batch.len());
            for &i in batch {
                let pos = positives[i];
                let neg = sample_negative(&pos, n_entities, triples, &mut rng)?;
                pairs.push((pos, neg));
            }

            let (mut grad, batch_loss) = if config.parallel {
                batch_gradient_parallel(&store, &pairs, config.margin)?
            } else {
                batch_gradient(&store, &pairs, config.margin)?
            };
            epoch_loss += batch_loss;
            grad.scale(1.0 / pairs.len() as f64);
            adam_step(&mut store, &mut adam, &grad, config.learning_rate)?;

            let mut touched_e = BTreeSet::new();
            let mut touched_r = BTreeSet::new();
            for (p, n) in &pairs {
                touched_e.extend([p.head, p.tail, n.head, n.tail]);
                touched_r.insert(p.relation);
            }
            let touched_e: Vec<_> = touched_e.into_iter().collect();
            let touched_r: Vec<_> = touched_r.into_iter().collect();
            enforce_norm_constraints(&mut store, &touched_e, &touched_r);
        }

        // Entities outside a batch can still exceed ||e M_r|| <= 1 once M_r
        // has moved, so the whole store is swept once per epoch.
        enforce_all_norm_constraints(&mut store);
        if !store.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        let mean = epoch_loss / positives.len() as f64;
        history.epochs.push(mean);
        on_epoch(epoch, &store, mean);
    }
    Ok((store, history))
}

fn batch_gradient(
    store: &EmbeddingStore,
    pairs: &[(Triple, Triple)],
    margin: f64,
) -> Result<(SparseGradient, f64)> {
    let mut total = SparseGradient::default();
    let mut loss = 0.0;
    for (p, n) in pairs {
        let (g, l) = gradients_with_loss(store, p, n, margin)?;
        if l > 0.0 {
            total.accumulate(&g);
            loss += l;
        }
    }
    Ok((total, loss))
}

/// Same sum as [`batch_gradient`], reduced in a scheduler-dependent order.
fn batch_gradient_parallel(
    store: &EmbeddingStore,
    pairs: &[(Triple, Triple)],
    margin: f64,
) -> Result<(SparseGradient, f64)> {
    pairs
        .par_iter()
        .map(|(p, n)| gradients_with_loss(store, p, n, margin))
        .try_fold(
            || (SparseGradient::default(), 0.0),
            |(mut acc, loss), item| {
                let (g, l) = item?;
                acc.accumulate(&g);
                Ok::<_, Error>((acc, loss + l))
            },
        )
        .try_reduce(
            || (SparseGradient::default(), 0.0),
            |(mut a, la), (b, lb)| {
                a.accumulate(&b);
                Ok((a, la + lb))
            },
        )
}
