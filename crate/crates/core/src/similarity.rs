//! Pretrained word vectors and the similarity distance used for profession
//! rank adjustment.
//!
//! Similarity distance is `(1 - cosine) / 2`, so it lives in `[0, 1]` with
//! `0.5` for unrelated (orthogonal) terms. Terms without a vector get the
//! fixed distance [`OOV_DISTANCE`], which is also `0.5`.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Distance assigned whenever either term has no vector.
pub const OOV_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Returns `false` (and leaves the store unchanged) for a duplicate token.
    ///
    /// Panics if `vector` does not have the store's dimension.
    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> bool {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        if self.vectors.contains_key(&token) {
            return false;
        }
        self.vectors.insert(token, vector);
        true
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn lookup_word(&self, word: &str) -> Option<&[f64]> {
        self.get(word).or_else(|| self.get(&word.to_lowercase()))
    }

    /// Resolves a possibly multi-word term to a vector.
    ///
    /// Tries the term as written (hyphens intact), then with whitespace
    /// joined by `_`, each also lowercased. Failing that, the term is split
    /// on whitespace, `-` and `_` and the vectors of the words that resolve
    /// are averaged. Zero vectors count as unresolved.
    pub fn resolve(&self, term: &str) -> Option<Cow<'_, [f64]>> {
        let joined = term.split_whitespace().collect::<Vec<_>>().join("_");
        let direct = self.lookup_word(term).or_else(|| self.lookup_word(&joined));
        if let Some(v) = direct {
            return (norm(v) > 0.0).then_some(Cow::Borrowed(v));
        }

        let words: Vec<&[f64]> = term
            .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
            .filter(|w| !w.is_empty())
            .filter_map(|w| self.lookup_word(w))
            .collect();
        if words.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; self.dim];
        for w in &words {
            for (m, x) in mean.iter_mut().zip(w.iter()) {
                *m += x;
            }
        }
        let n = words.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        (norm(&mean) > 0.0).then_some(Cow::Owned(mean))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn distance_from_vectors(u: Option<&[f64]>, v: Option<&[f64]>) -> f64 {
    match (u, v) {
        (Some(u), Some(v)) => cosine(u, v)
            .map(|c| ((1.0 - c) / 2.0).clamp(0.0, 1.0))
            .unwrap_or(OOV_DISTANCE),
        _ => OOV_DISTANCE,
    }
}

/// Similarity distance between two terms; never fails.
pub fn similarity_distance(store: &VectorStore, a: &str, b: &str) -> f64 {
    let u = store.resolve(a);
    if a == b {
        return if u.is_some() { 0.0 } else { OOV_DISTANCE };
    }
    let v = store.resolve(b);
    distance_from_vectors(u.as_deref(), v.as_deref())
}

/// Dense symmetric matrix of pairwise similarity distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.terms.len() + j]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Distance between two listed terms, `None` if either is not listed.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }
}

pub fn build_similarity_matrix(store: &VectorStore, terms: &[String]) -> Result<SimilarityMatrix> {
    if terms.is_empty() {
        return Err(Error::invalid("similarity matrix needs at least one term"));
    }
    let mut index = HashMap::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        if index.insert(t.clone(), i).is_some() {
            return Err(Error::invalid(format!("duplicate term {t:?}")));
        }
    }

    let n = terms.len();
    let resolved: Vec<_> = terms.iter().map(|t| store.resolve(t)).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = if resolved[i].is_some() {
            0.0
        } else {
            OOV_DISTANCE
        };
        for j in (i + 1)..n {
            let sd = distance_from_vectors(resolved[i].as_deref(), resolved[j].as_deref());
            values[i * n + j] = sd;
            values[j * n + i] = sd;
        }
    }
    Ok(SimilarityMatrix {
        terms: terms.to_vec(),
        index,
        values,
    })
}
