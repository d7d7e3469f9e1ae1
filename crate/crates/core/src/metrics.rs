//! Evaluation measures: average score difference, within-tolerance accuracy
//! and Kendall's tau-b averaged over `(subject, relation)` groups.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::ingest::{LabeledTriples, Triple};
use crate::scoring::ScoredTriple;

pub const DEFAULT_TOLERANCE: u8 = 2;

fn check_aligned(pred: &[u8], truth: &[u8]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("no scores to compare"));
    }
    Ok(())
}

/// Mean absolute difference between aligned score lists.
pub fn avg_score_difference(pred: &[u8], truth: &[u8]) -> Result<f64> {
    check_aligned(pred, truth)?;
    let total: u64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| p.abs_diff(*t) as u64)
        .sum();
    Ok(total as f64 / pred.len() as f64)
}

/// Fraction of aligned pairs differing by at most `tolerance`.
pub fn accuracy(pred: &[u8], truth: &[u8], tolerance: u8) -> Result<f64> {
    check_aligned(pred, truth)?;
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.abs_diff(**t) <= tolerance)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

fn tie_pairs(sorted: &[f64]) -> i64 {
    let mut total = 0i64;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts strict inversions while merge-sorting `v` ascending.
fn sort_counting_inversions(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_counting_inversions(left, bl) + sort_counting_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
///
/// `tau_b = (C - D) / sqrt((n0 - T_a)(n0 - T_b))` with `n0 = n(n-1)/2` and
/// `T_a`, `T_b` the tied pairs within each ranking.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedTau("fewer than two items"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("rankings must not contain NaN"));
    }
    let n = a.len() as i64;
    let n0 = n * (n - 1) / 2;

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let a_sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tied_a = tie_pairs(&a_sorted);
    let mut tied_both = 0i64;
    let mut run = 1i64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            tied_both += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied_both += run * (run - 1) / 2;

    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; bs.len()];
    let discordant = sort_counting_inversions(&mut bs, &mut buf);
    let tied_b = tie_pairs(&bs);

    if n0 == tied_a || n0 == tied_b {
        return Err(Error::UndefinedTau("a ranking is entirely tied"));
    }
    let numerator = n0 - tied_a - tied_b + tied_both - 2 * discordant;
    let denom = ((n0 - tied_a) as f64 * (n0 - tied_b) as f64).sqrt();
    Ok(numerator as f64 / denom)
}

/// Competition-style ranks from scores: higher score gives a better (lower)
/// rank, equal scores share a rank.
pub fn ranks_from_scores(scores: &[u8]) -> Vec<f64> {
    scores
        .iter()
        .map(|s| 1.0 + scores.iter().filter(|o| *o > s).count() as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub asd: f64,
    pub accuracy: f64,
    /// Mean tau over included groups; 0 when none qualified.
    pub mean_tau: f64,
    pub n_triples: usize,
    /// Groups with at least two triples and a defined tau.
    pub n_subjects_tau: usize,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "asd={:.6}", self.asd)?;
        writeln!(f, "accuracy={:.6}", self.accuracy)?;
        writeln!(f, "tau={:.6}", self.mean_tau)?;
        writeln!(f, "n_triples={}", self.n_triples)?;
        writeln!(f, "n_subjects_tau={}", self.n_subjects_tau)
    }
}

/// Scores every ground-truth triple against its prediction.
pub fn evaluate(pred: &[ScoredTriple], truth: &LabeledTriples) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::invalid("ground truth is empty"));
    }
    let by_triple: HashMap<Triple, u8> = pred.iter().map(|s| (s.triple(), s.score)).collect();

    let mut p = Vec::with_capacity(truth.len());
    let mut t = Vec::with_capacity(truth.len());
    let mut group_index: HashMap<(u32, u32), usize> = HashMap::new();
    let mut groups: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for rec in truth.iter() {
        let tr = rec.triple;
        let score = *by_triple.get(&tr).ok_or(Error::MissingPrediction {
            head: tr.head.index(),
            relation: tr.relation.index(),
            tail: tr.tail.index(),
        })?;
        p.push(score);
        t.push(rec.score);
        let slot = *group_index
            .entry((tr.head.0, tr.relation.0))
            .or_insert_with(|| {
                groups.push((Vec::new(), Vec::new()));
                groups.len() - 1
            });
        groups[slot].0.push(score);
        groups[slot].1.push(rec.score);
    }

    let mut tau_sum = 0.0;
    let mut included = 0usize;
    for (gp, gt) in &groups {
        if gp.len() < 2 {
            continue;
        }
        match kendall_tau(&ranks_from_scores(gp), &ranks_from_scores(gt)) {
            Ok(tau) => {
                tau_sum += tau;
                included += 1;
            }
            Err(Error::UndefinedTau(_)) => {}
            Err(e) => return Err(e),
        }
    }

    Ok(EvalReport {
        asd: avg_score_difference(&p, &t)?,
        accuracy: accuracy(&p, &t, DEFAULT_TOLERANCE)?,
        mean_tau: if included > 0 {
            tau_sum / included as f64
        } else {
            0.0
        },
        n_triples: p.len(),
        n_subjects_tau: included,
    })
}
