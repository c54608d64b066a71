//! Baseline batch-selection strategies and the shared [`Batch`] type.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_builder::compute_confidences;
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::scores::ScoreMatrix;

/// Why an example was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Midpoint of a shortest straddling path.
    Bisection,
    /// Uniform draw because no straddling path existed (S2 only).
    FallbackRandom,
    /// Least-confident unlabeled example because bisection was impossible.
    FallbackConfidence,
    /// Uniform initial round.
    SeedRound,
    /// Picked by a one-shot baseline ranking.
    Baseline,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Bisection => "bisection",
            Provenance::FallbackRandom => "fallback-random",
            Provenance::FallbackConfidence => "fallback-confidence",
            Provenance::SeedRound => "seed-round",
            Provenance::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered selection with one provenance tag per id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Batch {
    pub ids: Vec<ExampleId>,
    pub provenance: Vec<Provenance>,
}

impl Batch {
    pub fn push(&mut self, id: ExampleId, tag: Provenance) {
        self.ids.push(id);
        self.provenance.push(tag);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn baseline(ids: Vec<ExampleId>) -> Self {
        let provenance = vec![Provenance::Baseline; ids.len()];
        Self { ids, provenance }
    }
}

/// Selection strategies known to the runner and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Galaxy,
    Confidence,
    /// Most likely positive.
    Mlp,
    Random,
    /// S2 on a static k-nearest-neighbor graph.
    S2,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Galaxy => "galaxy",
            Strategy::Confidence => "confidence",
            Strategy::Mlp => "mlp",
            Strategy::Random => "random",
            Strategy::S2 => "s2",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galaxy" => Ok(Strategy::Galaxy),
            "confidence" => Ok(Strategy::Confidence),
            "mlp" => Ok(Strategy::Mlp),
            "random" => Ok(Strategy::Random),
            "s2" => Ok(Strategy::S2),
            other => Err(Error::input(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Heap entry ordered so the heap root is the worst of the kept candidates.
#[derive(PartialEq)]
struct Candidate {
    key: f64,
    id: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.id.cmp(&other.id))
    }
}

/// The `b` unlabeled ids with the smallest `(key, id)`, ascending. O(N log b).
fn smallest_b(keys: impl Iterator<Item = (usize, f64)>, b: usize) -> Vec<ExampleId> {
    if b == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(b + 1);
    for (id, key) in keys {
        let c = Candidate { key, id };
        if heap.len() < b {
            heap.push(c);
        } else if c < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(c);
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| ExampleId(c.id)).collect()
}

fn clip_batch(b: usize, unlabeled: usize) -> Result<usize> {
    if unlabeled == 0 && b > 0 {
        return Err(Error::PoolExhausted);
    }
    if b > unlabeled {
        log::warn!("batch size {b} exceeds {unlabeled} unlabeled examples; clipping");
    }
    Ok(b.min(unlabeled))
}

/// The `b` least-confident unlabeled examples, ties by ascending id.
pub fn confidence_sampling_batch(s: &ScoreMatrix, labeled: &LabeledSet, b: usize) -> Result<Batch> {
    labeled.validate(s.n(), s.k())?;
    let b = clip_batch(b, s.n() - labeled.len())?;
    let q = compute_confidences(s);
    let keys = q
        .iter()
        .enumerate()
        .filter(|(i, _)| !labeled.contains(ExampleId(*i)))
        .map(|(i, &qi)| (i, qi));
    Ok(Batch::baseline(smallest_b(keys, b)))
}

/// The `b` unlabeled examples with the largest in-distribution probability
/// `max_{k in id_classes} p_k`, ties by ascending id.
pub fn most_likely_positive_batch(
    s: &ScoreMatrix,
    labeled: &LabeledSet,
    b: usize,
    id_classes: &[ClassId],
) -> Result<Batch> {
    labeled.validate(s.n(), s.k())?;
    if id_classes.is_empty() {
        return Err(Error::input("id_classes must be nonempty"));
    }
    let ood = ClassId::ood(s.k());
    for &c in id_classes {
        if c.0 >= s.k() {
            return Err(Error::input(format!("class {c} out of range for K={}", s.k())));
        }
        if c == ood {
            return Err(Error::input(format!(
                "id_classes must exclude the out-of-distribution class {ood}"
            )));
        }
    }
    let b = clip_batch(b, s.n() - labeled.len())?;
    let keys = (0..s.n())
        .filter(|&i| !labeled.contains(ExampleId(i)))
        .map(|i| {
            let row = s.row(i);
            let best = id_classes
                .iter()
                .map(|c| f64::from(row[c.0]))
                .fold(f64::NEG_INFINITY, f64::max);
            (i, -best)
        });
    Ok(Batch::baseline(smallest_b(keys, b)))
}

/// `b` unlabeled ids drawn uniformly without replacement.
pub fn random_batch<R: Rng + ?Sized>(labeled: &LabeledSet, n: usize, b: usize, rng: &mut R) -> Result<Batch> {
    let unlabeled = labeled.unlabeled(n);
    let b = clip_batch(b, unlabeled.len())?;
    let picks = rand::seq::index::sample(rng, unlabeled.len(), b);
    Ok(Batch::baseline(picks.into_iter().map(|i| unlabeled[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(v: &[usize]) -> Vec<ExampleId> {
        v.iter().copied().map(ExampleId).collect()
    }

    #[test]
    fn confidence_picks_least_confident() {
        let s = ScoreMatrix::from_rows(&[[0.9f32, 0.1], [0.51, 0.49], [0.7, 0.3]]).unwrap();
        let b = confidence_sampling_batch(&s, &LabeledSet::new(), 1).unwrap();
        assert_eq!(b.ids, ids(&[1]));
    }

    #[test]
    fn confidence_ties_by_id() {
        let s = ScoreMatrix::from_rows(&[[0.6f32, 0.4], [0.6, 0.4], [0.6, 0.4]]).unwrap();
        let b = confidence_sampling_batch(&s, &LabeledSet::new(), 2).unwrap();
        assert_eq!(b.ids, ids(&[0, 1]));
    }

    #[test]
    fn confidence_skips_labeled_and_clips() {
        let s = ScoreMatrix::from_rows(&[[0.9f32, 0.1], [0.51, 0.49], [0.7, 0.3]]).unwrap();
        let l = LabeledSet::from_pairs([(ExampleId(1), ClassId(0))]).unwrap();
        let b = confidence_sampling_batch(&s, &l, 5).unwrap();
        assert_eq!(b.ids, ids(&[2, 0]));
    }

    #[test]
    fn exhausted_pool_errors() {
        let s = ScoreMatrix::from_rows(&[[0.9f32, 0.1]]).unwrap();
        let l = LabeledSet::from_pairs([(ExampleId(0), ClassId(0))]).unwrap();
        assert!(matches!(confidence_sampling_batch(&s, &l, 1), Err(Error::PoolExhausted)));
        assert!(confidence_sampling_batch(&s, &l, 0).unwrap().is_empty());
    }

    #[test]
    fn mlp_binary() {
        let s = ScoreMatrix::from_rows(&[[0.9f32, 0.1], [0.2, 0.8], [0.6, 0.4]]).unwrap();
        let b = most_likely_positive_batch(&s, &LabeledSet::new(), 1, &[ClassId(0)]).unwrap();
        assert_eq!(b.ids, ids(&[0]));
        let all = most_likely_positive_batch(&s, &LabeledSet::new(), 3, &[ClassId(0)]).unwrap();
        assert_eq!(all.ids, ids(&[0, 2, 1]));
    }

    #[test]
    fn mlp_multiclass_uses_max_over_id_classes() {
        let s = ScoreMatrix::from_rows(&[[0.5f32, 0.1, 0.4], [0.1, 0.45, 0.45], [0.2, 0.2, 0.6]]).unwrap();
        let b = most_likely_positive_batch(&s, &LabeledSet::new(), 1, &[ClassId(0), ClassId(1)]).unwrap();
        assert_eq!(b.ids, ids(&[0]));
    }

    #[test]
    fn mlp_rejects_ood_or_empty_classes() {
        let s = ScoreMatrix::from_rows(&[[0.5f32, 0.5]]).unwrap();
        assert!(most_likely_positive_batch(&s, &LabeledSet::new(), 1, &[]).is_err());
        assert!(most_likely_positive_batch(&s, &LabeledSet::new(), 1, &[ClassId(1)]).is_err());
    }

    #[test]
    fn random_full_unlabeled_set() {
        let l = LabeledSet::from_pairs([(ExampleId(0), ClassId(0))]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut b = random_batch(&l, 5, 4, &mut rng).unwrap().ids;
        b.sort();
        assert_eq!(b, ids(&[1, 2, 3, 4]));
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let l = LabeledSet::new();
        let a = random_batch(&l, 100, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_batch(&l, 100, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_is_uniform() {
        let l = LabeledSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 10_000;
        let mut counts = [0usize; 10];
        for _ in 0..trials {
            let b = random_batch(&l, 10, 1, &mut rng).unwrap();
            counts[b.ids[0].0] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.1).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::Galaxy, Strategy::Confidence, Strategy::Mlp, Strategy::Random, Strategy::S2] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bait".parse::<Strategy>().is_err());
    }
}
