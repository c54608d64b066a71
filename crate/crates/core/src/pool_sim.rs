//! Synthetic pools with controlled imbalance and model quality, plus metrics.
//!
//! Scores are always synthetic. [`SyntheticProvider`] stands in for retraining
//! a classifier on the labeled set: every example carries frozen latent class
//! affinities, and the signal for examples of class `c` grows with the number
//! of labeled examples of class `c`. A class with no labels gets a large
//! negative logit offset, since a model never trained on it would not predict it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::ScoreProvider;
use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::scores::ScoreMatrix;

/// Per-round record emitted by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub labels_used: usize,
    pub acc_bal: f64,
    pub id_labels: usize,
    pub strategy: String,
}

/// Knobs of the synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Quality {
    /// Latent separation of an example's own class before any labels.
    pub signal: f64,
    /// Extra separation per `ln(1 + n_c)` labeled examples of the class.
    pub growth: f64,
    /// Std. dev. of the frozen per-example, per-class latent noise.
    pub noise: f64,
    /// Logit scale applied to the latent affinities.
    pub temperature: f64,
    /// The point halfway between the OOD and in-distribution latent centers
    /// gets OOD probability `0.5 - skew`; `0 <= skew < 0.5`.
    pub skew: f64,
    /// Fraction of examples whose latent class is a different, random class.
    pub label_noise: f64,
    /// Logit offset for classes with no labeled examples.
    pub cold_penalty: f64,
    /// Mimics a loss weighted by `1 / N_k(L)`: when false the labeled class
    /// prior is added to the logits.
    pub reweight: bool,
}

impl Default for Quality {
    fn default() -> Self {
        Self {
            signal: 1.0,
            growth: 0.5,
            noise: 1.2,
            temperature: 3.0,
            skew: 0.0,
            label_noise: 0.0,
            cold_penalty: 6.0,
            reweight: true,
        }
    }
}

impl Quality {
    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.skew) {
            return Err(Error::input(format!("skew must lie in [0, 0.5), got {}", self.skew)));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::input("label_noise must lie in [0, 1]"));
        }
        if self.noise < 0.0 || self.temperature <= 0.0 {
            return Err(Error::input("noise must be >= 0 and temperature > 0"));
        }
        Ok(())
    }

    fn skew_shift(&self) -> f64 {
        ((0.5 + self.skew) / (0.5 - self.skew)).ln()
    }
}

/// A synthetic pool. Class `k - 1` is the out-of-distribution majority.
#[derive(Debug, Clone)]
pub struct SimPool {
    pub n: usize,
    pub k: usize,
    pub true_labels: Vec<ClassId>,
    pub epsilon: f64,
    pub quality: Quality,
    latent_class: Vec<ClassId>,
    latent_noise: Vec<f32>,
}

impl SimPool {
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for c in &self.true_labels {
            sizes[c.0] += 1;
        }
        sizes
    }

    /// Largest `N_k / N_{K-1}` over in-distribution classes.
    pub fn imbalance(&self) -> f64 {
        let sizes = self.class_sizes();
        let ood = sizes[self.k - 1] as f64;
        sizes[..self.k - 1]
            .iter()
            .map(|&s| s as f64 / ood)
            .fold(0.0, f64::max)
    }

    pub fn id_classes(&self) -> Vec<ClassId> {
        (0..self.k - 1).map(ClassId).collect()
    }

    pub fn provider(&self) -> SyntheticProvider<'_> {
        SyntheticProvider { pool: self }
    }

    /// Frozen latent affinities, one `k`-vector per example, for building feature-space graphs.
    pub fn latent_features(&self) -> Vec<Vec<f32>> {
        (0..self.n)
            .map(|i| {
                (0..self.k)
                    .map(|c| {
                        let own = if self.latent_class[i].0 == c { self.quality.signal as f32 } else { 0.0 };
                        own + self.quality.noise as f32 * self.latent_noise[i * self.k + c]
                    })
                    .collect()
            })
            .collect()
    }

    /// Scores the synthetic model would produce after training on `labeled`.
    pub fn scores_for(&self, labeled: &LabeledSet) -> Result<ScoreMatrix> {
        let q = &self.quality;
        let counts = labeled.class_counts(self.k);
        let total = labeled.len() as f64;
        let strength: Vec<f64> = counts
            .iter()
            .map(|&c| q.signal + q.growth * (1.0 + c as f64).ln())
            .collect();
        // the midpoint between the OOD and mean ID class centers lands at
        // an OOD probability of 0.5 - skew
        let mean_id = strength[..self.k - 1].iter().sum::<f64>() / (self.k - 1) as f64;
        let ood_shift = -q.temperature * (strength[self.k - 1] - mean_id) / 2.0 - q.skew_shift();
        let bias: Vec<f64> = (0..self.k)
            .map(|c| {
                let mut b = 0.0;
                if counts[c] == 0 {
                    b -= q.cold_penalty;
                }
                if c == self.k - 1 {
                    b += ood_shift;
                }
                if !q.reweight {
                    b += ((counts[c] as f64 + 1.0) / (total + self.k as f64)).ln();
                }
                b
            })
            .collect();
        let mut data = Vec::with_capacity(self.n * self.k);
        let mut logits = vec![0.0f64; self.k];
        for i in 0..self.n {
            let own = self.latent_class[i].0;
            for (c, l) in logits.iter_mut().enumerate() {
                let signal = if c == own { strength[own] } else { 0.0 };
                let a = signal + q.noise * f64::from(self.latent_noise[i * self.k + c]);
                *l = q.temperature * a + bias[c];
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            data.extend(logits.iter().map(|l| ((l - max).exp() / z) as f32));
        }
        ScoreMatrix::new(self.n, self.k, data)
    }
}

/// Score provider backed by a [`SimPool`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticProvider<'a> {
    pool: &'a SimPool,
}

impl ScoreProvider for SyntheticProvider<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.pool.n, self.pool.k)
    }

    fn scores(&mut self, labeled: &LabeledSet) -> Result<ScoreMatrix> {
        self.pool.scores_for(labeled)
    }
}

/// Binary pool (class 0 = in-distribution, class 1 = out-of-distribution) whose
/// out-of-distribution probabilities put every ID example strictly below every
/// OOD example. The two groups separate at `p = 0.5 - skew`.
pub fn make_separable_pool(n_id: usize, n_od: usize, skew: f64, seed: u64) -> Result<(SimPool, ScoreMatrix)> {
    if n_id == 0 || n_od == 0 {
        return Err(Error::input("separable pools need n_id >= 1 and n_od >= 1"));
    }
    if !(0.0..0.5).contains(&skew) {
        return Err(Error::input(format!("skew must lie in [0, 0.5), got {skew}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = 0.5 - skew;
    let (lo, hi) = (0.01, 0.99);
    // one jittered point per equal-width bin keeps values strictly increasing
    let mut grid = |count: usize, a: f64, b: f64| -> Vec<f64> {
        (0..count)
            .map(|i| {
                let jitter: f64 = rng.random_range(0.3..0.7);
                a + (b - a) * (i as f64 + jitter) / count as f64
            })
            .collect()
    };
    let mut p = grid(n_id, lo, cut);
    p.extend(grid(n_od, cut, hi));
    let n = n_id + n_od;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut p_ood = vec![0f32; n];
    let mut labels = vec![ClassId(0); n];
    for (rank, &id) in ids.iter().enumerate() {
        p_ood[id] = p[rank] as f32;
        labels[id] = ClassId(usize::from(rank >= n_id));
    }
    let scores = ScoreMatrix::from_binary_ood(&p_ood)?;
    let pool = SimPool {
        n,
        k: 2,
        epsilon: n_id as f64 / n_od as f64,
        quality: Quality {
            skew,
            ..Quality::default()
        },
        latent_class: labels.clone(),
        latent_noise: vec![0.0; n * 2],
        true_labels: labels,
    };
    Ok((pool, scores))
}

/// Class sizes `[N_0, .., N_{K-2}, N_OOD]` for `n` examples with imbalance at most `epsilon`.
pub fn imbalanced_sizes(n: usize, k: usize, epsilon: f64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::input("k must be >= 2"));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::input(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let ids = k - 1;
    let mut n_ood = (n as f64 / (1.0 + ids as f64 * epsilon)).ceil() as usize;
    loop {
        if n_ood >= n {
            return Err(Error::input(format!(
                "cannot give {ids} in-distribution classes at least one example with N={n}, epsilon={epsilon}"
            )));
        }
        let rest = n - n_ood;
        let base = rest / ids;
        let extra = rest % ids;
        let largest = base + usize::from(extra > 0);
        if base >= 1 && largest as f64 <= epsilon * n_ood as f64 {
            let mut sizes: Vec<usize> = (0..ids).map(|i| base + usize::from(i < extra)).collect();
            sizes.push(n_ood);
            return Ok(sizes);
        }
        if base == 0 {
            return Err(Error::input(format!(
                "N={n} with epsilon={epsilon} leaves an in-distribution class empty"
            )));
        }
        n_ood += 1;
    }
}

/// Pool with explicit class sizes (last entry is the OOD class).
pub fn pool_from_sizes(sizes: &[usize], quality: Quality, seed: u64) -> Result<SimPool> {
    quality.validate()?;
    let k = sizes.len();
    if k < 2 || sizes.contains(&0) {
        return Err(Error::input("need at least two nonempty classes"));
    }
    let n: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<ClassId> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(ClassId(c), s))
        .collect();
    labels.shuffle(&mut rng);
    let latent_class = labels
        .iter()
        .map(|&c| {
            if quality.label_noise > 0.0 && rng.random_bool(quality.label_noise) {
                let other = rng.random_range(0..k - 1);
                ClassId(if other >= c.0 { other + 1 } else { other })
            } else {
                c
            }
        })
        .collect();
    let latent_noise = (0..n * k).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    let ood = sizes[k - 1] as f64;
    let epsilon = sizes[..k - 1].iter().map(|&s| s as f64 / ood).fold(0.0, f64::max);
    Ok(SimPool {
        n,
        k,
        true_labels: labels,
        epsilon,
        quality,
        latent_class,
        latent_noise,
    })
}

/// Multiclass pool honoring `N_k / N_{K-1} <= epsilon` for every in-distribution class.
pub fn make_imbalanced_pool(n: usize, k: usize, epsilon: f64, quality: Quality, seed: u64) -> Result<SimPool> {
    let sizes = imbalanced_sizes(n, k, epsilon)?;
    pool_from_sizes(&sizes, quality, seed)
}

/// Dataset-shaped size presets. Only sizes are stored; scores are synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub n_ood: usize,
    pub id_sizes: Vec<usize>,
    /// Imbalance factor of the dataset shape.
    pub epsilon: f64,
}

impl Preset {
    pub fn k(&self) -> usize {
        self.id_sizes.len() + 1
    }

    pub fn n(&self) -> usize {
        self.n_ood + self.id_sizes.iter().sum::<usize>()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = self.id_sizes.clone();
        s.push(self.n_ood);
        s
    }

    pub fn pool(&self, quality: Quality, seed: u64) -> Result<SimPool> {
        pool_from_sizes(&self.sizes(), quality, seed)
    }
}

/// All known presets, keyed by name.
pub fn presets() -> BTreeMap<&'static str, Preset> {
    let mk = |name, n_ood, id_sizes: Vec<usize>, epsilon| (name, Preset { name, n_ood, id_sizes, epsilon });
    BTreeMap::from([
        mk("cifar10-2", 45000, vec![5000], 0.1111),
        mk("cifar10-3", 40000, vec![5000, 5000], 0.1250),
        mk("cifar100-2", 49500, vec![500], 0.0101),
        mk("cifar100-3", 49000, vec![500, 500], 0.0102),
        // nine 500-example classes over 40500 give epsilon 500/40500
        mk("cifar100-10", 40500, vec![500; 9], 0.0123),
        mk("svhn-2", 68309, vec![4948], 0.0724),
        // larger class sits exactly at the epsilon cap
        mk("svhn-3", 54448, vec![13862, 4947], 0.2546),
        mk("pathmnist-2", 80595, vec![9401], 0.1166),
    ])
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()
        .remove(name)
        .ok_or_else(|| Error::input(format!("unknown preset {name:?}")))
}

/// Mean over classes of within-class accuracy. Classes absent from `truths`
/// are left out of the mean, with a warning.
pub fn balanced_accuracy(predictions: &[ClassId], truths: &[ClassId], k: usize) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::input(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::input("balanced accuracy of an empty set"));
    }
    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (p, t) in predictions.iter().zip(truths) {
        if t.0 >= k || p.0 >= k {
            return Err(Error::input(format!("label out of range for K={k}")));
        }
        totals[t.0] += 1;
        if p == t {
            hits[t.0] += 1;
        }
    }
    let present: Vec<usize> = (0..k).filter(|&c| totals[c] > 0).collect();
    if present.len() < k {
        log::warn!(
            "balanced accuracy: {} of {k} classes have no examples and are excluded",
            k - present.len()
        );
    }
    let sum: f64 = present.iter().map(|&c| hits[c] as f64 / totals[c] as f64).sum();
    Ok(sum / present.len() as f64)
}

/// Share of labels that fall in `id_classes`; `0` for an empty set.
pub fn id_label_fraction(labeled: &LabeledSet, id_classes: &[ClassId]) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    let hits = labeled.iter().filter(|(_, c)| id_classes.contains(c)).count();
    hits as f64 / labeled.len() as f64
}

/// Ground-truth labels as a lookup for oracles.
pub fn truth_of(pool: &SimPool, id: ExampleId) -> ClassId {
    pool.true_labels[id.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_builder::{build_graphs, compute_confidences};

    fn cut_count(pool: &SimPool, s: &ScoreMatrix, k: usize) -> usize {
        let g = build_graphs(s).unwrap();
        g.edges(ClassId(k))
            .into_iter()
            .filter(|(a, b)| (pool.true_labels[a.0].0 == k) != (pool.true_labels[b.0].0 == k))
            .count()
    }

    #[test]
    fn separable_pool_has_single_cut() {
        let (pool, s) = make_separable_pool(10, 90, 0.0, 3).unwrap();
        assert_eq!(cut_count(&pool, &s, 0), 1);
        assert_eq!(cut_count(&pool, &s, 1), 1);
    }

    #[test]
    fn skewed_pool_puts_ood_nearest_one_half() {
        let (pool, s) = make_separable_pool(10, 90, 0.3, 3).unwrap();
        let q = compute_confidences(&s);
        let mut order: Vec<usize> = (0..pool.n).collect();
        order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
        assert!(order[..20].iter().all(|&i| pool.true_labels[i] == ClassId(1)));
    }

    #[test]
    fn separable_pool_is_deterministic() {
        let (_, a) = make_separable_pool(10, 90, 0.1, 9).unwrap();
        let (_, b) = make_separable_pool(10, 90, 0.1, 9).unwrap();
        assert_eq!(crate::formats::encode_gxsm(&a), crate::formats::encode_gxsm(&b));
    }

    #[test]
    fn preset_sizes_match_dataset_rows() {
        let p = preset("cifar100-2").unwrap();
        assert_eq!((p.n(), p.n_ood, p.id_sizes.iter().sum::<usize>()), (50000, 49500, 500));
        assert!(((500.0 / 49500.0) - 0.0101f64).abs() < 5e-5);
        let p = preset("svhn-3").unwrap();
        assert_eq!((p.n_ood, p.id_sizes.iter().sum::<usize>()), (54448, 18809));
        let eps = *p.id_sizes.iter().max().unwrap() as f64 / p.n_ood as f64;
        assert!((eps - 0.2546).abs() < 5e-5, "{eps}");
        for p in presets().values() {
            let eps = *p.id_sizes.iter().max().unwrap() as f64 / p.n_ood as f64;
            assert!((eps - p.epsilon).abs() < 5e-5, "{}: {eps}", p.name);
        }
        assert!(preset("imagenet").is_err());
    }

    #[test]
    fn imbalanced_sizes_honor_epsilon() {
        assert_eq!(imbalanced_sizes(20000, 2, 0.01).unwrap(), vec![198, 19802]);
        assert_eq!(imbalanced_sizes(100, 2, 1.0).unwrap(), vec![50, 50]);
        for (n, k, eps) in [(1000, 3, 0.05), (5000, 10, 0.0123), (777, 4, 0.3)] {
            let s = imbalanced_sizes(n, k, eps).unwrap();
            assert_eq!(s.iter().sum::<usize>(), n);
            for &c in &s[..k - 1] {
                assert!(c as f64 <= eps * s[k - 1] as f64);
            }
        }
        assert!(imbalanced_sizes(10, 3, 0.01).is_err());
        assert!(imbalanced_sizes(10, 2, 0.0).is_err());
    }

    #[test]
    fn synthetic_scores_improve_with_labels() {
        let pool = make_imbalanced_pool(4000, 2, 0.05, Quality::default(), 1).unwrap();
        let acc = |l: &LabeledSet| {
            let s = pool.scores_for(l).unwrap();
            balanced_accuracy(&s.argmax(), &pool.true_labels, 2).unwrap()
        };
        let few = LabeledSet::from_pairs(
            (0..pool.n)
                .filter(|&i| pool.true_labels[i] == ClassId(0))
                .take(2)
                .chain((0..pool.n).filter(|&i| pool.true_labels[i] == ClassId(1)).take(2))
                .map(|i| (ExampleId(i), pool.true_labels[i])),
        )
        .unwrap();
        let many = LabeledSet::from_pairs((0..pool.n).take(2000).map(|i| (ExampleId(i), pool.true_labels[i]))).unwrap();
        assert!(acc(&many) >= acc(&few));
    }

    #[test]
    fn balanced_accuracy_values() {
        let t: Vec<ClassId> = [0, 0, 1, 1].iter().map(|&c| ClassId(c)).collect();
        assert_eq!(balanced_accuracy(&t, &t, 2).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[ClassId(0); 4], &t, 2).unwrap(), 0.5);
        let truth: Vec<ClassId> = [0, 0, 0, 0, 1, 1].iter().map(|&c| ClassId(c)).collect();
        let pred: Vec<ClassId> = [0, 0, 0, 1, 1, 0].iter().map(|&c| ClassId(c)).collect();
        assert!((balanced_accuracy(&pred, &truth, 2).unwrap() - 0.625).abs() < 1e-12);
        assert!(balanced_accuracy(&[], &[], 2).is_err());
        assert!(balanced_accuracy(&[ClassId(0)], &[], 2).is_err());
    }

    #[test]
    fn balanced_accuracy_excludes_empty_classes() {
        let t = vec![ClassId(0), ClassId(0)];
        let p = vec![ClassId(0), ClassId(2)];
        assert_eq!(balanced_accuracy(&p, &t, 3).unwrap(), 0.5);
    }

    #[test]
    fn id_fraction_counts() {
        let id = [ClassId(0)];
        let ood: LabeledSet = LabeledSet::from_pairs((0..5).map(|i| (ExampleId(i), ClassId(1)))).unwrap();
        assert_eq!(id_label_fraction(&ood, &id), 0.0);
        let all: LabeledSet = LabeledSet::from_pairs((0..5).map(|i| (ExampleId(i), ClassId(0)))).unwrap();
        assert_eq!(id_label_fraction(&all, &id), 1.0);
        let mixed = LabeledSet::from_pairs(
            (0..100).map(|i| (ExampleId(i), ClassId(usize::from(i >= 30)))),
        )
        .unwrap();
        assert!((id_label_fraction(&mixed, &id) - 0.3).abs() < 1e-12);
    }
}
