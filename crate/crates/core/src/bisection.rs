//! Executable model of the balancedness and noise-tolerance analysis of bisection.
//!
//! A region of uncertainty is a sorted run of ranks; `true` marks an
//! in-distribution (ID) rank. ID ranks come first in separable layouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::GalaxySession;
use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::scores::ScoreMatrix;
use crate::strategies::confidence_sampling_batch;

const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionTrace {
    layout: Vec<bool>,
    corrupted: Vec<bool>,
}

impl RegionTrace {
    pub fn separable(n_id: usize, n_od: usize) -> Self {
        let mut layout = vec![true; n_id];
        layout.resize(n_id + n_od, false);
        Self::from_layout(layout)
    }

    pub fn from_layout(layout: Vec<bool>) -> Self {
        let corrupted = vec![false; layout.len()];
        Self { layout, corrupted }
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn n_id(&self) -> usize {
        self.layout.iter().filter(|&&b| b).count()
    }

    pub fn n_od(&self) -> usize {
        self.len() - self.n_id()
    }

    pub fn layout(&self) -> &[bool] {
        &self.layout
    }

    pub fn corrupted(&self) -> &[bool] {
        &self.corrupted
    }

    /// Flips each rank's observed label independently with probability `rate`.
    pub fn corrupt<R: Rng + ?Sized>(&mut self, rate: f64, rng: &mut R) {
        let rate = rate.clamp(0.0, 1.0);
        for c in &mut self.corrupted {
            *c = rng.random_bool(rate);
        }
    }

    /// Label an annotator reports for `rank`.
    pub fn observed(&self, rank: usize) -> bool {
        self.layout[rank] ^ self.corrupted[rank]
    }

    /// Boundary rank when the layout is separable.
    pub fn true_cut(&self) -> Option<usize> {
        let n_id = self.n_id();
        self.layout[..n_id].iter().all(|&b| b).then_some(n_id)
    }

    /// Reversed layout with sides swapped, so ID ranks stay first.
    pub fn mirrored(&self) -> Self {
        Self {
            layout: self.layout.iter().rev().map(|b| !b).collect(),
            corrupted: self.corrupted.iter().rev().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BalanceTally {
    pub m_id: usize,
    pub m_od: usize,
    pub cut_found: Option<usize>,
    /// Queried ranks in order, 0-based.
    pub queries: Vec<usize>,
}

impl BalanceTally {
    pub fn total(&self) -> usize {
        self.m_id + self.m_od
    }
}

/// Runs bisection on `r`. Queries the central rank of the current region (a
/// coin picks between the two centers when the region has even size), keeps
/// the ranks above it on an ID observation and below it otherwise, and stops
/// when the region is empty. Tallies count true classes.
pub fn simulate_bisection<R: Rng + ?Sized>(r: &RegionTrace, rng: &mut R) -> BalanceTally {
    bisect_with(r, || rng.random_bool(0.5))
}

fn bisect_with(r: &RegionTrace, mut coin: impl FnMut() -> bool) -> BalanceTally {
    let (mut lo, mut hi) = (0, r.len());
    let mut t = BalanceTally::default();
    while lo < hi {
        let m = hi - lo;
        let i = if m % 2 == 1 {
            lo + (m - 1) / 2
        } else if coin() {
            lo + m / 2
        } else {
            lo + m / 2 - 1
        };
        t.queries.push(i);
        if r.layout[i] {
            t.m_id += 1;
        } else {
            t.m_od += 1;
        }
        if r.observed(i) {
            lo = i + 1;
        } else {
            hi = i;
        }
    }
    t.cut_found = Some(lo);
    t
}

/// Lower bound on `E[m_ID] / E[m_OOD]` for bisection after `z` OOD steps.
pub fn bisection_balance_bound(z: usize, n_prime: usize) -> Result<f64> {
    if z < 1 || n_prime < 3 {
        return Err(Error::input(format!("need z >= 1 and n' >= 3, got z={z}, n'={n_prime}")));
    }
    let h = 0.5 * (n_prime as f64).log2();
    Ok(h / (z as f64 + h))
}

/// Lower bound on `E[m_ID] / E[m_OOD]` for a batch with `b_prime` queries after
/// the cut is found. Returns `(bound, y)`.
pub fn galaxy_balance_bound(b_prime: usize, z: usize, n_prime: usize) -> Result<(f64, f64)> {
    if b_prime >= n_prime {
        return Err(Error::input(format!("need B' < n', got B'={b_prime}, n'={n_prime}")));
    }
    if n_prime < 2 {
        return Err(Error::input("n' must be >= 2"));
    }
    let y = ((b_prime / 4) as f64).max(0.5 * (n_prime as f64).log2());
    Ok((y / (z as f64 + 5.0 * y + 3.0), y))
}

/// Ratio-of-means estimate with a bootstrap standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// `None` for a single trial.
    pub se: Option<f64>,
    pub mean_id: f64,
    pub mean_od: f64,
    pub trials: usize,
}

/// Ratio of summed ID to summed OOD counts over `(m_id, m_od)` tallies, with a
/// bootstrap standard error from resampling trials.
pub fn ratio_with_bootstrap(tallies: &[(u32, u32)], seed: u64) -> Result<RatioEstimate> {
    if tallies.is_empty() {
        return Err(Error::input("no trials"));
    }
    let trials = tallies.len();
    let (sid, sod) = tallies
        .iter()
        .fold((0u64, 0u64), |(a, b), &(i, o)| (a + u64::from(i), b + u64::from(o)));
    let ratio = sid as f64 / sod as f64;
    let se = (trials > 1).then(|| {
        let mut hist: Vec<((u32, u32), u64)> = Vec::new();
        let mut sorted = tallies.to_vec();
        sorted.sort_unstable();
        for t in sorted {
            match hist.last_mut() {
                Some((v, c)) if *v == t => *c += 1,
                _ => hist.push((t, 1)),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let p: Vec<f64> = hist.iter().map(|(_, c)| *c as f64 / trials as f64).collect();
        let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                // multinomial draw over distinct tallies by sequential binomials
                let (mut left, mut mass) = (trials as u64, 1.0f64);
                let (mut id, mut od) = (0f64, 0f64);
                for (j, ((i, o), _)) in hist.iter().enumerate() {
                    if left == 0 {
                        break;
                    }
                    let c = if j + 1 == hist.len() {
                        left
                    } else {
                        let q = (p[j] / mass).clamp(0.0, 1.0);
                        Binomial::new(left, q).expect("valid binomial").sample(&mut rng)
                    };
                    id += c as f64 * f64::from(*i);
                    od += c as f64 * f64::from(*o);
                    left -= c;
                    mass -= p[j];
                }
                id / od
            })
            .collect();
        let mean = stats.iter().sum::<f64>() / stats.len() as f64;
        (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
    });
    Ok(RatioEstimate {
        ratio,
        se,
        mean_id: sid as f64 / trials as f64,
        mean_od: sod as f64 / trials as f64,
        trials,
    })
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Monte-Carlo estimate of `E[m_ID] / E[m_OOD]` for bisection on a separable
/// region of size `n_prime` with `n_ID ~ Unif{1..n'-1}`, after `z` steps that
/// all landed on OOD examples (added to the OOD count).
pub fn estimate_balance_ratio_mc(z: usize, n_prime: usize, trials: usize, seed: u64) -> Result<RatioEstimate> {
    if trials == 0 || n_prime < 2 {
        return Err(Error::input("need trials >= 1 and n' >= 2"));
    }
    let tallies: Vec<(u32, u32)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let n_id = rng.random_range(1..n_prime);
            let tally = simulate_bisection(&RegionTrace::separable(n_id, n_prime - n_id), &mut rng);
            (tally.m_id as u32, (tally.m_od + z) as u32)
        })
        .collect();
    ratio_with_bootstrap(&tallies, seed)
}

/// Per-trial `(m_id, m_od)` for GALAXY on a separable chain: labeled ID and OOD
/// endpoints enclose a region of `n_prime` unlabeled examples; the session runs
/// until the cut is located and then takes `b_prime` more queries.
pub fn galaxy_region_tallies(b_prime: usize, n_prime: usize, trials: usize, seed: u64) -> Result<Vec<(u32, u32)>> {
    if b_prime >= n_prime || n_prime < 2 || trials == 0 {
        return Err(Error::input(format!(
            "need B' < n', n' >= 2 and trials >= 1, got B'={b_prime}, n'={n_prime}"
        )));
    }
    let n = n_prime + 2;
    let p: Vec<f32> = (0..n).map(|j| (j + 1) as f32 / (n + 1) as f32).collect();
    let scores = ScoreMatrix::from_binary_ood(&p)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let n_id = rng.random_range(1..n_prime);
            let truth = |id: ExampleId| ClassId(usize::from(id.0 > n_id));
            let seeds = LabeledSet::from_pairs([(ExampleId(0), ClassId(0)), (ExampleId(n - 1), ClassId(1))])?;
            let mut session = GalaxySession::new(&scores, seeds, n_prime, rng)?;
            let (mut top_id, mut low_od) = (0usize, n - 1);
            let (mut m_id, mut m_od, mut extra) = (0u32, 0u32, None::<usize>);
            while let Some(q) = session.next_query()? {
                if extra == Some(0) {
                    break;
                }
                let label = truth(q.id);
                if label.0 == 0 {
                    m_id += 1;
                    top_id = top_id.max(q.id.0);
                } else {
                    m_od += 1;
                    low_od = low_od.min(q.id.0);
                }
                session.submit(q.id, label)?;
                extra = match extra {
                    Some(left) => Some(left - 1),
                    None if top_id + 1 == low_od => Some(b_prime),
                    None => None,
                };
            }
            Ok((m_id, m_od))
        })
        .collect()
}

/// Monte-Carlo estimate for batched GALAXY; `z` forced OOD steps are added to
/// every trial's OOD count.
pub fn estimate_galaxy_ratio_mc(
    b_prime: usize,
    z: usize,
    n_prime: usize,
    trials: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    let tallies = galaxy_region_tallies(b_prime, n_prime, trials, seed)?;
    let shifted: Vec<(u32, u32)> = tallies.iter().map(|&(i, o)| (i, o + z as u32)).collect();
    ratio_with_bootstrap(&shifted, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoisyOutcome {
    pub success: bool,
    pub corrupted_queries: usize,
    pub tally: BalanceTally,
}

/// Bisection on a separable region whose observed labels are flipped per rank
/// with probability `delta / ceil(log2 n)`. Success means the final boundary
/// equals the true cut.
pub fn simulate_noisy_bisection<R: Rng + ?Sized>(
    n_id: usize,
    n_od: usize,
    delta: f64,
    rng: &mut R,
) -> Result<NoisyOutcome> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::input(format!("delta must lie in [0, 1], got {delta}")));
    }
    let n = n_id + n_od;
    if n == 0 {
        return Err(Error::input("empty region"));
    }
    let mut r = RegionTrace::separable(n_id, n_od);
    r.corrupt(delta / noise_denominator(n), rng);
    let tally = simulate_bisection(&r, rng);
    let corrupted_queries = tally.queries.iter().filter(|&&q| r.corrupted[q]).count();
    Ok(NoisyOutcome {
        success: tally.cut_found == Some(n_id),
        corrupted_queries,
        tally,
    })
}

fn noise_denominator(n: usize) -> f64 {
    ((n as f64).log2().ceil()).max(1.0)
}

/// Region where every example the model is least sure about is OOD: `n_id` ID
/// examples sit at OOD-probability near 0, and the OOD examples fill a band
/// around 0.5. The accuracy-maximizing threshold is far below 0.5. Returns the
/// tally of `b` least-confidence picks together with the sorted region.
pub fn uncertainty_worst_case(n_prime: usize, b: usize) -> Result<(BalanceTally, RegionTrace)> {
    if b >= n_prime || n_prime < 2 {
        return Err(Error::input(format!("need B < n', got B={b}, n'={n_prime}")));
    }
    let n_od = b.max(n_prime / 2).min(n_prime - 1);
    let n_id = n_prime - n_od;
    let mut p: Vec<f32> = (0..n_id)
        .map(|i| (0.01 + 0.01 * (i as f64 + 0.5) / n_id as f64) as f32)
        .collect();
    p.extend((0..n_od).map(|i| (0.3 + 0.4 * (i as f64 + 0.5) / n_od as f64) as f32));
    let scores = ScoreMatrix::from_binary_ood(&p)?;
    let batch = confidence_sampling_batch(&scores, &LabeledSet::new(), b)?;
    let mut tally = BalanceTally::default();
    for id in &batch.ids {
        if id.0 < n_id {
            tally.m_id += 1;
        } else {
            tally.m_od += 1;
        }
        tally.queries.push(id.0);
    }
    Ok((tally, RegionTrace::separable(n_id, n_od)))
}

/// One cell of a verification grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub suite: &'static str,
    pub cell: String,
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

pub const THM51_Z: [usize; 5] = [1, 2, 3, 4, 5];
pub const THM51_N: [usize; 5] = [4, 8, 16, 64, 256];
pub const COR52_B: [usize; 3] = [8, 32, 128];
pub const COR52_N: [usize; 3] = [16, 64, 256];
pub const THM54_DELTA: [f64; 3] = [0.05, 0.1, 0.3];

pub fn thm51_grid(trials: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for &z in &THM51_Z {
        for &n in &THM51_N {
            let est = estimate_balance_ratio_mc(z, n, trials, seed ^ ((z as u64) << 32 | n as u64))?;
            let bound = bisection_balance_bound(z, n)?;
            let se = est.se.unwrap_or(0.0);
            out.push(BoundCheck {
                suite: "thm51",
                cell: format!("z={z} n'={n}"),
                estimate: est.ratio,
                se,
                bound,
                pass: est.ratio >= bound - 3.0 * se,
            });
        }
    }
    Ok(out)
}

pub fn cor52_grid(trials: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for &n in &COR52_N {
        for &b in COR52_B.iter().filter(|&&b| b < n) {
            let tallies = galaxy_region_tallies(b, n, trials, seed ^ ((b as u64) << 32 | n as u64))?;
            for &z in &THM51_Z {
                let shifted: Vec<(u32, u32)> = tallies.iter().map(|&(i, o)| (i, o + z as u32)).collect();
                let est = ratio_with_bootstrap(&shifted, seed)?;
                let (bound, _) = galaxy_balance_bound(b, z, n)?;
                let se = est.se.unwrap_or(0.0);
                out.push(BoundCheck {
                    suite: "cor52",
                    cell: format!("B'={b} z={z} n'={n}"),
                    estimate: est.ratio,
                    se,
                    bound,
                    pass: est.ratio >= bound - 3.0 * se,
                });
            }
        }
    }
    Ok(out)
}

pub fn thm54_grid(n: usize, trials: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for (j, &delta) in THM54_DELTA.iter().enumerate() {
        let outcomes: Vec<NoisyOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed ^ (j as u64 + 1) << 40, t);
                let n_id = rng.random_range(1..n);
                simulate_noisy_bisection(n_id, n - n_id, delta, &mut rng)
            })
            .collect::<Result<_>>()?;
        let rate = outcomes.iter().filter(|o| o.success).count() as f64 / trials as f64;
        let sigma = (rate * (1.0 - rate) / trials as f64).sqrt();
        out.push(BoundCheck {
            suite: "thm54",
            cell: format!("n={n} delta={delta}"),
            estimate: rate,
            se: sigma,
            bound: 1.0 - delta,
            pass: rate >= 1.0 - delta - 3.0 * sigma,
        });
    }
    Ok(out)
}

pub fn prop53_check(n_prime: usize, b: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let (unc, region) = uncertainty_worst_case(n_prime, b)?;
    let bis = simulate_bisection(&region, &mut ChaCha8Rng::seed_from_u64(seed));
    let ratio = |t: &BalanceTally| if t.m_od == 0 { f64::INFINITY } else { t.m_id as f64 / t.m_od as f64 };
    Ok(vec![
        BoundCheck {
            suite: "prop53",
            cell: format!("confidence n'={n_prime} B={b} m_id={} m_od={}", unc.m_id, unc.m_od),
            estimate: ratio(&unc),
            se: 0.0,
            bound: 0.0,
            pass: unc.m_id == 0 && unc.m_od == b,
        },
        BoundCheck {
            suite: "prop53",
            cell: format!("bisection n'={n_prime} m_id={} m_od={}", bis.m_id, bis.m_od),
            estimate: ratio(&bis),
            se: 0.0,
            bound: 0.0,
            pass: bis.m_id >= 1,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn run(n_id: usize, n_od: usize, seed: u64) -> BalanceTally {
        simulate_bisection(&RegionTrace::separable(n_id, n_od), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn single_pair_region() {
        for seed in 0..50 {
            let t = run(1, 1, seed);
            assert_eq!((t.m_id, t.m_od), (1, 1));
        }
    }

    #[test]
    fn all_ood_region_of_seven() {
        for seed in 0..20 {
            let t = run(0, 7, seed);
            assert_eq!((t.m_id, t.m_od), (0, 3));
            assert_eq!(t.queries, vec![3, 1, 0]);
        }
    }

    #[test]
    fn three_id_four_ood() {
        for seed in 0..20 {
            let t = run(3, 4, seed);
            assert_eq!((t.m_id, t.m_od), (2, 1));
            assert_eq!(t.cut_found, Some(3));
        }
    }

    #[test]
    fn coin_picks_both_centers() {
        let mut seen = [false; 2];
        for seed in 0..64 {
            let t = run(2, 2, seed);
            seen[usize::from(t.queries[0] == 2)] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn balance_bound_values() {
        assert!((bisection_balance_bound(1, 8).unwrap() - 0.6).abs() < 1e-12);
        assert!((bisection_balance_bound(2, 4).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let t = 20u32;
        let z = 1_000_000usize;
        let b = bisection_balance_bound(z, 1 << t).unwrap();
        assert!((b / (f64::from(t) / (2.0 * z as f64)) - 1.0).abs() < 1e-4);
        assert!(bisection_balance_bound(0, 8).is_err());
        assert!(bisection_balance_bound(1, 2).is_err());
    }

    #[test]
    fn galaxy_bound_values() {
        let (v, y) = galaxy_balance_bound(8, 1, 16).unwrap();
        assert_eq!(y, 2.0);
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
        let (v, y) = galaxy_balance_bound(0, 1, 16).unwrap();
        assert_eq!(y, 2.0);
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
        let (v, _) = galaxy_balance_bound(4_000_000, 1, 1 << 30).unwrap();
        assert!((v - 0.2).abs() < 1e-5);
        assert!(galaxy_balance_bound(8, 1, 4).is_err());
    }

    #[test]
    fn mc_small_cells_respect_bound() {
        let est = estimate_balance_ratio_mc(1, 4, 10_000, 5).unwrap();
        assert!(est.ratio >= 1.0 / 3.0 - 3.0 * est.se.unwrap());
        let est = estimate_balance_ratio_mc(4, 64, 20_000, 6).unwrap();
        assert!(est.ratio >= 3.0 / 7.0 - 3.0 * est.se.unwrap());
    }

    #[test]
    fn mc_single_trial_has_no_se() {
        let est = estimate_balance_ratio_mc(2, 16, 1, 1).unwrap();
        assert!(est.se.is_none());
        assert!(est.ratio.is_finite());
    }

    #[test]
    fn mc_is_deterministic() {
        let a = estimate_balance_ratio_mc(3, 64, 2000, 11).unwrap();
        let b = estimate_balance_ratio_mc(3, 64, 2000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_se_shrinks_with_trials() {
        let small = estimate_balance_ratio_mc(2, 64, 500, 3).unwrap().se.unwrap();
        let large = estimate_balance_ratio_mc(2, 64, 50_000, 3).unwrap().se.unwrap();
        assert!(large < small / 4.0, "{small} {large}");
    }

    #[test]
    fn galaxy_tallies_match_bisection_without_extra_queries() {
        // with no extra queries the session must replay bisection exactly
        let tallies = galaxy_region_tallies(0, 33, 400, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mc: Vec<(u32, u32)> = (0..4000)
            .map(|_| {
                let n_id = rng.random_range(1..33);
                let t = simulate_bisection(&RegionTrace::separable(n_id, 33 - n_id), &mut rng);
                (t.m_id as u32, t.m_od as u32)
            })
            .collect();
        let mean = |v: &[(u32, u32)]| v.iter().map(|t| f64::from(t.0 + t.1)).sum::<f64>() / v.len() as f64;
        assert!((mean(&tallies) - mean(&mc)).abs() < 0.15);
        assert!(tallies.iter().all(|&(i, o)| i + o <= 7));
    }

    #[test]
    fn galaxy_extra_queries_collect_id() {
        let est = estimate_galaxy_ratio_mc(32, 1, 64, 300, 4).unwrap();
        let (bound, _) = galaxy_balance_bound(32, 1, 64).unwrap();
        assert!(est.ratio > bound);
        assert!(est.mean_id >= 8.0);
    }

    #[test]
    fn noiseless_always_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n_id in 0..40 {
            let o = simulate_noisy_bisection(n_id, 40 - n_id, 0.0, &mut rng).unwrap();
            assert!(o.success);
            assert_eq!(o.corrupted_queries, 0);
        }
    }

    #[test]
    fn full_noise_can_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wins = (0..200)
            .filter(|_| simulate_noisy_bisection(1, 1, 1.0, &mut rng).unwrap().success)
            .count();
        assert!(wins < 200);
        assert!(simulate_noisy_bisection(1, 1, 1.5, &mut rng).is_err());
    }

    #[test]
    fn corrupted_query_rate_within_union_bound() {
        for delta in [0.05, 0.1, 0.3] {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let trials = 4000;
            let hit = (0..trials)
                .filter(|_| {
                    let n_id = rng.random_range(1..256);
                    simulate_noisy_bisection(n_id, 256 - n_id, delta, &mut rng).unwrap().corrupted_queries > 0
                })
                .count() as f64
                / trials as f64;
            let sigma = (delta * (1.0 - delta) / trials as f64).sqrt();
            assert!(hit <= delta + 3.0 * sigma, "delta={delta} rate={hit}");
        }
    }

    #[test]
    fn worst_case_is_all_ood() {
        let (t, r) = uncertainty_worst_case(200, 50).unwrap();
        assert_eq!((t.m_id, t.m_od), (0, 50));
        assert_eq!((r.n_id(), r.n_od()), (100, 100));
        let (t, _) = uncertainty_worst_case(10, 1).unwrap();
        assert_eq!((t.m_id, t.m_od), (0, 1));
        assert!(uncertainty_worst_case(10, 10).is_err());
        let checks = prop53_check(200, 50, 1).unwrap();
        assert!(checks.iter().all(|c| c.pass));
    }

    proptest! {
        #[test]
        fn separable_bisection_recovers_cut(n_id in 0usize..300, n_od in 0usize..300, seed: u64) {
            prop_assume!(n_id + n_od >= 1);
            let t = run(n_id, n_od, seed);
            let n = (n_id + n_od) as f64;
            prop_assert_eq!(t.cut_found, Some(n_id));
            prop_assert!(t.total() <= (n + 1.0).log2().ceil() as usize + 1);
            prop_assert_eq!(t.total(), t.queries.len());
        }

        #[test]
        fn mirrored_layout_swaps_tallies(n_id in 0usize..100, n_od in 0usize..100, flips in proptest::collection::vec(any::<bool>(), 16)) {
            prop_assume!(n_id + n_od >= 1);
            let r = RegionTrace::separable(n_id, n_od);
            let mut a = flips.iter().copied().cycle();
            let mut b = flips.iter().copied().cycle();
            let t = bisect_with(&r, || a.next().unwrap());
            let m = bisect_with(&r.mirrored(), || !b.next().unwrap());
            prop_assert_eq!((t.m_id, t.m_od), (m.m_od, m.m_id));
        }
    }
}
