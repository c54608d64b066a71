//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use galaxy_core::graph_builder::{build_graphs, connect};
use galaxy_core::{ClassId, ExampleId, GraphSet, LabeledSet, ScoreMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HAND_P1: [f32; 5] = [0.1, 0.2, 0.3, 0.8, 0.9];
pub const HAND_TRUTH: [usize; 5] = [0, 0, 0, 1, 1];

/// Independent adjacency: ranks within `ord`, pair not removed.
pub fn adjacency(g: &GraphSet, k: ClassId) -> Vec<Vec<usize>> {
    let n = g.n();
    let order = g.ranking(k).order();
    let removed: HashSet<(usize, usize)> = g
        .removed_cuts()
        .iter()
        .flat_map(|e| [(e.0 .0, e.1 .0), (e.1 .0, e.0 .0)])
        .collect();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..=(i + g.ord()).min(n - 1) {
            let (a, b) = (order[i].0, order[j].0);
            if !removed.contains(&(a, b)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

pub fn distances_from(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; adj.len()];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

/// Exhaustive minimum over every (class-k source, other-labeled terminal) pair,
/// ties by smaller terminal then smaller source.
pub fn brute_force(g: &GraphSet, k: ClassId, labeled: &LabeledSet) -> Option<(usize, usize, usize)> {
    let adj = adjacency(g, k);
    let mut best: Option<(usize, usize, usize)> = None;
    for (s, cs) in labeled.iter() {
        if cs != k {
            continue;
        }
        let d = distances_from(&adj, s.0);
        for (t, ct) in labeled.iter() {
            if ct == k {
                continue;
            }
            if let Some(len) = d[t.0] {
                let cand = (len, t.0, s.0);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map(|(len, t, s)| (len, s, t))
}

pub fn random_rows(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            let row: Vec<f32> = (0..k).map(|_| rng.random_range(0.01f32..1.0)).collect();
            let z: f32 = row.iter().sum();
            row.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

pub fn random_pool(seed: u64) -> (GraphSet, LabeledSet, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=50);
    let k = rng.random_range(2..=4);
    let s = ScoreMatrix::from_rows(&random_rows(&mut rng, n, k)).unwrap();
    let mut g = build_graphs(&s).unwrap();
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let m = rng.random_range(1..=n);
    let labeled = LabeledSet::from_pairs(ids[..m].iter().map(|&i| (ExampleId(i), ClassId(rng.random_range(0..k))))).unwrap();
    let ord = rng.random_range(1..=3usize).min(n - 1);
    for o in 2..=ord {
        connect(&mut g, o, &labeled).unwrap();
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            g.remove_pair(ExampleId(a), ExampleId(b));
        }
    }
    (g, labeled, k)
}

pub fn check_against_brute_force(seed: u64) {
    let (g, labeled, k) = random_pool(seed);
    for c in 0..k {
        let c = ClassId(c);
        let got = g.shortest_straddling_path(c, &labeled).unwrap();
        let want = brute_force(&g, c, &labeled);
        match (got, want) {
            (None, None) => {}
            (Some(p), Some((len, s, t))) => {
                assert_eq!((p.len(), p.source().0, p.terminal().0), (len, s, t), "seed {seed} class {c}");
                let adj = adjacency(&g, c);
                for w in p.nodes.windows(2) {
                    assert!(adj[w[0].0].contains(&w[1].0), "seed {seed}: {:?} not an edge", w);
                }
                for v in &p.nodes[1..p.nodes.len() - 1] {
                    assert!(!labeled.contains(*v), "seed {seed}: labeled interior {v}");
                }
                assert_eq!(labeled.get(p.source()), Some(c));
                assert_ne!(labeled.get(p.terminal()), Some(c));
            }
            (got, want) => panic!("seed {seed} class {c}: got {got:?}, brute force {want:?}"),
        }
    }
}
