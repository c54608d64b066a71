//! Selection engine: the per-batch GALAXY loop, S2 on a fixed graph, and the
//! multi-round driver.
//!
//! [`GalaxySession`] is the sequential core. It hands out one query at a time
//! and waits for that label before computing the next, so it serves both the
//! in-process oracle loop and the HTTP labeling service, where the label
//! arrives later.

use rustc_hash::FxHashSet;
use std::path::PathBuf;
use std::process::Command;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::graph_builder::{build_graphs, compute_confidences, connect_dense};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::linear_graph::{
    midpoint_of, straddling_search, Adjacency, BfsScratch, ClassView, EdgeKey, GraphSet, Path,
};
use crate::pool_sim::{balanced_accuracy, MetricsRow};
use crate::scores::ScoreMatrix;
use crate::strategies::{
    confidence_sampling_batch, most_likely_positive_batch, random_batch, Batch, Provenance, Strategy,
};

/// Source of ground-truth labels for queried examples.
pub trait Oracle {
    fn label(&mut self, id: ExampleId) -> Result<ClassId>;
}

impl<F> Oracle for F
where
    F: FnMut(ExampleId) -> Result<ClassId>,
{
    fn label(&mut self, id: ExampleId) -> Result<ClassId> {
        self(id)
    }
}

/// Oracle backed by a full ground-truth vector.
#[derive(Debug, Clone, Copy)]
pub struct TruthOracle<'a>(pub &'a [ClassId]);

impl Oracle for TruthOracle<'_> {
    fn label(&mut self, id: ExampleId) -> Result<ClassId> {
        self.0
            .get(id.0)
            .copied()
            .ok_or_else(|| Error::input(format!("oracle has no label for example {id}")))
    }
}

/// A query handed out by a session, awaiting its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: ExampleId,
    pub provenance: Provenance,
    /// Graph order in effect when the query was chosen.
    pub ord: usize,
    /// The bisected path, for bisection queries.
    pub path: Option<Path>,
}

/// One GALAXY batch over a fixed score matrix.
///
/// Graphs are built at order 1 on creation and any edge joining two examples
/// with different labels is removed before the first query.
pub struct GalaxySession<R = ChaCha8Rng> {
    n: usize,
    confidences: Vec<f64>,
    graphs: GraphSet,
    labeled: LabeledSet,
    labels: Vec<Option<ClassId>>,
    by_class: Vec<Vec<ExampleId>>,
    batch_size: usize,
    issued: Vec<(ExampleId, Provenance)>,
    pending: Option<Query>,
    rng: R,
    scratch: BfsScratch,
}

impl<R: Rng> GalaxySession<R> {
    pub fn new(scores: &ScoreMatrix, labeled: LabeledSet, batch_size: usize, rng: R) -> Result<Self> {
        let (n, k) = (scores.n(), scores.k());
        labeled.validate(n, k)?;
        let labels = labeled.dense(n)?;
        let mut by_class = vec![Vec::new(); k];
        for (id, c) in labeled.iter() {
            by_class[c.0].push(id);
        }
        let mut graphs = build_graphs(scores)?;
        let ids: Vec<ExampleId> = labeled.ids().collect();
        graphs.purge_labeled_cuts(&labels, &ids);
        Ok(Self {
            n,
            confidences: compute_confidences(scores),
            graphs,
            labeled,
            labels,
            by_class,
            batch_size,
            issued: Vec::new(),
            pending: None,
            rng,
            scratch: BfsScratch::new(n),
        })
    }

    pub fn graphs(&self) -> &GraphSet {
        &self.graphs
    }

    pub fn ord(&self) -> usize {
        self.graphs.ord()
    }

    pub fn labeled(&self) -> &LabeledSet {
        &self.labeled
    }

    pub fn into_labeled(self) -> LabeledSet {
        self.labeled
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Queries answered so far in this batch, in order.
    pub fn issued(&self) -> &[(ExampleId, Provenance)] {
        &self.issued
    }

    pub fn pending(&self) -> Option<&Query> {
        self.pending.as_ref()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.n - self.labeled.len()
    }

    /// True once `batch_size` labels were collected or the pool ran out.
    pub fn is_complete(&self) -> bool {
        self.pending.is_none() && (self.issued.len() >= self.batch_size || self.unlabeled_count() == 0)
    }

    /// The outstanding query, computing it if needed. `None` when the batch is complete.
    pub fn next_query(&mut self) -> Result<Option<Query>> {
        if let Some(q) = &self.pending {
            return Ok(Some(q.clone()));
        }
        if self.is_complete() {
            return Ok(None);
        }
        let q = self.compute_query()?;
        self.pending = Some(q.clone());
        Ok(Some(q))
    }

    /// Records the label for the outstanding query and removes the cuts it exposes.
    pub fn submit(&mut self, id: ExampleId, label: ClassId) -> Result<()> {
        let Some(pending) = &self.pending else {
            return Err(Error::input("no query is outstanding"));
        };
        if pending.id != id {
            return Err(Error::input(format!(
                "example {id} is not the outstanding query {}",
                pending.id
            )));
        }
        if label.0 >= self.by_class.len() {
            return Err(Error::input(format!(
                "label {label} out of range for K={}",
                self.by_class.len()
            )));
        }
        let pending = self.pending.take().expect("checked above");
        self.labeled.insert(id, label)?;
        self.labels[id.0] = Some(label);
        self.by_class[label.0].push(id);
        self.issued.push((id, pending.provenance));
        self.graphs.remove_cut_edges_dense(id, &self.labels);
        Ok(())
    }

    fn compute_query(&mut self) -> Result<Query> {
        let observed = self.by_class.iter().filter(|v| !v.is_empty()).count();
        if observed < 2 {
            return Ok(self.fallback());
        }
        loop {
            if let Some(path) = self.best_path() {
                let id = midpoint_of(&path.nodes, &mut self.rng)
                    .expect("straddling paths have at least two edges once cuts are removed");
                debug_assert!(self.labels[id.0].is_none(), "midpoint must be unlabeled");
                return Ok(Query {
                    id,
                    provenance: Provenance::Bisection,
                    ord: self.graphs.ord(),
                    path: Some(path),
                });
            }
            let next = self.graphs.ord() + 1;
            if next + 1 > self.n {
                return Ok(self.fallback());
            }
            let ids: Vec<ExampleId> = self.labeled.ids().collect();
            connect_dense(&mut self.graphs, next, &self.labels, &ids)?;
        }
    }

    /// Shortest straddling path across all class graphs; ties go to the smaller class.
    fn best_path(&mut self) -> Option<Path> {
        let mut best: Option<Path> = None;
        for k in 0..self.graphs.k() {
            let sources = &self.by_class[k];
            let cap = best.as_ref().map(|p| p.len() - 1);
            if cap == Some(1) {
                break;
            }
            let view = ClassView { graphs: &self.graphs, k };
            let others = others_of(&self.by_class, k);
            let found = straddling_search(
                &view,
                &self.labels,
                ClassId(k),
                sources,
                &others,
                cap,
                &mut self.scratch,
            );
            if let Some(s) = found {
                best = Some(Path {
                    class: ClassId(k),
                    nodes: s.nodes,
                });
            }
        }
        best
    }

    /// Least-confident unlabeled example, ties by id.
    fn fallback(&self) -> Query {
        let id = (0..self.n)
            .filter(|&i| self.labels[i].is_none())
            .min_by(|&a, &b| self.confidences[a].total_cmp(&self.confidences[b]).then(a.cmp(&b)))
            .map(ExampleId)
            .expect("fallback requires an unlabeled example");
        Query {
            id,
            provenance: Provenance::FallbackConfidence,
            ord: self.graphs.ord(),
            path: None,
        }
    }
}

fn others_of(by_class: &[Vec<ExampleId>], k: usize) -> Vec<ExampleId> {
    by_class
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != k)
        .flat_map(|(_, v)| v.iter().copied())
        .collect()
}

/// Runs one GALAXY batch of `min(b, #unlabeled)` sequential queries against `oracle`.
pub fn galaxy_select_batch<O, R>(
    scores: &ScoreMatrix,
    labeled: &LabeledSet,
    oracle: &mut O,
    b: usize,
    rng: &mut R,
) -> Result<(Batch, LabeledSet)>
where
    O: Oracle + ?Sized,
    R: Rng + ?Sized,
{
    labeled.validate(scores.n(), scores.k())?;
    if b == 0 {
        return Ok((Batch::default(), labeled.clone()));
    }
    if labeled.len() >= scores.n() {
        return Err(Error::PoolExhausted);
    }
    let mut session = GalaxySession::new(scores, labeled.clone(), b, &mut *rng)?;
    let mut batch = Batch::default();
    while let Some(q) = session.next_query()? {
        let label = oracle.label(q.id)?;
        if label.0 >= scores.k() {
            return Err(Error::input(format!("oracle returned label {label} for K={}", scores.k())));
        }
        session.submit(q.id, label)?;
        batch.push(q.id, q.provenance);
    }
    Ok((batch, session.into_labeled()))
}

/// Fixed undirected graph for S2, e.g. a k-nearest-neighbor graph.
#[derive(Debug, Clone)]
pub struct StaticGraph {
    adj: Vec<Vec<ExampleId>>,
    removed: FxHashSet<EdgeKey>,
}

impl StaticGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::input(format!("edge ({a}, {b}) outside a graph of {n}")));
            }
            if a != b {
                adj[a].push(ExampleId(b));
                adj[b].push(ExampleId(a));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            adj,
            removed: FxHashSet::default(),
        })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("chain edges are in range")
    }

    /// Symmetrized k-nearest-neighbor graph under squared Euclidean distance;
    /// distance ties go to the smaller id.
    pub fn knn(points: &[Vec<f32>], k: usize) -> Result<Self> {
        let n = points.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut d: Vec<(f32, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let dist = points[i]
                            .iter()
                            .zip(&points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f32>();
                        (dist, j)
                    })
                    .collect();
                let take = k.min(d.len());
                if take > 0 && take < d.len() {
                    d.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                }
                d.truncate(take);
                d.into_iter().map(move |(_, j)| (i, j))
            })
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn removed(&self) -> &FxHashSet<EdgeKey> {
        &self.removed
    }

    fn is_removed(&self, a: ExampleId, b: ExampleId) -> bool {
        !self.removed.is_empty() && self.removed.contains(&EdgeKey::new(a, b))
    }
}

impl Adjacency for StaticGraph {
    fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn for_each_neighbor(&self, x: ExampleId, mut f: impl FnMut(ExampleId)) {
        for &y in &self.adj[x.0] {
            if !self.is_removed(x, y) {
                f(y);
            }
        }
    }
}

/// Stepwise S2 over a static graph; the graph loses every discovered cut.
pub struct S2Session<R = ChaCha8Rng> {
    graph: StaticGraph,
    labeled: LabeledSet,
    labels: Vec<Option<ClassId>>,
    by_class: Vec<Vec<ExampleId>>,
    unlabeled: Vec<ExampleId>,
    slot: Vec<usize>,
    rng: R,
    scratch: BfsScratch,
}

impl<R: Rng> S2Session<R> {
    pub fn new(graph: StaticGraph, labeled: LabeledSet, rng: R) -> Result<Self> {
        let n = graph.n();
        let labels = labeled.dense(n)?;
        let mut session = Self {
            scratch: BfsScratch::new(n),
            unlabeled: Vec::with_capacity(n),
            slot: vec![usize::MAX; n],
            by_class: Vec::new(),
            labels: vec![None; n],
            labeled: LabeledSet::new(),
            graph,
            rng,
        };
        for i in 0..n {
            session.slot[i] = session.unlabeled.len();
            session.unlabeled.push(ExampleId(i));
        }
        for (id, c) in labeled.iter() {
            session.record(id, c)?;
        }
        debug_assert_eq!(session.labels, labels);
        Ok(session)
    }

    pub fn labeled(&self) -> &LabeledSet {
        &self.labeled
    }

    pub fn into_labeled(self) -> LabeledSet {
        self.labeled
    }

    pub fn graph(&self) -> &StaticGraph {
        &self.graph
    }

    pub fn unlabeled_count(&self) -> usize {
        self.unlabeled.len()
    }

    fn record(&mut self, id: ExampleId, c: ClassId) -> Result<()> {
        self.labeled.insert(id, c)?;
        self.labels[id.0] = Some(c);
        if self.by_class.len() <= c.0 {
            self.by_class.resize(c.0 + 1, Vec::new());
        }
        self.by_class[c.0].push(id);
        let s = self.slot[id.0];
        let last = *self.unlabeled.last().expect("unlabeled nonempty");
        self.unlabeled.swap_remove(s);
        if last != id {
            self.slot[last.0] = s;
        }
        self.slot[id.0] = usize::MAX;
        let mut cuts = Vec::new();
        self.graph.for_each_neighbor(id, |y| {
            if matches!(self.labels[y.0], Some(ly) if ly != c) {
                cuts.push(y);
            }
        });
        for y in cuts {
            self.graph.removed.insert(EdgeKey::new(id, y));
        }
        Ok(())
    }

    /// Shortest path between any two differently labeled examples, or `None`.
    pub fn shortest_shortest_path(&mut self) -> Option<Path> {
        let mut best: Option<Path> = None;
        for c in 0..self.by_class.len() {
            let sources = &self.by_class[c];
            let cap = best.as_ref().map(|p| p.len() - 1);
            if cap == Some(1) {
                break;
            }
            let others = others_of(&self.by_class, c);
            if let Some(s) = straddling_search(
                &self.graph,
                &self.labels,
                ClassId(c),
                sources,
                &others,
                cap,
                &mut self.scratch,
            ) {
                best = Some(Path { class: ClassId(c), nodes: s.nodes });
            }
        }
        best
    }

    /// Chooses the next example: a path midpoint when a straddling path exists, else uniform.
    pub fn choose(&mut self) -> Option<(ExampleId, Provenance)> {
        if self.unlabeled.is_empty() {
            return None;
        }
        if let Some(p) = self.shortest_shortest_path() {
            let id = midpoint_of(&p.nodes, &mut self.rng).expect("cuts are removed eagerly");
            return Some((id, Provenance::Bisection));
        }
        let i = self.rng.random_range(0..self.unlabeled.len());
        Some((self.unlabeled[i], Provenance::FallbackRandom))
    }

    /// Chooses, queries, and records one example.
    pub fn step<O: Oracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Option<(ExampleId, Provenance)>> {
        let Some((id, tag)) = self.choose() else {
            return Ok(None);
        };
        let label = oracle.label(id)?;
        self.record(id, label)?;
        Ok(Some((id, tag)))
    }
}

/// Result of a standalone S2 run.
#[derive(Debug, Clone)]
pub struct S2Outcome {
    pub labeled: LabeledSet,
    pub queries: Vec<(ExampleId, Provenance)>,
    pub cuts_removed: usize,
}

/// S2 with a total label budget `m`: two uniform initial labels, then
/// shortest-shortest-path bisection or uniform fallback until `m` labels.
pub fn s2_select<O, R>(graph: &StaticGraph, oracle: &mut O, m: usize, rng: &mut R) -> Result<S2Outcome>
where
    O: Oracle + ?Sized,
    R: Rng + ?Sized,
{
    let n = graph.n();
    if m < 2 || m > n {
        return Err(Error::input(format!("S2 budget must satisfy 2 <= M <= N={n}, got {m}")));
    }
    let mut session = S2Session::new(graph.clone(), LabeledSet::new(), &mut *rng)?;
    let init = sample(&mut session.rng, n, 2);
    let mut queries = Vec::with_capacity(m);
    for i in init.iter() {
        let id = ExampleId(i);
        let label = oracle.label(id)?;
        session.record(id, label)?;
        queries.push((id, Provenance::SeedRound));
    }
    while session.labeled.len() < m {
        match session.step(oracle)? {
            Some(q) => queries.push(q),
            None => break,
        }
    }
    let cuts_removed = session.graph.removed.len();
    Ok(S2Outcome {
        labeled: session.into_labeled(),
        queries,
        cuts_removed,
    })
}

/// Produces a fresh score matrix for the current labeled set, standing in for retraining.
pub trait ScoreProvider {
    /// `(N, K)` every returned matrix must have.
    fn shape(&self) -> (usize, usize);

    fn scores(&mut self, labeled: &LabeledSet) -> Result<ScoreMatrix>;
}

/// Always returns the same matrix.
#[derive(Debug, Clone)]
pub struct StaticProvider(pub ScoreMatrix);

impl ScoreProvider for StaticProvider {
    fn shape(&self) -> (usize, usize) {
        (self.0.n(), self.0.k())
    }

    fn scores(&mut self, _labeled: &LabeledSet) -> Result<ScoreMatrix> {
        Ok(self.0.clone())
    }
}

/// Hands the labeled set to an external trainer through files.
///
/// Each round writes `labels_round_<r>.csv`, runs `command` with
/// `GALAXY_LABELS`, `GALAXY_SCORES_OUT` and `GALAXY_ROUND` set, then reads the
/// GXSM file the command wrote to `GALAXY_SCORES_OUT`.
#[derive(Debug, Clone)]
pub struct ExternalProvider {
    pub n: usize,
    pub k: usize,
    pub command: Vec<String>,
    pub work_dir: PathBuf,
    round: usize,
}

impl ExternalProvider {
    pub fn new(n: usize, k: usize, command: Vec<String>, work_dir: PathBuf) -> Self {
        Self {
            n,
            k,
            command,
            work_dir,
            round: 0,
        }
    }
}

impl ScoreProvider for ExternalProvider {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    fn scores(&mut self, labeled: &LabeledSet) -> Result<ScoreMatrix> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| Error::input("external provider needs a command"))?;
        let labels = self.work_dir.join(format!("labels_round_{}.csv", self.round));
        let out = self.work_dir.join(format!("scores_round_{}.gxsm", self.round));
        formats::save_labels_csv(&labels, labeled)?;
        let status = Command::new(program)
            .args(args)
            .env("GALAXY_LABELS", &labels)
            .env("GALAXY_SCORES_OUT", &out)
            .env("GALAXY_ROUND", self.round.to_string())
            .status()
            .map_err(|e| Error::io(program, e))?;
        if !status.success() {
            return Err(Error::Protocol(format!("score command exited with {status}")));
        }
        self.round += 1;
        formats::read_gxsm(&out)
    }
}

fn checked_scores(provider: &mut dyn ScoreProvider, labeled: &LabeledSet) -> Result<ScoreMatrix> {
    let (n, k) = provider.shape();
    let s = provider.scores(labeled)?;
    if s.n() != n || s.k() != k {
        return Err(Error::Protocol(format!(
            "provider returned a {}x{} matrix, expected {n}x{k}",
            s.n(),
            s.k()
        )));
    }
    Ok(s)
}

/// Settings for a multi-round run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub rounds: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub labeled: LabeledSet,
    pub metrics: Vec<MetricsRow>,
    pub batches: Vec<Batch>,
}

/// Round 0 labels `B` uniform examples. Each later round selects a batch with
/// `cfg.strategy` on the latest scores; after every round the provider is
/// refreshed and one [`MetricsRow`] is emitted.
///
/// The seed round depends only on `cfg.seed`, so strategies compared at the
/// same seed start from the same labeled set. `truth`, when given, scores
/// balanced accuracy over the whole pool; otherwise over the labeled subset.
pub fn run_rounds(
    cfg: &RunConfig,
    provider: &mut dyn ScoreProvider,
    oracle: &mut dyn Oracle,
    truth: Option<&[ClassId]>,
    s2_graph: Option<&StaticGraph>,
) -> Result<RunOutput> {
    let (n, k) = provider.shape();
    let budget = cfg
        .rounds
        .checked_mul(cfg.batch_size)
        .ok_or_else(|| Error::input("T*B overflows"))?;
    if budget > n {
        return Err(Error::input(format!(
            "label budget T*B = {}*{} = {budget} exceeds pool size {n}",
            cfg.rounds, cfg.batch_size
        )));
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::input(format!("truth has {} labels for N={n}", t.len())));
        }
    }
    let id_classes: Vec<ClassId> = (0..k - 1).map(ClassId).collect();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut labeled = LabeledSet::new();
    let mut metrics = Vec::with_capacity(cfg.rounds);
    let mut batches = Vec::with_capacity(cfg.rounds);
    let mut s2: Option<S2Session<ChaCha8Rng>> = None;
    let mut scores: Option<ScoreMatrix> = None;

    for round in 0..cfg.rounds {
        let batch = if round == 0 {
            let mut b = Batch::default();
            for i in sample(&mut seed_rng, n, cfg.batch_size).into_iter() {
                let id = ExampleId(i);
                labeled.insert(id, oracle.label(id)?)?;
                b.push(id, Provenance::SeedRound);
            }
            b
        } else {
            let s = scores.as_ref().expect("scores refreshed after every round");
            select_round(cfg, s, &mut labeled, oracle, &id_classes, &mut rng, &mut s2, s2_graph)?
        };
        let s = checked_scores(provider, &labeled)?;
        let acc_bal = round_accuracy(&s, &labeled, truth)?;
        let id_labels = labeled.iter().filter(|(_, c)| c.0 + 1 < k).count();
        metrics.push(MetricsRow {
            round,
            labels_used: labeled.len(),
            acc_bal,
            id_labels,
            strategy: cfg.strategy.name().to_string(),
        });
        batches.push(batch);
        scores = Some(s);
    }
    Ok(RunOutput {
        labeled,
        metrics,
        batches,
    })
}

#[allow(clippy::too_many_arguments)]
fn select_round(
    cfg: &RunConfig,
    s: &ScoreMatrix,
    labeled: &mut LabeledSet,
    oracle: &mut dyn Oracle,
    id_classes: &[ClassId],
    rng: &mut ChaCha8Rng,
    s2: &mut Option<S2Session<ChaCha8Rng>>,
    s2_graph: Option<&StaticGraph>,
) -> Result<Batch> {
    let b = cfg.batch_size;
    let one_shot = |batch: Batch, labeled: &mut LabeledSet, oracle: &mut dyn Oracle| -> Result<Batch> {
        for &id in &batch.ids {
            labeled.insert(id, oracle.label(id)?)?;
        }
        Ok(batch)
    };
    match cfg.strategy {
        Strategy::Galaxy => {
            let (batch, updated) = galaxy_select_batch(s, labeled, oracle, b, rng)?;
            *labeled = updated;
            Ok(batch)
        }
        Strategy::Confidence => one_shot(confidence_sampling_batch(s, labeled, b)?, labeled, oracle),
        Strategy::Mlp => one_shot(most_likely_positive_batch(s, labeled, b, id_classes)?, labeled, oracle),
        Strategy::Random => one_shot(random_batch(labeled, s.n(), b, rng)?, labeled, oracle),
        Strategy::S2 => {
            if s2.is_none() {
                let graph = s2_graph
                    .ok_or_else(|| Error::input("the s2 strategy needs a static graph"))?
                    .clone();
                *s2 = Some(S2Session::new(graph, labeled.clone(), rng.clone())?);
            }
            let session = s2.as_mut().expect("initialized above");
            let mut batch = Batch::default();
            for _ in 0..b {
                match session.step(oracle)? {
                    Some((id, tag)) => {
                        labeled.insert(id, session.labeled().get(id).expect("just recorded"))?;
                        batch.push(id, tag);
                    }
                    None => break,
                }
            }
            Ok(batch)
        }
    }
}

fn round_accuracy(s: &ScoreMatrix, labeled: &LabeledSet, truth: Option<&[ClassId]>) -> Result<f64> {
    let preds = s.argmax();
    match truth {
        Some(t) => balanced_accuracy(&preds, t, s.k()),
        None => {
            let (p, t): (Vec<ClassId>, Vec<ClassId>) =
                labeled.iter().map(|(id, c)| (preds[id.0], c)).unzip();
            balanced_accuracy(&p, &t, s.k())
        }
    }
}

/// [`run_rounds`] with the GALAXY strategy.
pub fn galaxy_run(
    provider: &mut dyn ScoreProvider,
    oracle: &mut dyn Oracle,
    truth: Option<&[ClassId]>,
    rounds: usize,
    batch_size: usize,
    seed: u64,
) -> Result<RunOutput> {
    let cfg = RunConfig {
        strategy: Strategy::Galaxy,
        rounds,
        batch_size,
        seed,
    };
    run_rounds(&cfg, provider, oracle, truth, None)
}
