//! One-vs-all linear graphs over per-class rankings.
//!
//! A [`GraphSet`] never materializes its edges. For class `k` with ranking
//! `order`, the edge set at order `ord` is every pair `(order[i], order[i + d])`
//! with `1 <= d <= ord`, minus the pairs recorded in `removed_cuts`. The removed
//! set is shared by all `K` graphs: an edge absent from a graph is never
//! enumerated there, so a single set behaves like per-graph removal.

use rustc_hash::FxHashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId, LabeledSet};

/// Examples of one class graph sorted by ascending margin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    class: ClassId,
    order: Vec<ExampleId>,
    position: Vec<usize>,
}

impl Ranking {
    /// `order` must be a permutation of `0..order.len()`.
    pub fn new(class: ClassId, order: Vec<ExampleId>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (p, id) in order.iter().enumerate() {
            if id.0 >= n || position[id.0] != usize::MAX {
                return Err(Error::input(format!(
                    "ranking for class {class} is not a permutation of 0..{n}"
                )));
            }
            position[id.0] = p;
        }
        Ok(Self {
            class,
            order,
            position,
        })
    }

    pub fn class(&self) -> ClassId {
        self.class
    }

    pub fn order(&self) -> &[ExampleId] {
        &self.order
    }

    /// Rank of `id` in this ordering.
    pub fn position(&self, id: ExampleId) -> usize {
        self.position[id.0]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Unordered example pair, stored smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(pub ExampleId, pub ExampleId);

impl EdgeKey {
    pub fn new(a: ExampleId, b: ExampleId) -> Self {
        if a <= b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

/// The `K` implicit one-vs-all linear graphs.
#[derive(Debug, Clone)]
pub struct GraphSet {
    rankings: Vec<Ranking>,
    ord: usize,
    removed_cuts: FxHashSet<EdgeKey>,
    // true for any example that is an endpoint of a removed pair; lets the
    // hot path skip hashing for the common case
    touched: Vec<bool>,
}

impl GraphSet {
    /// Graphs at order 1 with nothing removed. All rankings must share one pool size.
    pub fn new(rankings: Vec<Ranking>) -> Result<Self> {
        let n = rankings
            .first()
            .map(Ranking::len)
            .ok_or_else(|| Error::input("a graph set needs at least one ranking"))?;
        if n == 0 {
            return Err(Error::input("rankings must be nonempty"));
        }
        for (k, r) in rankings.iter().enumerate() {
            if r.len() != n {
                return Err(Error::input(format!(
                    "ranking {k} has length {}, expected {n}",
                    r.len()
                )));
            }
            if r.class() != ClassId(k) {
                return Err(Error::input(format!(
                    "ranking at slot {k} is tagged class {}",
                    r.class()
                )));
            }
        }
        Ok(Self {
            rankings,
            ord: 1,
            removed_cuts: FxHashSet::default(),
            touched: vec![false; n],
        })
    }

    /// Convenience constructor from raw orders, one per class.
    pub fn from_orders(orders: &[&[usize]]) -> Result<Self> {
        let rankings = orders
            .iter()
            .enumerate()
            .map(|(k, o)| Ranking::new(ClassId(k), o.iter().copied().map(ExampleId).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rankings)
    }

    pub fn n(&self) -> usize {
        self.rankings[0].len()
    }

    pub fn k(&self) -> usize {
        self.rankings.len()
    }

    pub fn ord(&self) -> usize {
        self.ord
    }

    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    pub fn ranking(&self, k: ClassId) -> &Ranking {
        &self.rankings[k.0]
    }

    pub fn removed_cuts(&self) -> &FxHashSet<EdgeKey> {
        &self.removed_cuts
    }

    /// Raises the order without purging; see `graph_builder::connect` for the checked version.
    pub(crate) fn set_ord(&mut self, ord: usize) {
        self.ord = ord;
    }

    /// Removes an edge from every graph. Returns whether the pair was new.
    pub fn remove_pair(&mut self, a: ExampleId, b: ExampleId) -> bool {
        let inserted = self.removed_cuts.insert(EdgeKey::new(a, b));
        if inserted {
            self.touched[a.0] = true;
            self.touched[b.0] = true;
        }
        inserted
    }

    #[inline]
    pub fn is_removed(&self, a: ExampleId, b: ExampleId) -> bool {
        self.touched[a.0] && self.touched[b.0] && self.removed_cuts.contains(&EdgeKey::new(a, b))
    }

    fn check_class(&self, k: ClassId) -> Result<()> {
        if k.0 >= self.k() {
            return Err(Error::input(format!("class {k} out of range for K={}", self.k())));
        }
        Ok(())
    }

    fn check_example(&self, x: ExampleId) -> Result<()> {
        if x.0 >= self.n() {
            return Err(Error::input(format!("example {x} out of range for N={}", self.n())));
        }
        Ok(())
    }

    /// Calls `f` on every neighbor of `x` in class graph `k`, nearest ranks first.
    #[inline]
    pub(crate) fn for_each_neighbor(&self, k: usize, x: ExampleId, mut f: impl FnMut(ExampleId)) {
        let ranking = &self.rankings[k];
        let n = ranking.order.len();
        let p = ranking.position[x.0];
        for d in 1..=self.ord {
            if p >= d {
                let y = ranking.order[p - d];
                if !self.is_removed(x, y) {
                    f(y);
                }
            }
            if p + d < n {
                let y = ranking.order[p + d];
                if !self.is_removed(x, y) {
                    f(y);
                }
            }
        }
    }

    /// Neighbors of `x` in class graph `k` at the current order, sorted ascending.
    pub fn neighbors(&self, k: ClassId, x: ExampleId) -> Result<Vec<ExampleId>> {
        self.check_class(k)?;
        self.check_example(x)?;
        let mut out = Vec::with_capacity(2 * self.ord);
        self.for_each_neighbor(k.0, x, |y| out.push(y));
        out.sort_unstable();
        Ok(out)
    }

    /// Whether `a` and `b` share an edge in class graph `k` at the current order.
    pub fn adjacent(&self, k: ClassId, a: ExampleId, b: ExampleId) -> bool {
        let r = &self.rankings[k.0];
        let (pa, pb) = (r.position[a.0], r.position[b.0]);
        let gap = pa.abs_diff(pb);
        gap >= 1 && gap <= self.ord && !self.is_removed(a, b)
    }

    /// Every present edge of class graph `k`, as `(lower rank, higher rank)` example pairs.
    pub fn edges(&self, k: ClassId) -> Vec<(ExampleId, ExampleId)> {
        let order = &self.rankings[k.0].order;
        let mut out = Vec::new();
        for d in 1..=self.ord {
            for i in 0..order.len().saturating_sub(d) {
                let (a, b) = (order[i], order[i + d]);
                if !self.is_removed(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Shortest path in graph `k` from a labeled class-`k` example to any example
    /// labeled with another class. `None` when no such pair is connected.
    pub fn shortest_straddling_path(&self, k: ClassId, labeled: &LabeledSet) -> Result<Option<Path>> {
        self.check_class(k)?;
        let labels = labeled.dense(self.n())?;
        let mut scratch = BfsScratch::new(self.n());
        let view = ClassView { graphs: self, k: k.0 };
        let (sources, others) = split_sources(&labels, k);
        Ok(straddling_search(&view, &labels, k, &sources, &others, None, &mut scratch).map(|s| Path {
            class: k,
            nodes: s.nodes,
        }))
    }

    /// Records `(x, y)` as removed for every labeled `y` adjacent to `x` in any
    /// class graph whose label differs from `x`'s. Returns the number of new removals.
    pub fn remove_cut_edges(&mut self, x: ExampleId, labeled: &LabeledSet) -> Result<usize> {
        self.check_example(x)?;
        let lx = labeled
            .get(x)
            .ok_or_else(|| Error::input(format!("example {x} is not labeled")))?;
        let mut cuts = Vec::new();
        for k in 0..self.k() {
            self.for_each_neighbor(k, x, |y| {
                if matches!(labeled.get(y), Some(ly) if ly != lx) {
                    cuts.push(y);
                }
            });
        }
        Ok(cuts.into_iter().filter(|&y| self.remove_pair(x, y)).count())
    }

    /// Dense-label variant of [`GraphSet::remove_cut_edges`] used by the engine.
    pub(crate) fn remove_cut_edges_dense(&mut self, x: ExampleId, labels: &[Option<ClassId>]) -> usize {
        let Some(lx) = labels[x.0] else { return 0 };
        let mut cuts = Vec::new();
        for k in 0..self.k() {
            self.for_each_neighbor(k, x, |y| {
                if matches!(labels[y.0], Some(ly) if ly != lx) {
                    cuts.push(y);
                }
            });
        }
        cuts.into_iter().filter(|&y| self.remove_pair(x, y)).count()
    }

    /// Removes every edge, at the current order, whose endpoints carry different labels.
    pub(crate) fn purge_labeled_cuts(&mut self, labels: &[Option<ClassId>], labeled_ids: &[ExampleId]) -> usize {
        let mut removed = 0;
        for &x in labeled_ids {
            removed += self.remove_cut_edges_dense(x, labels);
        }
        removed
    }
}

/// A path `v_0 .. v_m` in class graph `class`: `v_0` labeled `class`, `v_m`
/// labeled otherwise, interior unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub class: ClassId,
    pub nodes: Vec<ExampleId>,
}

impl Path {
    /// Number of edges.
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self) -> ExampleId {
        self.nodes[0]
    }

    pub fn terminal(&self) -> ExampleId {
        *self.nodes.last().expect("path has nodes")
    }
}

/// Middle node of a path with `m >= 2` edges. For odd `m` a fair coin picks
/// between the two central nodes.
pub fn path_midpoint<R: Rng + ?Sized>(path: &Path, rng: &mut R) -> Result<ExampleId> {
    midpoint_of(&path.nodes, rng)
}

pub(crate) fn midpoint_of<R: Rng + ?Sized>(nodes: &[ExampleId], rng: &mut R) -> Result<ExampleId> {
    let m = nodes.len().saturating_sub(1);
    if m < 2 {
        return Err(Error::input(format!(
            "midpoint needs a path of at least 2 edges, got {m}"
        )));
    }
    let idx = if m.is_multiple_of(2) {
        m / 2
    } else if rng.random_bool(0.5) {
        (m - 1) / 2
    } else {
        m.div_ceil(2)
    };
    Ok(nodes[idx])
}

/// Undirected adjacency the straddling search can walk.
pub(crate) trait Adjacency {
    fn node_count(&self) -> usize;
    fn for_each_neighbor(&self, x: ExampleId, f: impl FnMut(ExampleId));
}

pub(crate) struct ClassView<'a> {
    pub graphs: &'a GraphSet,
    pub k: usize,
}

impl Adjacency for ClassView<'_> {
    fn node_count(&self) -> usize {
        self.graphs.n()
    }

    #[inline]
    fn for_each_neighbor(&self, x: ExampleId, f: impl FnMut(ExampleId)) {
        self.graphs.for_each_neighbor(self.k, x, f)
    }
}

/// Reusable BFS buffers. A generation stamp marks which entries are live, so
/// repeated searches cost only what they visit.
pub(crate) struct BfsScratch {
    stamp: Vec<u32>,
    generation: u32,
    dist: Vec<u32>,
    best_source: Vec<u32>,
    frontier: Vec<ExampleId>,
    next: Vec<ExampleId>,
}

impl BfsScratch {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            generation: 0,
            dist: vec![0; n],
            best_source: vec![0; n],
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            *self = Self::new(n);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        self.frontier.clear();
        self.next.clear();
    }

    #[inline]
    fn visited(&self, x: ExampleId) -> bool {
        self.stamp[x.0] == self.generation
    }

    #[inline]
    fn visit(&mut self, x: ExampleId, dist: u32, source: u32) {
        self.stamp[x.0] = self.generation;
        self.dist[x.0] = dist;
        self.best_source[x.0] = source;
    }
}

/// Examples labeled `class`, and examples carrying any other label.
pub(crate) fn split_sources(labels: &[Option<ClassId>], class: ClassId) -> (Vec<ExampleId>, Vec<ExampleId>) {
    let mut sources = Vec::new();
    let mut others = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) if *c == class => sources.push(ExampleId(i)),
            Some(_) => others.push(ExampleId(i)),
            None => {}
        }
    }
    (sources, others)
}

pub(crate) struct Straddle {
    pub nodes: Vec<ExampleId>,
}

/// Shortest path from an example labeled `class` (all listed in `sources`) to
/// one labeled otherwise (all listed in `others`) through unlabeled examples.
/// Among shortest pairs the smaller terminal id wins, then the smaller source
/// id. `max_len` prunes paths longer than the bound.
///
/// The search runs from whichever side has fewer labeled examples; a search
/// that fails then stays local to the smaller side.
pub(crate) fn straddling_search<A: Adjacency>(
    graph: &A,
    labels: &[Option<ClassId>],
    class: ClassId,
    sources: &[ExampleId],
    others: &[ExampleId],
    max_len: Option<usize>,
    scratch: &mut BfsScratch,
) -> Option<Straddle> {
    if sources.is_empty() || others.is_empty() {
        scratch.reset(graph.node_count());
        return None;
    }
    if others.len() >= sources.len() {
        let (terminal, _) = layered_search(graph, labels, sources, |c| c == class, max_len, scratch)?;
        return Some(Straddle {
            nodes: reconstruct(graph, labels, scratch, terminal),
        });
    }
    // reached sources carry the smallest terminal at the shortest distance
    let (_, hits) = layered_search(graph, labels, others, |c| c != class, max_len, scratch)?;
    let (source, _) = hits
        .into_iter()
        .map(|s| (s, scratch.best_source[s.0]))
        .min_by_key(|&(s, t)| (t, s))
        .expect("a successful search reaches a source");
    let (terminal, _) = layered_search(graph, labels, &[source], |c| c == class, max_len, scratch)?;
    Some(Straddle {
        nodes: reconstruct(graph, labels, scratch, terminal),
    })
}

/// Multi-source BFS through unlabeled examples from `starts` (every labeled
/// example whose class satisfies `is_start`) until the first layer holding an
/// example labeled otherwise. Returns the smallest such example and the whole layer.
fn layered_search<A: Adjacency>(
    graph: &A,
    labels: &[Option<ClassId>],
    starts: &[ExampleId],
    is_start: impl Fn(ClassId) -> bool,
    max_len: Option<usize>,
    scratch: &mut BfsScratch,
) -> Option<(ExampleId, Vec<ExampleId>)> {
    scratch.reset(graph.node_count());
    for &id in starts {
        debug_assert!(labels[id.0].is_some_and(&is_start));
        scratch.visit(id, 0, id.0 as u32);
        scratch.frontier.push(id);
    }
    let limit = max_len.unwrap_or(usize::MAX);
    let mut depth: u32 = 0;
    let mut hits: Vec<ExampleId> = Vec::new();
    while !scratch.frontier.is_empty() {
        if (depth as usize) >= limit {
            return None;
        }
        let next_depth = depth + 1;
        let frontier = std::mem::take(&mut scratch.frontier);
        for &u in &frontier {
            let src = scratch.best_source[u.0];
            graph.for_each_neighbor(u, |v| {
                if scratch.visited(v) {
                    if scratch.dist[v.0] == next_depth && src < scratch.best_source[v.0] {
                        scratch.best_source[v.0] = src;
                    }
                    return;
                }
                scratch.visit(v, next_depth, src);
                match labels[v.0] {
                    None => scratch.next.push(v),
                    Some(c) if !is_start(c) => hits.push(v),
                    // starts are all visited at depth 0
                    Some(_) => {}
                }
            });
        }
        scratch.frontier = frontier;
        if let Some(&first) = hits.iter().min() {
            return Some((first, hits));
        }
        std::mem::swap(&mut scratch.frontier, &mut scratch.next);
        scratch.next.clear();
        depth = next_depth;
    }
    None
}

fn reconstruct<A: Adjacency>(
    graph: &A,
    labels: &[Option<ClassId>],
    scratch: &BfsScratch,
    terminal: ExampleId,
) -> Vec<ExampleId> {
    let source = scratch.best_source[terminal.0];
    let mut nodes = vec![terminal];
    let mut cur = terminal;
    let mut d = scratch.dist[terminal.0];
    while d > 0 {
        let mut parent: Option<ExampleId> = None;
        graph.for_each_neighbor(cur, |u| {
            let ok = scratch.visited(u)
                && scratch.dist[u.0] == d - 1
                && scratch.best_source[u.0] == source
                // interior hops only pass through unlabeled examples
                && (d - 1 == 0 || labels[u.0].is_none());
            if ok && parent.is_none_or(|p| u < p) {
                parent = Some(u);
            }
        });
        cur = parent.expect("BFS parent exists for every reached node");
        nodes.push(cur);
        d -= 1;
    }
    nodes.reverse();
    nodes
}
