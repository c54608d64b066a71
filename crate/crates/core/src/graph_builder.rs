//! Builds the `K` one-vs-all linear graphs from a score matrix.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::linear_graph::{GraphSet, Ranking};
use crate::scores::ScoreMatrix;

/// Per-example margins `p_k - max_c p_c` for one class; `0` exactly where `k` is the argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector {
    pub class: ClassId,
    pub values: Vec<f64>,
}

/// Row maxima `q_i`.
pub fn compute_confidences(s: &ScoreMatrix) -> Vec<f64> {
    s.rows()
        .map(|row| row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v))))
        .collect()
}

pub fn compute_margins(s: &ScoreMatrix, q: &[f64], k: ClassId) -> Result<MarginVector> {
    if k.0 >= s.k() {
        return Err(Error::input(format!("class {k} out of range for K={}", s.k())));
    }
    if q.len() != s.n() {
        return Err(Error::input(format!(
            "{} confidences for {} examples",
            q.len(),
            s.n()
        )));
    }
    let values = s
        .rows()
        .zip(q)
        .map(|(row, &qi)| f64::from(row[k.0]) - qi)
        .collect();
    Ok(MarginVector { class: k, values })
}

/// Ascending by margin, then confidence, then id. Raw values, no epsilon.
fn rank_class(margins: &[f64], q: &[f64]) -> Vec<ExampleId> {
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        margins[a]
            .partial_cmp(&margins[b])
            .unwrap_or(Ordering::Equal)
            .then_with(|| q[a].partial_cmp(&q[b]).unwrap_or(Ordering::Equal))
            .then_with(|| a.cmp(&b))
    });
    order.into_iter().map(ExampleId).collect()
}

/// One ranking per class at order 1 with no removals.
pub fn build_graphs(s: &ScoreMatrix) -> Result<GraphSet> {
    let q = compute_confidences(s);
    let rankings = (0..s.k())
        .into_par_iter()
        .map(|k| {
            let m = compute_margins(s, &q, ClassId(k))?;
            Ranking::new(ClassId(k), rank_class(&m.values, &q))
        })
        .collect::<Result<Vec<_>>>()?;
    GraphSet::new(rankings)
}

/// Raises the graph order by one, adding `(order[i], order[i + new_ord])` to every
/// class graph. New edges joining two examples with different labels are removed
/// immediately, so no labeled pair of opposite labels is ever adjacent.
pub fn connect(g: &mut GraphSet, new_ord: usize, labeled: &LabeledSet) -> Result<usize> {
    let labels = labeled.dense(g.n())?;
    let ids: Vec<ExampleId> = labeled.ids().collect();
    connect_dense(g, new_ord, &labels, &ids)
}

pub(crate) fn connect_dense(
    g: &mut GraphSet,
    new_ord: usize,
    labels: &[Option<ClassId>],
    labeled_ids: &[ExampleId],
) -> Result<usize> {
    let n = g.n();
    if new_ord + 1 > n {
        return Err(Error::OrderExhausted { requested: new_ord, n });
    }
    if new_ord != g.ord() + 1 {
        return Err(Error::input(format!(
            "connect must raise order by one: current {}, requested {new_ord}",
            g.ord()
        )));
    }
    g.set_ord(new_ord);
    let mut purge = Vec::new();
    for k in 0..g.k() {
        let ranking = g.ranking(ClassId(k));
        for &x in labeled_ids {
            let lx = labels[x.0].expect("labeled id has a label");
            let p = ranking.position(x);
            // only the higher partner; the lower one is visited from its own side
            if p + new_ord < n {
                let y = ranking.order()[p + new_ord];
                if matches!(labels[y.0], Some(ly) if ly != lx) {
                    purge.push((x, y));
                }
            }
        }
    }
    Ok(purge.into_iter().filter(|&(x, y)| g.remove_pair(x, y)).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_rows() -> ScoreMatrix {
        ScoreMatrix::from_rows(&[[0.9f32, 0.1], [0.4, 0.6], [0.2, 0.8]]).unwrap()
    }

    fn order(g: &GraphSet, k: usize) -> Vec<usize> {
        g.ranking(ClassId(k)).order().iter().map(|e| e.0).collect()
    }

    fn approx(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-6, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn confidences() {
        approx(&compute_confidences(&trace_rows()), &[0.9, 0.6, 0.8]);
        let s = ScoreMatrix::from_rows(&[[0.5f32, 0.5]]).unwrap();
        approx(&compute_confidences(&s), &[0.5]);
    }

    #[test]
    fn margins_hand_trace() {
        let s = trace_rows();
        let q = compute_confidences(&s);
        let m0 = compute_margins(&s, &q, ClassId(0)).unwrap();
        approx(&m0.values, &[0.0, -0.2, -0.6]);
        assert_eq!(m0.values[0], 0.0);
        let m1 = compute_margins(&s, &q, ClassId(1)).unwrap();
        approx(&m1.values, &[-0.8, 0.0, 0.0]);
        assert_eq!(m1.values[1], 0.0);
        assert_eq!(m1.values[2], 0.0);

        let s = ScoreMatrix::from_rows(&[[1.0f32, 0.0]]).unwrap();
        let q = compute_confidences(&s);
        assert_eq!(compute_margins(&s, &q, ClassId(0)).unwrap().values, vec![0.0]);
    }

    #[test]
    fn build_graphs_hand_trace() {
        let g = build_graphs(&trace_rows()).unwrap();
        assert_eq!(order(&g, 0), vec![2, 1, 0]);
        assert_eq!(order(&g, 1), vec![0, 1, 2]);
        assert_eq!(g.ord(), 1);
    }

    #[test]
    fn build_graphs_full_tie_uses_id() {
        let s = ScoreMatrix::from_rows(&[[0.5f32, 0.5], [0.5, 0.5]]).unwrap();
        let g = build_graphs(&s).unwrap();
        assert_eq!(order(&g, 0), vec![0, 1]);
        assert_eq!(order(&g, 1), vec![0, 1]);
    }

    #[test]
    fn separable_scores_have_one_cut() {
        let s = ScoreMatrix::from_binary_ood(&[0.1, 0.2, 0.3, 0.8, 0.9]).unwrap();
        let truth = [0usize, 0, 0, 1, 1];
        let g = build_graphs(&s).unwrap();
        let cuts: Vec<_> = g
            .edges(ClassId(1))
            .into_iter()
            .filter(|(a, b)| (truth[a.0] == 1) != (truth[b.0] == 1))
            .collect();
        assert_eq!(cuts.len(), 1);
        let (a, b) = cuts[0];
        let mut pair = [a.0, b.0];
        pair.sort();
        assert_eq!(pair, [2, 3]);
    }

    #[test]
    fn connect_adds_higher_order_edges() {
        let mut g = GraphSet::from_orders(&[&[0, 1, 2, 3, 4], &[0, 1, 2, 3, 4]]).unwrap();
        connect(&mut g, 2, &LabeledSet::new()).unwrap();
        let edges = g.edges(ClassId(0));
        for (a, b) in [(0, 2), (1, 3), (2, 4)] {
            assert!(edges.contains(&(ExampleId(a), ExampleId(b))));
        }
        assert_eq!(edges.len(), 4 + 3);
    }

    #[test]
    fn connect_purges_new_labeled_cuts() {
        let mut g = GraphSet::from_orders(&[&[0, 1, 2], &[0, 1, 2]]).unwrap();
        let l = LabeledSet::from_pairs([(ExampleId(0), ClassId(0)), (ExampleId(2), ClassId(1))]).unwrap();
        let removed = connect(&mut g, 2, &l).unwrap();
        assert_eq!(removed, 1);
        assert!(!g.adjacent(ClassId(0), ExampleId(0), ExampleId(2)));
    }

    #[test]
    fn connect_order_exhausted() {
        let mut g = GraphSet::from_orders(&[&[0, 1], &[1, 0]]).unwrap();
        assert!(matches!(
            connect(&mut g, 2, &LabeledSet::new()),
            Err(Error::OrderExhausted { requested: 2, n: 2 })
        ));
    }

    #[test]
    fn connect_must_step_by_one() {
        let mut g = GraphSet::from_orders(&[&[0, 1, 2, 3], &[0, 1, 2, 3]]).unwrap();
        assert!(connect(&mut g, 3, &LabeledSet::new()).is_err());
    }
}
