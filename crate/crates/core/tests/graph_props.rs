mod common;

use common::{check_against_brute_force, random_pool, random_rows};
use galaxy_core::graph_builder::{build_graphs, compute_confidences, compute_margins};
use galaxy_core::pool_sim::make_separable_pool;
use galaxy_core::{ClassId, ExampleId, GraphSet, ScoreMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn straddling_path_matches_brute_force_on_200_pools() {
    for seed in 0..200 {
        check_against_brute_force(seed);
    }
}

fn cut_edges(g: &GraphSet, k: ClassId, is_k: impl Fn(usize) -> bool) -> usize {
    g.edges(k).iter().filter(|(a, b)| is_k(a.0) != is_k(b.0)).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_agrees(seed in 200u64..100_000) {
        check_against_brute_force(seed);
    }

    #[test]
    fn neighbors_are_symmetric(seed in any::<u64>()) {
        let (g, _, k) = random_pool(seed);
        for c in 0..k {
            let c = ClassId(c);
            for x in 0..g.n() {
                for y in g.neighbors(c, ExampleId(x)).unwrap() {
                    prop_assert!(g.neighbors(c, y).unwrap().contains(&ExampleId(x)));
                    prop_assert!(g.adjacent(c, ExampleId(x), y));
                }
            }
        }
    }

    #[test]
    fn rankings_sorted_by_margin_confidence_id(seed in any::<u64>(), n in 1usize..40, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ScoreMatrix::from_rows(&random_rows(&mut rng, n, k)).unwrap();
        let g = build_graphs(&s).unwrap();
        let q = compute_confidences(&s);
        for c in 0..s.k() {
            let m = compute_margins(&s, &q, ClassId(c)).unwrap();
            let order = g.ranking(ClassId(c)).order();
            prop_assert_eq!(order.len(), s.n());
            for w in order.windows(2) {
                let (a, b) = (w[0].0, w[1].0);
                let ka = (m.values[a], q[a], a);
                let kb = (m.values[b], q[b], b);
                prop_assert!(ka.partial_cmp(&kb) == Some(std::cmp::Ordering::Less), "{:?} !< {:?}", ka, kb);
            }
            for &v in &m.values {
                prop_assert!(v <= 0.0);
            }
        }
    }

    #[test]
    fn separable_pool_has_one_cut_per_graph(n_id in 1usize..400, n_od in 1usize..400, skew in 0.0f64..0.45, seed in any::<u64>()) {
        let (pool, s) = make_separable_pool(n_id, n_od, skew, seed).unwrap();
        let g = build_graphs(&s).unwrap();
        for c in 0..2 {
            let cuts = cut_edges(&g, ClassId(c), |i| pool.true_labels[i] == ClassId(c));
            prop_assert_eq!(cuts, 1);
        }
    }

    #[test]
    fn purge_leaves_no_opposite_labeled_edges(seed in any::<u64>()) {
        let (mut g, labeled, k) = random_pool(seed);
        for (x, _) in labeled.iter() {
            g.remove_cut_edges(x, &labeled).unwrap();
        }
        for c in 0..k {
            for (a, b) in g.edges(ClassId(c)) {
                if let (Some(la), Some(lb)) = (labeled.get(a), labeled.get(b)) {
                    prop_assert_eq!(la, lb);
                }
            }
            if let Some(p) = g.shortest_straddling_path(ClassId(c), &labeled).unwrap() {
                prop_assert!(p.len() >= 2);
            }
        }
    }
}
