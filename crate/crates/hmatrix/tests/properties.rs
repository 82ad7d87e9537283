use proptest::prelude::*;
use rte_hmatrix::{aca, is_admissible, BlockTree, ClusterTree, DenseGenerator, FnGenerator, HMatrix, HOptions, LeafData, MatrixGenerator, Point};

fn cloud() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..300)
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Smooth away from the diagonal, bounded on it.
fn kernel(p: &[Point]) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
    move |i, j| 1.0 / (0.5 + dist(&p[i], &p[j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cluster_tree_invariants(points in cloud(), leaf in 1usize..40) {
        let t = ClusterTree::build(&points, leaf);
        let mut sorted = t.perm.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..points.len()).collect::<Vec<_>>());
        for (id, n) in t.nodes.iter().enumerate() {
            for &i in t.indices(id) {
                prop_assert!(dist(&points[i], &n.center) <= n.radius * (1.0 + 1e-12) + 1e-12);
            }
            match n.children {
                None => prop_assert!(n.len() <= leaf),
                Some([a, b]) => {
                    let (a, b) = (&t.nodes[a], &t.nodes[b]);
                    prop_assert_eq!((a.start, a.end, b.end), (n.start, b.start, n.end));
                }
            }
        }
    }

    #[test]
    fn block_leaves_tile_the_matrix(points in cloud(), leaf in 1usize..32, eta in 0.3f64..3.0) {
        let t = ClusterTree::build(&points, leaf);
        let blocks = BlockTree::build(&t, &t, eta);
        let n = points.len();
        let mut hits = vec![0u8; n * n];
        for b in &blocks.leaves {
            let (r, c) = (&t.nodes[b.row], &t.nodes[b.col]);
            prop_assert_eq!(b.admissible, is_admissible(r, c, eta));
            if !b.admissible {
                prop_assert!(r.is_leaf() && c.is_leaf());
            }
            for &i in t.indices(b.row) {
                for &j in t.indices(b.col) {
                    hits[i * n + j] += 1;
                }
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn hmatrix_matvec_tracks_the_dense_product(points in cloud(), leaf in 4usize..32, x in prop::collection::vec(-1.0f64..1.0, 300)) {
        let g = FnGenerator::new(points.len(), points.len(), kernel(&points));
        let t = ClusterTree::build(&points, leaf);
        let eps = 1e-6;
        let h = HMatrix::assemble(&g, t.clone(), t, HOptions { eta: 1.0, eps }).unwrap();
        let x = &x[..points.len()];
        let (a, b) = (h.matvec(x).unwrap(), DenseGenerator::from_generator(&g).matvec(x));
        let err: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-4 * norm.max(1e-300), "{} vs {}", err, norm);
    }

    #[test]
    fn admissible_blocks_meet_the_tolerance(points in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 100..300)) {
        let g = FnGenerator::new(points.len(), points.len(), kernel(&points));
        let t = ClusterTree::build(&points, 8);
        let eps = 1e-6;
        let h = HMatrix::assemble(&g, t.clone(), t, HOptions { eta: 1.0, eps }).unwrap();
        for leaf in h.leaves.iter().filter(|l| l.admissible) {
            let (ri, ci) = h.leaf_indices(leaf);
            let exact: Vec<f64> = ci.iter().flat_map(|&j| ri.iter().map(move |&i| (i, j))).map(|(i, j)| g.entry(i, j)).collect();
            let approx = match &leaf.data {
                LeafData::LowRank(lr) => lr.to_dense(),
                LeafData::Dense(d) => d.clone(),
                LeafData::Zero => vec![0.0; exact.len()],
            };
            let err: f64 = exact.iter().zip(&approx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-5 * norm, "{}x{}: {} vs {}", ri.len(), ci.len(), err, norm);
        }
    }

    #[test]
    fn aca_recovers_exact_low_rank_blocks(rank in 1usize..5, m in 5usize..40, n in 5usize..40, seed in 0u64..1000) {
        let f = |k: usize, i: usize| ((seed as f64 + 1.0) * (k as f64 + 1.3) * (i as f64 + 0.7)).sin();
        let g = FnGenerator::new(m, n, |i, j| (0..rank).map(|k| f(k, i) * f(k + 7, j)).sum());
        let rows: Vec<usize> = (0..m).collect();
        let cols: Vec<usize> = (0..n).collect();
        let res = aca(&mut g.block(&rows, &cols), m, n, 1e-12, m.min(n));
        prop_assert!(!res.saturated || res.factors.rank <= m.min(n));
        let d = res.factors.to_dense();
        for j in 0..n {
            for i in 0..m {
                let e = g.entry(i, j);
                prop_assert!((d[j * m + i] - e).abs() <= 1e-9 * (1.0 + e.abs()));
            }
        }
    }
}
