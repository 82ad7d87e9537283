//! Geometric cluster tree: recursive longest-axis median bisection.

pub type Point = [f64; 3];

#[derive(Debug, Clone)]
pub struct ClusterNode {
    /// Range into [`ClusterTree::perm`].
    pub start: usize,
    pub end: usize,
    pub center: Point,
    pub radius: f64,
    pub children: Option<[usize; 2]>,
    pub level: usize,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Binary cluster tree over a point cloud.
///
/// Node `0` is the root. Every node owns the contiguous slice
/// `perm[start..end]` of original point indices, so children partition
/// their parent by construction.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    pub nodes: Vec<ClusterNode>,
    pub perm: Vec<usize>,
    pub leaf_size: usize,
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn bounding_box(points: &[Point], idx: &[usize]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    (lo, hi)
}

impl ClusterTree {
    /// Builds the tree. `leaf_size` is clamped to at least 1; an empty point
    /// set yields a single empty leaf.
    pub fn build(points: &[Point], leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut perm: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        // (node index, start, end, level)
        let mut stack = vec![(0usize, 0usize, points.len(), 0usize)];
        nodes.push(ClusterNode {
            start: 0,
            end: points.len(),
            center: [0.0; 3],
            radius: 0.0,
            children: None,
            level: 0,
        });
        while let Some((id, start, end, level)) = stack.pop() {
            let slice = &mut perm[start..end];
            let (lo, hi) = if slice.is_empty() {
                ([0.0; 3], [0.0; 3])
            } else {
                bounding_box(points, slice)
            };
            let center = [
                0.5 * (lo[0] + hi[0]),
                0.5 * (lo[1] + hi[1]),
                0.5 * (lo[2] + hi[2]),
            ];
            let radius = slice
                .iter()
                .map(|&i| dist(&center, &points[i]))
                .fold(0.0, f64::max);
            nodes[id].center = center;
            nodes[id].radius = radius;
            if end - start <= leaf_size {
                continue;
            }
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (end - start) / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
            });
            let left = nodes.len();
            let right = left + 1;
            for (s, e) in [(start, start + mid), (start + mid, end)] {
                nodes.push(ClusterNode {
                    start: s,
                    end: e,
                    center: [0.0; 3],
                    radius: 0.0,
                    children: None,
                    level: level + 1,
                });
            }
            nodes[id].children = Some([left, right]);
            stack.push((right, start + mid, end, level + 1));
            stack.push((left, start, start + mid, level + 1));
        }
        Self {
            nodes,
            perm,
            leaf_size,
        }
    }

    pub fn root(&self) -> &ClusterNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn indices(&self, node: usize) -> &[usize] {
        let n = &self.nodes[node];
        &self.perm[n.start..n.end]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &ClusterNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf())
    }
}

/// `max(R1, R2) < eta * |c1 - c2|`.
pub fn is_admissible(a: &ClusterNode, b: &ClusterNode, eta: f64) -> bool {
    a.radius.max(b.radius) < eta * dist(&a.center, &b.center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn node(center: Point, radius: f64) -> ClusterNode {
        ClusterNode {
            start: 0,
            end: 1,
            center,
            radius,
            children: None,
            level: 0,
        }
    }

    #[test]
    fn single_point_is_a_zero_radius_leaf() {
        let t = ClusterTree::build(&[[1.0, 2.0, 3.0]], 4);
        assert_eq!(t.nodes.len(), 1);
        assert!(t.root().is_leaf());
        assert_eq!(t.root().radius, 0.0);
    }

    #[test]
    fn cube_corners_give_a_balanced_depth_three_tree() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
        }
        let t = ClusterTree::build(&pts, 1);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.leaves().count(), 8);
        assert!(t.leaves().all(|(_, n)| n.level == 3 && n.len() == 1));
    }

    #[test]
    fn random_cloud_leaves_partition_the_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..10_000)
            .map(|_| [rng.gen(), rng.gen(), rng.gen()])
            .collect();
        let t = ClusterTree::build(&pts, 32);
        let mut seen = vec![0u8; pts.len()];
        for (id, n) in t.leaves() {
            assert!(n.len() <= 32);
            for &i in t.indices(id) {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        // quasi-uniform cloud: depth close to log2(N / leaf)
        assert!(t.depth() <= (10_000f64 / 32.0).log2().ceil() as usize + 2);
        for (id, n) in t.nodes.iter().enumerate() {
            for &i in t.indices(id) {
                assert!(dist(&n.center, &pts[i]) <= n.radius + 1e-12);
            }
            if let Some([l, r]) = n.children {
                assert_eq!(t.nodes[l].start, n.start);
                assert_eq!(t.nodes[l].end, t.nodes[r].start);
                assert_eq!(t.nodes[r].end, n.end);
            }
        }
    }

    #[test]
    fn admissibility_examples() {
        let a = node([0.0; 3], 1.0);
        assert!(!is_admissible(&a, &a, 0.5));
        let b = node([10.0, 0.0, 0.0], 1.0);
        assert!(is_admissible(&a, &b, 0.5));
        let c = node([0.0; 3], 2.0);
        let d = node([3.0, 0.0, 0.0], 1.0);
        assert!(!is_admissible(&c, &d, 0.5));
        assert_eq!(is_admissible(&c, &d, 0.9), is_admissible(&d, &c, 0.9));
    }
}
