//! Bounding volume hierarchy over triangles, for segment queries.

use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy)]
pub struct Tri {
    pub a: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// Caller-defined index carried through queries.
    pub id: u32,
    /// `|e1| |e2|`, the scale of the parallel test.
    edges: f64,
}

impl Tri {
    pub fn new(a: Vec3, b: Vec3, c: Vec3, id: u32) -> Self {
        Self {
            a,
            e1: b - a,
            e2: c - a,
            id,
            edges: (b - a).norm() * (c - a).norm(),
        }
    }

    /// Right-hand normal `e1 x e2` (not normalized).
    pub fn normal(&self) -> Vec3 {
        self.e1.cross(self.e2)
    }

    fn lo(&self) -> Vec3 {
        self.a.min(self.a + self.e1).min(self.a + self.e2)
    }

    fn hi(&self) -> Vec3 {
        self.a.max(self.a + self.e1).max(self.a + self.e2)
    }

    /// Parameter `t` where `o + t d` crosses the triangle, with barycentric
    /// slack `eps`; `None` when parallel or missed.
    #[inline]
    pub fn intersect(&self, o: Vec3, d: Vec3, eps: f64) -> Option<f64> {
        self.intersect_with(o, d, d.norm(), eps)
    }

    #[inline]
    fn intersect_with(&self, o: Vec3, d: Vec3, len: f64, eps: f64) -> Option<f64> {
        let p = d.cross(self.e2);
        let det = self.e1.dot(p);
        if det.abs() <= 1e-14 * self.edges * len {
            return None;
        }
        let inv = 1.0 / det;
        let s = o - self.a;
        let u = s.dot(p) * inv;
        if u < -eps || u > 1.0 + eps {
            return None;
        }
        let q = s.cross(self.e1);
        let v = d.dot(q) * inv;
        if v < -eps || u + v > 1.0 + eps {
            return None;
        }
        Some(self.e2.dot(q) * inv)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first triangle; inner: right child (left is `self + 1`).
    index: u32,
    count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
}

const LEAF: usize = 4;

impl Bvh {
    pub fn build(mut tris: Vec<Tri>) -> Self {
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF + 1);
        if !tris.is_empty() {
            let n = tris.len();
            build_rec(&mut tris, 0, n, &mut nodes);
        }
        Self { nodes, tris }
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn tris(&self) -> &[Tri] {
        &self.tris
    }

    /// Calls `hit(t, tri)` for every triangle crossed by `o + t d` with
    /// `t` in `[t0, t1]`.
    #[inline]
    pub fn segment(&self, o: Vec3, d: Vec3, t0: f64, t1: f64, eps: f64, mut hit: impl FnMut(f64, &Tri)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let len = d.norm();
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let i = stack[sp] as usize;
            let node = &self.nodes[i];
            if !slab(node, o, inv, t0, t1) {
                continue;
            }
            if node.count > 0 {
                let first = node.index as usize;
                for tri in &self.tris[first..first + node.count as usize] {
                    if let Some(t) = tri.intersect_with(o, d, len, eps) {
                        if t >= t0 && t <= t1 {
                            hit(t, tri);
                        }
                    }
                }
            } else {
                stack[sp] = node.index;
                stack[sp + 1] = i as u32 + 1;
                sp += 2;
            }
        }
    }
}

#[inline]
fn slab(n: &Node, o: Vec3, inv: Vec3, t0: f64, t1: f64) -> bool {
    let mut lo = t0;
    let mut hi = t1;
    for k in 0..3 {
        let a = (n.lo[k] - o[k]) * inv[k];
        let b = (n.hi[k] - o[k]) * inv[k];
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        // NaN (0 * inf) means the ray lies in the slab plane: keep it
        if a.is_nan() || b.is_nan() {
            if o[k] < n.lo[k] || o[k] > n.hi[k] {
                return false;
            }
            continue;
        }
        lo = lo.max(a);
        hi = hi.min(b);
        if lo > hi {
            return false;
        }
    }
    true
}

fn build_rec(tris: &mut [Tri], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &mut tris[start..end];
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    let mut clo = lo;
    let mut chi = hi;
    for t in slice.iter() {
        lo = lo.min(t.lo());
        hi = hi.max(t.hi());
        let c = t.a + (t.e1 + t.e2) / 3.0;
        clo = clo.min(c);
        chi = chi.max(c);
    }
    // pad so that axis-aligned triangles do not produce zero-width boxes
    let pad = 1e-9 * lo.dist(hi).max(1e-300);
    lo = lo - Vec3::new(pad, pad, pad);
    hi = hi + Vec3::new(pad, pad, pad);
    let id = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        index: start as u32,
        count: slice.len() as u32,
    });
    if slice.len() <= LEAF {
        return id;
    }
    let ext = chi - clo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        let ca = a.a[axis] + (a.e1[axis] + a.e2[axis]) / 3.0;
        let cb = b.a[axis] + (b.e1[axis] + b.e2[axis]) / 3.0;
        ca.total_cmp(&cb)
    });
    build_rec(tris, start, start + mid, nodes);
    let right = build_rec(tris, start + mid, end, nodes);
    nodes[id].index = right as u32;
    nodes[id].count = 0;
    id
}
