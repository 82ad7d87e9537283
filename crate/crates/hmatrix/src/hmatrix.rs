//! Block tree, assembly and matrix-vector product.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::aca::{aca, LowRank};
use crate::cluster::{is_admissible, ClusterTree};
use crate::generator::{BlockAccess, MatrixGenerator};
use crate::HMatrixError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HOptions {
    pub eta: f64,
    pub eps: f64,
}

impl Default for HOptions {
    fn default() -> Self {
        Self { eta: 2.0, eps: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLeaf {
    pub row: usize,
    pub col: usize,
    pub admissible: bool,
}

/// Leaves of the block tree, in depth-first order.
#[derive(Debug, Clone)]
pub struct BlockTree {
    pub leaves: Vec<BlockLeaf>,
}

impl BlockTree {
    pub fn build(rows: &ClusterTree, cols: &ClusterTree, eta: f64) -> Self {
        let mut leaves = Vec::new();
        if !rows.is_empty() && !cols.is_empty() {
            let mut stack = vec![(0usize, 0usize)];
            while let Some((r, c)) = stack.pop() {
                let (rn, cn) = (&rows.nodes[r], &cols.nodes[c]);
                if rn.is_empty() || cn.is_empty() {
                    continue;
                }
                if is_admissible(rn, cn, eta) {
                    leaves.push(BlockLeaf {
                        row: r,
                        col: c,
                        admissible: true,
                    });
                    continue;
                }
                match (rn.children, cn.children) {
                    (None, None) => leaves.push(BlockLeaf {
                        row: r,
                        col: c,
                        admissible: false,
                    }),
                    (None, Some([c0, c1])) => {
                        stack.push((r, c1));
                        stack.push((r, c0));
                    }
                    (Some([r0, r1]), None) => {
                        stack.push((r1, c));
                        stack.push((r0, c));
                    }
                    (Some([r0, r1]), Some([c0, c1])) => {
                        stack.push((r1, c1));
                        stack.push((r1, c0));
                        stack.push((r0, c1));
                        stack.push((r0, c0));
                    }
                }
            }
        }
        Self { leaves }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeafData {
    /// Column-major `rows x cols`.
    Dense(Vec<f64>),
    LowRank(LowRank),
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub row: usize,
    pub col: usize,
    pub admissible: bool,
    /// Admissible block whose cross approximation did not converge below
    /// the storage budget and was evaluated densely instead.
    pub downgraded: bool,
    pub data: LeafData,
}

impl Leaf {
    pub fn stored(&self) -> usize {
        match &self.data {
            LeafData::Dense(d) => d.len(),
            LeafData::LowRank(lr) => lr.stored(),
            LeafData::Zero => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelRanks {
    pub level: usize,
    pub blocks: usize,
    pub mean_rank: f64,
    pub max_rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompressionReport {
    pub nrows: usize,
    pub ncols: usize,
    /// `1 - stored / (nrows * ncols)`.
    pub ratio: f64,
    pub stored: usize,
    pub dense_leaves: usize,
    pub low_rank_leaves: usize,
    pub zero_leaves: usize,
    pub downgraded: usize,
    pub per_level: Vec<LevelRanks>,
    /// Matrix entries requested from the generator during assembly.
    pub assembly_entries: u64,
    pub assembly_seconds: f64,
}

/// Hierarchical matrix: admissible leaves hold cross approximations, the
/// rest hold dense entries. Immutable once assembled.
#[derive(Debug, Clone)]
pub struct HMatrix {
    pub rows: ClusterTree,
    pub cols: ClusterTree,
    pub leaves: Vec<Leaf>,
    pub options: HOptions,
    pub assembly_entries: u64,
    pub assembly_seconds: f64,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone)]
struct Segment {
    start: usize,
    end: usize,
    leaves: Vec<usize>,
}

fn compress_leaf<G: MatrixGenerator>(
    gen: &G,
    rows: &ClusterTree,
    cols: &ClusterTree,
    b: &BlockLeaf,
    eps: f64,
) -> (Leaf, u64) {
    let ri = rows.indices(b.row);
    let ci = cols.indices(b.col);
    let (m, n) = (ri.len(), ci.len());
    let mut leaf = Leaf {
        row: b.row,
        col: b.col,
        admissible: b.admissible,
        downgraded: false,
        data: LeafData::Zero,
    };
    if ci.iter().all(|&j| gen.zero_col(j)) {
        return (leaf, 0);
    }
    let mut block = RowCache::new(gen.block(ri, ci), n);
    let mut entries = 0u64;
    if b.admissible {
        let budget = ((m * n) / (m + n)).max(1);
        let res = match block.inner.compress(m, n, eps, budget) {
            Some(r) => r,
            None => aca(&mut block, m, n, eps, budget),
        };
        entries += (res.rows_evaluated * n + res.cols_evaluated * m) as u64;
        if !res.saturated {
            leaf.data = if res.factors.rank == 0 {
                LeafData::Zero
            } else {
                LeafData::LowRank(res.factors)
            };
            return (leaf, entries);
        }
        leaf.downgraded = true;
    }
    let mut d = vec![0.0; m * n];
    entries += ((m - block.cached()) * n) as u64;
    block.dense(m, n, &mut d);
    leaf.data = LeafData::Dense(d);
    (leaf, entries)
}

/// Keeps the rows a failed cross approximation already paid for, so the
/// dense fallback only evaluates the rest.
struct RowCache<B> {
    inner: B,
    ncols: usize,
    rows: HashMap<usize, Vec<f64>>,
}

impl<B: BlockAccess> RowCache<B> {
    fn new(inner: B, ncols: usize) -> Self {
        Self {
            inner,
            ncols,
            rows: HashMap::new(),
        }
    }

    fn cached(&self) -> usize {
        self.rows.len()
    }
}

impl<B: BlockAccess> BlockAccess for RowCache<B> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        if let Some(r) = self.rows.get(&local_row) {
            out.copy_from_slice(r);
            return;
        }
        self.inner.row(local_row, out);
        self.rows.insert(local_row, out.to_vec());
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        self.inner.col(local_col, out);
    }

    fn dense(&mut self, nrows: usize, ncols: usize, out: &mut [f64]) {
        let mut row = vec![0.0; self.ncols];
        for i in 0..nrows {
            match self.rows.get(&i) {
                Some(r) => row.copy_from_slice(r),
                None => self.inner.row(i, &mut row),
            }
            for (j, v) in row.iter().enumerate().take(ncols) {
                out[i + j * nrows] = *v;
            }
        }
    }
}

impl HMatrix {
    /// Assembles the hierarchical approximation of `gen`.
    ///
    /// Admissible leaves go through ACA; a leaf whose rank would exceed the
    /// dense storage cost is downgraded to dense, never reported as failure.
    pub fn assemble<G: MatrixGenerator>(
        gen: &G,
        rows: ClusterTree,
        cols: ClusterTree,
        options: HOptions,
    ) -> Result<Self, HMatrixError> {
        if rows.len() != gen.nrows() || cols.len() != gen.ncols() {
            return Err(HMatrixError::DimensionMismatch {
                expected: (gen.nrows(), gen.ncols()),
                got: (rows.len(), cols.len()),
            });
        }
        let t0 = Instant::now();
        let tree = BlockTree::build(&rows, &cols, options.eta);
        let built: Vec<(Leaf, u64)> = tree
            .leaves
            .par_iter()
            .map(|b| compress_leaf(gen, &rows, &cols, b, options.eps))
            .collect();
        let assembly_entries = built.iter().map(|(_, e)| e).sum();
        let leaves = built.into_iter().map(|(l, _)| l).collect();
        Ok(Self::from_parts(
            rows,
            cols,
            leaves,
            options,
            assembly_entries,
            t0.elapsed().as_secs_f64(),
        ))
    }

    pub(crate) fn from_parts(
        rows: ClusterTree,
        cols: ClusterTree,
        leaves: Vec<Leaf>,
        options: HOptions,
        assembly_entries: u64,
        assembly_seconds: f64,
    ) -> Self {
        let segments = build_segments(&rows, &leaves);
        Self {
            rows,
            cols,
            leaves,
            options,
            assembly_entries,
            assembly_seconds,
            segments,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn stored(&self) -> usize {
        self.leaves.iter().map(Leaf::stored).sum()
    }

    /// Global row and column indices covered by a leaf.
    pub fn leaf_indices(&self, leaf: &Leaf) -> (&[usize], &[usize]) {
        (self.rows.indices(leaf.row), self.cols.indices(leaf.col))
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, HMatrixError> {
        if x.len() != self.ncols() {
            return Err(HMatrixError::DimensionMismatch {
                expected: (self.ncols(), 1),
                got: (x.len(), 1),
            });
        }
        let xp: Vec<f64> = self.cols.perm.iter().map(|&j| x[j]).collect();
        // V^T x for every low-rank leaf, independent of each other
        let projected: Vec<Vec<f64>> = self
            .leaves
            .par_iter()
            .map(|leaf| match &leaf.data {
                LeafData::LowRank(lr) => {
                    let c = &self.cols.nodes[leaf.col];
                    let xs = &xp[c.start..c.end];
                    (0..lr.rank)
                        .map(|k| lr.v_col(k).iter().zip(xs).map(|(a, b)| a * b).sum())
                        .collect()
                }
                _ => Vec::new(),
            })
            .collect();
        let mut yp = vec![0.0; self.nrows()];
        let mut chunks: Vec<(&Segment, &mut [f64])> = Vec::with_capacity(self.segments.len());
        let mut rest: &mut [f64] = &mut yp;
        let mut offset = 0;
        for seg in &self.segments {
            let (_, tail) = std::mem::take(&mut rest).split_at_mut(seg.start - offset);
            let (mine, tail) = tail.split_at_mut(seg.end - seg.start);
            chunks.push((seg, mine));
            rest = tail;
            offset = seg.end;
        }
        chunks.into_par_iter().for_each(|(seg, out)| {
            for &li in &seg.leaves {
                let leaf = &self.leaves[li];
                let r = &self.rows.nodes[leaf.row];
                let c = &self.cols.nodes[leaf.col];
                let lo = seg.start - r.start;
                let len = seg.end - seg.start;
                match &leaf.data {
                    LeafData::Dense(d) => {
                        let m = r.len();
                        for (jj, xj) in xp[c.start..c.end].iter().enumerate() {
                            let col = &d[jj * m + lo..jj * m + lo + len];
                            for (o, a) in out.iter_mut().zip(col) {
                                *o += a * xj;
                            }
                        }
                    }
                    LeafData::LowRank(lr) => {
                        for (k, t) in projected[li].iter().enumerate() {
                            let u = &lr.u_col(k)[lo..lo + len];
                            for (o, a) in out.iter_mut().zip(u) {
                                *o += a * t;
                            }
                        }
                    }
                    LeafData::Zero => {}
                }
            }
        });
        let mut y = vec![0.0; self.nrows()];
        for (k, &i) in self.rows.perm.iter().enumerate() {
            y[i] = yp[k];
        }
        Ok(y)
    }

    pub fn report(&self) -> CompressionReport {
        compression_report(self)
    }
}

fn build_segments(rows: &ClusterTree, leaves: &[Leaf]) -> Vec<Segment> {
    let mut segs: Vec<Segment> = Vec::new();
    let mut seg_of_node = vec![usize::MAX; rows.nodes.len()];
    let mut order: Vec<(usize, usize)> = rows
        .leaves()
        .filter(|(_, n)| !n.is_empty())
        .map(|(id, n)| (n.start, id))
        .collect();
    order.sort_unstable();
    for (start, id) in order {
        seg_of_node[id] = segs.len();
        segs.push(Segment {
            start,
            end: rows.nodes[id].end,
            leaves: Vec::new(),
        });
    }
    for (li, leaf) in leaves.iter().enumerate() {
        let mut stack = vec![leaf.row];
        while let Some(n) = stack.pop() {
            match rows.nodes[n].children {
                Some([a, b]) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    if seg_of_node[n] != usize::MAX {
                        segs[seg_of_node[n]].leaves.push(li);
                    }
                }
            }
        }
    }
    segs
}

/// Storage accounting for an assembled matrix.
pub fn compression_report(h: &HMatrix) -> CompressionReport {
    let stored = h.stored();
    let full = (h.nrows() * h.ncols()).max(1) as f64;
    let mut per_level: Vec<LevelRanks> = Vec::new();
    let mut rep = CompressionReport {
        nrows: h.nrows(),
        ncols: h.ncols(),
        ratio: 1.0 - stored as f64 / full,
        stored,
        assembly_entries: h.assembly_entries,
        assembly_seconds: h.assembly_seconds,
        ..Default::default()
    };
    for leaf in &h.leaves {
        if leaf.downgraded {
            rep.downgraded += 1;
        }
        match &leaf.data {
            LeafData::Dense(_) => rep.dense_leaves += 1,
            LeafData::Zero => rep.zero_leaves += 1,
            LeafData::LowRank(lr) => {
                rep.low_rank_leaves += 1;
                let level = h.rows.nodes[leaf.row].level.max(h.cols.nodes[leaf.col].level);
                if per_level.len() <= level {
                    per_level.resize_with(level + 1, Default::default);
                }
                let e = &mut per_level[level];
                e.level = level;
                e.blocks += 1;
                e.mean_rank += lr.rank as f64;
                e.max_rank = e.max_rank.max(lr.rank);
            }
        }
    }
    for e in per_level.iter_mut() {
        if e.blocks > 0 {
            e.mean_rank /= e.blocks as f64;
        }
    }
    rep.per_level = per_level.into_iter().filter(|e| e.blocks > 0).collect();
    rep
}
