//! Binary dump of an assembled matrix.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//! magic `RTEHMAT\0`, `u32` version, eta, eps, assembly entry count,
//! assembly seconds, row tree, column tree, leaf count, leaves.
//! A tree is `leaf_size, n, perm[n], node_count` then per node
//! `start, end, center[3], radius, level, has_children (u8), child0, child1`.
//! A leaf is `row, col, admissible (u8), downgraded (u8), kind (u8)` then
//! for kind 1 (dense) `len, values[len]` and for kind 2 (low rank)
//! `rows, cols, rank, u[rows*rank], v[cols*rank]`.

use std::io::{Read, Write};

use crate::aca::LowRank;
use crate::cluster::{ClusterNode, ClusterTree};
use crate::hmatrix::{HMatrix, HOptions, Leaf, LeafData};
use crate::HMatrixError;

pub const MAGIC: &[u8; 8] = b"RTEHMAT\0";
pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: usize) -> std::io::Result<()> {
        self.0.write_all(&(v as u64).to_le_bytes())
    }
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.0.write_all(&[v])
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        self.0.write_all(&buf)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], HMatrixError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<usize, HMatrixError> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?) as usize)
    }
    fn u8(&mut self) -> Result<u8, HMatrixError> {
        Ok(self.bytes::<1>()?[0])
    }
    fn f64(&mut self) -> Result<f64, HMatrixError> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, HMatrixError> {
        let mut buf = vec![0u8; n * 8];
        self.0.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_tree<W: Write>(w: &mut Writer<W>, t: &ClusterTree) -> std::io::Result<()> {
    w.u64(t.leaf_size)?;
    w.u64(t.perm.len())?;
    for &p in &t.perm {
        w.u64(p)?;
    }
    w.u64(t.nodes.len())?;
    for n in &t.nodes {
        w.u64(n.start)?;
        w.u64(n.end)?;
        for c in n.center {
            w.f64(c)?;
        }
        w.f64(n.radius)?;
        w.u64(n.level)?;
        let [a, b] = n.children.unwrap_or([0, 0]);
        w.u8(n.children.is_some() as u8)?;
        w.u64(a)?;
        w.u64(b)?;
    }
    Ok(())
}

fn read_tree<R: Read>(r: &mut Reader<R>) -> Result<ClusterTree, HMatrixError> {
    let leaf_size = r.u64()?;
    let n = r.u64()?;
    let perm = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    if perm.iter().any(|&p| p >= n) {
        return Err(HMatrixError::Format("permutation index out of range".into()));
    }
    let count = r.u64()?;
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let start = r.u64()?;
        let end = r.u64()?;
        let center = [r.f64()?, r.f64()?, r.f64()?];
        let radius = r.f64()?;
        let level = r.u64()?;
        let has = r.u8()? != 0;
        let (a, b) = (r.u64()?, r.u64()?);
        if start > end || end > n || (has && (a >= count || b >= count)) {
            return Err(HMatrixError::Format("corrupt cluster node".into()));
        }
        nodes.push(ClusterNode {
            start,
            end,
            center,
            radius,
            children: has.then_some([a, b]),
            level,
        });
    }
    if nodes.is_empty() {
        return Err(HMatrixError::Format("empty cluster tree".into()));
    }
    Ok(ClusterTree {
        nodes,
        perm,
        leaf_size,
    })
}

/// Serializes `h` to `out`.
pub fn dump<W: Write>(h: &HMatrix, out: W) -> Result<(), HMatrixError> {
    let mut w = Writer(std::io::BufWriter::new(out));
    w.0.write_all(MAGIC)?;
    w.0.write_all(&VERSION.to_le_bytes())?;
    w.f64(h.options.eta)?;
    w.f64(h.options.eps)?;
    w.u64(h.assembly_entries as usize)?;
    w.f64(h.assembly_seconds)?;
    write_tree(&mut w, &h.rows)?;
    write_tree(&mut w, &h.cols)?;
    w.u64(h.leaves.len())?;
    for leaf in &h.leaves {
        w.u64(leaf.row)?;
        w.u64(leaf.col)?;
        w.u8(leaf.admissible as u8)?;
        w.u8(leaf.downgraded as u8)?;
        match &leaf.data {
            LeafData::Zero => w.u8(0)?,
            LeafData::Dense(d) => {
                w.u8(1)?;
                w.u64(d.len())?;
                w.f64s(d)?;
            }
            LeafData::LowRank(lr) => {
                w.u8(2)?;
                w.u64(lr.nrows)?;
                w.u64(lr.ncols)?;
                w.u64(lr.rank)?;
                w.f64s(&lr.u)?;
                w.f64s(&lr.v)?;
            }
        }
    }
    w.0.flush()?;
    Ok(())
}

/// Reads a matrix written by [`dump`].
pub fn load<R: Read>(input: R) -> Result<HMatrix, HMatrixError> {
    let mut r = Reader(std::io::BufReader::new(input));
    if &r.bytes::<8>()? != MAGIC {
        return Err(HMatrixError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.bytes::<4>()?);
    if version != VERSION {
        return Err(HMatrixError::Format(format!("unsupported version {version}")));
    }
    let options = HOptions {
        eta: r.f64()?,
        eps: r.f64()?,
    };
    let entries = r.u64()? as u64;
    let seconds = r.f64()?;
    let rows = read_tree(&mut r)?;
    let cols = read_tree(&mut r)?;
    let count = r.u64()?;
    let mut leaves = Vec::with_capacity(count);
    for _ in 0..count {
        let row = r.u64()?;
        let col = r.u64()?;
        if row >= rows.nodes.len() || col >= cols.nodes.len() {
            return Err(HMatrixError::Format("leaf refers to missing cluster".into()));
        }
        let (m, n) = (rows.nodes[row].len(), cols.nodes[col].len());
        let admissible = r.u8()? != 0;
        let downgraded = r.u8()? != 0;
        let data = match r.u8()? {
            0 => LeafData::Zero,
            1 => {
                let len = r.u64()?;
                if len != m * n {
                    return Err(HMatrixError::Format("dense leaf size mismatch".into()));
                }
                LeafData::Dense(r.f64s(len)?)
            }
            2 => {
                let (nr, nc, rank) = (r.u64()?, r.u64()?, r.u64()?);
                if nr != m || nc != n {
                    return Err(HMatrixError::Format("low-rank leaf size mismatch".into()));
                }
                let u = r.f64s(nr * rank)?;
                let v = r.f64s(nc * rank)?;
                LeafData::LowRank(LowRank {
                    nrows: nr,
                    ncols: nc,
                    rank,
                    u,
                    v,
                })
            }
            k => return Err(HMatrixError::Format(format!("unknown leaf kind {k}"))),
        };
        leaves.push(Leaf {
            row,
            col,
            admissible,
            downgraded,
            data,
        });
    }
    Ok(HMatrix::from_parts(rows, cols, leaves, options, entries, seconds))
}
