//! Partially pivoted adaptive cross approximation.

use crate::generator::BlockAccess;

/// `A ≈ U Vᵀ` with `U: nrows x rank`, `V: ncols x rank`, both column-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LowRank {
    pub nrows: usize,
    pub ncols: usize,
    pub rank: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl LowRank {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rank: 0,
            u: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn u_col(&self, k: usize) -> &[f64] {
        &self.u[k * self.nrows..(k + 1) * self.nrows]
    }

    pub fn v_col(&self, k: usize) -> &[f64] {
        &self.v[k * self.ncols..(k + 1) * self.ncols]
    }

    pub fn stored(&self) -> usize {
        self.rank * (self.nrows + self.ncols)
    }

    /// Column-major reconstruction.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for k in 0..self.rank {
            let (u, v) = (self.u_col(k), self.v_col(k));
            for (j, vj) in v.iter().enumerate() {
                let col = &mut out[j * self.nrows..(j + 1) * self.nrows];
                for (o, ui) in col.iter_mut().zip(u) {
                    *o += ui * vj;
                }
            }
        }
        out
    }

    /// `y += U (Vᵀ x)`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.rank {
            let t = dot(self.v_col(k), x);
            for (yi, ui) in y.iter_mut().zip(self.u_col(k)) {
                *yi += ui * t;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcaResult {
    pub factors: LowRank,
    /// The rank hit `max_rank` before the stopping test passed; the factors
    /// are then not trusted and the caller should evaluate the block densely.
    pub saturated: bool,
    pub rows_evaluated: usize,
    pub cols_evaluated: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax_abs(v: &[f64], skip: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&x, &s)) in v.iter().zip(skip).enumerate() {
        if s {
            continue;
        }
        let a = x.abs();
        if best.map_or(true, |(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best
}

/// Compresses an `nrows x ncols` block, evaluating only the crosses it needs.
///
/// Each step takes the residual of one row, pivots on its largest entry,
/// takes the residual of that column and appends the rank-one cross. The
/// squared Frobenius norm of the running approximation is updated
/// incrementally and the loop stops once `|u_k| |v_k| <= eps |A_k|_F`.
/// Rows whose residual vanishes are skipped; an all-zero block ends with
/// rank 0 after every row was looked at.
pub fn aca<B: BlockAccess>(
    block: &mut B,
    nrows: usize,
    ncols: usize,
    eps: f64,
    max_rank: usize,
) -> AcaResult {
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut used_rows = vec![false; nrows];
    let mut used_cols = vec![false; ncols];
    let mut row = vec![0.0; ncols];
    let mut col = vec![0.0; nrows];
    let mut norm2 = 0.0f64;
    let mut largest = 0.0f64;
    let mut rows_evaluated = 0;
    let mut cols_evaluated = 0;
    let mut converged = false;
    let mut next_row = if nrows > 0 { Some(0) } else { None };

    while let Some(i) = next_row {
        if us.len() >= max_rank {
            break;
        }
        used_rows[i] = true;
        block.row(i, &mut row);
        rows_evaluated += 1;
        for (u, v) in us.iter().zip(&vs) {
            let ui = u[i];
            if ui != 0.0 {
                for (r, vj) in row.iter_mut().zip(v) {
                    *r -= ui * vj;
                }
            }
        }
        let pivot = argmax_abs(&row, &used_cols);
        let (j, pmag) = match pivot {
            Some(p) => p,
            None => break,
        };
        if pmag == 0.0 || pmag <= 1e-14 * largest {
            // residual row vanished; try the next untouched row
            next_row = used_rows.iter().position(|u| !u);
            continue;
        }
        let inv = 1.0 / row[j];
        let v: Vec<f64> = row.iter().map(|x| x * inv).collect();
        used_cols[j] = true;
        block.col(j, &mut col);
        cols_evaluated += 1;
        for (u, vprev) in us.iter().zip(&vs) {
            let vj = vprev[j];
            if vj != 0.0 {
                for (c, ui) in col.iter_mut().zip(u) {
                    *c -= vj * ui;
                }
            }
        }
        let u = col.clone();
        let nu2 = dot(&u, &u);
        let nv2 = dot(&v, &v);
        let mut cross = 0.0;
        for (up, vp) in us.iter().zip(&vs) {
            cross += dot(up, &u) * dot(vp, &v);
        }
        norm2 += nu2 * nv2 + 2.0 * cross;
        largest = largest.max(pmag);
        us.push(u);
        vs.push(v);
        if (nu2 * nv2).sqrt() <= eps * norm2.max(0.0).sqrt() {
            converged = true;
            break;
        }
        let last = us.last().unwrap();
        next_row = match argmax_abs(last, &used_rows) {
            Some((r, m)) if m > 0.0 => Some(r),
            Some(_) => used_rows.iter().position(|u| !u),
            None => None,
        };
    }

    let rank = us.len();
    let saturated = !converged && rank >= max_rank && rank > 0;
    let mut u = Vec::with_capacity(rank * nrows);
    let mut v = Vec::with_capacity(rank * ncols);
    for (a, b) in us.iter().zip(&vs) {
        u.extend_from_slice(a);
        v.extend_from_slice(b);
    }
    AcaResult {
        factors: LowRank {
            nrows,
            ncols,
            rank,
            u,
            v,
        },
        saturated,
        rows_evaluated,
        cols_evaluated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{FnGenerator, MatrixGenerator};

    fn frob(a: &[f64]) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn run<F: Fn(usize, usize) -> f64 + Sync>(
        m: usize,
        n: usize,
        f: F,
        eps: f64,
    ) -> (AcaResult, Vec<f64>) {
        let g = FnGenerator::new(m, n, f);
        let rows: Vec<usize> = (0..m).collect();
        let cols: Vec<usize> = (0..n).collect();
        let res = aca(&mut g.block(&rows, &cols), m, n, eps, m.min(n));
        let dense = dense_of(&g, m, n);
        (res, dense)
    }

    fn dense_of<G: MatrixGenerator>(g: &G, m: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for j in 0..n {
            for i in 0..m {
                out[i + j * m] = g.entry(i, j);
            }
        }
        out
    }

    #[test]
    fn rank_one_block_is_recovered_exactly() {
        let u = |i: usize| 1.0 + i as f64;
        let v = |j: usize| 2.0 - 0.1 * j as f64;
        let (res, dense) = run(30, 20, |i, j| u(i) * v(j), 1e-10);
        assert_eq!(res.factors.rank, 1);
        let approx = res.factors.to_dense();
        for (a, b) in approx.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_block_has_rank_zero() {
        let (res, _) = run(10, 12, |_, _| 0.0, 1e-6);
        assert_eq!(res.factors.rank, 0);
        assert!(res.factors.u.is_empty());
        assert!(!res.saturated);
    }

    #[test]
    fn smooth_kernel_on_separated_clusters() {
        // Oracle: the block materialized entry by entry.
        let n = 200;
        let xs: Vec<[f64; 3]> = (0..n)
            .map(|k| {
                let t = k as f64 / n as f64;
                [t, (7.0 * t).sin() * 0.5, (3.0 * t).cos() * 0.5]
            })
            .collect();
        let ys: Vec<[f64; 3]> = xs.iter().map(|p| [p[0] + 5.0, p[1], p[2] + 1.0]).collect();
        let kern = |i: usize, j: usize| {
            let d2: f64 = (0..3).map(|k| (xs[i][k] - ys[j][k]).powi(2)).sum();
            1.0 / (1.0 + d2)
        };
        let (res, dense) = run(n, n, kern, 1e-6);
        let approx = res.factors.to_dense();
        let diff: Vec<f64> = approx.iter().zip(&dense).map(|(a, b)| a - b).collect();
        let rel = frob(&diff) / frob(&dense);
        assert!(rel <= 1e-5, "relative error {rel}");
        assert!(res.factors.rank < 20, "rank {}", res.factors.rank);
        assert!(!res.saturated);
        assert_eq!(res.rows_evaluated, res.factors.rank);
    }

    #[test]
    fn zero_rows_are_skipped() {
        // first half of the rows are zero, the rest rank one
        let (res, dense) = run(
            16,
            10,
            |i, j| if i < 8 { 0.0 } else { (i as f64) * (1.0 + j as f64) },
            1e-8,
        );
        assert_eq!(res.factors.rank, 1);
        let approx = res.factors.to_dense();
        let diff: Vec<f64> = approx.iter().zip(&dense).map(|(a, b)| a - b).collect();
        assert!(frob(&diff) <= 1e-12 * frob(&dense));
    }

    #[test]
    fn full_rank_block_saturates() {
        let (res, _) = run(6, 6, |i, j| if i == j { 1.0 } else { 0.0 }, 1e-12);
        // identity: every cross removes one unit, the estimate never converges
        assert_eq!(res.factors.rank, 6);
        assert!(res.saturated);
    }
}
