//! Entry access for matrices that are never materialized.

use crate::aca::AcaResult;

/// Row and column extraction restricted to one block of a larger matrix.
///
/// Indices passed to [`BlockAccess::row`] and [`BlockAccess::col`] are local
/// to the block: `row(k, ..)` fills the block row of global row `rows[k]`.
pub trait BlockAccess {
    fn row(&mut self, local_row: usize, out: &mut [f64]);
    fn col(&mut self, local_col: usize, out: &mut [f64]);

    /// Fills `out` (column-major, `rows.len() x cols.len()`) with the whole block.
    fn dense(&mut self, nrows: usize, ncols: usize, out: &mut [f64]) {
        let mut row = vec![0.0; ncols];
        for i in 0..nrows {
            self.row(i, &mut row);
            for (j, v) in row.iter().enumerate() {
                out[i + j * nrows] = *v;
            }
        }
    }

    /// Block-specific low-rank approximation to try before generic ACA.
    ///
    /// Generators that know a cheaper factorization (for example ACA on
    /// underlying kernel samples) return it here; `None` falls back to ACA
    /// on the block entries. The result must approximate the block to `eps`
    /// in the same relative Frobenius sense and respect `max_rank`.
    fn compress(
        &mut self,
        _nrows: usize,
        _ncols: usize,
        _eps: f64,
        _max_rank: usize,
    ) -> Option<AcaResult> {
        None
    }
}

/// A matrix known through its entries.
///
/// Implementations must be pure: the same `(i, j)` always yields the same
/// value, whichever thread asks.
pub trait MatrixGenerator: Sync {
    type Block<'a>: BlockAccess
    where
        Self: 'a;

    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;

    /// Evaluator for the sub-block `rows x cols` (global indices).
    fn block<'a>(&'a self, rows: &'a [usize], cols: &'a [usize]) -> Self::Block<'a>;

    /// `true` when column `j` is identically zero by construction.
    fn zero_col(&self, _j: usize) -> bool {
        false
    }
}

/// Adapter turning an `(i, j) -> value` closure into a [`MatrixGenerator`].
pub struct FnGenerator<F> {
    nrows: usize,
    ncols: usize,
    f: F,
}

impl<F> FnGenerator<F>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    pub fn new(nrows: usize, ncols: usize, f: F) -> Self {
        Self { nrows, ncols, f }
    }
}

pub struct FnBlock<'a, F> {
    f: &'a F,
    rows: &'a [usize],
    cols: &'a [usize],
}

impl<F: Fn(usize, usize) -> f64> BlockAccess for FnBlock<'_, F> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        let i = self.rows[local_row];
        for (o, &j) in out.iter_mut().zip(self.cols) {
            *o = (self.f)(i, j);
        }
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        let j = self.cols[local_col];
        for (o, &i) in out.iter_mut().zip(self.rows) {
            *o = (self.f)(i, j);
        }
    }
}

impl<F> MatrixGenerator for FnGenerator<F>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    type Block<'a>
        = FnBlock<'a, F>
    where
        Self: 'a;

    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        (self.f)(i, j)
    }

    fn block<'a>(&'a self, rows: &'a [usize], cols: &'a [usize]) -> FnBlock<'a, F> {
        FnBlock {
            f: &self.f,
            rows,
            cols,
        }
    }
}

/// Column-major dense matrix wrapped as a generator; handy as an oracle.
pub struct DenseGenerator {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseGenerator {
    pub fn from_generator<G: MatrixGenerator>(g: &G) -> Self {
        let (m, n) = (g.nrows(), g.ncols());
        let rows: Vec<usize> = (0..m).collect();
        let cols: Vec<usize> = (0..n).collect();
        let mut data = vec![0.0; m * n];
        g.block(&rows, &cols).dense(m, n, &mut data);
        Self {
            nrows: m,
            ncols: n,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (j, xj) in x.iter().enumerate() {
            let col = &self.data[j * self.nrows..(j + 1) * self.nrows];
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
        y
    }
}

pub struct DenseBlock<'a> {
    m: &'a DenseGenerator,
    rows: &'a [usize],
    cols: &'a [usize],
}

impl BlockAccess for DenseBlock<'_> {
    fn row(&mut self, local_row: usize, out: &mut [f64]) {
        let i = self.rows[local_row];
        for (o, &j) in out.iter_mut().zip(self.cols) {
            *o = self.m.data[i + j * self.m.nrows];
        }
    }

    fn col(&mut self, local_col: usize, out: &mut [f64]) {
        let j = self.cols[local_col];
        for (o, &i) in out.iter_mut().zip(self.rows) {
            *o = self.m.data[i + j * self.m.nrows];
        }
    }
}

impl MatrixGenerator for DenseGenerator {
    type Block<'a> = DenseBlock<'a>;

    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.nrows]
    }

    fn block<'a>(&'a self, rows: &'a [usize], cols: &'a [usize]) -> DenseBlock<'a> {
        DenseBlock { m: self, rows, cols }
    }
}
