//! Sparse binary matrices in compressed row and column form.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("entry ({row}, {col}) is outside a {rows}x{cols} matrix")]
    OutOfRange { row: usize, col: usize, rows: usize, cols: usize },
    #[error("entry ({row}, {col}) is listed twice")]
    Duplicate { row: usize, col: usize },
}

/// A GF(2) matrix stored by rows and by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinary {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseBinary {
    /// Builds from a list of `(row, col)` positions holding a one.
    pub fn from_entries(rows: usize, cols: usize, mut entries: Vec<(usize, usize)>) -> Result<Self, Error> {
        for &(row, col) in &entries {
            if row >= rows || col >= cols {
                return Err(Error::OutOfRange { row, col, rows, cols });
            }
        }
        entries.sort_unstable();
        if let Some(w) = entries.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Duplicate { row: w[0].0, col: w[0].1 });
        }
        let mut row_ptr = alloc::vec![0; rows + 1];
        for &(r, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let row_idx: Vec<usize> = entries.iter().map(|&(_, c)| c).collect();

        let mut col_ptr = alloc::vec![0; cols + 1];
        for &(_, c) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut fill = col_ptr.clone();
        let mut col_idx = alloc::vec![0; entries.len()];
        for &(r, c) in &entries {
            col_idx[fill[c]] = r;
            fill[c] += 1;
        }
        Ok(SparseBinary { rows, cols, row_ptr, row_idx, col_ptr, col_idx })
    }

    /// Builds from dense 0/1 rows.
    pub fn from_dense<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, Error> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.as_ref().iter().enumerate() {
                if v & 1 == 1 {
                    entries.push((i, j));
                }
            }
        }
        Self::from_entries(rows.len(), cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Column indices of row `r`, ascending.
    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Row indices of column `c`, ascending.
    pub fn col(&self, c: usize) -> &[usize] {
        &self.col_idx[self.col_ptr[c]..self.col_ptr[c + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn row_weights(&self) -> Vec<usize> {
        (0..self.rows).map(|r| self.row(r).len()).collect()
    }

    pub fn col_weights(&self) -> Vec<usize> {
        (0..self.cols).map(|c| self.col(c).len()).collect()
    }

    /// All `(row, col)` positions in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    /// `H x` over GF(2).
    pub fn syndrome(&self, x: &[u8]) -> Vec<u8> {
        (0..self.rows).map(|r| self.row(r).iter().fold(0u8, |acc, &c| acc ^ (x[c] & 1))).collect()
    }

    pub fn is_codeword(&self, x: &[u8]) -> bool {
        x.len() == self.cols && (0..self.rows).all(|r| self.row(r).iter().fold(0u8, |acc, &c| acc ^ (x[c] & 1)) == 0)
    }

    /// Keeps the listed rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = alloc::vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut entries = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            for &c in self.row(r) {
                if col_map[c] != usize::MAX {
                    entries.push((new_r, col_map[c]));
                }
            }
        }
        Self::from_entries(rows.len(), cols.len(), entries).expect("submatrix of a valid matrix")
    }

    /// Rank over GF(2), by dense elimination.
    pub fn rank(&self) -> usize {
        let words = self.cols.div_ceil(64);
        let mut m: Vec<Vec<u64>> = (0..self.rows)
            .map(|r| {
                let mut w = alloc::vec![0u64; words];
                for &c in self.row(r) {
                    w[c / 64] |= 1 << (c % 64);
                }
                w
            })
            .collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let (wi, bit) = (c / 64, 1u64 << (c % 64));
            let Some(p) = (rank..m.len()).find(|&r| m[r][wi] & bit != 0) else { continue };
            m.swap(rank, p);
            let pivot = m[rank].clone();
            for (r, row) in m.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// MacKay's alist text format.
    pub fn to_alist(&self) -> String {
        let cw = self.col_weights();
        let rw = self.row_weights();
        let max_c = cw.iter().copied().max().unwrap_or(0);
        let max_r = rw.iter().copied().max().unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.cols, self.rows);
        let _ = writeln!(s, "{} {}", max_c, max_r);
        join(&mut s, cw.iter().copied());
        join(&mut s, rw.iter().copied());
        for c in 0..self.cols {
            let ones = self.col(c).iter().map(|&r| r + 1);
            join(&mut s, ones.chain(core::iter::repeat_n(0, max_c - cw[c])));
        }
        for r in 0..self.rows {
            let ones = self.row(r).iter().map(|&c| c + 1);
            join(&mut s, ones.chain(core::iter::repeat_n(0, max_r - rw[r])));
        }
        s
    }
}

fn join(s: &mut String, it: impl Iterator<Item = usize>) {
    let mut first = true;
    for v in it {
        if !first {
            s.push(' ');
        }
        first = false;
        let _ = write!(s, "{v}");
    }
    s.push('\n');
}
