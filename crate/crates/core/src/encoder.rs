//! Systematic encoding through an approximate lower-triangular form.
//!
//! Peeling finds a sequence of `(check, variable)` pairs in which each check
//! has exactly one variable not yet determined; these form the triangular
//! part and are solved by back-substitution. When peeling stalls, variables
//! of the lightest remaining check are declared free. Checks never used for
//! peeling (the gap rows) impose a small dense system on the free variables;
//! its pivots become the remaining parity bits and the other free variables
//! carry the payload.

use alloc::vec::Vec;

use crate::sparse::SparseBinary;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("parity-check matrix is rank deficient by {deficiency}")]
    RankDeficient { deficiency: usize },
    #[error("payload has {found} bits, the code carries {expected}")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Clone)]
pub struct Encoder {
    h: SparseBinary,
    /// Triangular part in solve order.
    diag: Vec<(usize, usize)>,
    gap_rows: Vec<usize>,
    /// Variables solved from the gap system, one per pivot row.
    pivots: Vec<usize>,
    /// Row operations reducing the gap system, `gap x gap` bits.
    tmat: Vec<Vec<u64>>,
    info: Vec<usize>,
    rank: usize,
}

/// Strict constructor: fails when `h` does not have full row rank.
pub fn build_encoder(h: &SparseBinary) -> Result<Encoder, Error> {
    let e = Encoder::new(h);
    match e.deficiency() {
        0 => Ok(e),
        d => Err(Error::RankDeficient { deficiency: d }),
    }
}

impl Encoder {
    /// Builds an encoder for the code `{x : h x = 0}`. Redundant rows are
    /// allowed; the payload size is then `n - rank(h)`.
    pub fn new(h: &SparseBinary) -> Self {
        let (m, n) = (h.rows(), h.cols());
        let mut unknown = alloc::vec![true; n];
        let mut used = alloc::vec![false; m];
        let mut deg: Vec<usize> = h.row_weights();
        let mut free: Vec<usize> = Vec::new();
        let mut diag = Vec::with_capacity(m);
        let mut queue: Vec<usize> = (0..m).filter(|&c| deg[c] == 1).collect();

        let settle = |v: usize, unknown: &mut [bool], deg: &mut [usize], queue: &mut Vec<usize>, used: &[bool]| {
            unknown[v] = false;
            for &c in h.col(v) {
                deg[c] -= 1;
                if deg[c] == 1 && !used[c] {
                    queue.push(c);
                }
            }
        };

        loop {
            while let Some(c) = queue.pop() {
                if used[c] || deg[c] != 1 {
                    continue;
                }
                let v = *h.row(c).iter().find(|&&v| unknown[v]).expect("degree-1 check has an unknown");
                used[c] = true;
                diag.push((c, v));
                settle(v, &mut unknown, &mut deg, &mut queue, &used);
            }
            let stuck = (0..m).filter(|&c| !used[c] && deg[c] >= 2).min_by_key(|&c| deg[c]);
            let Some(c) = stuck else { break };
            // free all but one unknown of the lightest check, heaviest first
            let live = |v: usize, used: &[bool]| h.col(v).iter().filter(|&&r| !used[r]).count();
            let mut vs: Vec<usize> = h.row(c).iter().copied().filter(|&v| unknown[v]).collect();
            vs.sort_by(|&a, &b| live(b, &used).cmp(&live(a, &used)).then(a.cmp(&b)));
            for &v in &vs[..vs.len() - 1] {
                free.push(v);
                settle(v, &mut unknown, &mut deg, &mut queue, &used);
            }
        }
        free.extend((0..n).filter(|&v| unknown[v]));
        let gap_rows: Vec<usize> = (0..m).filter(|&c| !used[c]).collect();

        // gap system M (gap_rows x free), built 64 free columns at a time
        let g = gap_rows.len();
        let words = free.len().div_ceil(64);
        let mut mat = alloc::vec![alloc::vec![0u64; words]; g];
        let mut val = alloc::vec![0u64; n];
        for w in 0..words {
            val.fill(0);
            for (b, &v) in free[w * 64..((w + 1) * 64).min(free.len())].iter().enumerate() {
                val[v] = 1 << b;
            }
            for &(c, v) in &diag {
                val[v] = h.row(c).iter().filter(|&&u| u != v).fold(0, |a, &u| a ^ val[u]);
            }
            for (r, &c) in gap_rows.iter().enumerate() {
                mat[r][w] = h.row(c).iter().fold(0, |a, &u| a ^ val[u]);
            }
        }

        // reduced row echelon form, recording the row operations
        let tw = g.div_ceil(64);
        let mut tmat: Vec<Vec<u64>> = (0..g)
            .map(|r| {
                let mut t = alloc::vec![0u64; tw];
                t[r / 64] |= 1 << (r % 64);
                t
            })
            .collect();
        let mut pivot_cols = Vec::new();
        let mut rank_g = 0;
        for col in 0..free.len() {
            if rank_g == g {
                break;
            }
            let (wi, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank_g..g).find(|&r| mat[r][wi] & bit != 0) else { continue };
            mat.swap(rank_g, p);
            tmat.swap(rank_g, p);
            let (prow, trow) = (mat[rank_g].clone(), tmat[rank_g].clone());
            for r in 0..g {
                if r != rank_g && mat[r][wi] & bit != 0 {
                    xor_into(&mut mat[r], &prow);
                    xor_into(&mut tmat[r], &trow);
                }
            }
            pivot_cols.push(col);
            rank_g += 1;
        }
        tmat.truncate(rank_g);
        let pivots: Vec<usize> = pivot_cols.iter().map(|&c| free[c]).collect();
        let mut is_pivot = alloc::vec![false; n];
        for &v in &pivots {
            is_pivot[v] = true;
        }
        let mut info: Vec<usize> = free.iter().copied().filter(|&v| !is_pivot[v]).collect();
        info.sort_unstable();
        Encoder { h: h.clone(), rank: diag.len() + rank_g, diag, gap_rows, pivots, tmat, info }
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    /// Payload size, `n - rank`.
    pub fn k(&self) -> usize {
        self.info.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of redundant parity checks.
    pub fn deficiency(&self) -> usize {
        self.h.rows() - self.rank
    }

    /// Rows left outside the triangular part.
    pub fn gap(&self) -> usize {
        self.gap_rows.len()
    }

    /// Codeword positions carrying the payload, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    pub fn parity_matrix(&self) -> &SparseBinary {
        &self.h
    }

    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>, Error> {
        if payload.len() != self.k() {
            return Err(Error::Length { expected: self.k(), found: payload.len() });
        }
        let mut x = alloc::vec![0u8; self.n()];
        for (&pos, &b) in self.info.iter().zip(payload) {
            x[pos] = b & 1;
        }
        self.back_substitute(&mut x);
        if !self.pivots.is_empty() {
            let mut z = alloc::vec![0u64; self.gap_rows.len().div_ceil(64)];
            for (r, &c) in self.gap_rows.iter().enumerate() {
                let s = self.h.row(c).iter().fold(0u8, |a, &u| a ^ x[u]);
                z[r / 64] |= (s as u64) << (r % 64);
            }
            for (t, &v) in self.tmat.iter().zip(&self.pivots) {
                let dot = t.iter().zip(&z).fold(0u32, |a, (p, q)| a + (p & q).count_ones());
                x[v] = (dot & 1) as u8;
            }
            self.back_substitute(&mut x);
        }
        Ok(x)
    }

    /// Payload bits of a codeword.
    pub fn extract(&self, codeword: &[u8]) -> Vec<u8> {
        self.info.iter().map(|&p| codeword[p]).collect()
    }

    fn back_substitute(&self, x: &mut [u8]) {
        for &(c, v) in &self.diag {
            x[v] = self.h.row(c).iter().filter(|&&u| u != v).fold(0, |a, &u| a ^ x[u]);
        }
    }
}

fn xor_into(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}
