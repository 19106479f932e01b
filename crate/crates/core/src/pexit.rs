//! Protograph EXIT analysis with a detector in the loop.
//!
//! Each iteration activates the detector once (fully joint schedule): the
//! detector's a-priori information is the column-averaged information the
//! variable nodes collect from their checks, its output becomes the channel
//! message of every transmitted variable node, and then variable and check
//! nodes exchange edge messages under the Gaussian (J-function)
//! approximation.

use alloc::vec::Vec;

use crate::exit::{self, ExitSurface, SurfaceSlice};
use crate::jfun::JFunction;
use crate::protograph::{self, Protomatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Surface(#[from] exit::Error),
    #[error(transparent)]
    Protograph(#[from] protograph::Error),
    #[error("threshold bracket [{lo}, {hi}] dB is invalid: {reason}")]
    Bracket { lo: f64, hi: f64, reason: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;

/// Recursion limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PexitConfig {
    pub max_iter: usize,
    /// Converged once every column's a-posteriori MI reaches `1 - eps`.
    pub eps: f64,
    /// Declares a fixed point (not converged) once no edge message moves by
    /// more than this in an iteration.
    pub stall_tol: f64,
}

impl Default for PexitConfig {
    fn default() -> Self {
        PexitConfig { max_iter: 1000, eps: 1e-4, stall_tol: 1e-10 }
    }
}

/// Outcome of one recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct PexitOutcome {
    pub converged: bool,
    pub iterations: usize,
    /// Smallest column a-posteriori MI after each iteration.
    pub trace: Vec<f64>,
}

/// Edge messages of a running recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct PexitState {
    /// Variable-to-check MI per nonzero protomatrix cell.
    pub i_ev: Vec<f64>,
    /// Check-to-variable MI per nonzero protomatrix cell.
    pub i_ec: Vec<f64>,
    /// Detector extrinsic MI.
    pub i_det: f64,
    pub iteration: usize,
}

/// Precomputed edge layout of a protomatrix.
#[derive(Debug, Clone)]
pub struct PexitGraph {
    cols: usize,
    /// `(row, col, multiplicity)` for each nonzero cell, row-major.
    edges: Vec<(usize, usize, f64)>,
    by_col: Vec<Vec<usize>>,
    by_row: Vec<Vec<usize>>,
    transmitted: Vec<bool>,
    rate: f64,
}

impl PexitGraph {
    pub fn new(p: &Protomatrix) -> Result<Self> {
        let rate = p.rate_f64()?;
        let mut edges = Vec::new();
        let mut by_col = alloc::vec![Vec::new(); p.cols()];
        let mut by_row = alloc::vec![Vec::new(); p.rows()];
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let b = p.get(i, j);
                if b > 0 {
                    by_col[j].push(edges.len());
                    by_row[i].push(edges.len());
                    edges.push((i, j, b as f64));
                }
            }
        }
        let transmitted = (0..p.cols()).map(|j| !p.is_punctured(j)).collect();
        Ok(PexitGraph { cols: p.cols(), edges, by_col, by_row, transmitted, rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Runs the recursion against a detector transfer curve.
    pub fn run_with<F: Fn(f64) -> f64>(&self, detector: F, j: &JFunction, cfg: &PexitConfig) -> (PexitOutcome, PexitState) {
        let ne = self.edges.len();
        let mut i_ec = alloc::vec![0.0; ne];
        let mut i_ev = alloc::vec![0.0; ne];
        let mut s_ec = alloc::vec![0.0; ne]; // J^-1(I_EC)^2
        let mut s_ev = alloc::vec![0.0; ne]; // J^-1(1 - I_EV)^2
        let mut col_sum = alloc::vec![0.0; self.cols];
        let n_tx = self.transmitted.iter().filter(|&&t| t).count().max(1) as f64;
        let mut trace = Vec::new();
        let mut i_det = 0.0;
        let mut converged = false;
        let mut iterations = 0;

        for it in 1..=cfg.max_iter {
            iterations = it;
            // (1) detector
            for (j, es) in self.by_col.iter().enumerate() {
                col_sum[j] = es.iter().map(|&e| self.edges[e].2 * s_ec[e]).sum();
            }
            let ia_det = self
                .transmitted
                .iter()
                .zip(&col_sum)
                .filter(|(t, _)| **t)
                .map(|(_, &s)| j.j(libm::sqrt(s)))
                .sum::<f64>()
                / n_tx;
            i_det = detector(ia_det);
            let s_ch_tx = {
                let s = j.inv(i_det);
                s * s
            };

            // (2) variable -> check
            let mut delta: f64 = 0.0;
            for (e, &(_, col, _)) in self.edges.iter().enumerate() {
                let s_ch = if self.transmitted[col] { s_ch_tx } else { 0.0 };
                let v = j.j(libm::sqrt((col_sum[col] - s_ec[e] + s_ch).max(0.0)));
                delta = delta.max(libm::fabs(v - i_ev[e]));
                i_ev[e] = v;
                let s = j.inv(1.0 - v);
                s_ev[e] = s * s;
            }

            // (3) check -> variable
            for es in &self.by_row {
                let total: f64 = es.iter().map(|&e| self.edges[e].2 * s_ev[e]).sum();
                for &e in es {
                    let v = 1.0 - j.j(libm::sqrt((total - s_ev[e]).max(0.0)));
                    delta = delta.max(libm::fabs(v - i_ec[e]));
                    i_ec[e] = v;
                    let s = j.inv(v);
                    s_ec[e] = s * s;
                }
            }

            // (4) a-posteriori MI per column
            let mut worst: f64 = 1.0;
            for (j_col, es) in self.by_col.iter().enumerate() {
                let s_ch = if self.transmitted[j_col] { s_ch_tx } else { 0.0 };
                let s: f64 = es.iter().map(|&e| self.edges[e].2 * s_ec[e]).sum::<f64>() + s_ch;
                worst = worst.min(j.j(libm::sqrt(s)));
            }
            trace.push(worst);
            if worst >= 1.0 - cfg.eps {
                converged = true;
                break;
            }
            if delta < cfg.stall_tol {
                break;
            }
        }
        let state = PexitState { i_ev, i_ec, i_det, iteration: iterations };
        (PexitOutcome { converged, iterations, trace }, state)
    }

    /// Runs the recursion at `ebno_db` on `surface`.
    pub fn run(&self, surface: &ExitSurface, ebno_db: f64, j: &JFunction, cfg: &PexitConfig) -> Result<PexitOutcome> {
        let slice: SurfaceSlice<'_> = surface.slice(ebno_db, self.rate)?;
        Ok(self.run_with(|ia| slice.eval(ia), j, cfg).0)
    }

    pub fn converges(&self, surface: &ExitSurface, ebno_db: f64, j: &JFunction, cfg: &PexitConfig) -> Result<bool> {
        Ok(self.run(surface, ebno_db, j, cfg)?.converged)
    }

    /// Bisection threshold; see [`threshold_search`].
    pub fn threshold(&self, surface: &ExitSurface, bracket: ThresholdBracket, j: &JFunction, cfg: &PexitConfig) -> Result<f64> {
        let ThresholdBracket { lo_db, hi_db, resolution_db } = bracket;
        if !(lo_db < hi_db) {
            return Err(Error::Bracket { lo: lo_db, hi: hi_db, reason: "lo must be below hi" });
        }
        if self.converges(surface, lo_db, j, cfg)? {
            return Err(Error::Bracket { lo: lo_db, hi: hi_db, reason: "already converges at lo" });
        }
        if !self.converges(surface, hi_db, j, cfg)? {
            return Err(Error::Bracket { lo: lo_db, hi: hi_db, reason: "does not converge at hi" });
        }
        let (mut lo, mut hi) = (lo_db, hi_db);
        while hi - lo > resolution_db {
            let mid = 0.5 * (lo + hi);
            if self.converges(surface, mid, j, cfg)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Bisection bracket in code `Eb/N0` (dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdBracket {
    pub lo_db: f64,
    pub hi_db: f64,
    pub resolution_db: f64,
}

impl ThresholdBracket {
    pub fn new(lo_db: f64, hi_db: f64) -> Self {
        ThresholdBracket { lo_db, hi_db, resolution_db: 0.05 }
    }

    /// The bracket clipped to what `surface` covers at `rate`.
    pub fn covering(surface: &ExitSurface, rate: f64) -> Self {
        let (lo, hi) = surface.coverage(rate);
        ThresholdBracket::new(lo, hi)
    }
}

/// Runs the PEXIT recursion for `p` at `ebno_db`.
pub fn pexit_converges(
    p: &Protomatrix,
    surface: &ExitSurface,
    ebno_db: f64,
    j: &JFunction,
    cfg: &PexitConfig,
) -> Result<PexitOutcome> {
    PexitGraph::new(p)?.run(surface, ebno_db, j, cfg)
}

/// Smallest `Eb/N0` (to `bracket.resolution_db`) at which the recursion
/// converges; returns the midpoint of the final bracket.
pub fn threshold_search(
    p: &Protomatrix,
    surface: &ExitSurface,
    bracket: ThresholdBracket,
    j: &JFunction,
    cfg: &PexitConfig,
) -> Result<f64> {
    PexitGraph::new(p)?.threshold(surface, bracket, j, cfg)
}
