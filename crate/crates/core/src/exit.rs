//! Detector EXIT surfaces: the extrinsic mutual information `I_E` produced by
//! the BCJR detector as a function of the a-priori information `I_A` and the
//! channel SNR.
//!
//! A surface is measured at a *reference rate*: its `Eb/N0` axis converts to
//! noise variance through that rate. A code of a different rate `R` at
//! `Eb/N0 = e` sees the same noise as the surface at
//! `e + 10 log10(R / R_ref)`, which lets one surface serve a whole code family.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelPoly, NoiseModel, Trellis};
use crate::interp::Pchip;
use crate::jfun::JFunction;
use crate::rng::{self, Purpose};
use crate::runner::Runner;

/// Minimum symbols per surface cell.
pub const MIN_SYMBOLS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{0} grid must be non-empty and strictly increasing")]
    Grid(&'static str),
    #[error("a-priori grid must lie in [0, 1]")]
    IaRange,
    #[error("need at least {min} symbols per cell, got {got}")]
    TooFewSymbols { min: usize, got: usize },
    #[error("table has {got} values, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("Eb/N0 {ebno_db} dB at rate {rate} maps to {mapped} dB, outside the surface range [{lo}, {hi}]")]
    OutOfRange { ebno_db: f64, rate: f64, mapped: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Channel(#[from] crate::channel::Error),
}

pub type Result<T> = core::result::Result<T, Error>;

/// How a surface is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub ebno_db: Vec<f64>,
    pub ia: Vec<f64>,
    /// Rate used to turn the `Eb/N0` axis into noise variance.
    pub reference_rate: f64,
    /// Symbols simulated per cell.
    pub symbols: usize,
    /// Detector block length; each cell runs `symbols / block` blocks.
    pub block: usize,
    pub seed: u64,
}

impl SurfaceSpec {
    /// The default grid: `I_A` in steps of 0.05, `Eb/N0` in 0.25 dB steps
    /// over `[lo_db, hi_db]`, 2e5 symbols per cell.
    pub fn standard(lo_db: f64, hi_db: f64, reference_rate: f64, seed: u64) -> Self {
        let steps = libm::round((hi_db - lo_db) / 0.25) as usize;
        SurfaceSpec {
            ebno_db: (0..=steps).map(|k| lo_db + 0.25 * k as f64).collect(),
            ia: (0..=20).map(|k| k as f64 * 0.05).collect(),
            reference_rate,
            symbols: 200_000,
            block: 10_000,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        check_grid(&self.ebno_db, "Eb/N0")?;
        check_grid(&self.ia, "a-priori")?;
        if self.ia[0] < 0.0 || *self.ia.last().unwrap() > 1.0 {
            return Err(Error::IaRange);
        }
        if self.symbols < MIN_SYMBOLS {
            return Err(Error::TooFewSymbols { min: MIN_SYMBOLS, got: self.symbols });
        }
        Ok(())
    }
}

fn check_grid(g: &[f64], name: &'static str) -> Result<()> {
    if g.is_empty() || g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid(name));
    }
    Ok(())
}

/// Tabulated detector transfer function `I_E = T(I_A, Eb/N0)`.
#[derive(Debug, Clone)]
pub struct ExitSurface {
    pub channel: String,
    pub reference_rate: f64,
    pub symbols: usize,
    pub seed: u64,
    ebno_db: Vec<f64>,
    ia: Vec<f64>,
    values: Vec<f64>,
    rows: Vec<Pchip>,
}

impl ExitSurface {
    /// Builds a surface from a row-major table (`values[e * ia.len() + a]`),
    /// making it monotone along both axes first.
    pub fn new(
        channel: impl Into<String>,
        reference_rate: f64,
        ebno_db: Vec<f64>,
        ia: Vec<f64>,
        mut values: Vec<f64>,
        symbols: usize,
        seed: u64,
    ) -> Result<Self> {
        check_grid(&ebno_db, "Eb/N0")?;
        check_grid(&ia, "a-priori")?;
        if values.len() != ebno_db.len() * ia.len() {
            return Err(Error::TableSize { expected: ebno_db.len() * ia.len(), got: values.len() });
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        make_monotone(&mut values, ebno_db.len(), ia.len());
        let rows = build_rows(&ia, &values);
        Ok(ExitSurface { channel: channel.into(), reference_rate, symbols, seed, ebno_db, ia, values, rows })
    }

    pub fn ebno_grid(&self) -> &[f64] {
        &self.ebno_db
    }

    pub fn ia_grid(&self) -> &[f64] {
        &self.ia
    }

    /// Smoothed table, row-major by `Eb/N0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ebno_idx: usize, ia_idx: usize) -> f64 {
        self.values[ebno_idx * self.ia.len() + ia_idx]
    }

    /// Maps a code's `Eb/N0` to the surface axis.
    pub fn map_ebno(&self, ebno_db: f64, rate: f64) -> f64 {
        ebno_db + 10.0 * libm::log10(rate / self.reference_rate)
    }

    /// Range of code `Eb/N0` values covered for a code of rate `rate`.
    pub fn coverage(&self, rate: f64) -> (f64, f64) {
        let shift = 10.0 * libm::log10(rate / self.reference_rate);
        (self.ebno_db[0] - shift, *self.ebno_db.last().unwrap() - shift)
    }

    /// Detector transfer curve for a code of rate `rate` at `ebno_db`.
    pub fn slice(&self, ebno_db: f64, rate: f64) -> Result<SurfaceSlice<'_>> {
        let mapped = self.map_ebno(ebno_db, rate);
        let lo = self.ebno_db[0];
        let hi = *self.ebno_db.last().unwrap();
        const SLACK: f64 = 1e-9;
        if mapped < lo - SLACK || mapped > hi + SLACK {
            return Err(Error::OutOfRange { ebno_db, rate, mapped, lo, hi });
        }
        let mapped = mapped.clamp(lo, hi);
        if self.ebno_db.len() == 1 {
            return Ok(SurfaceSlice { lo: &self.rows[0], hi: &self.rows[0], w: 0.0 });
        }
        let i = self.ebno_db.partition_point(|&v| v <= mapped).saturating_sub(1).min(self.ebno_db.len() - 2);
        let w = (mapped - self.ebno_db[i]) / (self.ebno_db[i + 1] - self.ebno_db[i]);
        Ok(SurfaceSlice { lo: &self.rows[i], hi: &self.rows[i + 1], w })
    }

    /// `T(I_A, Eb/N0)` for a code of rate `rate`.
    pub fn lookup(&self, ia: f64, ebno_db: f64, rate: f64) -> Result<f64> {
        Ok(self.slice(ebno_db, rate)?.eval(ia))
    }
}

/// The surface at a fixed SNR: linear blend of the two neighboring rows.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSlice<'a> {
    lo: &'a Pchip,
    hi: &'a Pchip,
    w: f64,
}

impl SurfaceSlice<'_> {
    #[inline]
    pub fn eval(&self, ia: f64) -> f64 {
        let a = self.lo.eval(ia);
        if self.w == 0.0 {
            return a.clamp(0.0, 1.0);
        }
        let b = self.hi.eval(ia);
        ((1.0 - self.w) * a + self.w * b).clamp(0.0, 1.0)
    }
}

fn build_rows(ia: &[f64], values: &[f64]) -> Vec<Pchip> {
    let n = ia.len();
    values
        .chunks_exact(n)
        .map(|row| {
            if n == 1 {
                Pchip::new(vec![ia[0], ia[0] + 1.0], vec![row[0], row[0]])
            } else {
                Pchip::new(ia.to_vec(), row.to_vec())
            }
        })
        .collect()
}

/// Pool-adjacent-violators fit (unit weights), nondecreasing.
pub(crate) fn isotonic(v: &mut [f64]) {
    let mut means: Vec<f64> = Vec::with_capacity(v.len());
    let mut counts: Vec<usize> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        means.push(x);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m1, c1) = (means.pop().unwrap(), counts.pop().unwrap());
            let (m0, c0) = (means.pop().unwrap(), counts.pop().unwrap());
            let c = c0 + c1;
            means.push((m0 * c0 as f64 + m1 * c1 as f64) / c as f64);
            counts.push(c);
        }
    }
    let mut k = 0;
    for (m, c) in means.iter().zip(&counts) {
        for x in &mut v[k..k + c] {
            *x = *m;
        }
        k += c;
    }
}

/// Alternating isotonic fits along both axes, finished by running maxima
/// (which preserve monotonicity along the other axis).
fn make_monotone(values: &mut [f64], n_ebno: usize, n_ia: usize) {
    let mut col = vec![0.0; n_ebno];
    for _ in 0..4 {
        for row in values.chunks_exact_mut(n_ia) {
            isotonic(row);
        }
        for a in 0..n_ia {
            for e in 0..n_ebno {
                col[e] = values[e * n_ia + a];
            }
            isotonic(&mut col);
            for e in 0..n_ebno {
                values[e * n_ia + a] = col[e];
            }
        }
    }
    for row in values.chunks_exact_mut(n_ia) {
        for a in 1..n_ia {
            row[a] = row[a].max(row[a - 1]);
        }
    }
    for e in 1..n_ebno {
        for a in 0..n_ia {
            values[e * n_ia + a] = values[e * n_ia + a].max(values[(e - 1) * n_ia + a]);
        }
    }
}

/// Time-averaged mutual information of LLRs `l` about bits `b`:
/// `1 - mean(log2(1 + exp(-x L)))` with `x = ±1`.
pub fn llr_mutual_information(bits: &[u8], llrs: &[f64]) -> f64 {
    let s: f64 = bits
        .iter()
        .zip(llrs)
        .map(|(&b, &l)| {
            let xl = if b == 0 { l } else { -l };
            if xl > 0.0 {
                libm::log1p(libm::exp(-xl))
            } else {
                -xl + libm::log1p(libm::exp(xl))
            }
        })
        .sum();
    1.0 - s / (core::f64::consts::LN_2 * bits.len() as f64)
}

/// Measures one cell. All cells draw from the same random stream (common
/// random numbers), so the raw table is already nearly monotone.
pub fn measure_cell(trellis: &Trellis, ebno_db: f64, ia: f64, spec: &SurfaceSpec, j: &JFunction) -> Result<f64> {
    let noise = NoiseModel::from_ebno(ebno_db, spec.reference_rate)?;
    let sigma_a = j.inv(ia);
    let block = spec.block.max(1).min(spec.symbols);
    let blocks = spec.symbols.div_ceil(block);
    let mut rng = rng::stream(spec.seed, Purpose::Surface, 0);
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..blocks {
        let bits: Vec<u8> = (0..block).map(|_| rng.random::<bool>() as u8).collect();
        let y = trellis.transmit(&bits, noise, &mut rng);
        let prior: Vec<f64> = bits
            .iter()
            .map(|&b| {
                let w: f64 = rng.sample(StandardNormal);
                let x = if b == 0 { 1.0 } else { -1.0 };
                x * sigma_a * sigma_a / 2.0 + sigma_a * w
            })
            .collect();
        let ext = trellis.detect(&y, &prior, noise)?;
        total += llr_mutual_information(&bits, &ext) * block as f64;
        count += block;
    }
    Ok(total / count as f64)
}

/// Measures a full surface, one job per cell.
pub fn measure_detector_exit<R: Runner>(h: &ChannelPoly, spec: &SurfaceSpec, j: &JFunction, runner: &R) -> Result<ExitSurface> {
    spec.validate()?;
    let trellis = Trellis::new(h);
    let n_ia = spec.ia.len();
    let cells = runner.map(spec.ebno_db.len() * n_ia, |c| {
        measure_cell(&trellis, spec.ebno_db[c / n_ia], spec.ia[c % n_ia], spec, j)
    });
    let values = cells.into_iter().collect::<Result<Vec<_>>>()?;
    ExitSurface::new(h.name(), spec.reference_rate, spec.ebno_db.clone(), spec.ia.clone(), values, spec.symbols, spec.seed)
}
