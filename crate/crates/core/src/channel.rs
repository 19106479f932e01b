//! Binary-input partial-response channels: trellis realization of `h(D)`,
//! AWGN transmission, log-MAP (BCJR) detection and Monte-Carlo estimation of
//! the i.u.d. capacity (symmetric information rate).
//!
//! Conventions: bit 0 maps to symbol +1 and bit 1 to -1; LLRs are
//! `ln P(0)/P(1)`; the channel starts in the all-(+1) state and is not
//! terminated. Energy is normalized to `E_s = 1`, so for a code of rate `R`
//! the noise variance at `Eb/N0` is `1 / (2 R 10^(Eb/N0 / 10))`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::StreamRng;

/// LLR magnitude clamp used by the detector and decoder.
pub const LLR_MAX: f64 = 50.0;

/// Largest supported channel memory.
pub const MAX_MEMORY: usize = 8;

/// Noise floor substituted for `sigma == 0` inside the detector.
const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("channel has no taps")]
    EmptyTaps,
    #[error("channel memory {0} exceeds the supported maximum of {MAX_MEMORY}")]
    MemoryTooLong(usize),
    #[error("unknown channel `{0}` (expected dicode, epr4 or fir:c0,c1,...)")]
    UnknownChannel(String),
    #[error("bad FIR coefficient `{0}`")]
    BadCoefficient(String),
    #[error("sequence lengths differ: {0} samples vs {1} priors")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("noise standard deviation must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("rate must lie in (0, 1), got {0}")]
    BadRate(f64),
    #[error("search range [{lo}, {hi}] dB does not bracket the target rate")]
    NotBracketed { lo: f64, hi: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

/// Real FIR channel polynomial `h(D) = h_0 + h_1 D + ... + h_L D^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPoly {
    name: String,
    taps: Vec<f64>,
}

impl ChannelPoly {
    pub fn new(name: impl Into<String>, taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyTaps);
        }
        if taps.len() - 1 > MAX_MEMORY {
            return Err(Error::MemoryTooLong(taps.len() - 1));
        }
        Ok(ChannelPoly { name: name.into(), taps })
    }

    /// `(1 - D) / sqrt(2)`
    pub fn dicode() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        ChannelPoly { name: "dicode".into(), taps: vec![a, -a] }
    }

    /// `(1 + D - D^2 - D^3) / 2`
    pub fn epr4() -> Self {
        ChannelPoly { name: "epr4".into(), taps: vec![0.5, 0.5, -0.5, -0.5] }
    }

    /// Parses `dicode`, `epr4` or `fir:c0,c1,...`.
    pub fn from_selector(s: &str) -> Result<Self> {
        match s {
            "dicode" => Ok(Self::dicode()),
            "epr4" => Ok(Self::epr4()),
            _ => {
                let list = s.strip_prefix("fir:").ok_or_else(|| Error::UnknownChannel(s.into()))?;
                let taps = list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| Error::BadCoefficient(t.into())))
                    .collect::<Result<Vec<_>>>()?;
                if taps.iter().any(|t| !t.is_finite()) {
                    return Err(Error::BadCoefficient(list.into()));
                }
                Self::new(s, taps)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

impl fmt::Display for ChannelPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// AWGN level per real channel sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    /// Noise with the given standard deviation; zero is allowed and means a
    /// noiseless channel.
    pub fn from_sigma(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::BadSigma(sigma));
        }
        Ok(NoiseModel { sigma })
    }

    /// `sigma^2 = 1 / (2 R 10^(ebno_db/10))`.
    pub fn from_ebno(ebno_db: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0 + 1e-12) {
            return Err(Error::BadRate(rate));
        }
        let ebno = libm::pow(10.0, ebno_db / 10.0);
        Self::from_sigma(libm::sqrt(1.0 / (2.0 * rate * ebno)))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Inverse of [`NoiseModel::from_ebno`].
    pub fn ebno_db(&self, rate: f64) -> f64 {
        10.0 * libm::log10(1.0 / (2.0 * rate * self.variance()))
    }
}

/// Shift-register trellis of a channel polynomial. State bit `l-1` holds the
/// input bit from `l` steps ago.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    memory: usize,
    /// `next[state * 2 + bit]`
    next: Vec<u16>,
    /// `output[state * 2 + bit]`
    output: Vec<f64>,
    /// Incoming edges of each state as `(from_state, bit)`; always two unless
    /// memory is zero.
    incoming: Vec<Vec<(u16, u8)>>,
    /// Distinct noiseless output levels.
    levels: Vec<f64>,
    /// Index into `levels` per edge.
    edge_level: Vec<u8>,
}

#[inline]
fn symbol(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Trellis {
    pub fn new(h: &ChannelPoly) -> Self {
        let memory = h.memory();
        let states = 1usize << memory;
        let mask = states - 1;
        let mut next = Vec::with_capacity(2 * states);
        let mut output = Vec::with_capacity(2 * states);
        let mut incoming = vec![Vec::new(); states];
        for s in 0..states {
            for b in 0..2u8 {
                let mut y = h.taps()[0] * symbol(b);
                for l in 1..=memory {
                    y += h.taps()[l] * symbol(((s >> (l - 1)) & 1) as u8);
                }
                let ns = ((s << 1) | b as usize) & mask;
                next.push(ns as u16);
                output.push(y);
                incoming[ns].push((s as u16, b));
            }
        }
        let mut levels: Vec<f64> = Vec::new();
        let edge_level = output
            .iter()
            .map(|&o| match levels.iter().position(|&l| libm::fabs(l - o) < 1e-12) {
                Some(i) => i as u8,
                None => {
                    levels.push(o);
                    (levels.len() - 1) as u8
                }
            })
            .collect();
        Trellis { memory, next, output, incoming, levels, edge_level }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn states(&self) -> usize {
        1 << self.memory
    }

    pub fn edges(&self) -> usize {
        2 * self.states()
    }

    #[inline]
    pub fn next_state(&self, state: usize, bit: u8) -> usize {
        self.next[state * 2 + bit as usize] as usize
    }

    #[inline]
    pub fn output(&self, state: usize, bit: u8) -> f64 {
        self.output[state * 2 + bit as usize]
    }

    /// Noiseless channel output for `bits`, starting from the all-(+1) state.
    pub fn convolve(&self, bits: &[u8]) -> Vec<f64> {
        let mut s = 0;
        bits.iter()
            .map(|&b| {
                let y = self.output(s, b);
                s = self.next_state(s, b);
                y
            })
            .collect()
    }

    /// `y_k = sum_l h_l x_(k-l) + n_k`.
    pub fn transmit(&self, bits: &[u8], noise: NoiseModel, rng: &mut StreamRng) -> Vec<f64> {
        let mut y = self.convolve(bits);
        if noise.sigma > 0.0 {
            for v in &mut y {
                let n: f64 = rng.sample(StandardNormal);
                *v += noise.sigma * n;
            }
        }
        y
    }

    /// Log-MAP detection. Returns extrinsic LLRs (a-posteriori minus the
    /// a-priori input), clamped to `±LLR_MAX`.
    pub fn detect(&self, y: &[f64], prior: &[f64], noise: NoiseModel) -> Result<Vec<f64>> {
        let mut post = self.bcjr(y, prior, noise)?;
        for l in &mut post {
            *l = l.clamp(-LLR_MAX, LLR_MAX);
        }
        Ok(post)
    }

    /// Unclamped extrinsic LLRs.
    ///
    /// Runs the forward/backward recursion on per-step normalized
    /// probabilities when every branch-metric spread fits comfortably in
    /// `f64`, and in the log domain otherwise. Both compute the exact MAP
    /// quantities.
    pub fn bcjr(&self, y: &[f64], prior: &[f64], noise: NoiseModel) -> Result<Vec<f64>> {
        if y.len() != prior.len() {
            return Err(Error::LengthMismatch(y.len(), prior.len()));
        }
        let sigma = noise.sigma.max(SIGMA_FLOOR);
        let inv2var = 1.0 / (2.0 * sigma * sigma);
        let (lo, hi) = self.levels.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let spread = y
            .iter()
            .map(|&v| {
                let far = libm::fabs(v - lo).max(libm::fabs(v - hi));
                far * far * inv2var
            })
            .fold(0.0, f64::max);
        if spread + LLR_MAX < SCALED_MAX_SPREAD {
            Ok(self.scaled_map(y, prior, inv2var))
        } else {
            Ok(self.log_map(y, prior, inv2var, 0.0))
        }
    }

    /// Log-domain recursion with `offset` added to every branch metric.
    pub fn log_map_with_offset(&self, y: &[f64], prior: &[f64], noise: NoiseModel, offset: f64) -> Result<Vec<f64>> {
        if y.len() != prior.len() {
            return Err(Error::LengthMismatch(y.len(), prior.len()));
        }
        let sigma = noise.sigma.max(SIGMA_FLOOR);
        Ok(self.log_map(y, prior, 1.0 / (2.0 * sigma * sigma), offset))
    }

    fn log_map(&self, y: &[f64], prior: &[f64], inv2var: f64, offset: f64) -> Vec<f64> {
        let n = y.len();
        let ns = self.states();

        // Channel part of the branch metrics; the a-priori term is added
        // where it is needed so the output stays extrinsic.
        let mut gamma = vec![0.0; n * 2 * ns];
        for (k, g) in gamma.chunks_exact_mut(2 * ns).enumerate() {
            for (e, out) in self.output.iter().enumerate() {
                let d = y[k] - out;
                g[e] = -d * d * inv2var + offset;
            }
        }

        let mut alpha = vec![NEG; (n + 1) * ns];
        alpha[0] = 0.0;
        for k in 0..n {
            let half = 0.5 * prior[k].clamp(-LLR_MAX, LLR_MAX);
            let g = &gamma[k * 2 * ns..(k + 1) * 2 * ns];
            let (cur, nxt) = alpha[k * ns..(k + 2) * ns].split_at_mut(ns);
            let mut max = NEG;
            for (s2, inc) in self.incoming.iter().enumerate() {
                let mut acc = NEG;
                for &(s, b) in inc {
                    let e = s as usize * 2 + b as usize;
                    let p = if b == 0 { half } else { -half };
                    acc = lse2(acc, cur[s as usize] + g[e] + p);
                }
                nxt[s2] = acc;
                max = max.max(acc);
            }
            for v in nxt.iter_mut() {
                *v -= max;
            }
        }

        let mut beta_next = vec![0.0; ns];
        let mut beta = vec![0.0; ns];
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let half = 0.5 * prior[k].clamp(-LLR_MAX, LLR_MAX);
            let g = &gamma[k * 2 * ns..(k + 1) * 2 * ns];
            let a = &alpha[k * ns..(k + 1) * ns];
            let mut l0 = NEG;
            let mut l1 = NEG;
            let mut max = NEG;
            for s in 0..ns {
                let e0 = s * 2;
                let e1 = e0 + 1;
                let m0 = g[e0] + beta_next[self.next[e0] as usize];
                let m1 = g[e1] + beta_next[self.next[e1] as usize];
                l0 = lse2(l0, a[s] + m0);
                l1 = lse2(l1, a[s] + m1);
                let b = lse2(m0 + half, m1 - half);
                beta[s] = b;
                max = max.max(b);
            }
            out[k] = l0 - l1;
            for (bn, b) in beta_next.iter_mut().zip(&beta) {
                *bn = b - max;
            }
        }
        out
    }

    fn scaled_map(&self, y: &[f64], prior: &[f64], inv2var: f64) -> Vec<f64> {
        let n = y.len();
        let ns = self.states();
        let nl = self.levels.len();

        // Per-step level likelihoods relative to the most likely level, and
        // a-priori bit probabilities.
        let mut lik = vec![0.0; n * nl];
        let mut p0 = vec![0.0; n];
        for k in 0..n {
            let row = &mut lik[k * nl..(k + 1) * nl];
            let mut dmin = f64::MAX;
            for (r, &lv) in row.iter_mut().zip(&self.levels) {
                let d = y[k] - lv;
                *r = d * d * inv2var;
                dmin = dmin.min(*r);
            }
            for r in row.iter_mut() {
                *r = libm::exp(dmin - *r);
            }
            let l = prior[k].clamp(-LLR_MAX, LLR_MAX);
            p0[k] = 1.0 / (1.0 + libm::exp(-l));
        }

        let mut alpha = vec![0.0; (n + 1) * ns];
        alpha[0] = 1.0;
        for k in 0..n {
            let g = &lik[k * nl..(k + 1) * nl];
            let pb = [p0[k], 1.0 - p0[k]];
            let (cur, nxt) = alpha[k * ns..(k + 2) * ns].split_at_mut(ns);
            let mut sum = 0.0;
            for (s2, inc) in self.incoming.iter().enumerate() {
                let mut acc = 0.0;
                for &(s, b) in inc {
                    let e = s as usize * 2 + b as usize;
                    acc += cur[s as usize] * g[self.edge_level[e] as usize] * pb[b as usize];
                }
                nxt[s2] = acc;
                sum += acc;
            }
            let inv = 1.0 / sum;
            for v in nxt.iter_mut() {
                *v *= inv;
            }
        }

        let mut beta_next = vec![1.0; ns];
        let mut beta = vec![0.0; ns];
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let g = &lik[k * nl..(k + 1) * nl];
            let pb = [p0[k], 1.0 - p0[k]];
            let a = &alpha[k * ns..(k + 1) * ns];
            let mut l0 = 0.0;
            let mut l1 = 0.0;
            let mut sum = 0.0;
            for s in 0..ns {
                let e0 = s * 2;
                let e1 = e0 + 1;
                let m0 = g[self.edge_level[e0] as usize] * beta_next[self.next[e0] as usize];
                let m1 = g[self.edge_level[e1] as usize] * beta_next[self.next[e1] as usize];
                l0 += a[s] * m0;
                l1 += a[s] * m1;
                let b = m0 * pb[0] + m1 * pb[1];
                beta[s] = b;
                sum += b;
            }
            out[k] = (libm::log(l0) - libm::log(l1)).clamp(-SCALED_MAX_SPREAD, SCALED_MAX_SPREAD);
            let inv = 1.0 / sum;
            for (bn, b) in beta_next.iter_mut().zip(&beta) {
                *bn = b * inv;
            }
        }
        out
    }

    /// Monte-Carlo i.u.d. information rate in bits per channel use.
    ///
    /// `h(Y)` comes from the forward recursion's normalizers with uniform
    /// inputs, `h(Y|X) = 0.5 log2(2 pi e sigma^2)`. The first
    /// [`SIR_BURN_IN`] steps are discarded and the standard error is a
    /// jackknife over [`SIR_SEGMENTS`] segments.
    pub fn estimate_sir(&self, noise: NoiseModel, n: usize, rng: &mut StreamRng) -> Result<SirEstimate> {
        if n < SIR_MIN_SAMPLES {
            return Err(Error::TooFewSamples { min: SIR_MIN_SAMPLES, got: n });
        }
        if !(noise.sigma > 0.0) {
            return Err(Error::BadSigma(noise.sigma));
        }
        let total = n + SIR_BURN_IN;
        let bits: Vec<u8> = (0..total).map(|_| rng.random::<bool>() as u8).collect();
        let y = self.transmit(&bits, noise, rng);

        let ns = self.states();
        let var = noise.variance();
        let inv2var = 1.0 / (2.0 * var);
        let log_norm = -0.5 * libm::log(2.0 * core::f64::consts::PI * var) - core::f64::consts::LN_2;
        let cond_entropy = 0.5 * libm::log2(2.0 * core::f64::consts::PI * core::f64::consts::E * var);

        let mut alpha = vec![NEG; ns];
        alpha[0] = 0.0;
        let mut next = vec![NEG; ns];
        let seg_len = n / SIR_SEGMENTS;
        let mut seg_sums = vec![0.0; SIR_SEGMENTS];
        for (k, &yk) in y.iter().enumerate() {
            let mut total_lse = NEG;
            for (s2, inc) in self.incoming.iter().enumerate() {
                let mut acc = NEG;
                for &(s, b) in inc {
                    let d = yk - self.output(s as usize, b);
                    acc = lse2(acc, alpha[s as usize] - d * d * inv2var);
                }
                next[s2] = acc;
                total_lse = lse2(total_lse, acc);
            }
            for (a, nx) in alpha.iter_mut().zip(&next) {
                *a = nx - total_lse;
            }
            if k >= SIR_BURN_IN {
                let idx = ((k - SIR_BURN_IN) / seg_len.max(1)).min(SIR_SEGMENTS - 1);
                // log2 p(y_k | y_<k) = (total_lse + log_norm) / ln 2
                seg_sums[idx] += -(total_lse + log_norm) / core::f64::consts::LN_2 - cond_entropy;
            }
        }
        let mut seg_counts = vec![seg_len; SIR_SEGMENTS];
        seg_counts[SIR_SEGMENTS - 1] = n - seg_len * (SIR_SEGMENTS - 1);
        let total_sum: f64 = seg_sums.iter().sum();
        let bits_est = total_sum / n as f64;
        let g = SIR_SEGMENTS as f64;
        let loo: Vec<f64> = seg_sums
            .iter()
            .zip(&seg_counts)
            .map(|(s, &c)| (total_sum - s) / (n - c) as f64)
            .collect();
        let loo_mean = loo.iter().sum::<f64>() / g;
        let var_jk = (g - 1.0) / g * loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).sum::<f64>();
        Ok(SirEstimate { bits: bits_est, stderr: libm::sqrt(var_jk) })
    }
}

/// Minimum sample count accepted by [`Trellis::estimate_sir`].
pub const SIR_MIN_SAMPLES: usize = 10_000;
/// Leading trellis steps discarded by the SIR estimator.
pub const SIR_BURN_IN: usize = 100;
/// Jackknife segments used by the SIR estimator.
pub const SIR_SEGMENTS: usize = 20;

/// Information-rate estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirEstimate {
    pub bits: f64,
    pub stderr: f64,
}

/// Settings for [`ebno_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSearch {
    pub lo_db: f64,
    pub hi_db: f64,
    pub resolution_db: f64,
    /// Initial Monte-Carlo size per probe; doubled until the standard error
    /// drops below `max_stderr`.
    pub samples: usize,
    pub max_samples: usize,
    pub max_stderr: f64,
    pub seed: u64,
}

impl Default for LimitSearch {
    fn default() -> Self {
        LimitSearch {
            lo_db: -5.0,
            hi_db: 15.0,
            resolution_db: 0.05,
            samples: 200_000,
            max_samples: 6_400_000,
            max_stderr: 0.005,
            seed: 1,
        }
    }
}

/// One bisection probe of [`ebno_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitProbe {
    pub ebno_db: f64,
    pub estimate: SirEstimate,
    pub samples: usize,
}

/// Result of [`ebno_limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EbnoLimit {
    pub ebno_db: f64,
    pub probes: Vec<LimitProbe>,
}

/// Estimates the SIR at `ebno_db` for a code of rate `rate`, growing the
/// sample count until the standard error is small enough. Every probe uses
/// the same random stream so probes at different SNRs share their inputs.
pub fn sir_at(h: &Trellis, ebno_db: f64, rate: f64, cfg: &LimitSearch) -> Result<LimitProbe> {
    let noise = NoiseModel::from_ebno(ebno_db, rate)?;
    let mut n = cfg.samples.max(SIR_MIN_SAMPLES);
    loop {
        let mut rng = crate::rng::stream(cfg.seed, crate::rng::Purpose::Capacity, 0);
        let est = h.estimate_sir(noise, n, &mut rng)?;
        if est.stderr < cfg.max_stderr || n >= cfg.max_samples {
            return Ok(LimitProbe { ebno_db, estimate: est, samples: n });
        }
        n *= 2;
    }
}

/// Smallest `Eb/N0` (dB) at which the i.u.d. rate of `h` reaches `rate`,
/// found by bisection to `cfg.resolution_db`.
pub fn ebno_limit(h: &Trellis, rate: f64, cfg: &LimitSearch) -> Result<EbnoLimit> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::BadRate(rate));
    }
    let mut probes = Vec::new();
    let mut lo = cfg.lo_db;
    let mut hi = cfg.hi_db;
    let p_lo = sir_at(h, lo, rate, cfg)?;
    let p_hi = sir_at(h, hi, rate, cfg)?;
    probes.push(p_lo);
    probes.push(p_hi);
    if p_lo.estimate.bits >= rate || p_hi.estimate.bits < rate {
        return Err(Error::NotBracketed { lo, hi });
    }
    while hi - lo > cfg.resolution_db {
        let mid = 0.5 * (lo + hi);
        let p = sir_at(h, mid, rate, cfg)?;
        probes.push(p);
        if p.estimate.bits >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EbnoLimit { ebno_db: 0.5 * (lo + hi), probes })
}

const NEG: f64 = -1.0e300;

/// Largest metric spread (nats) the probability-domain recursion accepts.
const SCALED_MAX_SPREAD: f64 = 600.0;

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub(crate) fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    let d = lo - hi;
    if d < -40.0 {
        hi
    } else {
        hi + libm::log1p(libm::exp(d))
    }
}
