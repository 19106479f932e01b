//! Monte-Carlo frame error measurement.
//!
//! Frame `f` of point `p` draws its payload and noise from its own stream
//! keyed by `(seed, p, f)`. Frames run in fixed-size batches through a
//! [`Runner`] and are tallied in frame order, with the stop rule checked
//! between batches, so totals do not depend on the number of workers.

use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{self, ChannelPoly, NoiseModel, Trellis};
use crate::decoder::{BpDecoder, DecodeConfig};
use crate::encoder::Encoder;
use crate::rng::{self, Purpose};
use crate::runner::Runner;
use crate::sparse::SparseBinary;
use crate::turbo::{self, turbo_equalize};

/// Frames per batch between stop-rule checks.
pub const BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("the Eb/N0 list is empty")]
    EmptyPlan,
    #[error("stop rule needs min_frame_errors >= 1 and max_frames >= 1")]
    StopRule,
    #[error("code has no payload bits")]
    NoPayload,
    #[error("fault injection of {bits} bits exceeds the payload of {k}")]
    Fault { bits: usize, k: usize },
    #[error("point {index} ({ebno_db} dB): {source}")]
    Point { index: usize, ebno_db: f64, source: turbo::Error },
    #[error(transparent)]
    Channel(#[from] channel::Error),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Stop a point after `min_frame_errors` frame errors or `max_frames` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StopRule {
    pub min_frame_errors: u64,
    pub max_frames: u64,
}

impl StopRule {
    /// 100 frame errors or 10^6 frames.
    pub const DEFAULT: StopRule = StopRule { min_frame_errors: 100, max_frames: 1_000_000 };
    /// 50 frame errors or 10^5 frames.
    pub const DESK: StopRule = StopRule { min_frame_errors: 50, max_frames: 100_000 };
}

impl Default for StopRule {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Everything needed to run frames: code, encoder, decoder and channel.
#[derive(Debug, Clone)]
pub struct Link {
    encoder: Encoder,
    decoder: BpDecoder,
    trellis: Trellis,
    channel: ChannelPoly,
    rate: f64,
}

impl Link {
    /// `rate` sets the Eb/N0 to noise conversion, normally the design rate.
    pub fn new(h: &SparseBinary, rate: f64, channel: &ChannelPoly) -> Result<Self> {
        let encoder = Encoder::new(h);
        if encoder.k() == 0 {
            return Err(Error::NoPayload);
        }
        Ok(Link { encoder, decoder: BpDecoder::new(h), trellis: Trellis::new(channel), channel: channel.clone(), rate })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn decoder(&self) -> &BpDecoder {
        &self.decoder
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    pub fn channel(&self) -> &ChannelPoly {
        &self.channel
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn n(&self) -> usize {
        self.encoder.n()
    }

    pub fn k(&self) -> usize {
        self.encoder.k()
    }
}

/// Per-point settings shared by every frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOptions {
    pub stop: StopRule,
    pub receiver: DecodeConfig,
    pub seed: u64,
    /// Flips this many decoded payload bits before comparison; a self-test
    /// of the error counting.
    pub fault_bits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointResult {
    pub ebno_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// Wall time; left at zero here and filled in by callers that can
    /// measure it.
    pub seconds: f64,
    /// Ended on `max_frames` before collecting `min_frame_errors`.
    pub hit_max_frames: bool,
    /// Seed of this point's frame streams.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Tally {
    bit_errors: u64,
    frame_error: bool,
}

fn run_frame(link: &Link, noise: NoiseModel, opts: &PointOptions, seed: u64, frame: u64) -> core::result::Result<Tally, turbo::Error> {
    let mut rng = rng::stream(seed, Purpose::Frame, frame);
    let payload: Vec<u8> = (0..link.k()).map(|_| rng.random_range(0..2u8)).collect();
    let codeword = link.encoder.encode(&payload).expect("payload has length k");
    let y = link.trellis.transmit(&codeword, noise, &mut rng);
    let out = turbo_equalize(&y, &link.decoder, &link.trellis, noise, &opts.receiver)?;
    let mut decoded = out.payload(link.encoder.info_positions());
    for b in decoded.iter_mut().take(opts.fault_bits) {
        *b ^= 1;
    }
    Ok(compare(&payload, &decoded))
}

fn compare(sent: &[u8], decoded: &[u8]) -> Tally {
    let bit_errors = sent.iter().zip(decoded).filter(|(a, b)| a != b).count() as u64;
    Tally { bit_errors, frame_error: bit_errors > 0 }
}

/// Runs one point at the noise level implied by `ebno_db` and the link rate.
pub fn run_point<R: Runner>(link: &Link, ebno_db: f64, index: usize, opts: &PointOptions, runner: &R) -> Result<PointResult> {
    let noise = NoiseModel::from_ebno(ebno_db, link.rate)?;
    run_point_with_noise(link, noise, ebno_db, index, opts, runner)
}

/// Runs one point at an explicit noise level; `ebno_db` is only a label.
pub fn run_point_with_noise<R: Runner>(
    link: &Link,
    noise: NoiseModel,
    ebno_db: f64,
    index: usize,
    opts: &PointOptions,
    runner: &R,
) -> Result<PointResult> {
    let stop = opts.stop;
    if stop.min_frame_errors == 0 || stop.max_frames == 0 {
        return Err(Error::StopRule);
    }
    if opts.fault_bits > link.k() {
        return Err(Error::Fault { bits: opts.fault_bits, k: link.k() });
    }
    opts.receiver.validate().map_err(|e| Error::Point { index, ebno_db, source: e.into() })?;
    let seed = rng::child_seed(opts.seed, Purpose::Frame, index as u64);
    let (mut frames, mut bit_errors, mut frame_errors) = (0u64, 0u64, 0u64);
    while frame_errors < stop.min_frame_errors && frames < stop.max_frames {
        let batch = (stop.max_frames - frames).min(BATCH as u64) as usize;
        let start = frames;
        let tallies = runner.map(batch, |i| run_frame(link, noise, opts, seed, start + i as u64));
        for t in tallies {
            let t = t.map_err(|source| Error::Point { index, ebno_db, source })?;
            bit_errors += t.bit_errors;
            frame_errors += t.frame_error as u64;
        }
        frames += batch as u64;
    }
    Ok(PointResult {
        ebno_db,
        frames,
        bit_errors,
        frame_errors,
        ber: bit_errors as f64 / (frames as f64 * link.k() as f64),
        fer: frame_errors as f64 / frames as f64,
        seconds: 0.0,
        hit_max_frames: frame_errors < stop.min_frame_errors,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    /// Indices `i` where the FER at point `i + 1` exceeds the FER at point
    /// `i` by more than two standard errors.
    pub monotonicity_flags: Vec<usize>,
    /// The sweep stopped before the last point because the FER fell below
    /// the floor.
    pub stopped_at_floor: bool,
}

/// Runs the points in order; with `fer_floor`, stops after the first point
/// whose FER is below it.
pub fn run_sweep<R: Runner>(
    link: &Link,
    ebno_db: &[f64],
    opts: &PointOptions,
    fer_floor: Option<f64>,
    runner: &R,
    mut on_point: impl FnMut(&PointResult),
) -> Result<SweepResult> {
    if ebno_db.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let mut points = Vec::with_capacity(ebno_db.len());
    let mut stopped_at_floor = false;
    for (i, &e) in ebno_db.iter().enumerate() {
        let p = run_point(link, e, i, opts, runner)?;
        on_point(&p);
        points.push(p);
        if fer_floor.is_some_and(|f| p.fer < f) && i + 1 < ebno_db.len() {
            stopped_at_floor = true;
            break;
        }
    }
    let monotonicity_flags = monotonicity_flags(&points);
    Ok(SweepResult { points, monotonicity_flags, stopped_at_floor })
}

/// Flags consecutive points whose FER rises beyond binomial noise.
pub fn monotonicity_flags(points: &[PointResult]) -> Vec<usize> {
    points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let (a, b) = (&w[0], &w[1]);
            if b.fer <= a.fer {
                return false;
            }
            let pooled = (a.frame_errors + b.frame_errors) as f64 / (a.frames + b.frames) as f64;
            let var = pooled * (1.0 - pooled) * (1.0 / a.frames as f64 + 1.0 / b.frames as f64);
            b.fer - a.fer > 2.0 * libm::sqrt(var)
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::lifting::{lift, LiftOrder};
    use crate::runner::Sequential;

    fn link(channel: ChannelPoly) -> Link {
        let q = lift(&builtin::isi_half(), 4, 8, 1, LiftOrder::Degree).unwrap();
        Link::new(&q.to_parity_matrix().unwrap(), q.rate(), &channel).unwrap()
    }

    fn opts(stop: StopRule) -> PointOptions {
        PointOptions { stop, receiver: DecodeConfig::default(), seed: 5, fault_bits: 0 }
    }

    #[test]
    fn clean_channel_has_no_errors() {
        let l = link(ChannelPoly::dicode());
        let stop = StopRule { min_frame_errors: 1, max_frames: 200 };
        let noise = NoiseModel::from_sigma(1e-3).unwrap();
        let r = run_point_with_noise(&l, noise, 60.0, 0, &opts(stop), &Sequential).unwrap();
        assert_eq!((r.frames, r.frame_errors, r.bit_errors), (200, 0, 0));
        assert!(r.hit_max_frames);
    }

    #[test]
    fn injected_errors_are_counted_exactly() {
        let l = link(ChannelPoly::dicode());
        let noise = NoiseModel::from_sigma(1e-3).unwrap();
        for k in [1usize, 3, 17] {
            let o = PointOptions { fault_bits: k, ..opts(StopRule { min_frame_errors: 10, max_frames: 1000 }) };
            let r = run_point_with_noise(&l, noise, 60.0, 0, &o, &Sequential).unwrap();
            assert_eq!(r.frames, BATCH as u64);
            assert_eq!(r.frame_errors, r.frames);
            assert_eq!(r.bit_errors, r.frames * k as u64);
        }
        let o = PointOptions { fault_bits: l.k() + 1, ..opts(StopRule::DESK) };
        assert!(matches!(run_point_with_noise(&l, noise, 60.0, 0, &o, &Sequential), Err(Error::Fault { .. })));
    }

    #[test]
    fn stop_rule_is_honoured() {
        let l = link(ChannelPoly::dicode());
        let r = run_point(&l, 0.0, 0, &opts(StopRule { min_frame_errors: 5, max_frames: 10_000 }), &Sequential).unwrap();
        assert!(r.frame_errors >= 5);
        assert!(!r.hit_max_frames);
        assert_eq!(r.frames % BATCH as u64, 0);
        assert!((r.fer - r.frame_errors as f64 / r.frames as f64).abs() < 1e-15);
        assert!((r.ber - r.bit_errors as f64 / (r.frames as f64 * l.k() as f64)).abs() < 1e-15);
    }

    #[test]
    fn sweep_reports_every_point() {
        let l = link(ChannelPoly::dicode());
        let o = opts(StopRule { min_frame_errors: 10, max_frames: 256 });
        let mut seen = 0;
        let s = run_sweep(&l, &[0.5, 2.0, 3.5], &o, None, &Sequential, |_| seen += 1).unwrap();
        assert_eq!((s.points.len(), seen), (3, 3));
        assert!(s.points[0].fer >= s.points[2].fer);
        assert!(matches!(run_sweep(&l, &[], &o, None, &Sequential, |_| {}), Err(Error::EmptyPlan)));
        let s = run_sweep(&l, &[8.0, 9.0], &o, Some(0.5), &Sequential, |_| {}).unwrap();
        assert!(s.stopped_at_floor);
        assert_eq!(s.points.len(), 1);
    }

    #[test]
    fn flags_rising_fer() {
        let p = |fer: f64, frames: u64| PointResult {
            ebno_db: 0.0,
            frames,
            bit_errors: 0,
            frame_errors: (fer * frames as f64) as u64,
            ber: 0.0,
            fer,
            seconds: 0.0,
            hit_max_frames: false,
            seed: 0,
        };
        assert_eq!(monotonicity_flags(&[p(0.1, 1000), p(0.3, 1000), p(0.31, 1000)]), alloc::vec![0]);
        assert!(monotonicity_flags(&[p(0.10, 100), p(0.12, 100)]).is_empty());
    }
}
