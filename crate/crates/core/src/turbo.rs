//! Turbo equalization: the channel detector and the LDPC decoder exchange
//! extrinsic LLRs.

use alloc::vec::Vec;

use crate::channel::{self, NoiseModel, Trellis};
use crate::decoder::{BpDecoder, ConfigError, DecodeConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("received {found} samples for a blocklength of {expected}")]
    Length { expected: usize, found: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] channel::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboOutput {
    /// Hard decisions on the whole codeword.
    pub decisions: Vec<u8>,
    /// Decoder reached a zero syndrome.
    pub converged: bool,
    pub outer_iterations: usize,
}

impl TurboOutput {
    pub fn payload(&self, info_positions: &[usize]) -> Vec<u8> {
        info_positions.iter().map(|&p| self.decisions[p]).collect()
    }
}

/// Runs up to `cfg.outer_iters` detector activations. The detector's
/// priors start at zero and are then the decoder's extrinsic LLRs; the
/// decoder's channel input is the detector's extrinsic output.
pub fn turbo_equalize(
    y: &[f64],
    decoder: &BpDecoder,
    trellis: &Trellis,
    noise: NoiseModel,
    cfg: &DecodeConfig,
) -> Result<TurboOutput, Error> {
    cfg.validate()?;
    if y.len() != decoder.n() {
        return Err(Error::Length { expected: decoder.n(), found: y.len() });
    }
    let clamp = cfg.llr_clamp;
    let mut prior = alloc::vec![0.0; y.len()];
    let mut out = None;
    for it in 1..=cfg.outer_iters {
        let mut det = trellis.detect(y, &prior, noise)?;
        for l in &mut det {
            *l = l.clamp(-clamp, clamp);
        }
        let bp = decoder.decode(&det, cfg);
        let done = bp.converged;
        for (p, e) in prior.iter_mut().zip(&bp.extrinsic) {
            *p = e.clamp(-clamp, clamp);
        }
        out = Some(TurboOutput { decisions: bp.decisions, converged: done, outer_iterations: it });
        if done {
            break;
        }
    }
    Ok(out.expect("at least one outer iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::channel::{ChannelPoly, LLR_MAX};
    use crate::encoder::Encoder;
    use crate::lifting::{lift, LiftOrder};
    use crate::rng::{stream, Purpose};
    use alloc::vec;
    use rand::Rng;

    fn setup() -> (Encoder, BpDecoder) {
        let q = lift(&builtin::isi_half(), 4, 20, 1, LiftOrder::Degree).unwrap();
        let h = q.to_parity_matrix().unwrap();
        (Encoder::new(&h), BpDecoder::new(&h))
    }

    #[test]
    fn noiseless_dicode_decodes_in_one_pass() {
        let (enc, dec) = setup();
        let t = Trellis::new(&ChannelPoly::dicode());
        let noise = NoiseModel::from_sigma(1e-3).unwrap();
        let mut rng = stream(1, Purpose::Test, 0);
        for _ in 0..5 {
            let u: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2u8)).collect();
            let c = enc.encode(&u).unwrap();
            let y = t.transmit(&c, noise, &mut rng);
            let out = turbo_equalize(&y, &dec, &t, noise, &DecodeConfig::default()).unwrap();
            assert!(out.converged);
            assert_eq!(out.outer_iterations, 1);
            assert_eq!(out.payload(enc.info_positions()), u);
        }
    }

    #[test]
    fn detector_only_matches_bcjr_signs() {
        let (enc, dec) = setup();
        let t = Trellis::new(&ChannelPoly::epr4());
        let noise = NoiseModel::from_sigma(0.9).unwrap();
        let mut rng = stream(2, Purpose::Test, 0);
        let u: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2u8)).collect();
        let y = t.transmit(&enc.encode(&u).unwrap(), noise, &mut rng);
        let cfg = DecodeConfig { outer_iters: 1, bp_iters: 0, ..Default::default() };
        let out = turbo_equalize(&y, &dec, &t, noise, &cfg).unwrap();
        let det = t.detect(&y, &vec![0.0; y.len()], noise).unwrap();
        let signs: Vec<u8> = det.iter().map(|&l| (l < 0.0) as u8).collect();
        assert_eq!(out.decisions, signs);
    }

    #[test]
    fn genie_priors_cancel_interference() {
        let h = ChannelPoly::epr4();
        let t = Trellis::new(&h);
        let sigma = 0.8;
        let noise = NoiseModel::from_sigma(sigma).unwrap();
        let mut rng = stream(3, Purpose::Test, 0);
        let bits: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
        let y = t.transmit(&bits, noise, &mut rng);
        let x: Vec<f64> = bits.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
        let prior: Vec<f64> = x.iter().map(|&s| s * LLR_MAX).collect();
        let ext = t.bcjr(&y, &prior, noise).unwrap();
        let taps = h.taps();
        let sym = |i: isize| if i < 0 { 1.0 } else { x[i as usize] };
        for k in 0..bits.len() {
            let mut l = 0.0;
            for (d, &hd) in taps.iter().enumerate() {
                let j = k + d;
                if j >= y.len() {
                    break;
                }
                let others: f64 =
                    taps.iter().enumerate().filter(|&(e, _)| e != d).map(|(e, &he)| he * sym(j as isize - e as isize)).sum();
                l += 2.0 * hd * (y[j] - others) / (sigma * sigma);
            }
            assert!(libm::fabs(ext[k] - l) < 1e-6, "bit {k}: {} vs {l}", ext[k]);
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let (_, dec) = setup();
        let t = Trellis::new(&ChannelPoly::dicode());
        let noise = NoiseModel::from_sigma(1.0).unwrap();
        assert!(matches!(
            turbo_equalize(&[0.0; 3], &dec, &t, noise, &DecodeConfig::default()),
            Err(Error::Length { .. })
        ));
    }
}
