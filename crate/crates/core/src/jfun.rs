//! The J-function: mutual information between a uniform bit and a
//! consistent Gaussian LLR `N(±σ²/2, σ²)`, and its inverse.
//!
//! Values come from 128-node Gauss–Hermite quadrature, tabulated on a fine
//! `σ` grid and interpolated with a monotone cubic; the inverse solves the
//! same interpolant, so `J(J⁻¹(x))` round-trips to interpolation precision.

use alloc::vec::Vec;

use crate::interp::Pchip;

/// Gauss–Hermite nodes used by the quadrature.
pub const QUADRATURE_NODES: usize = 128;

/// Largest tabulated `σ`. `J(SIGMA_CAP)` differs from 1 by about 1e-13;
/// [`JFunction::inv`] maps every input at or above that value to the cap.
pub const SIGMA_CAP: f64 = 15.0;

const TABLE_STEP: f64 = 0.01;

/// Physicists' Gauss–Hermite nodes and weights (weight `e^{-t²}`).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -0.16667),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = (j + 1) as f64;
                p1 = z * libm::sqrt(2.0 / jf) * p2 - libm::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if libm::fabs(z - z1) <= 1e-15 * libm::fabs(z).max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `log2(1 + e^{-x})` without overflow.
#[inline]
fn log2_one_plus_exp_neg(x: f64) -> f64 {
    let v = if x > 0.0 { libm::log1p(libm::exp(-x)) } else { -x + libm::log1p(libm::exp(x)) };
    v / core::f64::consts::LN_2
}

/// Tabulated J-function and inverse.
#[derive(Debug, Clone)]
pub struct JFunction {
    table: Pchip,
    j_cap: f64,
}

impl Default for JFunction {
    fn default() -> Self {
        Self::new()
    }
}

impl JFunction {
    pub fn new() -> Self {
        let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
        let steps = libm::round(SIGMA_CAP / TABLE_STEP) as usize;
        let sigmas: Vec<f64> = (0..=steps).map(|i| i as f64 * TABLE_STEP).collect();
        let mut values: Vec<f64> = sigmas.iter().map(|&s| quadrature(s, &nodes, &weights)).collect();
        // Enforce strict monotonicity against rounding at the saturated end.
        for i in 1..values.len() {
            if values[i] <= values[i - 1] {
                values[i] = values[i - 1] + 1e-16;
            }
        }
        let j_cap = *values.last().unwrap();
        JFunction { table: Pchip::new(sigmas, values), j_cap }
    }

    /// `J(σ)` for `σ ≥ 0`; returns 1 beyond [`SIGMA_CAP`].
    #[inline]
    pub fn j(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        if sigma >= SIGMA_CAP {
            return 1.0;
        }
        let i = ((sigma / TABLE_STEP) as usize).min(self.table.xs().len() - 2);
        self.table.eval_in(i, sigma).clamp(0.0, 1.0)
    }

    /// `J⁻¹(mi)`; inputs at or above `J(SIGMA_CAP)` (including 1) map to the cap.
    pub fn inv(&self, mi: f64) -> f64 {
        if mi <= 0.0 {
            return 0.0;
        }
        if mi >= self.j_cap {
            return SIGMA_CAP;
        }
        let ys = self.table.ys();
        let i = ys.partition_point(|&v| v <= mi).saturating_sub(1).min(ys.len() - 2);
        let (mut lo, mut hi) = (self.table.xs()[i], self.table.xs()[i + 1]);
        let (y0, y1) = (ys[i], ys[i + 1]);
        let mut s = lo + (mi - y0) / (y1 - y0) * (hi - lo);
        for _ in 0..30 {
            let f = self.table.eval_in(i, s) - mi;
            if libm::fabs(f) < 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.table.slope_in(i, s);
            let next = s - f / d;
            s = if d > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        s
    }

    /// Direct quadrature, bypassing the table.
    pub fn exact(sigma: f64) -> f64 {
        let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
        quadrature(sigma, &nodes, &weights)
    }
}

fn quadrature(sigma: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let mean = 0.5 * sigma * sigma;
    let scale = core::f64::consts::SQRT_2 * sigma;
    let e: f64 = nodes
        .iter()
        .zip(weights)
        .map(|(t, w)| w * log2_one_plus_exp_neg(mean + scale * t))
        .sum();
    1.0 - e / libm::sqrt(core::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: composite Simpson rule over ±12σ of the LLR density.
    fn simpson_j(sigma: f64) -> f64 {
        let mean = sigma * sigma / 2.0;
        let (a, b) = (mean - 12.0 * sigma, mean + 12.0 * sigma);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let f = |l: f64| {
            let z = (l - mean) / sigma;
            libm::exp(-0.5 * z * z) / (sigma * libm::sqrt(2.0 * core::f64::consts::PI)) * log2_one_plus_exp_neg(l)
        };
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - s * h / 3.0
    }

    #[test]
    fn quadrature_weights_integrate_moments() {
        let (x, w) = gauss_hermite(QUADRATURE_NODES);
        let sqrt_pi = libm::sqrt(core::f64::consts::PI);
        assert!((w.iter().sum::<f64>() - sqrt_pi).abs() < 1e-12);
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_simpson_oracle() {
        let j = JFunction::new();
        for s in [0.05, 0.3, 1.0, 1.7, 2.5, 4.0, 6.0, 8.0, 10.0] {
            let oracle = simpson_j(s);
            assert!((j.j(s) - oracle).abs() < 1e-6, "sigma {s}: {} vs {oracle}", j.j(s));
        }
    }

    #[test]
    fn boundary_values() {
        let j = JFunction::new();
        assert_eq!(j.j(0.0), 0.0);
        assert!(j.j(100.0) > 0.9999);
        assert_eq!(j.inv(0.0), 0.0);
        assert_eq!(j.inv(1.0), SIGMA_CAP);
    }

    #[test]
    fn strictly_increasing() {
        let j = JFunction::new();
        let mut prev = 0.0;
        for k in 1..1400 {
            let v = j.j(k as f64 * 0.01 + 0.003);
            assert!(v > prev, "at {k}");
            prev = v;
        }
    }

    #[test]
    fn round_trips() {
        let j = JFunction::new();
        assert!((j.inv(j.j(1.7)) - 1.7).abs() < 1e-5);
        for k in 0..=10_000 {
            let x = (k as f64 / 10_000.0) * (1.0 - 1e-6);
            assert!((j.j(j.inv(x)) - x).abs() < 1e-6, "x = {x}");
        }
        for k in 1..=50 {
            let x = 1.0 - 10f64.powf(-(k as f64) / 10.0 * 1.2);
            if x <= 1.0 - 1e-6 {
                assert!((j.j(j.inv(x)) - x).abs() < 1e-6);
            }
        }
    }
}
