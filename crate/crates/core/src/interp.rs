//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Carlson).

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two points.
    pub(crate) fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = alloc::vec![0.0; n];
        if n == 2 {
            ds[0] = delta[0];
            ds[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            ds[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            ds[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { xs, ys, ds }
    }

    pub(crate) fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub(crate) fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to the table.
    #[inline]
    pub(crate) fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0;
        }
        if x >= self.xs[n - 1] {
            return n - 2;
        }
        self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
    }

    /// Evaluates on interval `i`; `x` outside the table is clamped.
    #[inline]
    pub(crate) fn eval_in(&self, i: usize, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], self.xs[self.xs.len() - 1]);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.interval(x), x)
    }

    /// Derivative on interval `i`.
    #[inline]
    pub(crate) fn slope_in(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[i] + d10 * self.ds[i] + d01 * self.ys[i + 1] + d11 * self.ds[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && libm::fabs(d) > libm::fabs(3.0 * d0) {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn reproduces_nodes_and_stays_monotone() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 0.1, 0.8, 1.0];
        let p = Pchip::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x) - y).abs() < 1e-12);
        }
        let mut prev = -1.0;
        for k in 0..=400 {
            let v = p.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn exact_on_cubics_interior() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let p = Pchip::new(xs, ys);
        assert!((p.eval(0.513) - 0.513 * 0.513).abs() < 1e-4);
    }
}
