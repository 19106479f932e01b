//! Flooding belief-propagation decoding in the LLR domain.

use alloc::vec::Vec;

use crate::channel::LLR_MAX;
use crate::sparse::SparseBinary;

/// Check-node update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum CheckRule {
    /// Exact `2 atanh(prod tanh(x / 2))`.
    #[default]
    SumProduct,
    MinSum,
}

/// Receiver schedule: `outer_iters` detector activations, each followed by
/// up to `bp_iters` decoder iterations; stops early on a zero syndrome.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct DecodeConfig {
    pub outer_iters: usize,
    pub bp_iters: usize,
    pub llr_clamp: f64,
    pub check_rule: CheckRule,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { outer_iters: 10, bp_iters: 20, llr_clamp: LLR_MAX, check_rule: CheckRule::SumProduct }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("outer_iters must be at least 1")]
    Outer,
    #[error("llr_clamp must lie in (0, {LLR_MAX}], got {0}")]
    Clamp(f64),
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.outer_iters == 0 {
            return Err(ConfigError::Outer);
        }
        if !(self.llr_clamp > 0.0 && self.llr_clamp <= LLR_MAX) {
            return Err(ConfigError::Clamp(self.llr_clamp));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    /// Hard decisions, 1 where the posterior LLR is negative.
    pub decisions: Vec<u8>,
    /// Posterior minus channel input.
    pub extrinsic: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// A parity-check matrix prepared for message passing. Edges are numbered
/// in row-major order.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    h: SparseBinary,
    row_start: Vec<usize>,
    edge_var: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl BpDecoder {
    pub fn new(h: &SparseBinary) -> Self {
        let mut row_start = Vec::with_capacity(h.rows() + 1);
        let mut edge_var = Vec::with_capacity(h.nnz());
        let mut var_edges = alloc::vec![Vec::new(); h.cols()];
        row_start.push(0);
        for r in 0..h.rows() {
            for &v in h.row(r) {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            row_start.push(edge_var.len());
        }
        BpDecoder { h: h.clone(), row_start, edge_var, var_edges }
    }

    pub fn parity_matrix(&self) -> &SparseBinary {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    /// Decodes channel LLRs (`ln P(0)/P(1)`), running at most
    /// `cfg.bp_iters` iterations.
    pub fn decode(&self, llr: &[f64], cfg: &DecodeConfig) -> BpOutput {
        assert_eq!(llr.len(), self.n(), "LLR count must match the blocklength");
        let clamp = cfg.llr_clamp;
        let ne = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| llr[v].clamp(-clamp, clamp)).collect();
        let mut c2v = alloc::vec![0.0; ne];
        let mut post: Vec<f64> = llr.to_vec();
        let mut decisions: Vec<u8> = post.iter().map(|&l| (l < 0.0) as u8).collect();
        let mut converged = cfg.bp_iters == 0 && self.h.is_codeword(&decisions);
        let mut iterations = 0;
        let mut scratch = Vec::new();

        for it in 1..=cfg.bp_iters {
            iterations = it;
            for r in 0..self.h.rows() {
                let (a, b) = (self.row_start[r], self.row_start[r + 1]);
                match cfg.check_rule {
                    CheckRule::SumProduct => sum_product(&v2c[a..b], &mut c2v[a..b], clamp, &mut scratch),
                    CheckRule::MinSum => min_sum(&v2c[a..b], &mut c2v[a..b], clamp),
                }
            }
            for (v, es) in self.var_edges.iter().enumerate() {
                let total = llr[v] + es.iter().map(|&e| c2v[e]).sum::<f64>();
                post[v] = total;
                decisions[v] = (total < 0.0) as u8;
                for &e in es {
                    v2c[e] = (total - c2v[e]).clamp(-clamp, clamp);
                }
            }
            if self.h.is_codeword(&decisions) {
                converged = true;
                break;
            }
        }
        let extrinsic = post.iter().zip(llr).map(|(p, l)| p - l).collect();
        BpOutput { decisions, extrinsic, converged, iterations }
    }
}

fn sum_product(input: &[f64], out: &mut [f64], clamp: f64, prefix: &mut Vec<f64>) {
    const T_MAX: f64 = 1.0 - 1e-15;
    let d = input.len();
    prefix.clear();
    prefix.resize(d + 1, 1.0);
    for (i, &x) in input.iter().enumerate() {
        prefix[i + 1] = prefix[i] * libm::tanh(0.5 * x).clamp(-T_MAX, T_MAX);
    }
    let mut suffix = 1.0;
    for i in (0..d).rev() {
        let p = (prefix[i] * suffix).clamp(-T_MAX, T_MAX);
        out[i] = (2.0 * libm::atanh(p)).clamp(-clamp, clamp);
        suffix *= libm::tanh(0.5 * input[i]).clamp(-T_MAX, T_MAX);
    }
}

fn min_sum(input: &[f64], out: &mut [f64], clamp: f64) {
    let mut sign = 1.0;
    let (mut m1, mut m2, mut at) = (f64::INFINITY, f64::INFINITY, 0);
    for (i, &x) in input.iter().enumerate() {
        if x < 0.0 {
            sign = -sign;
        }
        let a = libm::fabs(x);
        if a < m1 {
            m2 = m1;
            m1 = a;
            at = i;
        } else if a < m2 {
            m2 = a;
        }
    }
    for (i, &x) in input.iter().enumerate() {
        let mag = if i == at { m2 } else { m1 };
        let s = if x < 0.0 { -sign } else { sign };
        out[i] = (s * mag).clamp(-clamp, clamp);
    }
}
