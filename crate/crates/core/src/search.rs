//! Threshold-driven protograph searches: the 3x6 rate-1/2 base template,
//! greedy nested lengthening, and randomized rate-compatible row search.
//!
//! Candidates are ranked by threshold, then by total edge count, then by
//! their entries in row-major order. Independent evaluations go through a
//! [`Runner`] and are reduced by candidate index.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::exit::ExitSurface;
use crate::jfun::JFunction;
use crate::pexit::{PexitConfig, PexitGraph};
use crate::protograph::{self, ExtensionColumns, Protomatrix, RcExtension, LINEAR_GROWTH_MIN_SUM};
use crate::rng::{self, Purpose};
use crate::runner::Runner;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("the candidate space is empty")]
    Empty,
    #[error("search budget {0} is below the minimum of 10")]
    Budget(usize),
    #[error("surface does not cover rate {rate}: no candidate converges inside it")]
    Coverage { rate: f64 },
    #[error("value set `{0}` is empty")]
    ValueSet(&'static str),
    #[error("row weight range [{lo}, {hi}] is infeasible for {cols} columns")]
    Weight { lo: u32, hi: u32, cols: usize },
    #[error(transparent)]
    Protograph(#[from] protograph::Error),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Threshold evaluation on a fixed surface.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub surface: &'a ExitSurface,
    pub j: &'a JFunction,
    pub pexit: PexitConfig,
    pub resolution_db: f64,
}

impl<'a> Objective<'a> {
    pub fn new(surface: &'a ExitSurface, j: &'a JFunction) -> Self {
        Objective { surface, j, pexit: PexitConfig::default(), resolution_db: 0.05 }
    }

    /// Threshold in dB by bisection over the surface's coverage at the
    /// code's rate. Infinite when the code does not converge at the top of
    /// the coverage; the bottom edge when it already converges there.
    pub fn threshold(&self, p: &Protomatrix) -> f64 {
        let Ok(g) = PexitGraph::new(p) else { return f64::INFINITY };
        let (mut lo, mut hi) = self.surface.coverage(g.rate());
        let conv = |e: f64| g.converges(self.surface, e, self.j, &self.pexit).unwrap_or(false);
        if !conv(hi) {
            return f64::INFINITY;
        }
        if conv(lo) {
            return lo;
        }
        while hi - lo > self.resolution_db {
            let mid = 0.5 * (lo + hi);
            if conv(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A ranked candidate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Ranked {
    #[cfg_attr(feature = "serde", serde(serialize_with = "pm_string"))]
    pub matrix: Protomatrix,
    pub threshold_db: f64,
    /// Evaluated at full resolution; otherwise only the prefilter score.
    pub full: bool,
}

#[cfg(feature = "serde")]
fn pm_string<S: serde::Serializer>(p: &Protomatrix, s: S) -> core::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_pm_string())
}

fn rank_cmp(a: (f64, &Protomatrix), b: (f64, &Protomatrix)) -> core::cmp::Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.edge_count().cmp(&b.1.edge_count()))
        .then_with(|| a.1.entries().cmp(b.1.entries()))
}

/// Evaluates `items` once per distinct key, in parallel, and returns the
/// value for every item.
fn eval_dedup<K: Ord + Clone + Send + Sync, R: Runner>(
    keys: &[K],
    runner: &R,
    eval: impl Fn(&K) -> f64 + Sync + Send,
) -> Vec<f64> {
    let mut uniq: BTreeMap<K, usize> = BTreeMap::new();
    for k in keys {
        let n = uniq.len();
        uniq.entry(k.clone()).or_insert(n);
    }
    let mut order: Vec<(&K, usize)> = uniq.iter().map(|(k, &i)| (k, i)).collect();
    order.sort_by_key(|&(_, i)| i);
    let list: Vec<&K> = order.into_iter().map(|(k, _)| k).collect();
    let vals = runner.map(list.len(), |i| eval(list[i]));
    keys.iter().map(|k| vals[uniq[k]]).collect()
}

/// Cheap first pass of the base search.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prefilter {
    /// Share of candidates, ranked by the cheap score, evaluated in full.
    pub keep_fraction: f64,
    pub resolution_db: f64,
    pub max_iter: usize,
}

impl Default for Prefilter {
    fn default() -> Self {
        Prefilter { keep_fraction: 0.05, resolution_db: 0.5, max_iter: 200 }
    }
}

/// The rate-1/2 template: a degree-1 column `(1,0,0)`, a degree-2 column
/// `(0,1,1)`, three columns `(x, x, x)` and one column `(y, y, y)`, with
/// every column's entries on rows 2 and 3 summing to at least 3.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaseSearchSpec {
    pub x_values: Vec<u32>,
    pub y_values: Vec<u32>,
    pub min_protected_sum: u32,
    pub prefilter: Prefilter,
    /// Share of discarded candidates re-evaluated in full by the audit.
    pub audit_fraction: f64,
    pub seed: u64,
}

impl Default for BaseSearchSpec {
    fn default() -> Self {
        BaseSearchSpec {
            x_values: alloc::vec![0, 1, 2],
            y_values: alloc::vec![1, 2, 3, 4],
            min_protected_sum: LINEAR_GROWTH_MIN_SUM,
            prefilter: Prefilter::default(),
            audit_fraction: 0.01,
            seed: 1,
        }
    }
}

fn column_options(values: &[u32], rows: usize, min_sum: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let total = values.len().pow(rows as u32);
    for mut code in 0..total {
        let mut col = alloc::vec![0; rows];
        for i in (0..rows).rev() {
            col[i] = values[code % values.len()];
            code /= values.len();
        }
        if rows < 2 || col[1..].iter().sum::<u32>() >= min_sum {
            out.push(col);
        }
    }
    out
}

impl BaseSearchSpec {
    fn check(&self) -> Result<()> {
        if self.x_values.is_empty() {
            return Err(Error::ValueSet("x"));
        }
        if self.y_values.is_empty() {
            return Err(Error::ValueSet("y"));
        }
        Ok(())
    }

    /// Every feasible template filling, in lexicographic order of
    /// `(x1..x9, y1..y3)`.
    pub fn candidates(&self) -> Result<Vec<Protomatrix>> {
        self.check()?;
        let xs = column_options(&self.x_values, 3, self.min_protected_sum);
        let ys = column_options(&self.y_values, 3, self.min_protected_sum);
        let mut out = Vec::with_capacity(xs.len().pow(3) * ys.len());
        for a in &xs {
            for b in &xs {
                for c in &xs {
                    for y in &ys {
                        let rows: Vec<Vec<u32>> = (0..3)
                            .map(|i| {
                                let fixed = [(i == 0) as u32, (i > 0) as u32];
                                alloc::vec![fixed[0], fixed[1], a[i], b[i], c[i], y[i]]
                            })
                            .collect();
                        if let Ok(p) = Protomatrix::from_rows(&rows) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Whether `p` is a point of the template space.
    pub fn contains(&self, p: &Protomatrix) -> bool {
        self.candidates().map(|c| c.contains(p)).unwrap_or(false)
    }
}

/// Key identifying template fillings related by permuting the three x
/// columns or swapping rows 2 and 3, which leave the threshold unchanged.
fn base_key(p: &Protomatrix) -> Vec<u32> {
    let variant = |swap: bool| {
        let col = |j: usize| -> [u32; 3] {
            let (r1, r2) = if swap { (2, 1) } else { (1, 2) };
            [p.get(0, j), p.get(r1, j), p.get(r2, j)]
        };
        let mut xs = [col(2), col(3), col(4)];
        xs.sort_unstable();
        let mut k: Vec<u32> = xs.iter().flatten().copied().collect();
        k.extend_from_slice(&col(5));
        k
    };
    core::cmp::min(variant(false), variant(true))
}

/// Audit of the prefilter: a random sample of discarded candidates is
/// evaluated in full.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PrefilterAudit {
    pub sampled: usize,
    /// Lowest full threshold in the sample.
    pub best_sampled_db: f64,
    /// Sampled candidates whose full threshold is below the best survivor's
    /// by more than 0.1 dB.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BaseSearchResult {
    /// Size of the feasible space.
    pub feasible: usize,
    /// Distinct candidates (up to template symmetry) scored by the prefilter.
    pub distinct: usize,
    pub fully_evaluated: usize,
    /// All feasible candidates: full evaluations first, ranked, then the
    /// rest ranked by prefilter score.
    pub ranked: Vec<Ranked>,
    pub audit: PrefilterAudit,
}

impl BaseSearchResult {
    pub fn best(&self) -> &Ranked {
        &self.ranked[0]
    }
}

/// Exhaustive search of the rate-1/2 template with a prefilter.
pub fn search_base_rate_half<R: Runner>(spec: &BaseSearchSpec, objective: &Objective<'_>, runner: &R) -> Result<BaseSearchResult> {
    let cands = spec.candidates()?;
    if cands.is_empty() {
        return Err(Error::Empty);
    }
    let keys: Vec<Vec<u32>> = cands.iter().map(base_key).collect();
    let by_key: BTreeMap<&Vec<u32>, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let distinct = by_key.len();

    let coarse = Objective {
        pexit: PexitConfig { max_iter: spec.prefilter.max_iter, ..objective.pexit },
        resolution_db: spec.prefilter.resolution_db,
        ..*objective
    };
    let score = eval_dedup(&keys, runner, |k| coarse.threshold(&cands[by_key[k]]));

    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| rank_cmp((score[a], &cands[a]), (score[b], &cands[b])));
    let keep = ((cands.len() as f64 * spec.prefilter.keep_fraction).ceil() as usize).clamp(1, cands.len());
    let (kept, dropped) = order.split_at(keep);

    let kept_keys: Vec<Vec<u32>> = kept.iter().map(|&i| keys[i].clone()).collect();
    let full = eval_dedup(&kept_keys, runner, |k| objective.threshold(&cands[by_key[k]]));
    let mut top: Vec<(usize, f64)> = kept.iter().copied().zip(full).collect();
    top.sort_by(|a, b| rank_cmp((a.1, &cands[a.0]), (b.1, &cands[b.0])));
    if !top[0].1.is_finite() {
        return Err(Error::Coverage { rate: 0.5 });
    }
    let best_full = top[0].1;

    // audit a seeded sample of the discarded candidates
    let mut rng = rng::stream(spec.seed, Purpose::Search, 0);
    let n_audit = ((dropped.len() as f64 * spec.audit_fraction).ceil() as usize).min(dropped.len());
    let mut pool: Vec<usize> = dropped.to_vec();
    for i in 0..n_audit {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let sample = &pool[..n_audit];
    let audit_vals = runner.map(sample.len(), |i| objective.threshold(&cands[sample[i]]));
    let audit = PrefilterAudit {
        sampled: n_audit,
        best_sampled_db: audit_vals.iter().copied().fold(f64::INFINITY, f64::min),
        violations: audit_vals.iter().filter(|&&t| t < best_full - 0.1).count(),
    };

    let mut ranked: Vec<Ranked> =
        top.iter().map(|&(i, t)| Ranked { matrix: cands[i].clone(), threshold_db: t, full: true }).collect();
    ranked.extend(dropped.iter().map(|&i| Ranked { matrix: cands[i].clone(), threshold_db: score[i], full: false }));
    Ok(BaseSearchResult { feasible: cands.len(), distinct, fully_evaluated: keep, ranked, audit })
}

/// Candidate columns for one nested step: entries in `values` and the
/// entries on rows `1..` summing to at least `min_protected_sum`.
pub fn nested_column_options(rows: usize, values: &[u32], min_protected_sum: u32) -> Vec<Vec<u32>> {
    column_options(values, rows, min_protected_sum)
}

/// Number of joint candidates for `n_new_cols` new columns over `rows` rows.
pub fn nested_candidate_count(rows: usize, n_new_cols: usize) -> usize {
    nested_column_options(rows, &[0, 1, 2], LINEAR_GROWTH_MIN_SUM).len().pow(n_new_cols as u32)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NestedStepResult {
    /// Joint candidates in the space.
    pub candidates: usize,
    /// Distinct up to the order of the new columns.
    pub distinct: usize,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub extension: ExtensionColumns,
    pub best: Ranked,
}

/// Best `n_new_cols` extension columns for `parent`, by exhaustive search.
pub fn search_nested_step<R: Runner>(
    parent: &Protomatrix,
    objective: &Objective<'_>,
    n_new_cols: usize,
    runner: &R,
) -> Result<NestedStepResult> {
    let opts = nested_column_options(parent.rows(), &[0, 1, 2], LINEAR_GROWTH_MIN_SUM);
    if opts.is_empty() || n_new_cols == 0 {
        return Err(Error::Empty);
    }
    let total = opts.len().pow(n_new_cols as u32);
    // joint candidate c picks option (c / |opts|^k) % |opts| for column k
    let pick = |c: usize| -> Vec<usize> {
        (0..n_new_cols).map(|k| (c / opts.len().pow((n_new_cols - 1 - k) as u32)) % opts.len()).collect()
    };
    let keys: Vec<Vec<usize>> = (0..total)
        .map(|c| {
            let mut k = pick(c);
            k.sort_unstable();
            k
        })
        .collect();
    let build = |k: &Vec<usize>| -> Protomatrix {
        let ext = ExtensionColumns::new(parent.rows(), k.iter().map(|&o| opts[o].clone()).collect()).expect("nonzero columns");
        parent.nest_extend(&ext).expect("row counts match")
    };
    let vals = eval_dedup(&keys, runner, |k| objective.threshold(&build(k)));
    let distinct = {
        let mut k = keys.clone();
        k.sort();
        k.dedup();
        k.len()
    };
    let mats: Vec<Protomatrix> = (0..total).map(|c| build(&pick(c))).collect();
    let best = (0..total).min_by(|&a, &b| rank_cmp((vals[a], &mats[a]), (vals[b], &mats[b]))).expect("nonempty");
    if !vals[best].is_finite() {
        return Err(Error::Coverage { rate: mats[best].rate_f64().unwrap_or(0.0) });
    }
    let extension = ExtensionColumns::from_trailing(&mats[best], parent.cols())?;
    Ok(NestedStepResult {
        candidates: total,
        distinct,
        extension,
        best: Ranked { matrix: mats[best].clone(), threshold_db: vals[best], full: true },
    })
}

/// Settings of the rate-compatible row search.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RcSearchSpec {
    pub max_entry: u32,
    pub min_weight: u32,
    pub max_weight: u32,
    /// Candidate rows evaluated.
    pub budget: usize,
    /// Proposals evaluated together per hill-climbing step.
    pub batch: usize,
    pub seed: u64,
}

impl Default for RcSearchSpec {
    fn default() -> Self {
        RcSearchSpec { max_entry: 2, min_weight: 5, max_weight: 12, budget: 200, batch: 8, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RcStepResult {
    pub row: Vec<u32>,
    pub evaluated: usize,
    pub best: Ranked,
}

/// One rate-compatible step: a new check row over `parent`'s columns plus
/// a new degree-1 variable, found by seeded hill climbing.
pub fn search_rc_step<R: Runner>(
    parent: &Protomatrix,
    objective: &Objective<'_>,
    spec: &RcSearchSpec,
    runner: &R,
) -> Result<RcStepResult> {
    if spec.budget < 10 {
        return Err(Error::Budget(spec.budget));
    }
    let cols = parent.cols();
    let cap = spec.max_entry * cols as u32;
    if spec.min_weight > spec.max_weight || spec.min_weight > cap || spec.max_entry == 0 {
        return Err(Error::Weight { lo: spec.min_weight, hi: spec.max_weight, cols });
    }
    let hi = spec.max_weight.min(cap);
    let mut rng = rng::stream(spec.seed, Purpose::Search, 1);
    let child = |row: &Vec<u32>| -> Protomatrix {
        parent.rc_extend(&RcExtension::new(alloc::vec![row.clone()]).expect("row is nonzero")).expect("row length matches")
    };
    let random_row = |rng: &mut crate::rng::StreamRng| -> Vec<u32> {
        let w = rng.random_range(spec.min_weight..=hi);
        let mut row = alloc::vec![0u32; cols];
        let mut placed = 0;
        while placed < w {
            let c = rng.random_range(0..cols);
            if row[c] < spec.max_entry {
                row[c] += 1;
                placed += 1;
            }
        }
        row
    };
    let neighbour = |row: &Vec<u32>, rng: &mut crate::rng::StreamRng| -> Vec<u32> {
        loop {
            let mut r = row.clone();
            let a = rng.random_range(0..cols);
            match rng.random_range(0..3) {
                0 if r[a] < spec.max_entry => r[a] += 1,
                1 if r[a] > 0 => r[a] -= 1,
                2 => {
                    let b = rng.random_range(0..cols);
                    if r[a] == 0 || r[b] == spec.max_entry || a == b {
                        continue;
                    }
                    r[a] -= 1;
                    r[b] += 1;
                }
                _ => continue,
            }
            let w: u32 = r.iter().sum();
            if (spec.min_weight..=hi).contains(&w) {
                return r;
            }
        }
    };

    let mut current = random_row(&mut rng);
    let mut current_t = objective.threshold(&child(&current));
    let mut best = (current.clone(), current_t);
    let mut evaluated = 1;
    let mut stale = 0;
    while evaluated < spec.budget {
        let n = spec.batch.max(1).min(spec.budget - evaluated);
        let restart = stale >= 5;
        let props: Vec<Vec<u32>> =
            (0..n).map(|_| if restart { random_row(&mut rng) } else { neighbour(&current, &mut rng) }).collect();
        let vals = runner.map(n, |i| objective.threshold(&child(&props[i])));
        evaluated += n;
        let mats: Vec<Protomatrix> = props.iter().map(&child).collect();
        let i = (0..n).min_by(|&a, &b| rank_cmp((vals[a], &mats[a]), (vals[b], &mats[b]))).expect("batch is nonempty");
        let cur_m = child(&current);
        if restart || rank_cmp((vals[i], &mats[i]), (current_t, &cur_m)).is_lt() {
            current = props[i].clone();
            current_t = vals[i];
            stale = 0;
        } else {
            stale += 1;
        }
        if rank_cmp((current_t, &child(&current)), (best.1, &child(&best.0))).is_lt() {
            best = (current.clone(), current_t);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Coverage { rate: child(&best.0).rate_f64().unwrap_or(0.0) });
    }
    let m = child(&best.0);
    Ok(RcStepResult { row: best.0, evaluated, best: Ranked { matrix: m, threshold_db: best.1, full: true } })
}
