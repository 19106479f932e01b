//! Two-stage lifting of a protograph into a quasi-cyclic code.
//!
//! Stage 1 copies the protograph `n1` times and connects the copies with
//! progressive edge growth, turning every cell of multiplicity `b` into `b`
//! disjoint `n1 x n1` permutations so that no parallel edges remain. Stage 2
//! replaces every stage-1 edge with an `n2 x n2` circulant permutation whose
//! shift is again chosen greedily to keep cycles long.
//!
//! Indices: stage-1 check `i * n1 + a` is copy `a` of protograph row `i`,
//! stage-1 variable `j * n1 + t` is copy `t` of column `j`. In the expanded
//! matrix, edge `(c, v, s)` places ones at `(c * n2 + r, v * n2 + (r + s) mod n2)`.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;

use crate::protograph::Protomatrix;
use crate::rng::{self, Purpose, StreamRng};
use crate::sparse::SparseBinary;

/// Largest expanded edge count [`QcCode::to_parity_matrix`] will build.
pub const MAX_EXPANDED_EDGES: usize = 10_000_000;

/// Depth beyond which stage-2 treats a path as absent.
const SHIFT_SEARCH_DEPTH: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("lifting factor {n1} is below the largest multiplicity {max}; parallel edges are unavoidable")]
    Multiplicity { n1: usize, max: u32 },
    #[error("lifting factor must be at least 1")]
    ZeroFactor,
    #[error("expanded matrix would have {0} edges, above the limit")]
    Overflow(usize),
    #[error("edge ({check}, {var}) is out of range")]
    EdgeOutOfRange { check: usize, var: usize },
    #[error("edge ({check}, {var}) with shift {shift} is listed twice")]
    DuplicateEdge { check: usize, var: usize, shift: usize },
    #[error("shift {shift} is not below n2 = {n2}")]
    Shift { shift: usize, n2: usize },
    #[error("cannot restrict a {rows}x{cols} protograph lift to {want_rows}x{want_cols}")]
    Restrict { rows: usize, cols: usize, want_rows: usize, want_cols: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

/// Order in which PEG visits variable-node classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum LiftOrder {
    /// Decreasing protograph column degree, then column index.
    #[default]
    Degree,
    /// Column index order. A prefix of the columns is then lifted exactly as
    /// it would be on its own, which keeps nested families nested.
    Prefix,
}

fn class_order(p: &Protomatrix, order: LiftOrder) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..p.cols()).collect();
    if order == LiftOrder::Degree {
        let deg = p.col_sums();
        cols.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    }
    cols
}

/// The stage-1 lifted graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    proto_rows: usize,
    proto_cols: usize,
    n1: usize,
    /// `(check, var)` in placement order.
    edges: Vec<(usize, usize)>,
    /// Variable nodes in the order PEG visited them.
    var_order: Vec<usize>,
}

impl TannerGraph {
    pub fn checks(&self) -> usize {
        self.proto_rows * self.n1
    }

    pub fn vars(&self) -> usize {
        self.proto_cols * self.n1
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn proto_shape(&self) -> (usize, usize) {
        (self.proto_rows, self.proto_cols)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_parallel_edges(&self) -> bool {
        let mut e = self.edges.clone();
        e.sort_unstable();
        e.windows(2).any(|w| w[0] == w[1])
    }

    /// Edge counts between the copies of row `i` and column `j`.
    pub fn block(&self, i: usize, j: usize) -> Vec<Vec<u32>> {
        let mut b = alloc::vec![alloc::vec![0; self.n1]; self.n1];
        for &(c, v) in &self.edges {
            if c / self.n1 == i && v / self.n1 == j {
                b[c % self.n1][v % self.n1] += 1;
            }
        }
        b
    }

    pub fn var_degrees(&self) -> Vec<usize> {
        let mut d = alloc::vec![0; self.vars()];
        for &(_, v) in &self.edges {
            d[v] += 1;
        }
        d
    }

    pub fn check_degrees(&self) -> Vec<usize> {
        let mut d = alloc::vec![0; self.checks()];
        for &(c, _) in &self.edges {
            d[c] += 1;
        }
        d
    }

    pub fn to_matrix(&self) -> SparseBinary {
        SparseBinary::from_entries(self.checks(), self.vars(), self.edges.clone()).expect("stage-1 graph has no parallel edges")
    }
}

/// Stage-1 PEG lift with the default (degree) order.
pub fn peg_lift_stage1(p: &Protomatrix, n1: usize, seed: u64) -> Result<TannerGraph> {
    peg_lift_stage1_with(p, n1, seed, LiftOrder::Degree)
}

pub fn peg_lift_stage1_with(p: &Protomatrix, n1: usize, seed: u64, order: LiftOrder) -> Result<TannerGraph> {
    if n1 == 0 {
        return Err(Error::ZeroFactor);
    }
    let max = p.max_entry();
    if (max as usize) > n1 {
        return Err(Error::Multiplicity { n1, max });
    }
    let (rows, cols) = (p.rows(), p.cols());
    let n_chk = rows * n1;
    let n_var = cols * n1;
    let mut rng = rng::stream(seed, Purpose::Lifting, 1);
    // remaining capacity of check copy c towards class j
    let mut cap: Vec<u32> = (0..n_chk).flat_map(|c| (0..cols).map(move |j| p.get(c / n1, j))).collect();
    let mut var_adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_var];
    let mut chk_adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_chk];
    let mut edges = Vec::with_capacity(p.edge_count() as usize * n1);
    let mut var_order = Vec::with_capacity(n_var);
    let mut depth = alloc::vec![usize::MAX; n_chk];

    for j in class_order(p, order) {
        for t in 0..n1 {
            let v = j * n1 + t;
            var_order.push(v);
            let remaining = (n1 - t) as u32;
            for i in 0..rows {
                let b = p.get(i, j) as usize;
                let copies = i * n1..(i + 1) * n1;
                let forced: Vec<usize> = copies.clone().filter(|&c| cap[c * cols + j] == remaining).collect();
                for k in 0..b {
                    let pick = if k < forced.len() {
                        forced[k]
                    } else {
                        peg_depths(v, &var_adj, &chk_adj, &mut depth);
                        let cands: Vec<usize> =
                            copies.clone().filter(|&c| cap[c * cols + j] > 0 && !var_adj[v].contains(&c)).collect();
                        choose(&cands, |c| (depth[c], usize::MAX - chk_adj[c].len()), &mut rng)
                    };
                    cap[pick * cols + j] -= 1;
                    var_adj[v].push(pick);
                    chk_adj[pick].push(v);
                    edges.push((pick, v));
                }
            }
        }
    }
    Ok(TannerGraph { proto_rows: rows, proto_cols: cols, n1, edges, var_order })
}

/// Picks uniformly among the candidates with the largest key.
fn choose<K: Ord + Copy>(cands: &[usize], key: impl Fn(usize) -> K, rng: &mut StreamRng) -> usize {
    let best = cands.iter().map(|&c| key(c)).max().expect("PEG always has a candidate");
    let tied: Vec<usize> = cands.iter().copied().filter(|&c| key(c) == best).collect();
    tied[rng.random_range(0..tied.len())]
}

/// BFS from variable `v`: `depth[c]` is the distance to check `c`, or
/// `usize::MAX` when unreachable.
fn peg_depths(v: usize, var_adj: &[Vec<usize>], chk_adj: &[Vec<usize>], depth: &mut [usize]) {
    depth.fill(usize::MAX);
    let mut seen_var = alloc::vec![false; var_adj.len()];
    seen_var[v] = true;
    let mut queue = VecDeque::new();
    queue.push_back((v, 0usize));
    while let Some((u, d)) = queue.pop_front() {
        for &c in &var_adj[u] {
            if depth[c] == usize::MAX {
                depth[c] = d + 1;
                for &w in &chk_adj[c] {
                    if !seen_var[w] {
                        seen_var[w] = true;
                        queue.push_back((w, d + 2));
                    }
                }
            }
        }
    }
}

/// One stage-1 edge and its circulant shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QcEdge {
    pub check: usize,
    pub var: usize,
    pub shift: usize,
}

/// A two-stage lifted quasi-cyclic code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcCode {
    proto_rows: usize,
    proto_cols: usize,
    n1: usize,
    n2: usize,
    edges: Vec<QcEdge>,
}

impl QcCode {
    pub fn new(proto_rows: usize, proto_cols: usize, n1: usize, n2: usize, edges: Vec<QcEdge>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::ZeroFactor);
        }
        for e in &edges {
            if e.check >= proto_rows * n1 || e.var >= proto_cols * n1 {
                return Err(Error::EdgeOutOfRange { check: e.check, var: e.var });
            }
            if e.shift >= n2 {
                return Err(Error::Shift { shift: e.shift, n2 });
            }
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge { check: w[0].check, var: w[0].var, shift: w[0].shift });
        }
        Ok(QcCode { proto_rows, proto_cols, n1, n2, edges })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn proto_shape(&self) -> (usize, usize) {
        (self.proto_rows, self.proto_cols)
    }

    pub fn edges(&self) -> &[QcEdge] {
        &self.edges
    }

    pub fn base_checks(&self) -> usize {
        self.proto_rows * self.n1
    }

    pub fn base_vars(&self) -> usize {
        self.proto_cols * self.n1
    }

    /// Blocklength `V * n1 * n2`.
    pub fn n(&self) -> usize {
        self.base_vars() * self.n2
    }

    /// Design payload `(V - C) * n1 * n2`.
    pub fn k(&self) -> usize {
        (self.proto_cols - self.proto_rows) * self.n1 * self.n2
    }

    /// Number of parity checks, `C * n1 * n2`.
    pub fn m(&self) -> usize {
        self.base_checks() * self.n2
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn expanded_edges(&self) -> usize {
        self.edges.len() * self.n2
    }

    /// The code of the leading `rows x cols` protograph block: drops the
    /// check and variable classes outside it.
    pub fn restrict(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > self.proto_rows || cols > self.proto_cols {
            return Err(Error::Restrict { rows: self.proto_rows, cols: self.proto_cols, want_rows: rows, want_cols: cols });
        }
        let edges = self.edges.iter().copied().filter(|e| e.check < rows * self.n1 && e.var < cols * self.n1).collect();
        Ok(QcCode { proto_rows: rows, proto_cols: cols, n1: self.n1, n2: self.n2, edges })
    }

    /// Expanded parity-check matrix.
    pub fn to_parity_matrix(&self) -> Result<SparseBinary> {
        let total = self.expanded_edges();
        if total > MAX_EXPANDED_EDGES {
            return Err(Error::Overflow(total));
        }
        let n2 = self.n2;
        let mut entries = Vec::with_capacity(total);
        for e in &self.edges {
            for r in 0..n2 {
                entries.push((e.check * n2 + r, e.var * n2 + (r + e.shift) % n2));
            }
        }
        Ok(SparseBinary::from_entries(self.m(), self.n(), entries).expect("distinct edges expand to distinct entries"))
    }

    /// Text form: header `C V N1 N2`, then one `check var shift` line per
    /// stage-1 edge (0-based).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {}", self.proto_rows, self.proto_cols, self.n1, self.n2);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.check, e.var, e.shift);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, reason: "missing header".into() })?;
        let h = numbers(header, hl + 1, 4)?;
        let mut edges = Vec::new();
        for (i, l) in lines {
            let v = numbers(l, i + 1, 3)?;
            edges.push(QcEdge { check: v[0], var: v[1], shift: v[2] });
        }
        Self::new(h[0], h[1], h[2], h[3], edges)
    }

    fn lifted(&self) -> Lifted {
        let mut chk: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); self.base_checks()];
        let mut var: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); self.base_vars()];
        for e in &self.edges {
            chk[e.check].push((e.var, e.shift));
            var[e.var].push((e.check, e.shift));
        }
        Lifted { n2: self.n2, chk, var }
    }
}

fn numbers(line: &str, lineno: usize, want: usize) -> Result<Vec<usize>> {
    let v: core::result::Result<Vec<usize>, _> = line.split_whitespace().map(str::parse).collect();
    match v {
        Ok(v) if v.len() == want => Ok(v),
        Ok(v) => Err(Error::Parse { line: lineno, reason: alloc::format!("expected {want} integers, found {}", v.len()) }),
        Err(_) => Err(Error::Parse { line: lineno, reason: "not a non-negative integer".into() }),
    }
}

/// Adjacency of the expanded graph, described through stage-1 nodes.
/// Expanded node ids: checks `0..C1*n2`, then variables.
struct Lifted {
    n2: usize,
    chk: Vec<Vec<(usize, usize)>>,
    var: Vec<Vec<(usize, usize)>>,
}

impl Lifted {
    fn n_chk(&self) -> usize {
        self.chk.len() * self.n2
    }

    fn nodes(&self) -> usize {
        (self.chk.len() + self.var.len()) * self.n2
    }

    fn var_id(&self, v: usize, t: usize) -> usize {
        self.n_chk() + v * self.n2 + t
    }

    fn for_each_neighbor(&self, node: usize, mut f: impl FnMut(usize)) {
        let n2 = self.n2;
        let nc = self.n_chk();
        if node < nc {
            let (c, r) = (node / n2, node % n2);
            for &(v, s) in &self.chk[c] {
                f(nc + v * n2 + (r + s) % n2);
            }
        } else {
            let (v, t) = ((node - nc) / n2, (node - nc) % n2);
            for &(c, s) in &self.var[v] {
                f(c * n2 + (t + n2 - s) % n2);
            }
        }
    }
}

/// Stage-2 circulant lift: assigns each stage-1 edge a shift in `0..n2`.
pub fn circulant_lift_stage2(g: &TannerGraph, n2: usize, seed: u64) -> Result<QcCode> {
    if n2 == 0 {
        return Err(Error::ZeroFactor);
    }
    let mut rng = rng::stream(seed, Purpose::Lifting, 2);
    let mut var_edges: Vec<Vec<usize>> = alloc::vec![Vec::new(); g.vars()];
    for (e, &(_, v)) in g.edges.iter().enumerate() {
        var_edges[v].push(e);
    }
    let mut lifted = Lifted { n2, chk: alloc::vec![Vec::new(); g.checks()], var: alloc::vec![Vec::new(); g.vars()] };
    let mut shifts = alloc::vec![0usize; g.edges.len()];
    let mut dist = alloc::vec![usize::MAX; lifted.nodes()];
    let mut queue = VecDeque::new();
    let mut perm: Vec<usize> = (0..n2).collect();

    for &v in &g.var_order {
        for &e in &var_edges[v] {
            let c = g.edges[e].0;
            let shift = if n2 == 1 {
                0
            } else {
                // distances from expanded check (c, 0); the new edge joins it
                // to (v, s), closing a cycle of length dist(v, s) + 1
                dist.fill(usize::MAX);
                queue.clear();
                dist[c * n2] = 0;
                queue.push_back(c * n2);
                while let Some(u) = queue.pop_front() {
                    let d = dist[u];
                    if d >= SHIFT_SEARCH_DEPTH {
                        break;
                    }
                    lifted.for_each_neighbor(u, |w| {
                        if dist[w] == usize::MAX {
                            dist[w] = d + 1;
                            queue.push_back(w);
                        }
                    });
                }
                let base = lifted.var_id(v, 0);
                let best = (0..n2).map(|s| dist[base + s]).max().unwrap_or(usize::MAX);
                for i in (1..n2).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                *perm.iter().find(|&&s| dist[base + s] == best).expect("best shift exists")
            };
            shifts[e] = shift;
            lifted.chk[c].push((v, shift));
            lifted.var[v].push((c, shift));
        }
    }
    let edges = g.edges.iter().zip(&shifts).map(|(&(check, var), &shift)| QcEdge { check, var, shift }).collect();
    QcCode::new(g.proto_rows, g.proto_cols, g.n1, n2, edges)
}

/// Both lifting stages.
pub fn lift(p: &Protomatrix, n1: usize, n2: usize, seed: u64, order: LiftOrder) -> Result<QcCode> {
    let g = peg_lift_stage1_with(p, n1, seed, order)?;
    circulant_lift_stage2(&g, n2, seed)
}

/// Shortest cycle length and short-cycle counts of an expanded graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GirthReport {
    /// `None` when the graph has no cycle.
    pub girth: Option<usize>,
    pub cycles4: u64,
    pub cycles6: u64,
}

/// Girth and 4-/6-cycle counts of the expanded code.
///
/// By the circulant symmetry every expanded variable node is equivalent to
/// copy 0 of its stage-1 node, so only those are used as BFS roots and as
/// anchors for cycle counting.
pub fn girth_of(q: &QcCode) -> GirthReport {
    let g = q.lifted();
    let n2 = g.n2;
    let mut best = usize::MAX;
    let mut dist = alloc::vec![usize::MAX; g.nodes()];
    let mut parent = alloc::vec![usize::MAX; g.nodes()];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    for v in 0..g.var.len() {
        let root = g.var_id(v, 0);
        for &t in &touched {
            dist[t] = usize::MAX;
        }
        touched.clear();
        queue.clear();
        dist[root] = 0;
        parent[root] = usize::MAX;
        touched.push(root);
        queue.push_back(root);
        'bfs: while let Some(u) = queue.pop_front() {
            let d = dist[u];
            if 2 * d + 1 >= best {
                break;
            }
            let mut found = usize::MAX;
            g.for_each_neighbor(u, |w| {
                if w == parent[u] {
                    return;
                }
                if dist[w] == usize::MAX {
                    dist[w] = d + 1;
                    parent[w] = u;
                    touched.push(w);
                    queue.push_back(w);
                } else {
                    found = found.min(d + dist[w] + 1);
                }
            });
            if found < best {
                best = found;
                if best <= 4 {
                    break 'bfs;
                }
            }
        }
    }

    let mut w4: u64 = 0;
    let mut w6: u64 = 0;
    let mut by_v: Vec<(usize, usize)> = Vec::new();
    let mut ends: Vec<(usize, usize, usize)> = Vec::new();
    for v in 0..g.var.len() {
        let root = g.var_id(v, 0);
        // paths root - c - v1 (for 4-cycles) and root - c - v1 - c1 (for 6-cycles)
        by_v.clear();
        ends.clear();
        let mut checks = Vec::new();
        g.for_each_neighbor(root, |c| checks.push(c));
        for &c in &checks {
            let mut vs = Vec::new();
            g.for_each_neighbor(c, |w| {
                if w != root {
                    vs.push(w)
                }
            });
            for &v1 in &vs {
                by_v.push((v1, c));
                g.for_each_neighbor(v1, |c1| {
                    if c1 != c {
                        ends.push((c1, v1, c));
                    }
                });
            }
        }
        w4 += pairs_excluding(&mut by_v, |a| a.0, |a| a.1);
        w6 += closing_pairs(&mut ends);
    }
    let scale = n2 as u64;
    GirthReport {
        girth: (best != usize::MAX).then_some(best),
        cycles4: w4 * scale / 4,
        cycles6: w6 * scale / 6,
    }
}

/// Ordered pairs of distinct paths sharing the end `key` but differing in `sub`.
fn pairs_excluding<T: Copy + Ord>(items: &mut [T], key: impl Fn(&T) -> usize, sub: impl Fn(&T) -> usize) -> u64 {
    items.sort_unstable();
    let mut total = 0u64;
    let mut i = 0;
    while i < items.len() {
        let k = key(&items[i]);
        let mut j = i;
        let mut same_sub = 0u64;
        while j < items.len() && key(&items[j]) == k {
            let s = sub(&items[j]);
            let mut l = j;
            while l < items.len() && key(&items[l]) == k && sub(&items[l]) == s {
                l += 1;
            }
            let run = (l - j) as u64;
            same_sub += run * run;
            j = l;
        }
        let n = (j - i) as u64;
        total += n * n - same_sub;
        i = j;
    }
    total
}

/// Ordered pairs of length-3 paths `(c1, v1, c)` meeting at `c1` with
/// different middle variables and different first checks.
fn closing_pairs(ends: &mut [(usize, usize, usize)]) -> u64 {
    ends.sort_unstable();
    let mut total = 0u64;
    let mut i = 0;
    while i < ends.len() {
        let c1 = ends[i].0;
        let mut j = i;
        while j < ends.len() && ends[j].0 == c1 {
            j += 1;
        }
        let group = &mut ends[i..j];
        let n = group.len() as u64;
        // minus pairs with the same middle variable (the group is sorted by
        // it) or the same first check; pairs equal in both are the n
        // identical pairs, since (v1, c) fixes the path
        let same_v = runs_sq(group, |e| e.1);
        let mut by_c: Vec<usize> = group.iter().map(|e| e.2).collect();
        by_c.sort_unstable();
        let same_c = runs_sq(&by_c, |&c| c);
        total += n * n + n - same_v - same_c;
        i = j;
    }
    total
}

fn runs_sq<T>(items: &[T], key: impl Fn(&T) -> usize) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < items.len() {
        let k = key(&items[i]);
        let mut j = i;
        while j < items.len() && key(&items[j]) == k {
            j += 1;
        }
        total += ((j - i) as u64).pow(2);
        i = j;
    }
    total
}
