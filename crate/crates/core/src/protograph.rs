//! Protomatrices, their design rate, the linear-minimum-distance constraint and
//! the two ways of growing a protograph: lengthening with new variable nodes
//! (nested family) and extension with new (check, variable) pairs
//! (rate-compatible family).

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use num_rational::Ratio;

/// Exact design rate of a protograph.
pub type Rate = Ratio<u64>;

/// Default bound on a single edge multiplicity accepted by the parser.
pub const DEFAULT_MAX_MULTIPLICITY: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}, column {col}: `{token}` is not a non-negative integer")]
    Entry { line: usize, col: usize, token: String },
    #[error("line {line}: expected {expected} entries, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("expected {expected} matrix rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("punctured column {0} is out of range")]
    PuncturedOutOfRange(usize),
    #[error("punctured column {0} listed twice")]
    PuncturedDuplicate(usize),
    #[error("row {0} has no edges")]
    EmptyRow(usize),
    #[error("column {0} has no edges")]
    EmptyColumn(usize),
    #[error("entry ({row}, {col}) = {value} exceeds the multiplicity bound {max}")]
    Multiplicity { row: usize, col: usize, value: u32, max: u32 },
    #[error("protomatrix must have at least one row and one column")]
    Empty,
    #[error("design rate {0} is not positive")]
    NonPositiveRate(String),
    #[error("row count mismatch: parent has {parent} rows, extension has {ext}")]
    RowMismatch { parent: usize, ext: usize },
    #[error("extension row {row} has length {found}, parent has {expected} columns")]
    ColumnMismatch { row: usize, expected: usize, found: usize },
    #[error("extension {0} is all zeros")]
    ZeroExtension(usize),
    #[error("extension has no columns")]
    NoExtension,
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("index {0} is out of range")]
    IndexOutOfRange(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

/// A protograph's base matrix: `entries[i][j]` edges between check node `i`
/// and variable node `j`, plus the set of punctured (untransmitted) columns.
///
/// Indices are 0-based in the API; the text format and error messages use
/// 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Protomatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
    punctured: BTreeSet<usize>,
}

impl Protomatrix {
    /// Builds a protomatrix from row-major entries, checking connectivity and
    /// the default multiplicity bound.
    pub fn new(rows: usize, cols: usize, entries: Vec<u32>, punctured: BTreeSet<usize>) -> Result<Self> {
        Self::with_bound(rows, cols, entries, punctured, DEFAULT_MAX_MULTIPLICITY)
    }

    pub fn with_bound(
        rows: usize,
        cols: usize,
        entries: Vec<u32>,
        punctured: BTreeSet<usize>,
        max_multiplicity: u32,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows * cols");
        let p = Protomatrix { rows, cols, entries, punctured };
        p.check(max_multiplicity)?;
        Ok(p)
    }

    /// Convenience constructor for literal matrices without punctured columns.
    pub fn from_rows<R: AsRef<[u32]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::ColumnMismatch { row: i + 1, expected: n_cols, found: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, entries, BTreeSet::new())
    }

    fn check(&self, max_multiplicity: u32) -> Result<()> {
        for &j in &self.punctured {
            if j >= self.cols {
                return Err(Error::PuncturedOutOfRange(j + 1));
            }
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if v > max_multiplicity {
                    return Err(Error::Multiplicity { row: i + 1, col: j + 1, value: v, max: max_multiplicity });
                }
            }
        }
        if let Some(i) = (0..self.rows).find(|&i| self.row(i).iter().all(|&v| v == 0)) {
            return Err(Error::EmptyRow(i + 1));
        }
        if let Some(j) = (0..self.cols).find(|&j| (0..self.rows).all(|i| self.get(i, j) == 0)) {
            return Err(Error::EmptyColumn(j + 1));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn punctured(&self) -> &BTreeSet<usize> {
        &self.punctured
    }

    pub fn is_punctured(&self, col: usize) -> bool {
        self.punctured.contains(&col)
    }

    /// Number of transmitted variable nodes.
    pub fn transmitted(&self) -> usize {
        self.cols - self.punctured.len()
    }

    /// Check-node degrees.
    pub fn row_sums(&self) -> Vec<u32> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Variable-node degrees.
    pub fn col_sums(&self) -> Vec<u32> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    /// Total number of protograph edges.
    pub fn edge_count(&self) -> u32 {
        self.entries.iter().sum()
    }

    pub fn max_entry(&self) -> u32 {
        self.entries.iter().copied().max().unwrap_or(0)
    }

    /// Design rate `(V - C - |P|) / (V - |P|)`.
    pub fn rate(&self) -> Result<Rate> {
        let tx = self.transmitted() as i64;
        let info = tx - self.rows as i64;
        if info <= 0 || tx <= 0 {
            return Err(Error::NonPositiveRate(alloc::format!("{}/{}", info, tx)));
        }
        Ok(Ratio::new(info as u64, tx as u64))
    }

    /// Design rate as a float, for Eb/N0 bookkeeping.
    pub fn rate_f64(&self) -> Result<f64> {
        let r = self.rate()?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    }

    /// Leading `cols` columns, keeping punctured marks that fall inside.
    pub fn leading_columns(&self, cols: usize) -> Result<Self> {
        self.leading_block(self.rows, cols)
    }

    /// Top-left `rows` x `cols` block.
    pub fn leading_block(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > self.rows || cols > self.cols {
            return Err(Error::IndexOutOfRange(rows.max(cols)));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            entries.extend_from_slice(&self.row(i)[..cols]);
        }
        let punctured = self.punctured.iter().copied().filter(|&j| j < cols).collect();
        Self::with_bound(rows, cols, entries, punctured, u32::MAX)
    }

    /// Reorders rows and columns: result row `i` is source row `row_perm[i]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        assert_eq!(row_perm.len(), self.rows);
        assert_eq!(col_perm.len(), self.cols);
        let mut entries = Vec::with_capacity(self.entries.len());
        for &i in row_perm {
            for &j in col_perm {
                entries.push(self.get(i, j));
            }
        }
        let punctured = col_perm
            .iter()
            .enumerate()
            .filter(|(_, &src)| self.punctured.contains(&src))
            .map(|(dst, _)| dst)
            .collect();
        Protomatrix { rows: self.rows, cols: self.cols, entries, punctured }
    }

    /// Checks the linear-minimum-distance condition: every candidate column
    /// must carry at least 3 edges into the protected rows.
    pub fn validate_linear_growth(
        &self,
        protected_rows: &[usize],
        candidate_cols: &[usize],
    ) -> Result<GrowthReport> {
        if protected_rows.is_empty() || candidate_cols.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        if let Some(&i) = protected_rows.iter().find(|&&i| i >= self.rows) {
            return Err(Error::IndexOutOfRange(i + 1));
        }
        if let Some(&j) = candidate_cols.iter().find(|&&j| j >= self.cols) {
            return Err(Error::IndexOutOfRange(j + 1));
        }
        let violations = candidate_cols
            .iter()
            .map(|&j| (j, protected_rows.iter().map(|&i| self.get(i, j)).sum::<u32>()))
            .filter(|&(_, s)| s < LINEAR_GROWTH_MIN_SUM)
            .collect();
        Ok(GrowthReport { violations })
    }

    /// Appends new variable-node columns: `[self | ext]`.
    pub fn nest_extend(&self, ext: &ExtensionColumns) -> Result<Self> {
        if ext.parent_rows() != self.rows {
            return Err(Error::RowMismatch { parent: self.rows, ext: ext.parent_rows() });
        }
        let cols = self.cols + ext.len();
        let mut entries = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            entries.extend_from_slice(self.row(i));
            entries.extend(ext.columns().iter().map(|c| c[i]));
        }
        Self::with_bound(self.rows, cols, entries, self.punctured.clone(), u32::MAX)
    }

    /// Adds `m` new check rows `A` over the existing columns together with
    /// `m` new degree-1 variable nodes: `[[self, 0], [A, I_m]]`.
    pub fn rc_extend(&self, ext: &RcExtension) -> Result<Self> {
        let m = ext.len();
        for (r, a) in ext.rows().iter().enumerate() {
            if a.len() != self.cols {
                return Err(Error::ColumnMismatch { row: r + 1, expected: self.cols, found: a.len() });
            }
        }
        let rows = self.rows + m;
        let cols = self.cols + m;
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..self.rows {
            entries.extend_from_slice(self.row(i));
            entries.extend(core::iter::repeat_n(0, m));
        }
        for (r, a) in ext.rows().iter().enumerate() {
            entries.extend_from_slice(a);
            entries.extend((0..m).map(|k| u32::from(k == r)));
        }
        Self::with_bound(rows, cols, entries, self.punctured.clone(), u32::MAX)
    }

    /// Parses the `.pm` text format with the default multiplicity bound.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_bound(text, DEFAULT_MAX_MULTIPLICITY)
    }

    pub fn parse_with_bound(text: &str, max_multiplicity: u32) -> Result<Self> {
        let mut lines = text
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .enumerate()
            .map(|(n, l)| (n + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());

        let (hl, header) = lines.next().ok_or(Error::Header { line: 1, reason: "missing `C V` line".into() })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Header { line: hl, reason: "expected `C V`".into() });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Header { line: hl, reason: alloc::format!("bad dimension `{s}`") })
        };
        let rows = parse_dim(dims[0])?;
        let cols = parse_dim(dims[1])?;
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }

        let (pl, punct_line) = lines
            .next()
            .ok_or(Error::Header { line: hl + 1, reason: "missing punctured-column line".into() })?;
        let mut tokens = punct_line.split_whitespace();
        let count: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Header { line: pl, reason: "expected punctured count".into() })?;
        let mut punctured = BTreeSet::new();
        let mut seen = 0;
        for t in tokens {
            let idx: usize = t
                .parse()
                .map_err(|_| Error::Entry { line: pl, col: seen + 2, token: t.into() })?;
            if idx == 0 || idx > cols {
                return Err(Error::PuncturedOutOfRange(idx));
            }
            if !punctured.insert(idx - 1) {
                return Err(Error::PuncturedDuplicate(idx));
            }
            seen += 1;
        }
        if seen != count {
            return Err(Error::Header {
                line: pl,
                reason: alloc::format!("punctured count {count} but {seen} indices listed"),
            });
        }

        let mut entries = Vec::with_capacity(rows * cols);
        let mut found_rows = 0;
        for (ln, line) in lines {
            if found_rows == rows {
                return Err(Error::RowCount { expected: rows, found: found_rows + 1 });
            }
            let before = entries.len();
            for (c, t) in line.split_whitespace().enumerate() {
                let v: u32 = t.parse().map_err(|_| Error::Entry { line: ln, col: c + 1, token: t.into() })?;
                entries.push(v);
            }
            let found = entries.len() - before;
            if found != cols {
                return Err(Error::RowLength { line: ln, expected: cols, found });
            }
            found_rows += 1;
        }
        if found_rows != rows {
            return Err(Error::RowCount { expected: rows, found: found_rows });
        }
        Self::with_bound(rows, cols, entries, punctured, max_multiplicity)
    }

    /// Serializes to the `.pm` text format.
    pub fn to_pm_string(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{self}");
        s
    }
}

impl fmt::Display for Protomatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        write!(f, "{}", self.punctured.len())?;
        for j in &self.punctured {
            write!(f, " {}", j + 1)?;
        }
        writeln!(f)?;
        for i in 0..self.rows {
            let mut first = true;
            for v in self.row(i) {
                if !first {
                    f.write_char(' ')?;
                }
                write!(f, "{v}")?;
                first = false;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl core::str::FromStr for Protomatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Minimum number of protected-row edges per candidate column.
pub const LINEAR_GROWTH_MIN_SUM: u32 = 3;

/// Outcome of [`Protomatrix::validate_linear_growth`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthReport {
    /// `(column, protected-row sum)` for every failing column, 0-based.
    pub violations: Vec<(usize, u32)>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// New variable-node columns for a nested (lengthening) step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtensionColumns {
    parent_rows: usize,
    cols: Vec<Vec<u32>>,
}

impl ExtensionColumns {
    pub fn new(parent_rows: usize, cols: Vec<Vec<u32>>) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::NoExtension);
        }
        for (k, c) in cols.iter().enumerate() {
            if c.len() != parent_rows {
                return Err(Error::RowMismatch { parent: parent_rows, ext: c.len() });
            }
            if c.iter().all(|&v| v == 0) {
                return Err(Error::ZeroExtension(k + 1));
            }
        }
        Ok(ExtensionColumns { parent_rows, cols })
    }

    /// Extracts columns `start..` of `p` as an extension over `p`'s rows.
    pub fn from_trailing(p: &Protomatrix, start: usize) -> Result<Self> {
        let cols = (start..p.cols()).map(|j| (0..p.rows()).map(|i| p.get(i, j)).collect()).collect();
        Self::new(p.rows(), cols)
    }

    pub fn parent_rows(&self) -> usize {
        self.parent_rows
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.cols
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }
}

/// New check rows `A` for a rate-compatible extension step; the block
/// connecting new checks to new variable nodes is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RcExtension {
    a_rows: Vec<Vec<u32>>,
}

impl RcExtension {
    pub fn new(a_rows: Vec<Vec<u32>>) -> Result<Self> {
        if a_rows.is_empty() {
            return Err(Error::NoExtension);
        }
        if let Some(k) = a_rows.iter().position(|r| r.iter().all(|&v| v == 0)) {
            return Err(Error::ZeroExtension(k + 1));
        }
        Ok(RcExtension { a_rows })
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.a_rows
    }

    /// Number of added (check, variable) pairs.
    pub fn len(&self) -> usize {
        self.a_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use alloc::vec;

    #[test]
    fn parse_eq2_row_sums() {
        let p = Protomatrix::parse("3 6\n0\n1 0 0 1 0 4\n0 1 2 1 2 2\n0 1 1 2 1 1\n").unwrap();
        assert_eq!(p.row_sums(), vec![6, 8, 6]);
        assert_eq!(p.rate().unwrap(), Rate::new(1, 2));
    }

    #[test]
    fn degenerate_one_by_one() {
        let p = Protomatrix::parse("1 1\n0\n1\n").unwrap();
        assert_eq!((p.rows(), p.cols()), (1, 1));
        assert!(matches!(p.rate(), Err(Error::NonPositiveRate(_))));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Protomatrix::parse("3\n0\n"), Err(Error::Header { .. })));
        assert!(matches!(Protomatrix::parse("1 2\n0\n1 x\n"), Err(Error::Entry { line: 3, col: 2, .. })));
        assert!(matches!(Protomatrix::parse("1 2\n1 3\n1 1\n"), Err(Error::PuncturedOutOfRange(3))));
        assert!(matches!(Protomatrix::parse("2 2\n0\n1 1\n0 0\n"), Err(Error::EmptyRow(2))));
        assert!(matches!(Protomatrix::parse("2 2\n0\n1 0\n1 0\n"), Err(Error::EmptyColumn(2))));
        assert!(matches!(Protomatrix::parse("1 2\n0\n1 9\n"), Err(Error::Multiplicity { value: 9, .. })));
        assert!(matches!(Protomatrix::parse("2 2\n0\n1 1\n"), Err(Error::RowCount { expected: 2, found: 1 })));
        assert!(matches!(Protomatrix::parse("1 2\n0\n1 1 1\n"), Err(Error::RowLength { found: 3, .. })));
        assert!(Protomatrix::parse_with_bound("1 2\n0\n1 9\n", 9).is_ok());
    }

    #[test]
    fn punctured_roundtrip_and_rate() {
        let text = "2 5\n1 5\n1 1 1 0 2\n0 1 1 1 1\n";
        let p = Protomatrix::parse(text).unwrap();
        assert!(p.is_punctured(4));
        assert_eq!(p.to_pm_string(), text);
        assert_eq!(p.rate().unwrap(), Rate::new(2, 4));
    }

    #[test]
    fn linear_growth_eq2() {
        let p = builtin::isi_half();
        let r = p.validate_linear_growth(&[1, 2], &[2, 3, 4, 5]).unwrap();
        assert!(r.passed());
        let bad = Protomatrix::from_rows(&[[1, 1], [1, 1], [1, 1]]).unwrap();
        let r = bad.validate_linear_growth(&[1, 2], &[0, 1]).unwrap();
        assert_eq!(r.violations, vec![(0, 2), (1, 2)]);
        assert_eq!(p.validate_linear_growth(&[], &[1]), Err(Error::EmptyIndexSet));
    }

    #[test]
    fn nest_extend_rates() {
        let p = builtin::isi_half();
        let ext = ExtensionColumns::new(3, vec![vec![2, 1, 2], vec![0, 2, 1], vec![0, 2, 1]]).unwrap();
        let q = p.nest_extend(&ext).unwrap();
        assert_eq!((q.rows(), q.cols()), (3, 9));
        assert_eq!(q.rate().unwrap(), Rate::new(2, 3));
        assert_eq!(q.leading_columns(6).unwrap(), p);

        let one = ExtensionColumns::new(3, vec![vec![0, 0, 1]]).unwrap();
        assert_eq!(p.nest_extend(&one).unwrap().rate().unwrap(), Rate::new(4, 7));

        let wrong = ExtensionColumns::new(2, vec![vec![1, 1]]).unwrap();
        assert_eq!(p.nest_extend(&wrong), Err(Error::RowMismatch { parent: 3, ext: 2 }));
    }

    #[test]
    fn rc_extend_layout() {
        let p = builtin::nested(9).unwrap();
        let a: Vec<Vec<u32>> = (0..4).map(|k| (0..30).map(|j| u32::from(j % 5 == k)).collect()).collect();
        let q = p.rc_extend(&RcExtension::new(a.clone()).unwrap()).unwrap();
        assert_eq!((q.rows(), q.cols()), (7, 34));
        assert_eq!(q.rate().unwrap(), Rate::new(27, 34));
        assert_eq!(q.leading_block(3, 30).unwrap(), p);
        for r in 0..4 {
            assert_eq!(&q.row(3 + r)[..30], &a[r][..]);
            for k in 0..4 {
                assert_eq!(q.get(3 + r, 30 + k), u32::from(r == k));
            }
        }
        for i in 0..3 {
            assert!(q.row(i)[30..].iter().all(|&v| v == 0));
        }
        assert_eq!(RcExtension::new(vec![vec![0; 30]]), Err(Error::ZeroExtension(1)));
        let short = RcExtension::new(vec![vec![1; 29]]).unwrap();
        assert!(matches!(p.rc_extend(&short), Err(Error::ColumnMismatch { expected: 30, found: 29, .. })));
    }

    #[test]
    fn permutation_moves_punctured_marks() {
        let p = Protomatrix::parse("2 3\n1 1\n1 1 0\n0 1 1\n").unwrap();
        let q = p.permuted(&[1, 0], &[2, 0, 1]);
        assert_eq!(q.punctured().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(q.row(0), &[1, 0, 1]);
    }
}
