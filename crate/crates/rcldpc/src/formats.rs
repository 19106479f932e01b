//! On-disk formats: CSV tables, JSON sidecars, plans and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rcldpc_core::builtin;
use rcldpc_core::decoder::DecodeConfig;
use rcldpc_core::lifting::{LiftOrder, QcCode};
use rcldpc_core::sim::{PointResult, StopRule};
use rcldpc_core::{ExitSurface, Protomatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
    #[error("bad Eb/N0 list `{0}`: expected a:b:step or comma-separated values")]
    EbnoList(String),
    #[error("bad rate `{0}`")]
    Rate(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FormatError + '_ {
    move |source| FormatError::Csv { path: path.to_path_buf(), source }
}

fn invalid(path: &Path, msg: impl Into<String>) -> FormatError {
    FormatError::Invalid { path: path.to_path_buf(), msg: msg.into() }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| FormatError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err(path))
}

/// Parses `a:b:step` (inclusive) or `x,y,z`.
pub fn parse_ebno_list(s: &str) -> Result<Vec<f64>> {
    let bad = || FormatError::EbnoList(s.to_string());
    let num = |t: &str| t.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let parts: Vec<&str> = s.split(':').collect();
    let list = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a).ok_or_else(bad)?, num(b).ok_or_else(bad)?, num(step).ok_or_else(bad)?);
            if step <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // a + i*step rounded to 1e-9 so 0.1 steps print cleanly
            (0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect()
        }
        [one] => one.split(',').map(|t| num(t).ok_or_else(bad)).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    if list.is_empty() {
        return Err(bad());
    }
    Ok(list)
}

/// Parses `p/q` or a decimal rate in (0, 1).
pub fn parse_rate(s: &str) -> Result<f64> {
    let bad = || FormatError::Rate(s.to_string());
    let r = match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
            p / q
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(bad())
    }
}

/// A builtin name or a path to a `.pm` file.
pub fn load_protomatrix(code: &str) -> Result<Protomatrix> {
    if let Ok(p) = builtin::by_name(code) {
        return Ok(p);
    }
    let path = Path::new(code);
    if !path.exists() {
        return Err(invalid(path, "neither a builtin code nor an existing .pm file"));
    }
    Protomatrix::parse(&read_text(path)?).map_err(|e| invalid(path, e.to_string()))
}

pub fn read_qc(path: &Path) -> Result<QcCode> {
    QcCode::parse(&read_text(path)?).map_err(|e| invalid(path, e.to_string()))
}

// ---- EXIT surfaces ----

/// JSON sidecar of a surface CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceMeta {
    pub channel: String,
    pub reference_rate: f64,
    pub symbols: usize,
    pub block: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SurfaceRow {
    ebno_db: f64,
    i_a: f64,
    i_e: f64,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `path` and its sidecar.
pub fn write_surface(path: &Path, s: &ExitSurface, block: usize) -> Result<()> {
    let mut rows = Vec::with_capacity(s.values().len());
    for (e, &ebno_db) in s.ebno_grid().iter().enumerate() {
        for (a, &i_a) in s.ia_grid().iter().enumerate() {
            rows.push(SurfaceRow { ebno_db, i_a, i_e: s.value(e, a) });
        }
    }
    write_rows(path, &rows)?;
    let meta = SurfaceMeta {
        channel: s.channel.clone(),
        reference_rate: s.reference_rate,
        symbols: s.symbols,
        block,
        seed: s.seed,
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a surface CSV and its sidecar. Rows must form a full grid, listed
/// by `Eb/N0` and then `I_A`.
pub fn read_surface(path: &Path) -> Result<(ExitSurface, SurfaceMeta)> {
    let meta: SurfaceMeta = read_json(&sidecar_path(path))?;
    let rows: Vec<SurfaceRow> = read_rows(path)?;
    let mut ebno: Vec<f64> = Vec::new();
    let mut ia: Vec<f64> = Vec::new();
    for r in &rows {
        if ebno.last() != Some(&r.ebno_db) {
            ebno.push(r.ebno_db);
        }
        if ebno.len() == 1 {
            ia.push(r.i_a);
        }
    }
    if ia.is_empty() || rows.len() != ebno.len() * ia.len() {
        return Err(invalid(path, "rows do not form a full Eb/N0 x I_A grid"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.ebno_db != ebno[i / ia.len()] || r.i_a != ia[i % ia.len()] {
            return Err(invalid(path, format!("row {} is out of grid order", i + 2)));
        }
    }
    let values = rows.iter().map(|r| r.i_e).collect();
    let s = ExitSurface::new(meta.channel.clone(), meta.reference_rate, ebno, ia, values, meta.symbols, meta.seed)
        .map_err(|e| invalid(path, e.to_string()))?;
    Ok((s, meta))
}

// ---- small tables ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub code: String,
    pub channel: String,
    pub threshold_db: f64,
}

pub fn write_thresholds(path: &Path, rows: &[ThresholdRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_thresholds(path: &Path) -> Result<Vec<ThresholdRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirRow {
    pub ebno_db: f64,
    pub sir_bits: f64,
    pub stderr: f64,
}

pub fn write_sir(path: &Path, rows: &[SirRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_sir(path: &Path) -> Result<Vec<SirRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ebno_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub seconds: f64,
}

impl From<&PointResult> for ResultRow {
    fn from(p: &PointResult) -> Self {
        ResultRow {
            ebno_db: p.ebno_db,
            frames: p.frames,
            bit_errors: p.bit_errors,
            frame_errors: p.frame_errors,
            ber: p.ber,
            fer: p.fer,
            seconds: p.seconds,
        }
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(path)
}

// ---- simulation plans ----

/// Everything a simulation needs. Replaying a saved plan with the same
/// seed reproduces the results exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPlan {
    /// Builtin name, `.pm` path or `.qc` path.
    pub code: String,
    /// When set, this builtin or `.pm` is lifted and the code is taken as
    /// its leading block, as for rate-compatible families.
    pub parent: Option<String>,
    pub channel: String,
    pub ebno_db: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub lift_seed: u64,
    pub lift_order: LiftOrder,
    pub stop: StopRule,
    pub seed: u64,
    pub receiver: DecodeConfig,
    pub fer_floor: Option<f64>,
}

impl SimPlan {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.ebno_db.is_empty() {
            return Err("the Eb/N0 list is empty".into());
        }
        if self.ebno_db.iter().any(|e| !e.is_finite()) {
            return Err("Eb/N0 values must be finite".into());
        }
        if self.stop.min_frame_errors < 1 || self.stop.max_frames < 1 {
            return Err("stop rule needs min_frame_errors >= 1 and max_frames >= 1".into());
        }
        if self.n1 < 1 || self.n2 < 1 {
            return Err("lifting factors must be positive".into());
        }
        self.receiver.validate().map_err(|e| e.to_string())
    }
}

// ---- manifests ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub bytes: u64,
}

/// Written next to every output set: enough to replay the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    /// Every flag after defaults were applied.
    pub flags: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub workers: usize,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn input(path: &Path) -> InputRecord {
        let bytes = fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        InputRecord { path: path.display().to_string(), bytes }
    }
}

pub fn manifest_path(dir: &Path, subcommand: &str) -> PathBuf {
    dir.join(format!("{subcommand}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ebno_lists() {
        assert_eq!(parse_ebno_list("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_ebno_list("-1:8:0.25").unwrap().len(), 37);
        assert_eq!(parse_ebno_list("0:0.3:0.1").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_ebno_list("3, 1.5").unwrap(), vec![3.0, 1.5]);
        assert_eq!(parse_ebno_list("2.5").unwrap(), vec![2.5]);
        for bad in ["", "1:2", "2:1:0.5", "1:2:0", "x", "1,,2", "1:2:3:4", "nan"] {
            assert!(parse_ebno_list(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rates() {
        assert_eq!(parse_rate("9/10").unwrap(), 0.9);
        assert_eq!(parse_rate("0.5").unwrap(), 0.5);
        assert!(parse_rate("1").is_err());
        assert!(parse_rate("3/2").is_err());
        assert!(parse_rate("a/b").is_err());
    }

    #[test]
    fn plan_rejects_unknown_fields() {
        let text = r#"{"code":"isi-1/2","bogus":1}"#;
        assert!(serde_json::from_str::<SimPlan>(text).is_err());
    }
}
