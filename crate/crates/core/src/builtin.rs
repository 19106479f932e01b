//! The published protomatrices: the rate-1/2 base code, the rate-9/10 nested
//! family and the 14x41 rate-compatible family.
//!
//! Nested members are leading-column prefixes of the rate-9/10 matrix; each
//! rate-compatible member is the leading `(3 + m) x (30 + m)` block of the
//! 14x41 matrix.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::protograph::Protomatrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown builtin code `{0}`")]
pub struct UnknownCode(pub String);

/// Rate-1/2 ISI base protograph (3 checks, 6 variables).
pub const ISI_HALF: [[u32; 6]; 3] = [
    [1, 0, 0, 1, 0, 4],
    [0, 1, 2, 1, 2, 2],
    [0, 1, 1, 2, 1, 1],
];

/// Rate-9/10 nested protograph; each group of three columns after the first
/// six raises the rate from n/(n+1) to (n+1)/(n+2).
pub const NESTED_9_10: [[u32; 30]; 3] = [
    [1, 0, 0, 1, 0, 4, 2, 0, 0, 0, 0, 2, 2, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 1, 2, 1, 2, 2, 1, 2, 2, 2, 1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 2, 1, 2, 1, 1, 1, 1, 2, 2, 1],
    [0, 1, 1, 2, 1, 1, 2, 1, 1, 1, 2, 1, 1, 1, 1, 1, 1, 2, 2, 1, 1, 2, 1, 2, 2, 2, 2, 2, 1, 2],
];

/// Lowest-rate (27/41) member of the rate-compatible family.
pub const RC_27_41: [[u32; 41]; 14] = [
    [1, 0, 0, 1, 0, 4, 2, 0, 0, 0, 0, 2, 2, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 2, 1, 2, 2, 1, 2, 2, 2, 1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 2, 1, 2, 1, 1, 1, 1, 2, 2, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 1, 2, 1, 1, 2, 1, 1, 1, 2, 1, 1, 1, 1, 1, 1, 2, 2, 1, 1, 2, 1, 2, 2, 2, 2, 2, 1, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 1, 1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 1, 2, 0, 0, 1, 0, 1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 1, 1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 1, 1, 1, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 2, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 2, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
];

/// Rate-1/2 base protograph.
pub fn isi_half() -> Protomatrix {
    Protomatrix::from_rows(&ISI_HALF).expect("builtin matrix is valid")
}

/// Nested member of rate `n/(n+1)` for `n` in `1..=9`.
pub fn nested(n: usize) -> Option<Protomatrix> {
    if !(1..=9).contains(&n) {
        return None;
    }
    let full = Protomatrix::from_rows(&NESTED_9_10).expect("builtin matrix is valid");
    Some(full.leading_columns(3 * (n + 1)).expect("prefix in range"))
}

/// Rate-compatible member of rate `27/(30+m)` for `m` in `0..=11`.
pub fn rc(m: usize) -> Option<Protomatrix> {
    if m > 11 {
        return None;
    }
    let full = Protomatrix::from_rows(&RC_27_41).expect("builtin matrix is valid");
    Some(full.leading_block(3 + m, 30 + m).expect("prefix in range"))
}

/// Looks up a builtin by name: `isi-1/2`, `nested-2/3` … `nested-9/10`,
/// `rc-27/30` … `rc-27/41`.
pub fn by_name(name: &str) -> Result<Protomatrix, UnknownCode> {
    let unknown = || UnknownCode(name.to_string());
    if name == "isi-1/2" || name == "nested-1/2" {
        return Ok(isi_half());
    }
    if let Some(rate) = name.strip_prefix("nested-") {
        let (n, d) = split_rate(rate).ok_or_else(unknown)?;
        if d != n + 1 {
            return Err(unknown());
        }
        return nested(n).ok_or_else(unknown);
    }
    if let Some(rate) = name.strip_prefix("rc-") {
        let (n, d) = split_rate(rate).ok_or_else(unknown)?;
        if n != 27 || d < 30 {
            return Err(unknown());
        }
        return rc(d - 30).ok_or_else(unknown);
    }
    Err(unknown())
}

fn split_rate(s: &str) -> Option<(usize, usize)> {
    let (n, d) = s.split_once('/')?;
    Some((n.parse().ok()?, d.parse().ok()?))
}

/// Every builtin name, nested family first.
pub fn names() -> Vec<String> {
    let mut v = alloc::vec![String::from("isi-1/2")];
    v.extend((2..=9).map(|n| alloc::format!("nested-{}/{}", n, n + 1)));
    v.extend((1..=11).map(|m| alloc::format!("rc-27/{}", 30 + m)));
    v
}
