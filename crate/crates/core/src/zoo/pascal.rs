use crate::error::{Result, ZooError};

/// Highest row index whose entries are kept exactly.
pub const PASCAL_MAX_ROW: usize = 60;

/// Row `k` of the Pascal triangle, `C(k, 0..=k)`.
pub fn pascal_row(k: usize) -> Result<Vec<u64>> {
    if k > PASCAL_MAX_ROW {
        return Err(ZooError::Overflow(format!(
            "row {k} exceeds exact range (max {PASCAL_MAX_ROW})"
        )));
    }
    let mut row = vec![1u64];
    for _ in 0..k {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(1);
        next.extend(row.windows(2).map(|w| w[0] + w[1]));
        next.push(1);
        row = next;
    }
    Ok(row)
}

/// Odd/even pattern of the first `rows` Pascal rows; `true` marks odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityMask {
    rows: Vec<Vec<bool>>,
}

impl ParityMask {
    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, n: usize, k: usize) -> bool {
        self.rows.get(n).and_then(|r| r.get(k)).copied().unwrap_or(false)
    }

    pub fn to_bits(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&b| b as u8).collect())
            .collect()
    }
}

/// Parity of `C(n, k)` for `n < rows`, built with the additive rule mod 2
/// so it works far past the exact-integer range.
pub fn sierpinski_mask(rows: usize) -> ParityMask {
    let mut out: Vec<Vec<bool>> = Vec::with_capacity(rows);
    for n in 0..rows {
        let row = match out.last() {
            None => vec![true],
            Some(prev) => {
                let mut r = Vec::with_capacity(n + 1);
                r.push(true);
                r.extend(prev.windows(2).map(|w| w[0] ^ w[1]));
                r.push(true);
                r
            }
        };
        out.push(row);
    }
    ParityMask { rows: out }
}
