//! Invertible Bloom lookup table over 8-byte ids.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::sketches::hash::{mix64, reduce};

pub const CELL_BYTES: usize = 16;
/// Serialized header: cell count (u32), k (u8), salt (u64).
pub const IBLT_HEADER_BYTES: usize = 4 + 1 + 8;
pub const DEFAULT_HASHES: u32 = 3;
pub const DEFAULT_OVERHEAD: f64 = 1.5;

const CHECK_KEY: u64 = 0x3c6e_f372_fe94_f82b;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cell {
    pub count: i32,
    pub id_sum: u64,
    pub check_sum: u32,
}

impl Cell {
    fn is_zero(&self) -> bool {
        self.count == 0 && self.id_sum == 0 && self.check_sum == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iblt {
    cells: Vec<Cell>,
    k: u32,
    salt: u64,
}

/// Ids present only in the minuend (`left`) or only in the subtrahend (`right`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Difference {
    pub left: Vec<u64>,
    pub right: Vec<u64>,
}

/// Peeling stalled before the table emptied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeFailure {
    /// Ids recovered before the stall.
    pub partial: Difference,
}

impl std::fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "IBLT peeling stalled after {} item(s)",
            self.partial.left.len() + self.partial.right.len()
        )
    }
}

impl std::error::Error for DecodeFailure {}

/// Rounds up to a multiple of `k`, never below `k`.
pub fn round_to_k(cells: u64, k: u32) -> u64 {
    cells.max(1).div_ceil(k as u64) * k as u64
}

/// `ceil(overhead * d)` rounded up to a multiple of `k`.
pub fn cells_with_overhead(d: u64, overhead: f64, k: u32) -> u64 {
    round_to_k((overhead * d as f64).ceil() as u64, k)
}

/// Target for the chance that two of the `d` items land in the same cell of
/// every subtable, the dominant way a sparse k = 3 table fails to peel.
const PAIR_COLLISION_TARGET: f64 = 1.0 / 600.0;

/// Cells needed for a k = 3 table to decode a difference of up to `d` items
/// with at least 239/240 probability.
///
/// A plain `1.5 d` table is far short of that for small and mid-sized `d`:
/// with `p` cells per subtable, some pair collides everywhere with probability
/// about `C(d, 2) / p^3`, so `p` grows like `d^(2/3)` until the linear rule
/// takes over near `d = 2000`.
pub fn assured_cells(d: u64) -> u64 {
    let k = DEFAULT_HASHES as u64;
    if d <= 1 {
        return k;
    }
    let pairs = d as f64 * (d as f64 - 1.0) / 2.0;
    let mut p = (pairs / PAIR_COLLISION_TARGET).cbrt().ceil() as u64;
    while (p as f64).powi(3) * PAIR_COLLISION_TARGET < pairs {
        p += 1;
    }
    (p * k).max(cells_with_overhead(d, DEFAULT_OVERHEAD, DEFAULT_HASHES))
}

impl Iblt {
    pub fn new(cell_count: u64, k: u32, salt: u64) -> Result<Self> {
        if k == 0 || k > u8::MAX as u32 {
            return Err(Error::Parameter(format!("IBLT hash count {k} unsupported")));
        }
        if cell_count == 0 || !cell_count.is_multiple_of(k as u64) || cell_count > u32::MAX as u64 {
            return Err(Error::Parameter(format!(
                "IBLT cell count {cell_count} must be a positive multiple of {k}"
            )));
        }
        Ok(Iblt {
            cells: vec![Cell::default(); cell_count as usize],
            k,
            salt,
        })
    }

    /// Table sized by the fixed overhead rule for `expected_diff` items.
    pub fn with_overhead(expected_diff: u64, salt: u64) -> Self {
        let n = cells_with_overhead(expected_diff, DEFAULT_OVERHEAD, DEFAULT_HASHES);
        Self::new(n, DEFAULT_HASHES, salt).unwrap()
    }

    /// Table sized for 239/240 decode assurance at `expected_diff` items.
    pub fn with_assurance(expected_diff: u64, salt: u64) -> Self {
        Self::new(assured_cells(expected_diff), DEFAULT_HASHES, salt).unwrap()
    }

    pub fn cell_count(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn salt(&self) -> u64 {
        self.salt
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Cell::is_zero)
    }

    #[inline]
    fn check(&self, id: u64) -> u32 {
        (mix64(id ^ self.salt.rotate_left(17) ^ CHECK_KEY) >> 32) as u32
    }

    #[inline]
    fn position(&self, id: u64, i: u32) -> usize {
        let part = self.cells.len() as u64 / self.k as u64;
        let h = mix64(id ^ self.salt ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        (i as u64 * part + reduce(h, part)) as usize
    }

    fn apply(&mut self, id: u64, delta: i32) {
        let chk = self.check(id);
        for i in 0..self.k {
            let p = self.position(id, i);
            let c = &mut self.cells[p];
            c.count = c.count.wrapping_add(delta);
            c.id_sum ^= id;
            c.check_sum ^= chk;
        }
    }

    pub fn insert(&mut self, id: u64) {
        self.apply(id, 1);
    }

    pub fn delete(&mut self, id: u64) {
        self.apply(id, -1);
    }

    /// Cellwise `self - other`.
    pub fn subtract(&self, other: &Iblt) -> Result<Iblt> {
        if self.cells.len() != other.cells.len() || self.k != other.k || self.salt != other.salt {
            return Err(Error::Parameter(
                "IBLT subtraction needs identical shape and salt".into(),
            ));
        }
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| Cell {
                count: a.count.wrapping_sub(b.count),
                id_sum: a.id_sum ^ b.id_sum,
                check_sum: a.check_sum ^ b.check_sum,
            })
            .collect();
        Ok(Iblt {
            cells,
            k: self.k,
            salt: self.salt,
        })
    }

    fn is_pure(&self, idx: usize) -> bool {
        let c = &self.cells[idx];
        (c.count == 1 || c.count == -1)
            && c.check_sum == self.check(c.id_sum)
            && (0..self.k).any(|i| self.position(c.id_sum, i) == idx)
    }

    /// Peels pure cells until the table is empty or no pure cell remains.
    pub fn decode(&self) -> std::result::Result<Difference, DecodeFailure> {
        let mut work = self.clone();
        let mut out = Difference::default();
        let mut seen = HashSet::new();
        let mut stack: Vec<usize> = (0..work.cells.len()).filter(|&i| work.is_pure(i)).collect();
        let budget = 2 * work.cells.len() + 16;
        while let Some(idx) = stack.pop() {
            if !work.is_pure(idx) {
                continue;
            }
            let Cell { count, id_sum, .. } = work.cells[idx];
            if !seen.insert(id_sum) || seen.len() > budget {
                return Err(DecodeFailure { partial: out });
            }
            if count == 1 {
                out.left.push(id_sum);
            } else {
                out.right.push(id_sum);
            }
            work.apply(id_sum, -count);
            for i in 0..work.k {
                let p = work.position(id_sum, i);
                if work.is_pure(p) {
                    stack.push(p);
                }
            }
        }
        out.left.sort_unstable();
        out.right.sort_unstable();
        if work.is_empty() {
            Ok(out)
        } else {
            Err(DecodeFailure { partial: out })
        }
    }

    pub fn serialized_len(&self) -> usize {
        Self::serialized_len_for(self.cell_count())
    }

    pub fn serialized_len_for(cell_count: u64) -> usize {
        IBLT_HEADER_BYTES + CELL_BYTES * cell_count as usize
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.reserve(self.serialized_len());
        out.extend_from_slice(&(self.cells.len() as u32).to_le_bytes());
        out.push(self.k as u8);
        out.extend_from_slice(&self.salt.to_le_bytes());
        for c in &self.cells {
            out.extend_from_slice(&c.count.to_le_bytes());
            out.extend_from_slice(&c.id_sum.to_le_bytes());
            out.extend_from_slice(&c.check_sum.to_le_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v);
        v
    }

    pub fn read_from(buf: &[u8]) -> Result<(Self, usize)> {
        if buf.len() < IBLT_HEADER_BYTES {
            return Err(Error::Decode("truncated IBLT header".into()));
        }
        let n = u32::from_le_bytes(buf[..4].try_into().unwrap()) as u64;
        let k = buf[4] as u32;
        let salt = u64::from_le_bytes(buf[5..13].try_into().unwrap());
        let mut t = Self::new(n, k, salt).map_err(|e| Error::Decode(e.to_string()))?;
        let end = Self::serialized_len_for(n);
        let body = buf
            .get(IBLT_HEADER_BYTES..end)
            .ok_or_else(|| Error::Decode("truncated IBLT cells".into()))?;
        for (cell, raw) in t.cells.iter_mut().zip(body.chunks_exact(CELL_BYTES)) {
            cell.count = i32::from_le_bytes(raw[..4].try_into().unwrap());
            cell.id_sum = u64::from_le_bytes(raw[4..12].try_into().unwrap());
            cell.check_sum = u32::from_le_bytes(raw[12..16].try_into().unwrap());
        }
        Ok((t, end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_delete_restores_zero() {
        let mut t = Iblt::with_overhead(4, 5);
        t.insert(77);
        assert!(!t.is_empty());
        t.delete(77);
        assert!(t.is_empty());
    }

    #[test]
    fn self_difference_is_empty() {
        let mut t = Iblt::with_overhead(10, 1);
        for i in 0..50 {
            t.insert(mix64(i));
        }
        let d = t.subtract(&t).unwrap().decode().unwrap();
        assert_eq!(d, Difference::default());
    }

    #[test]
    fn four_element_universe() {
        let (a, b, c, d) = (mix64(1), mix64(2), mix64(3), mix64(4));
        let mut ta = Iblt::with_assurance(2, 8);
        let mut tb = Iblt::with_assurance(2, 8);
        for x in [a, b, c] {
            ta.insert(x);
        }
        for x in [b, c, d] {
            tb.insert(x);
        }
        let diff = ta.subtract(&tb).unwrap().decode().unwrap();
        assert_eq!(diff.left, vec![a]);
        assert_eq!(diff.right, vec![d]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Iblt::new(6, 3, 0).unwrap();
        let b = Iblt::new(9, 3, 0).unwrap();
        let c = Iblt::new(6, 3, 1).unwrap();
        assert!(a.subtract(&b).is_err());
        assert!(a.subtract(&c).is_err());
        assert!(Iblt::new(7, 3, 0).is_err());
    }

    #[test]
    fn overloaded_table_fails() {
        let mut t = Iblt::new(3, 3, 0).unwrap();
        for i in 0..40 {
            t.insert(mix64(i));
        }
        assert!(t.decode().is_err());
    }

    #[test]
    fn sizing_rules() {
        assert_eq!(cells_with_overhead(10, 1.5, 3), 15);
        assert_eq!(cells_with_overhead(11, 1.5, 3), 18);
        assert_eq!(assured_cells(0), 3);
        for d in 1..2000 {
            let c = assured_cells(d);
            assert_eq!(c % 3, 0);
            assert!(c as f64 >= 1.5 * d as f64);
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let mut t = Iblt::with_overhead(9, 3);
        for i in 0..9 {
            t.insert(mix64(i));
        }
        t.delete(mix64(100));
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), t.serialized_len());
        let (back, used) = Iblt::read_from(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, t);
    }
}
