//! Little-endian field helpers shared by the codecs.

use crate::error::{Error, Result};
use crate::tx::Transaction;

/// Bitcoin CompactSize length.
pub fn varint_len(v: u64) -> usize {
    match v {
        0..=0xfc => 1,
        0xfd..=0xffff => 3,
        0x1_0000..=0xffff_ffff => 5,
        _ => 9,
    }
}

pub fn put_varint(out: &mut Vec<u8>, v: u64) {
    match varint_len(v) {
        1 => out.push(v as u8),
        3 => {
            out.push(0xfd);
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        5 => {
            out.push(0xfe);
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub const U24_MAX: u64 = 0xff_ffff;

pub fn put_u24(out: &mut Vec<u8>, v: u64) -> Result<()> {
    if v > U24_MAX {
        return Err(Error::InvalidInput(format!(
            "{v} does not fit a 3-byte count"
        )));
    }
    out.extend_from_slice(&(v as u32).to_le_bytes()[..3]);
    Ok(())
}

/// Cursor over a received message.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(&self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(Error::Decode(format!(
                "{} trailing byte(s)",
                self.buf.len() - self.pos
            )))
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode("unexpected end of message".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn skip(&mut self, n: usize) -> Result<()> {
        self.take(n).map(|_| ())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u24(&mut self) -> Result<u64> {
        let b = self.take(3)?;
        Ok(b[0] as u64 | (b[1] as u64) << 8 | (b[2] as u64) << 16)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn varint(&mut self) -> Result<u64> {
        Ok(match self.u8()? {
            0xfd => u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as u64,
            0xfe => u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as u64,
            0xff => self.u64()?,
            b => b as u64,
        })
    }

    pub fn transaction(&mut self) -> Result<Transaction> {
        let (tx, used) = Transaction::read_wire(self.remaining())?;
        self.pos += used;
        Ok(tx)
    }

    /// Reads a count and rejects values larger than the bytes left could hold.
    pub fn bounded_count(&mut self, min_item_bytes: usize, wide: bool) -> Result<usize> {
        let n = if wide { self.varint()? } else { self.u24()? };
        let left = (self.buf.len() - self.pos) as u64;
        if min_item_bytes > 0 && n > left / min_item_bytes as u64 {
            return Err(Error::Decode(format!("count {n} exceeds message size")));
        }
        Ok(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varint_roundtrip() {
        for v in [0, 1, 0xfc, 0xfd, 0xffff, 0x1_0000, 0xffff_ffff, 1 << 40] {
            let mut b = Vec::new();
            put_varint(&mut b, v);
            assert_eq!(b.len(), varint_len(v));
            let mut r = Reader::new(&b);
            assert_eq!(r.varint().unwrap(), v);
            assert!(r.is_done());
        }
    }

    #[test]
    fn u24_bounds() {
        let mut b = Vec::new();
        put_u24(&mut b, U24_MAX).unwrap();
        assert_eq!(Reader::new(&b).u24().unwrap(), U24_MAX);
        assert!(put_u24(&mut b, U24_MAX + 1).is_err());
    }

    #[test]
    fn truncated_input_errors() {
        let mut r = Reader::new(&[0xfd, 1]);
        assert!(r.varint().is_err());
    }
}
