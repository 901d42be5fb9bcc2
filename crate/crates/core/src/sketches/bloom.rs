//! Standard Bloom filter over 8-byte ids.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::sketches::hash::mix64;

/// Serialized header: m_bits (u32), k (u8), salt (u64).
pub const BLOOM_HEADER_BYTES: usize = 4 + 1 + 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    m_bits: u64,
    k: u32,
    salt: u64,
}

/// Optimal `(m_bits, k)` for `n` items at false-positive rate `f`.
pub fn bloom_params(n: u64, f: f64) -> Result<(u64, u32)> {
    if n == 0 {
        return Err(Error::Parameter("bloom filter needs n >= 1".into()));
    }
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Parameter(format!(
            "bloom false-positive rate must lie in (0, 1), got {f}"
        )));
    }
    let m = (-(n as f64) * f.ln() / (LN_2 * LN_2)).ceil().max(1.0) as u64;
    let k = ((m as f64 / n as f64) * LN_2).round().max(1.0) as u32;
    Ok((m, k))
}

impl BloomFilter {
    pub fn new(n_target: u64, f_target: f64, salt: u64) -> Result<Self> {
        let (m, k) = bloom_params(n_target, f_target)?;
        Self::with_params(m, k, salt)
    }

    pub fn with_params(m_bits: u64, k: u32, salt: u64) -> Result<Self> {
        if m_bits == 0 || m_bits > u32::MAX as u64 || k == 0 || k > u8::MAX as u32 {
            return Err(Error::Parameter(format!(
                "unsupported bloom shape m_bits={m_bits}, k={k}"
            )));
        }
        Ok(BloomFilter {
            words: vec![0; m_bits.div_ceil(64) as usize],
            m_bits,
            k,
            salt,
        })
    }

    pub fn m_bits(&self) -> u64 {
        self.m_bits
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn salt(&self) -> u64 {
        self.salt
    }

    #[inline]
    fn probe_seed(&self, item: u64) -> (u64, u64) {
        let h1 = mix64(item ^ self.salt);
        let h2 = mix64(h1 ^ self.salt.rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15) | 1;
        (h1, h2)
    }

    pub fn insert(&mut self, item: u64) {
        let (h1, h2) = self.probe_seed(item);
        for i in 0..self.k as u64 {
            let b = h1.wrapping_add(i.wrapping_mul(h2)) % self.m_bits;
            self.words[(b / 64) as usize] |= 1 << (b % 64);
        }
    }

    pub fn contains(&self, item: u64) -> bool {
        let (h1, h2) = self.probe_seed(item);
        (0..self.k as u64).all(|i| {
            let b = h1.wrapping_add(i.wrapping_mul(h2)) % self.m_bits;
            self.words[(b / 64) as usize] & (1 << (b % 64)) != 0
        })
    }

    pub fn serialized_len(&self) -> usize {
        Self::serialized_len_for(self.m_bits)
    }

    pub fn serialized_len_for(m_bits: u64) -> usize {
        BLOOM_HEADER_BYTES + m_bits.div_ceil(8) as usize
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.m_bits as u32).to_le_bytes());
        out.push(self.k as u8);
        out.extend_from_slice(&self.salt.to_le_bytes());
        let nbytes = self.m_bits.div_ceil(8) as usize;
        let start = out.len();
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(start + nbytes);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.serialized_len());
        self.write_to(&mut v);
        v
    }

    /// Parses a filter, returning it with the number of bytes consumed.
    pub fn read_from(buf: &[u8]) -> Result<(Self, usize)> {
        if buf.len() < BLOOM_HEADER_BYTES {
            return Err(Error::Decode("truncated bloom header".into()));
        }
        let m_bits = u32::from_le_bytes(buf[..4].try_into().unwrap()) as u64;
        let k = buf[4] as u32;
        let salt = u64::from_le_bytes(buf[5..13].try_into().unwrap());
        let mut bf =
            Self::with_params(m_bits, k, salt).map_err(|e| Error::Decode(e.to_string()))?;
        let nbytes = m_bits.div_ceil(8) as usize;
        let body = buf
            .get(BLOOM_HEADER_BYTES..BLOOM_HEADER_BYTES + nbytes)
            .ok_or_else(|| Error::Decode("truncated bloom bits".into()))?;
        for (i, chunk) in body.chunks(8).enumerate() {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            bf.words[i] = u64::from_le_bytes(w);
        }
        Ok((bf, BLOOM_HEADER_BYTES + nbytes))
    }
}
