//! Transactions and the identifiers and fee arithmetic attached to them.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Nominal size of a transaction on the wire.
pub const DEFAULT_TX_SIZE: u32 = 500;

/// Smallest encoding of a shipped transaction record (fixed fields only).
pub const TX_RECORD_MIN: usize = 4 + 32 + 8 + 8 + 8;

/// 32-byte transaction identifier. Ordering is lexicographic over the bytes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    /// Keyed digest of `(seed, counter)`; the same pair always yields the same id.
    pub fn derive(seed: u64, counter: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"blockpress/txid");
        h.update(seed.to_le_bytes());
        h.update(counter.to_le_bytes());
        TxId(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Leading eight bytes read big-endian, so integer order matches byte order.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({}..)", &self.to_hex()[..12])
    }
}

/// Fee as a fraction of the transferred value, stored in parts per billion so
/// fee computation is exact integer arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeeRate {
    ppb: u32,
}

impl FeeRate {
    const SCALE: u64 = 1_000_000_000;

    /// 0.2 % of the transferred value.
    pub const DEFAULT: FeeRate = FeeRate { ppb: 2_000_000 };
    pub const ZERO: FeeRate = FeeRate { ppb: 0 };

    pub fn from_fraction(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidInput(format!(
                "fee rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(FeeRate {
            ppb: (rate * Self::SCALE as f64).round() as u32,
        })
    }

    pub fn as_fraction(self) -> f64 {
        self.ppb as f64 / Self::SCALE as f64
    }

    /// `round(value * rate)`, halves rounded up.
    pub fn fee_for(self, value: u64) -> u64 {
        let scaled = value as u128 * self.ppb as u128 + (Self::SCALE / 2) as u128;
        (scaled / Self::SCALE as u128) as u64
    }
}

impl Default for FeeRate {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub txid: TxId,
    /// Transferred value in satoshi.
    pub value: u64,
    pub size_bytes: u32,
    /// Fee in satoshi, derived from `value` at construction.
    pub fee: u64,
    /// Milliseconds since the start of the simulation.
    pub arrival_ms: u64,
}

impl Transaction {
    pub fn new(txid: TxId, value: u64, size_bytes: u32, fee_rate: FeeRate) -> Result<Self> {
        if size_bytes == 0 {
            return Err(Error::InvalidInput(
                "transaction size must be positive".into(),
            ));
        }
        Ok(Transaction {
            txid,
            value,
            size_bytes,
            fee: fee_rate.fee_for(value),
            arrival_ms: 0,
        })
    }

    pub fn with_arrival(mut self, arrival_ms: u64) -> Self {
        self.arrival_ms = arrival_ms;
        self
    }

    /// Bytes this transaction occupies when shipped in full.
    pub fn wire_len(&self) -> usize {
        (self.size_bytes as usize).max(TX_RECORD_MIN)
    }

    /// Appends the full-transaction record, zero-padded to `wire_len`.
    pub fn write_wire(&self, out: &mut Vec<u8>) {
        let start = out.len();
        out.extend_from_slice(&self.size_bytes.to_le_bytes());
        out.extend_from_slice(&self.txid.0);
        out.extend_from_slice(&self.value.to_le_bytes());
        out.extend_from_slice(&self.fee.to_le_bytes());
        out.extend_from_slice(&self.arrival_ms.to_le_bytes());
        out.resize(start + self.wire_len(), 0);
    }

    /// Parses one record written by [`Transaction::write_wire`], returning it
    /// with the number of bytes consumed.
    pub fn read_wire(buf: &[u8]) -> Result<(Self, usize)> {
        if buf.len() < TX_RECORD_MIN {
            return Err(Error::Decode("truncated transaction record".into()));
        }
        let le64 = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().unwrap());
        let size_bytes = u32::from_le_bytes(buf[..4].try_into().unwrap());
        if size_bytes == 0 {
            return Err(Error::Decode("zero-size transaction record".into()));
        }
        let tx = Transaction {
            size_bytes,
            txid: TxId(buf[4..36].try_into().unwrap()),
            value: le64(36),
            fee: le64(44),
            arrival_ms: le64(52),
        };
        let len = tx.wire_len();
        if buf.len() < len {
            return Err(Error::Decode("truncated transaction padding".into()));
        }
        Ok((tx, len))
    }
}

/// Builds a transaction whose id is the keyed digest of `(seed, counter)`.
pub fn make_transaction(
    value: i64,
    size_bytes: u32,
    fee_rate: FeeRate,
    seed: u64,
    counter: u64,
) -> Result<Transaction> {
    let value = u64::try_from(value)
        .map_err(|_| Error::InvalidInput(format!("negative transaction value {value}")))?;
    Transaction::new(TxId::derive(seed, counter), value, size_bytes, fee_rate)
}

/// Sequential transaction source with reproducible ids.
#[derive(Clone, Debug)]
pub struct TxFactory {
    seed: u64,
    next: u64,
    pub fee_rate: FeeRate,
    pub size_bytes: u32,
}

impl TxFactory {
    pub fn new(seed: u64) -> Self {
        TxFactory {
            seed,
            next: 0,
            fee_rate: FeeRate::DEFAULT,
            size_bytes: DEFAULT_TX_SIZE,
        }
    }

    pub fn with_fee_rate(mut self, fee_rate: FeeRate) -> Self {
        self.fee_rate = fee_rate;
        self
    }

    pub fn make(&mut self, value: u64) -> Transaction {
        let txid = TxId::derive(self.seed, self.next);
        self.next += 1;
        Transaction {
            txid,
            value,
            size_bytes: self.size_bytes.max(1),
            fee: self.fee_rate.fee_for(value),
            arrival_ms: 0,
        }
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fee_is_two_per_mille() {
        let tx = make_transaction(1_000_000, 500, FeeRate::DEFAULT, 7, 0).unwrap();
        assert_eq!(tx.fee, 2_000);
    }

    #[test]
    fn zero_value_zero_fee() {
        let tx = make_transaction(0, 500, FeeRate::DEFAULT, 7, 0).unwrap();
        assert_eq!(tx.fee, 0);
    }

    #[test]
    fn negative_value_rejected() {
        assert!(matches!(
            make_transaction(-1, 500, FeeRate::DEFAULT, 7, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ids_are_deterministic() {
        let a = make_transaction(5, 500, FeeRate::DEFAULT, 42, 9).unwrap();
        let b = make_transaction(77, 500, FeeRate::DEFAULT, 42, 9).unwrap();
        assert_eq!(a.txid, b.txid);
        assert_ne!(a.txid, TxId::derive(42, 10));
        assert_ne!(a.txid, TxId::derive(43, 9));
    }

    #[test]
    fn fee_rounds_half_up() {
        // 250 * 0.002 = 0.5
        assert_eq!(FeeRate::DEFAULT.fee_for(250), 1);
        assert_eq!(FeeRate::DEFAULT.fee_for(249), 0);
        assert_eq!(FeeRate::from_fraction(0.5).unwrap().fee_for(3), 2);
    }

    #[test]
    fn fee_rate_bounds() {
        assert!(FeeRate::from_fraction(1.0).is_err());
        assert!(FeeRate::from_fraction(-0.1).is_err());
        assert_eq!(FeeRate::from_fraction(0.0).unwrap(), FeeRate::ZERO);
    }

    #[test]
    fn wire_record_roundtrip() {
        let tx = make_transaction(123_456, 500, FeeRate::DEFAULT, 1, 2)
            .unwrap()
            .with_arrival(99);
        let mut buf = Vec::new();
        tx.write_wire(&mut buf);
        assert_eq!(buf.len(), 500);
        let (back, used) = Transaction::read_wire(&buf).unwrap();
        assert_eq!(used, 500);
        assert_eq!(back, tx);
    }

    #[test]
    fn small_transactions_use_minimum_record() {
        let tx = make_transaction(1, 10, FeeRate::DEFAULT, 1, 2).unwrap();
        assert_eq!(tx.wire_len(), TX_RECORD_MIN);
    }
}
