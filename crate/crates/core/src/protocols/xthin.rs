//! Xtreme Thinblocks: the receiver advertises a Bloom filter of its pool and
//! the sender replies with 8-byte id prefixes plus every transaction the
//! filter does not cover.
//!
//! Body layout: hash count (u24) | hashes (u64 each) | shipped count (u24) |
//! shipped transaction records.

use std::collections::HashMap;

use crate::block::BlockTemplate;
use crate::error::Result;
use crate::protocols::wire::{put_u24, Reader};
use crate::sketches::BloomFilter;
use crate::tx::{Transaction, TX_RECORD_MIN};

pub const HASH_BYTES: usize = 8;
/// The two 3-byte counts framing the body.
pub const THIN_FRAMING_BYTES: usize = 6;
pub const DEFAULT_FILTER_FPR: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThinBody {
    pub hashes: Vec<u64>,
    pub shipped: Vec<Transaction>,
}

impl ThinBody {
    pub fn serialized_len(&self) -> usize {
        THIN_FRAMING_BYTES
            + HASH_BYTES * self.hashes.len()
            + self
                .shipped
                .iter()
                .map(Transaction::wire_len)
                .sum::<usize>()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_u24(&mut out, self.hashes.len() as u64)?;
        for h in &self.hashes {
            out.extend_from_slice(&h.to_le_bytes());
        }
        put_u24(&mut out, self.shipped.len() as u64)?;
        for tx in &self.shipped {
            tx.write_wire(&mut out);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let n = r.bounded_count(HASH_BYTES, false)?;
        let hashes = (0..n).map(|_| r.u64()).collect::<Result<_>>()?;
        let m = r.bounded_count(TX_RECORD_MIN, false)?;
        let shipped = (0..m).map(|_| r.transaction()).collect::<Result<_>>()?;
        r.finish()?;
        Ok(ThinBody { hashes, shipped })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct XThinConfig {
    pub filter_fpr: f64,
    pub salt: u64,
}

impl Default for XThinConfig {
    fn default() -> Self {
        XThinConfig {
            filter_fpr: DEFAULT_FILTER_FPR,
            salt: 0,
        }
    }
}

/// Filter the receiver sends with its getdata request.
pub fn receiver_filter(pool: &[Transaction], cfg: &XThinConfig) -> Result<BloomFilter> {
    let mut bf = BloomFilter::new(pool.len().max(1) as u64, cfg.filter_fpr, cfg.salt)?;
    for tx in pool {
        bf.insert(tx.txid.prefix_u64());
    }
    Ok(bf)
}

pub fn xthin_encode(block: &BlockTemplate, filter: &BloomFilter) -> ThinBody {
    ThinBody {
        hashes: block.txs.iter().map(|t| t.txid.prefix_u64()).collect(),
        shipped: block
            .txs
            .iter()
            .filter(|t| !filter.contains(t.txid.prefix_u64()))
            .copied()
            .collect(),
    }
}

/// Outcome of one full thin-block exchange.
#[derive(Clone, Debug)]
pub struct XThinExchange {
    pub body: ThinBody,
    pub block: BlockTemplate,
    pub rounds: u8,
    pub filter_bytes: usize,
    pub body_bytes: usize,
    /// Second-round request plus response.
    pub repair_bytes: usize,
    /// Bytes of a whole-block retransmission after a root mismatch.
    pub fallback_bytes: usize,
}

impl XThinExchange {
    pub fn total_bytes(&self) -> usize {
        self.filter_bytes + self.body_bytes + self.repair_bytes + self.fallback_bytes
    }
}

/// Runs filter, thin block and the repair round against `receiver_pool`.
pub fn xthin_exchange(
    block: &BlockTemplate,
    receiver_pool: &[Transaction],
    cfg: &XThinConfig,
) -> Result<XThinExchange> {
    let filter = receiver_filter(receiver_pool, cfg)?;
    let body = xthin_encode(block, &filter);
    let wire = body.to_bytes()?;
    let body = ThinBody::from_bytes(&wire)?;

    let mut known: HashMap<u64, Option<Transaction>> =
        HashMap::with_capacity(receiver_pool.len() + body.shipped.len());
    for tx in receiver_pool {
        known
            .entry(tx.txid.prefix_u64())
            .and_modify(|e| *e = None)
            .or_insert(Some(*tx));
    }
    // shipped transactions override any pool entry with the same prefix
    for tx in &body.shipped {
        known.insert(tx.txid.prefix_u64(), Some(*tx));
    }
    let mut slots: Vec<Option<Transaction>> = body
        .hashes
        .iter()
        .map(|h| known.get(h).copied().flatten())
        .collect();
    let missing: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_none()).collect();

    let mut rounds = 1;
    let mut repair_bytes = 0;
    if !missing.is_empty() {
        rounds = 2;
        let request = 32 + 3 + HASH_BYTES * missing.len();
        let mut response = 32 + 3;
        for &i in &missing {
            let tx = block.txs[i];
            response += tx.wire_len();
            slots[i] = Some(tx);
        }
        repair_bytes = request + response;
    }
    let rebuilt = BlockTemplate::new(slots.into_iter().map(Option::unwrap).collect());
    let mut fallback_bytes = 0;
    let rebuilt = match rebuilt {
        Ok(b) if b.merkle_root() == block.merkle_root() => b,
        _ => {
            fallback_bytes = block.txs.iter().map(Transaction::wire_len).sum();
            block.clone()
        }
    };
    Ok(XThinExchange {
        filter_bytes: filter.serialized_len(),
        body_bytes: wire.len(),
        body,
        block: rebuilt,
        rounds,
        repair_bytes,
        fallback_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::TxFactory;

    fn setup(n: usize) -> (BlockTemplate, Vec<Transaction>) {
        let mut f = TxFactory::new(21);
        let pool: Vec<Transaction> = (0..n * 3).map(|i| f.make(i as u64 + 1)).collect();
        (BlockTemplate::new(pool[..n].to_vec()).unwrap(), pool)
    }

    #[test]
    fn pool_superset_is_one_round() {
        let (b, pool) = setup(50);
        let ex = xthin_exchange(&b, &pool, &XThinConfig::default()).unwrap();
        assert_eq!(ex.rounds, 1);
        assert!(ex.body.shipped.is_empty());
        assert_eq!(ex.body_bytes, THIN_FRAMING_BYTES + 8 * 50);
        assert_eq!(ex.block, b);
    }

    #[test]
    fn missing_tx_is_shipped() {
        let (b, mut pool) = setup(50);
        pool.retain(|t| t.txid != b.txs[7].txid);
        let ex = xthin_exchange(&b, &pool, &XThinConfig::default()).unwrap();
        assert_eq!(ex.rounds, 1);
        assert_eq!(ex.body.shipped, vec![b.txs[7]]);
        assert_eq!(ex.body_bytes, THIN_FRAMING_BYTES + 8 * 50 + 500);
        assert_eq!(ex.block.merkle_root(), b.merkle_root());
    }
}
