//! Compact blocks: 6-byte keyed short ids with the coinbase prefilled.
//!
//! Body layout: nonce (u64) | short id count (u24) | prefilled count (u24) |
//! short ids (6 bytes each, little-endian).

use std::collections::HashMap;

use sha2::{Digest, Sha256};
use siphasher::sip::SipHasher24;
use std::hash::Hasher;

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::protocols::wire::{put_u24, Reader};
use crate::tx::Transaction;

pub const SHORTID_BYTES: usize = 6;
/// nonce + two 3-byte counts
pub const COMPACT_CONSTANT_BYTES: usize = 8 + 3 + 3;
const SHORTID_MASK: u64 = (1 << 48) - 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactBody {
    pub nonce: u64,
    pub shortids: Vec<u64>,
}

/// Short id keys come from the nonce alone.
fn sip_keys(nonce: u64) -> (u64, u64) {
    let d = Sha256::new()
        .chain_update(b"blockpress/compact")
        .chain_update(nonce.to_le_bytes())
        .finalize();
    (
        u64::from_le_bytes(d[..8].try_into().unwrap()),
        u64::from_le_bytes(d[8..16].try_into().unwrap()),
    )
}

/// Computes 6-byte short ids under one nonce.
#[derive(Clone, Copy, Debug)]
pub struct ShortIdKey {
    k0: u64,
    k1: u64,
}

impl ShortIdKey {
    pub fn new(nonce: u64) -> Self {
        let (k0, k1) = sip_keys(nonce);
        ShortIdKey { k0, k1 }
    }

    pub fn shortid(&self, tx: &Transaction) -> u64 {
        let mut h = SipHasher24::new_with_keys(self.k0, self.k1);
        h.write(&tx.txid.0);
        h.finish() & SHORTID_MASK
    }
}

impl CompactBody {
    pub fn serialized_len(&self) -> usize {
        COMPACT_CONSTANT_BYTES + SHORTID_BYTES * self.shortids.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&self.nonce.to_le_bytes());
        put_u24(&mut out, self.shortids.len() as u64)?;
        // the coinbase is the only prefilled entry and travels with the header
        put_u24(&mut out, 1)?;
        for s in &self.shortids {
            out.extend_from_slice(&s.to_le_bytes()[..SHORTID_BYTES]);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let nonce = r.u64()?;
        let n = r.bounded_count(SHORTID_BYTES, false)?;
        let prefilled = r.u24()?;
        if prefilled != 1 {
            return Err(Error::Decode(format!(
                "expected 1 prefilled entry, got {prefilled}"
            )));
        }
        let mut shortids = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 8];
            b[..SHORTID_BYTES].copy_from_slice(r.take(SHORTID_BYTES)?);
            shortids.push(u64::from_le_bytes(b));
        }
        r.finish()?;
        Ok(CompactBody { nonce, shortids })
    }
}

pub fn compact_encode(block: &BlockTemplate, nonce: u64) -> CompactBody {
    let key = ShortIdKey::new(nonce);
    CompactBody {
        nonce,
        shortids: block.txs.iter().map(|t| key.shortid(t)).collect(),
    }
}

/// Partially rebuilt block plus the positions that must be requested.
#[derive(Clone, Debug)]
pub struct CompactReconstruction {
    pub slots: Vec<Option<Transaction>>,
    pub missing: Vec<usize>,
}

impl CompactReconstruction {
    /// Applies a block-transactions response, one transaction per missing index.
    pub fn fill(mut self, txs: &[Transaction]) -> Result<BlockTemplate> {
        if txs.len() != self.missing.len() {
            return Err(Error::InvalidInput(format!(
                "{} transactions supplied for {} missing slots",
                txs.len(),
                self.missing.len()
            )));
        }
        for (&i, tx) in self.missing.iter().zip(txs) {
            self.slots[i] = Some(*tx);
        }
        BlockTemplate::new(self.slots.into_iter().map(Option::unwrap).collect())
    }
}

/// Resolves each short id against the receiver's pool. Ids with no match or
/// with several matches are left for the getblocktxn round.
pub fn compact_decode(body: &CompactBody, pool: &[Transaction]) -> CompactReconstruction {
    let key = ShortIdKey::new(body.nonce);
    let mut index: HashMap<u64, Option<usize>> = HashMap::with_capacity(pool.len());
    for (i, tx) in pool.iter().enumerate() {
        index
            .entry(key.shortid(tx))
            .and_modify(|e| *e = None)
            .or_insert(Some(i));
    }
    let mut slots = Vec::with_capacity(body.shortids.len());
    let mut missing = Vec::new();
    for (pos, s) in body.shortids.iter().enumerate() {
        match index.get(s) {
            Some(Some(i)) => slots.push(Some(pool[*i])),
            _ => {
                slots.push(None);
                missing.push(pos);
            }
        }
    }
    CompactReconstruction { slots, missing }
}

/// Bytes of the getblocktxn request and blocktxn response for `missing`.
pub fn repair_bytes(block: &BlockTemplate, missing: &[usize]) -> usize {
    if missing.is_empty() {
        return 0;
    }
    let request = 32 + 3 + 3 * missing.len();
    let response = 32
        + 3
        + missing
            .iter()
            .map(|&i| block.txs[i].wire_len())
            .sum::<usize>();
    request + response
}
