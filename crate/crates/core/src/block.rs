//! Block templates and the Merkle commitment over their transactions.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tx::{Transaction, TxId};

pub const HEADER_BYTES: usize = 80;
/// The coinbase is modeled as an opaque, always-prefilled 500-byte record.
pub const COINBASE_BYTES: usize = 500;

pub type Digest32 = [u8; 32];

fn sha256d(data: &[u8]) -> Digest32 {
    Sha256::digest(Sha256::digest(data)).into()
}

/// Bitcoin-style Merkle root over `ids`.
///
/// Each level hashes adjacent pairs with double SHA-256, duplicating the last
/// node when the level is odd. Reduction always runs at least once, so a lone
/// id commits to `H(id || id)`. An empty list commits to all zeros.
pub fn merkle_root(ids: &[TxId]) -> Digest32 {
    if ids.is_empty() {
        return [0; 32];
    }
    let mut level: Vec<Digest32> = ids.iter().map(|id| id.0).collect();
    let mut buf = [0u8; 64];
    loop {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level
            .chunks_exact(2)
            .map(|pair| {
                buf[..32].copy_from_slice(&pair[0]);
                buf[32..].copy_from_slice(&pair[1]);
                sha256d(&buf)
            })
            .collect();
        if level.len() == 1 {
            return level[0];
        }
    }
}

/// An ordered candidate block. The coinbase is implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTemplate {
    pub header_bytes: usize,
    pub coinbase_bytes: usize,
    pub txs: Vec<Transaction>,
}

impl BlockTemplate {
    pub fn new(txs: Vec<Transaction>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(txs.len());
        for tx in &txs {
            if !seen.insert(tx.txid) {
                return Err(Error::InvalidInput(format!(
                    "duplicate txid {} in block",
                    tx.txid.to_hex()
                )));
            }
        }
        Ok(Self::from_unique(txs))
    }

    /// Skips the duplicate check; callers guarantee unique ids.
    pub(crate) fn from_unique(txs: Vec<Transaction>) -> Self {
        BlockTemplate {
            header_bytes: HEADER_BYTES,
            coinbase_bytes: COINBASE_BYTES,
            txs,
        }
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn txids(&self) -> Vec<TxId> {
        self.txs.iter().map(|t| t.txid).collect()
    }

    pub fn merkle_root(&self) -> Digest32 {
        merkle_root(&self.txids())
    }

    /// Sum of fees, the miner's revenue in a pure fee regime.
    pub fn revenue(&self) -> u64 {
        self.txs.iter().map(|t| t.fee).sum()
    }

    /// Whether transactions appear in ascending txid order.
    pub fn is_canonical(&self) -> bool {
        self.txs.windows(2).all(|w| w[0].txid < w[1].txid)
    }

    pub fn into_canonical(mut self) -> Self {
        self.txs.sort_unstable_by_key(|t| t.txid);
        self
    }

    /// 80-byte header image: version, previous hash, Merkle root, time, bits,
    /// nonce. Only the Merkle root is populated.
    pub fn header(&self) -> [u8; HEADER_BYTES] {
        let mut h = [0u8; HEADER_BYTES];
        h[36..68].copy_from_slice(&self.merkle_root());
        h
    }
}

/// Extracts the Merkle root from a header image built by [`BlockTemplate::header`].
pub fn header_merkle_root(header: &[u8; HEADER_BYTES]) -> Digest32 {
    header[36..68].try_into().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{make_transaction, FeeRate};

    fn id(n: u64) -> TxId {
        TxId::derive(1, n)
    }

    fn cat(a: &Digest32, b: &Digest32) -> Digest32 {
        let mut v = a.to_vec();
        v.extend_from_slice(b);
        let once = Sha256::digest(&v);
        Sha256::digest(once).into()
    }

    #[test]
    fn empty_root_is_zero() {
        assert_eq!(merkle_root(&[]), [0; 32]);
    }

    #[test]
    fn single_leaf_is_duplicated() {
        let a = id(0);
        assert_eq!(merkle_root(&[a]), cat(&a.0, &a.0));
    }

    #[test]
    fn two_leaves_are_order_sensitive() {
        let (a, b) = (id(0), id(1));
        assert_eq!(merkle_root(&[a, b]), cat(&a.0, &b.0));
        assert_ne!(merkle_root(&[a, b]), merkle_root(&[b, a]));
    }

    #[test]
    fn three_leaves_match_straight_line_tree() {
        let (a, b, c) = (id(0), id(1), id(2));
        let left = cat(&a.0, &b.0);
        let right = cat(&c.0, &c.0);
        assert_eq!(merkle_root(&[a, b, c]), cat(&left, &right));
    }

    #[test]
    fn duplicate_txids_rejected() {
        let t = make_transaction(10, 500, FeeRate::DEFAULT, 3, 0).unwrap();
        assert!(BlockTemplate::new(vec![t, t]).is_err());
    }

    #[test]
    fn header_carries_root() {
        let txs = (0..5)
            .map(|i| make_transaction(10 * i, 500, FeeRate::DEFAULT, 3, i as u64).unwrap())
            .collect();
        let b = BlockTemplate::new(txs).unwrap();
        assert_eq!(header_merkle_root(&b.header()), b.merkle_root());
    }
}
