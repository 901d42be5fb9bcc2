//! Block order relative to txid order, shipped only when they differ.

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::protocols::wire::{put_varint, Reader};
use crate::tx::Transaction;

/// Rank of each block transaction in txid order, or `None` if the block is
/// already sorted.
pub fn block_order(block: &BlockTemplate) -> Option<Vec<u64>> {
    if block.is_canonical() {
        return None;
    }
    let mut idx: Vec<usize> = (0..block.len()).collect();
    idx.sort_unstable_by_key(|&i| block.txs[i].txid);
    let mut rank = vec![0u64; block.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r as u64;
    }
    Some(rank)
}

pub fn put_order(out: &mut Vec<u8>, order: &[u64]) {
    for &r in order {
        put_varint(out, r);
    }
}

pub fn read_order(r: &mut Reader<'_>, n: u64) -> Result<Vec<u64>> {
    if n > r.remaining().len() as u64 {
        return Err(Error::Decode("order longer than message".into()));
    }
    (0..n).map(|_| r.varint()).collect()
}

/// Rearranges txid-sorted transactions into block order.
pub fn apply_order(sorted: Vec<Transaction>, order: &[u64]) -> Result<Vec<Transaction>> {
    if sorted.len() != order.len() {
        return Err(Error::Decode(format!(
            "order has {} entries for {} transactions",
            order.len(),
            sorted.len()
        )));
    }
    let mut used = vec![false; sorted.len()];
    let mut out = Vec::with_capacity(sorted.len());
    for &r in order {
        let r = r as usize;
        if r >= sorted.len() || std::mem::replace(&mut used[r], true) {
            return Err(Error::Decode("order is not a permutation".into()));
        }
        out.push(sorted[r]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mempool::priority_order;
    use crate::tx::TxFactory;

    #[test]
    fn order_roundtrip() {
        let mut f = TxFactory::new(8);
        let txs: Vec<Transaction> = (0..20).map(|i| f.make(i * 7919 % 13 * 1_000_000)).collect();
        let block = BlockTemplate::new(priority_order(txs)).unwrap();
        let order = block_order(&block).unwrap();
        let mut sorted = block.txs.clone();
        sorted.sort_unstable_by_key(|t| t.txid);
        assert_eq!(apply_order(sorted, &order).unwrap(), block.txs);
        assert!(block_order(&block.into_canonical()).is_none());
    }

    #[test]
    fn rejects_non_permutation() {
        let mut f = TxFactory::new(8);
        let txs: Vec<Transaction> = (0..3).map(|i| f.make(i)).collect();
        assert!(apply_order(txs.clone(), &[0, 0, 1]).is_err());
        assert!(apply_order(txs, &[0, 1]).is_err());
    }
}
