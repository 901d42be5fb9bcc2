//! XThinner: block ids in sorted order, each written as the shortest prefix
//! that is unique in the sender's pool, with shared leading bytes kept on a
//! stack between consecutive ids.
//!
//! Ids are the leading 8 bytes of each txid, compared as big-endian integers.
//!
//! Body layout: varint(n << 1 | has_order) | command stream | one checksum
//! byte per 8 ids | [n varint order indexes]. The command stream is a
//! sequence of groups: one byte holding four 2-bit opcodes (first opcode in
//! the low bits), followed by the bytes pushed by that group's `PUSH` ops.
//! Decoding stops at the n-th `END`; remaining opcodes in the final group
//! are padding.

use std::collections::HashMap;

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::protocols::order::{apply_order, block_order, put_order, read_order};
use crate::protocols::wire::{put_varint, varint_len, Reader};
use crate::tx::Transaction;

const POP1: u8 = 0;
const POP2: u8 = 1;
const PUSH: u8 = 2;
const END: u8 = 3;

pub const CHECKSUM_GROUP: usize = 8;

#[inline]
fn byte_at(id: u64, i: usize) -> u8 {
    (id >> (56 - 8 * i)) as u8
}

/// Leading bytes shared by two ids.
#[inline]
pub fn common_prefix(a: u64, b: u64) -> usize {
    ((a ^ b).leading_zeros() / 8) as usize
}

struct OpWriter {
    out: Vec<u8>,
    group_at: usize,
    slot: u8,
}

impl OpWriter {
    fn new(out: Vec<u8>) -> Self {
        OpWriter {
            out,
            group_at: 0,
            slot: 4,
        }
    }

    fn op(&mut self, code: u8) {
        if self.slot == 4 {
            self.group_at = self.out.len();
            self.out.push(0);
            self.slot = 0;
        }
        self.out[self.group_at] |= code << (2 * self.slot);
        self.slot += 1;
    }

    fn push(&mut self, byte: u8) {
        self.op(PUSH);
        self.out.push(byte);
    }

    fn pop(&mut self, mut count: usize) {
        while count >= 2 {
            self.op(POP2);
            count -= 2;
        }
        if count == 1 {
            self.op(POP1);
        }
    }
}

/// Encodes txid-sorted `block_ids` against the sender's sorted pool and
/// returns the command stream followed by the checksum bytes.
pub fn encode_ids(block_ids: &[u64], pool_sorted: &[u64]) -> Vec<u8> {
    let mut w = OpWriter::new(Vec::with_capacity(block_ids.len() * 5 / 2 + 8));
    let mut stack: Vec<u8> = Vec::with_capacity(8);
    let mut j = 0usize;
    for &x in block_ids {
        while j < pool_sorted.len() && pool_sorted[j] < x {
            j += 1;
        }
        let mut unique = 1;
        if j > 0 {
            unique = unique.max(common_prefix(pool_sorted[j - 1], x) + 1);
        }
        let mut k = j;
        while k < pool_sorted.len() && pool_sorted[k] == x {
            k += 1;
        }
        if k < pool_sorted.len() {
            unique = unique.max(common_prefix(pool_sorted[k], x) + 1);
        }
        let shared = stack
            .iter()
            .enumerate()
            .take_while(|&(i, &b)| byte_at(x, i) == b)
            .count();
        let len = unique.max(shared + 1).min(8);
        let keep = shared.min(len);
        w.pop(stack.len() - keep);
        stack.truncate(keep);
        for i in keep..len {
            let b = byte_at(x, i);
            w.push(b);
            stack.push(b);
        }
        w.op(END);
    }
    let mut out = w.out;
    for group in block_ids.chunks(CHECKSUM_GROUP) {
        out.push(group.iter().fold(0, |acc, &id| acc ^ byte_at(id, 7)));
    }
    out
}

/// Block ids resolved against the receiver's pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedIds {
    pub ids: Vec<Option<u64>>,
    pub missing: Vec<usize>,
}

/// Replays the command stream for `n` ids; returns the ids and bytes consumed.
pub fn decode_ids(buf: &[u8], n: usize, pool_sorted: &[u64]) -> Result<(ResolvedIds, usize)> {
    let mut r = Reader::new(buf);
    let mut stack: Vec<u8> = Vec::with_capacity(8);
    let mut ids: Vec<Option<u64>> = Vec::with_capacity(n);
    while ids.len() < n {
        let group = r.u8()?;
        for slot in 0..4 {
            if ids.len() == n {
                break;
            }
            match (group >> (2 * slot)) & 3 {
                POP1 | POP2 => {
                    let c = 1 + ((group >> (2 * slot)) & 3) as usize;
                    if c > stack.len() {
                        return Err(Error::Decode("pop below empty stack".into()));
                    }
                    stack.truncate(stack.len() - c);
                }
                PUSH => {
                    if stack.len() == 8 {
                        return Err(Error::Decode("push past eight bytes".into()));
                    }
                    stack.push(r.u8()?);
                }
                _ => ids.push(lookup(&stack, pool_sorted)),
            }
        }
    }
    let groups = n.div_ceil(CHECKSUM_GROUP);
    let sums = r.take(groups)?;
    let mut missing = Vec::new();
    for (g, chunk) in ids.chunks_mut(CHECKSUM_GROUP).enumerate() {
        let complete = chunk.iter().all(Option::is_some);
        let sum = chunk
            .iter()
            .flatten()
            .fold(0, |acc, &id| acc ^ byte_at(id, 7));
        if complete && sum != sums[g] {
            chunk.iter_mut().for_each(|s| *s = None);
        }
        for (i, s) in chunk.iter().enumerate() {
            if s.is_none() {
                missing.push(g * CHECKSUM_GROUP + i);
            }
        }
    }
    Ok((ResolvedIds { ids, missing }, r.position()))
}

/// The single pool id starting with `prefix`, if exactly one exists.
fn lookup(prefix: &[u8], pool_sorted: &[u64]) -> Option<u64> {
    if prefix.is_empty() {
        return None;
    }
    let shift = 64 - 8 * prefix.len() as u32;
    let lo = prefix.iter().fold(0u64, |acc, &b| acc << 8 | b as u64) << shift;
    let hi = if shift == 0 {
        lo
    } else {
        lo | (u64::MAX >> (64 - shift))
    };
    let start = pool_sorted.partition_point(|&v| v < lo);
    let end = pool_sorted.partition_point(|&v| v <= hi);
    (end - start == 1).then(|| pool_sorted[start])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XthinnerBody {
    pub n: u64,
    /// Command stream and checksums.
    pub stream: Vec<u8>,
    pub order: Option<Vec<u64>>,
}

impl XthinnerBody {
    pub fn serialized_len(&self) -> usize {
        varint_len(self.n << 1 | self.order.is_some() as u64)
            + self.stream.len()
            + self
                .order
                .as_ref()
                .map_or(0, |o| o.iter().map(|&i| varint_len(i)).sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_varint(&mut out, self.n << 1 | self.order.is_some() as u64);
        out.extend_from_slice(&self.stream);
        if let Some(o) = &self.order {
            put_order(&mut out, o);
        }
        out
    }

    /// Parses a body. The stream boundary is found by replaying the commands,
    /// which needs no pool: lookups against an empty pool simply fail.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let head = r.varint()?;
        let (n, has_order) = (head >> 1, head & 1 == 1);
        if n > buf.len() as u64 * 4 {
            return Err(Error::Decode("id count exceeds message size".into()));
        }
        let (_, used) = decode_ids(r.remaining(), n as usize, &[])?;
        let stream = r.take(used)?.to_vec();
        let order = if has_order {
            Some(read_order(&mut r, n)?)
        } else {
            None
        };
        r.finish()?;
        Ok(XthinnerBody { n, stream, order })
    }
}

fn sorted_prefixes(txs: &[Transaction]) -> Vec<u64> {
    let mut v: Vec<u64> = txs.iter().map(|t| t.txid.prefix_u64()).collect();
    v.sort_unstable();
    v
}

/// `sender_pool` must contain every block transaction.
pub fn xthinner_encode(block: &BlockTemplate, sender_pool: &[Transaction]) -> XthinnerBody {
    let pool = sorted_prefixes(sender_pool);
    let ids = sorted_prefixes(&block.txs);
    XthinnerBody {
        n: block.len() as u64,
        stream: encode_ids(&ids, &pool),
        order: block_order(block),
    }
}

/// Block positions in txid order; unresolved ones are listed in `missing`.
#[derive(Clone, Debug)]
pub struct XthinnerReconstruction {
    pub slots: Vec<Option<Transaction>>,
    pub missing: Vec<usize>,
    order: Option<Vec<u64>>,
}

impl XthinnerReconstruction {
    /// Fills missing positions with `txs` (in the same order as `missing`) and
    /// restores block order.
    pub fn fill(mut self, txs: &[Transaction]) -> Result<BlockTemplate> {
        if txs.len() != self.missing.len() {
            return Err(Error::InvalidInput("fill count mismatch".into()));
        }
        for (&i, tx) in self.missing.iter().zip(txs) {
            self.slots[i] = Some(*tx);
        }
        let sorted: Vec<Transaction> = self.slots.into_iter().map(Option::unwrap).collect();
        let txs = match &self.order {
            Some(o) => apply_order(sorted, o)?,
            None => sorted,
        };
        BlockTemplate::new(txs)
    }
}

pub fn xthinner_decode(
    body: &XthinnerBody,
    receiver_pool: &[Transaction],
) -> Result<XthinnerReconstruction> {
    let mut by_prefix: HashMap<u64, Transaction> = HashMap::with_capacity(receiver_pool.len());
    for tx in receiver_pool {
        by_prefix.insert(tx.txid.prefix_u64(), *tx);
    }
    let mut pool: Vec<u64> = by_prefix.keys().copied().collect();
    pool.sort_unstable();
    let (resolved, _) = decode_ids(&body.stream, body.n as usize, &pool)?;
    Ok(XthinnerReconstruction {
        slots: resolved
            .ids
            .iter()
            .map(|id| id.map(|p| by_prefix[&p]))
            .collect(),
        missing: resolved.missing,
        order: body.order.clone(),
    })
}

/// One XThinner relay including the repair round.
#[derive(Clone, Debug)]
pub struct XthinnerExchange {
    pub block: BlockTemplate,
    pub body_bytes: usize,
    pub repair_bytes: usize,
    pub full_block_bytes: usize,
    pub missing: usize,
}

pub fn xthinner_exchange(
    block: &BlockTemplate,
    sender_pool: &[Transaction],
    receiver_pool: &[Transaction],
) -> Result<XthinnerExchange> {
    let body = xthinner_encode(block, sender_pool);
    let wire = body.to_bytes();
    let body = XthinnerBody::from_bytes(&wire)?;
    let rec = xthinner_decode(&body, receiver_pool)?;
    let mut sorted = block.txs.clone();
    sorted.sort_unstable_by_key(|t| t.txid);
    let fetched: Vec<Transaction> = rec.missing.iter().map(|&i| sorted[i]).collect();
    let repair_bytes = if fetched.is_empty() {
        0
    } else {
        let request = 32 + varint_len(fetched.len() as u64) + 4 * fetched.len();
        let response = 32
            + varint_len(fetched.len() as u64)
            + fetched.iter().map(Transaction::wire_len).sum::<usize>();
        request + response
    };
    let missing = fetched.len();
    let rebuilt = rec.fill(&fetched);
    let (rebuilt, full_block_bytes) = match rebuilt {
        Ok(b) if b.merkle_root() == block.merkle_root() => (b, 0),
        _ => (
            block.clone(),
            block.txs.iter().map(Transaction::wire_len).sum(),
        ),
    };
    Ok(XthinnerExchange {
        block: rebuilt,
        body_bytes: wire.len(),
        repair_bytes,
        full_block_bytes,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prefix_helpers() {
        assert_eq!(
            common_prefix(0x1122_3344_5566_7788, 0x1122_3399_0000_0000),
            3
        );
        assert_eq!(common_prefix(5, 5), 8);
        assert_eq!(byte_at(0x1122_3344_5566_7788, 0), 0x11);
        assert_eq!(byte_at(0x1122_3344_5566_7788, 7), 0x88);
    }

    #[test]
    fn lookup_bounds() {
        let pool = [
            0x0100_0000_0000_0000,
            0x01ff_0000_0000_0000,
            0x0200_0000_0000_0000,
        ];
        assert_eq!(lookup(&[0x01], &pool), None);
        assert_eq!(lookup(&[0x02], &pool), Some(pool[2]));
        assert_eq!(lookup(&[0x01, 0xff], &pool), Some(pool[1]));
        assert_eq!(lookup(&[0x03], &pool), None);
        let full: Vec<u8> = (0..8).map(|i| byte_at(pool[1], i)).collect();
        assert_eq!(lookup(&full, &pool), Some(pool[1]));
    }

    #[test]
    fn single_id_is_four_bytes() {
        let x = 0xdead_beef_0000_0001u64;
        let stream = encode_ids(&[x], &[x]);
        // group byte, pushed byte, checksum
        assert_eq!(stream.len(), 3);
        let body = XthinnerBody {
            n: 1,
            stream,
            order: None,
        };
        assert_eq!(body.to_bytes().len(), 4);
        let (r, _) = decode_ids(&body.stream, 1, &[x]).unwrap();
        assert_eq!(r.ids, vec![Some(x)]);
    }

    #[test]
    fn id_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 7, 8, 9, 100, 1000] {
            let mut pool: Vec<u64> = (0..3 * n).map(|_| rng.random()).collect();
            let mut block = pool[..n].to_vec();
            pool.sort_unstable();
            block.sort_unstable();
            let stream = encode_ids(&block, &pool);
            let (r, used) = decode_ids(&stream, n, &pool).unwrap();
            assert_eq!(used, stream.len());
            assert!(r.missing.is_empty());
            assert_eq!(r.ids, block.iter().map(|&b| Some(b)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn absent_id_is_missing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pool: Vec<u64> = (0..300).map(|_| rng.random()).collect();
        let mut block = pool[..100].to_vec();
        pool.sort_unstable();
        block.sort_unstable();
        let stream = encode_ids(&block, &pool);
        let gone = block[37];
        let receiver: Vec<u64> = pool.iter().copied().filter(|&v| v != gone).collect();
        let (r, _) = decode_ids(&stream, 100, &receiver).unwrap();
        assert!(r.missing.contains(&37));
        assert!(r.missing.len() <= CHECKSUM_GROUP);
    }
}
