//! Simplified Dino: both peers rebuild a predicted block from transaction
//! lists they already share, and the sender ships only the rules that turn
//! the prediction into the real block.
//!
//! Body layout (all integers varint): missing count | missing transaction
//! records | receiving anchor | sending anchor | n | if n > 0: interval start,
//! interval length - 1 | deletion count | deletion offsets (delta coded) |
//! reorder count | (position in trimmed prediction, block position) pairs.

use std::collections::{HashMap, HashSet};

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::mempool::priority_order;
use crate::protocols::wire::{put_varint, varint_len, Reader};
use crate::tx::{Transaction, TxId, TX_RECORD_MIN};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DinoBody {
    pub missing: Vec<Transaction>,
    /// Prefix lengths of the receiving and sending lists used for prediction.
    pub recv_anchor: u64,
    pub send_anchor: u64,
    pub n: u64,
    /// Inclusive index range of the prediction containing the block.
    pub interval: Option<(u64, u64)>,
    /// Offsets from the interval start of predicted entries not in the block.
    pub deletions: Vec<u64>,
    /// `(trimmed index, block position)` for entries out of order.
    pub reorders: Vec<(u64, u64)>,
}

impl DinoBody {
    pub fn serialized_len(&self) -> usize {
        let mut len = varint_len(self.missing.len() as u64)
            + self
                .missing
                .iter()
                .map(Transaction::wire_len)
                .sum::<usize>()
            + varint_len(self.recv_anchor)
            + varint_len(self.send_anchor)
            + varint_len(self.n);
        if let Some((lo, hi)) = self.interval {
            len += varint_len(lo) + varint_len(hi - lo);
            len += varint_len(self.deletions.len() as u64);
            let mut prev = 0;
            for &d in &self.deletions {
                len += varint_len(d - prev);
                prev = d;
            }
            len += varint_len(self.reorders.len() as u64);
            len += self
                .reorders
                .iter()
                .map(|&(a, b)| varint_len(a) + varint_len(b))
                .sum::<usize>();
        }
        len
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_varint(&mut out, self.missing.len() as u64);
        for tx in &self.missing {
            tx.write_wire(&mut out);
        }
        put_varint(&mut out, self.recv_anchor);
        put_varint(&mut out, self.send_anchor);
        put_varint(&mut out, self.n);
        if let Some((lo, hi)) = self.interval {
            put_varint(&mut out, lo);
            put_varint(&mut out, hi - lo);
            put_varint(&mut out, self.deletions.len() as u64);
            let mut prev = 0;
            for &d in &self.deletions {
                put_varint(&mut out, d - prev);
                prev = d;
            }
            put_varint(&mut out, self.reorders.len() as u64);
            for &(a, b) in &self.reorders {
                put_varint(&mut out, a);
                put_varint(&mut out, b);
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let count = r.bounded_count(TX_RECORD_MIN, true)?;
        let missing = (0..count).map(|_| r.transaction()).collect::<Result<_>>()?;
        let recv_anchor = r.varint()?;
        let send_anchor = r.varint()?;
        let n = r.varint()?;
        let mut body = DinoBody {
            missing,
            recv_anchor,
            send_anchor,
            n,
            ..Default::default()
        };
        if n > 0 {
            let lo = r.varint()?;
            let hi = lo
                .checked_add(r.varint()?)
                .ok_or_else(|| Error::Decode("interval overflow".into()))?;
            body.interval = Some((lo, hi));
            let dels = r.bounded_count(1, true)?;
            let mut prev = 0u64;
            for _ in 0..dels {
                prev = prev
                    .checked_add(r.varint()?)
                    .ok_or_else(|| Error::Decode("deletion offset overflow".into()))?;
                body.deletions.push(prev);
            }
            let moves = r.bounded_count(2, true)?;
            for _ in 0..moves {
                body.reorders.push((r.varint()?, r.varint()?));
            }
        }
        r.finish()?;
        Ok(body)
    }
}

/// Block generation applied to the prediction pool.
pub type Generator<'a> = &'a dyn Fn(Vec<Transaction>) -> Vec<Transaction>;

/// Default generator: every candidate, in block priority order.
pub fn default_generator(txs: Vec<Transaction>) -> Vec<Transaction> {
    priority_order(txs)
}

fn anchor(set: &[Transaction], in_block: &HashSet<TxId>) -> usize {
    set.iter()
        .rposition(|t| in_block.contains(&t.txid))
        .map_or(0, |i| i + 1)
}

fn prediction(
    missing: &[Transaction],
    recv: &[Transaction],
    send: &[Transaction],
    generator: Generator<'_>,
) -> Vec<Transaction> {
    let mut seen = HashSet::new();
    let pool: Vec<Transaction> = missing
        .iter()
        .chain(recv)
        .chain(send)
        .filter(|t| seen.insert(t.txid))
        .copied()
        .collect();
    generator(pool)
}

/// Indices of one longest strictly increasing subsequence of `seq`.
fn lis_indices(seq: &[u64]) -> Vec<usize> {
    let mut tails: Vec<usize> = Vec::new();
    let mut parent = vec![usize::MAX; seq.len()];
    for i in 0..seq.len() {
        let k = tails.partition_point(|&t| seq[t] < seq[i]);
        if k > 0 {
            parent[i] = tails[k - 1];
        }
        if k == tails.len() {
            tails.push(i);
        } else {
            tails[k] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied().unwrap_or(usize::MAX);
    while cur != usize::MAX {
        out.push(cur);
        cur = parent[cur];
    }
    out.reverse();
    out
}

pub fn dino_encode(
    block: &BlockTemplate,
    recv_set: &[Transaction],
    send_set: &[Transaction],
    generator: Generator<'_>,
) -> Result<DinoBody> {
    let in_block: HashSet<TxId> = block.txs.iter().map(|t| t.txid).collect();
    let known: HashSet<TxId> = recv_set.iter().chain(send_set).map(|t| t.txid).collect();
    let missing: Vec<Transaction> = block
        .txs
        .iter()
        .filter(|t| !known.contains(&t.txid))
        .copied()
        .collect();
    let ra = anchor(recv_set, &in_block);
    let sa = anchor(send_set, &in_block);
    let mut body = DinoBody {
        recv_anchor: ra as u64,
        send_anchor: sa as u64,
        n: block.len() as u64,
        ..Default::default()
    };
    let pblk = prediction(&missing, &recv_set[..ra], &send_set[..sa], generator);
    body.missing = missing;
    if block.is_empty() {
        return Ok(body);
    }
    let block_pos: HashMap<TxId, u64> = block
        .txs
        .iter()
        .enumerate()
        .map(|(i, t)| (t.txid, i as u64))
        .collect();
    let hits: Vec<usize> = (0..pblk.len())
        .filter(|&i| block_pos.contains_key(&pblk[i].txid))
        .collect();
    if hits.len() != block.len() {
        return Err(Error::InvalidInput(
            "generator dropped block transactions from the prediction".into(),
        ));
    }
    let (lo, hi) = (hits[0], *hits.last().unwrap());
    body.interval = Some((lo as u64, hi as u64));
    body.deletions = (lo..=hi)
        .filter(|&i| !block_pos.contains_key(&pblk[i].txid))
        .map(|i| (i - lo) as u64)
        .collect();
    let ranks: Vec<u64> = hits.iter().map(|&i| block_pos[&pblk[i].txid]).collect();
    let keep: HashSet<usize> = lis_indices(&ranks).into_iter().collect();
    body.reorders = (0..ranks.len())
        .filter(|j| !keep.contains(j))
        .map(|j| (j as u64, ranks[j]))
        .collect();
    Ok(body)
}

pub fn dino_decode(
    body: &DinoBody,
    recv_set: &[Transaction],
    send_set: &[Transaction],
    generator: Generator<'_>,
) -> Result<BlockTemplate> {
    let (ra, sa) = (body.recv_anchor as usize, body.send_anchor as usize);
    if ra > recv_set.len() || sa > send_set.len() {
        return Err(Error::Decode("anchor past end of shared list".into()));
    }
    let n = body.n as usize;
    let Some((lo, hi)) = body.interval else {
        return if n == 0 {
            BlockTemplate::new(Vec::new())
        } else {
            Err(Error::Decode("non-empty block without interval".into()))
        };
    };
    let pblk = prediction(&body.missing, &recv_set[..ra], &send_set[..sa], generator);
    let (lo, hi) = (lo as usize, hi as usize);
    if hi >= pblk.len() {
        return Err(Error::Decode("interval past end of prediction".into()));
    }
    let dels: HashSet<u64> = body.deletions.iter().copied().collect();
    let trimmed: Vec<Transaction> = (lo..=hi)
        .filter(|&i| !dels.contains(&((i - lo) as u64)))
        .map(|i| pblk[i])
        .collect();
    if trimmed.len() != n {
        return Err(Error::Decode(format!(
            "rules leave {} transactions, expected {n}",
            trimmed.len()
        )));
    }
    let mut slots: Vec<Option<Transaction>> = vec![None; n];
    let mut moved = vec![false; n];
    for &(j, pos) in &body.reorders {
        let (j, pos) = (j as usize, pos as usize);
        if j >= n || pos >= n || slots[pos].is_some() || moved[j] {
            return Err(Error::Decode("invalid reorder entry".into()));
        }
        slots[pos] = Some(trimmed[j]);
        moved[j] = true;
    }
    let mut rest = (0..n).filter(|&j| !moved[j]).map(|j| trimmed[j]);
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        *slot = rest.next();
    }
    BlockTemplate::new(slots.into_iter().map(Option::unwrap).collect())
}
