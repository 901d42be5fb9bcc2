//! Graphene: a Bloom filter of the block plus an IBLT that repairs the
//! filter's false positives (protocol 1), and a second round for receivers
//! missing block transactions (protocol 2).
//!
//! Protocol 1 body: varint(n << 1 | has_order) | u8 has_filter | filter |
//! IBLT | [n varint order indexes].

use std::collections::{HashMap, HashSet};
use std::f64::consts::LN_2;

use crate::block::{BlockTemplate, Digest32};
use crate::error::{Error, Result};
use crate::protocols::order::{apply_order, block_order, put_order, read_order};
use crate::protocols::wire::{put_varint, varint_len, Reader};
use crate::sketches::iblt::assured_cells;
use crate::sketches::{bloom_params, short_id, BloomFilter, Iblt};
use crate::tx::{Transaction, TX_RECORD_MIN};

pub const DEFAULT_TAU: f64 = 24.0;
pub const DEFAULT_BETA: f64 = 239.0 / 240.0;
const SECOND_ROUND_SALT: u64 = 0x5bd1_e995;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrapheneConfig {
    /// IBLT bytes per recoverable item in the cost model.
    pub tau: f64,
    /// Decode assurance.
    pub beta: f64,
    pub salt: u64,
}

impl Default for GrapheneConfig {
    fn default() -> Self {
        GrapheneConfig {
            tau: DEFAULT_TAU,
            beta: DEFAULT_BETA,
            salt: 0,
        }
    }
}

impl GrapheneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Parameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Parameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Bytes of filter plus IBLT predicted by the cost model for a given `a`.
pub fn cost_model(a: f64, n: u64, m: u64, tau: f64) -> f64 {
    let f = a / (m - n) as f64;
    n as f64 * -f.ln() / (8.0 * LN_2 * LN_2) + a * tau
}

/// Expected filter false positives minimizing [`cost_model`], clamped to `[1, m - n]`.
pub fn optimal_a(n: u64, m: u64, tau: f64) -> Result<f64> {
    if n == 0 || m <= n {
        return Err(Error::Parameter(format!(
            "protocol 1 needs m > n >= 1 (n={n}, m={m})"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    let a = n as f64 / (8.0 * tau * LN_2 * LN_2);
    Ok(a.clamp(1.0, (m - n) as f64))
}

/// Upper bound on a count with the given mean that holds with probability
/// `beta`, from the multiplicative Chernoff bound.
pub fn chernoff_upper(mean: f64, beta: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let l = (1.0 / (1.0 - beta)).ln();
    let delta = (l + (l * l + 8.0 * mean * l).sqrt()) / (2.0 * mean);
    ((1.0 + delta) * mean).ceil() as u64
}

/// False-positive rate of a filter with `m_bits` bits and `k` probes holding `n` items.
pub fn expected_fpr(m_bits: u64, k: u32, n: u64) -> f64 {
    (1.0 - (-(k as f64) * n as f64 / m_bits as f64).exp()).powi(k as i32)
}

/// Parameters of a protocol 1 message, derived from `(n, m)` alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphenePlan {
    pub n: u64,
    pub m: u64,
    pub a: f64,
    /// `None` when every pool transaction would pass the filter anyway.
    pub filter: Option<(u64, u32)>,
    pub fpr: f64,
    /// Items the IBLT must be able to recover.
    pub recover: u64,
    pub iblt_cells: u64,
}

pub fn plan(n: u64, m: u64, cfg: &GrapheneConfig) -> Result<GraphenePlan> {
    cfg.validate()?;
    if m < n {
        return Err(Error::Parameter(format!(
            "receiver pool ({m}) smaller than block ({n})"
        )));
    }
    if n == 0 || m == n {
        let recover = ((0.01 * n as f64).ceil() as u64).max(1);
        return Ok(GraphenePlan {
            n,
            m,
            a: 0.0,
            filter: None,
            fpr: 1.0,
            recover,
            iblt_cells: assured_cells(recover),
        });
    }
    let a = optimal_a(n, m, cfg.tau)?;
    let fpr = a / (m - n) as f64;
    let filter = if fpr < 1.0 {
        Some(bloom_params(n, fpr)?)
    } else {
        None
    };
    let recover = chernoff_upper(a, cfg.beta).min(m - n).max(1);
    Ok(GraphenePlan {
        n,
        m,
        a,
        filter,
        fpr,
        recover,
        iblt_cells: assured_cells(recover),
    })
}

impl GraphenePlan {
    /// Serialized protocol 1 body length for a txid-sorted block.
    pub fn body_len(&self) -> usize {
        varint_len(self.n << 1)
            + 1
            + self
                .filter
                .map_or(0, |(bits, _)| BloomFilter::serialized_len_for(bits))
            + Iblt::serialized_len_for(self.iblt_cells)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrapheneBody {
    pub n: u64,
    pub filter: Option<BloomFilter>,
    pub iblt: Iblt,
    /// Position of each block transaction in txid order; `None` when the
    /// block is already txid-sorted.
    pub order: Option<Vec<u64>>,
}

impl GrapheneBody {
    pub fn salt(&self) -> u64 {
        self.iblt.salt()
    }

    pub fn serialized_len(&self) -> usize {
        varint_len(self.n << 1 | self.order.is_some() as u64)
            + 1
            + self.filter.as_ref().map_or(0, BloomFilter::serialized_len)
            + self.iblt.serialized_len()
            + self
                .order
                .as_ref()
                .map_or(0, |o| o.iter().map(|&i| varint_len(i)).sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_varint(&mut out, self.n << 1 | self.order.is_some() as u64);
        out.push(self.filter.is_some() as u8);
        if let Some(bf) = &self.filter {
            bf.write_to(&mut out);
        }
        self.iblt.write_to(&mut out);
        if let Some(o) = &self.order {
            put_order(&mut out, o);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let head = r.varint()?;
        let (n, has_order) = (head >> 1, head & 1 == 1);
        let filter = match r.u8()? {
            0 => None,
            1 => {
                let (bf, used) = BloomFilter::read_from(r.remaining())?;
                r.skip(used)?;
                Some(bf)
            }
            b => return Err(Error::Decode(format!("bad filter flag {b}"))),
        };
        let (iblt, used) = Iblt::read_from(r.remaining())?;
        r.skip(used)?;
        let order = if has_order {
            Some(read_order(&mut r, n)?)
        } else {
            None
        };
        r.finish()?;
        Ok(GrapheneBody {
            n,
            filter,
            iblt,
            order,
        })
    }
}

/// Builds the protocol 1 message for a receiver whose pool holds `m` transactions.
pub fn graphene_encode(
    block: &BlockTemplate,
    m: u64,
    cfg: &GrapheneConfig,
) -> Result<GrapheneBody> {
    let n = block.len() as u64;
    let p = plan(n, m, cfg)?;
    let mut filter = match p.filter {
        Some((bits, k)) => Some(BloomFilter::with_params(bits, k, cfg.salt)?),
        None => None,
    };
    let mut iblt = Iblt::new(p.iblt_cells, 3, cfg.salt)?;
    for tx in &block.txs {
        let sid = short_id(cfg.salt, &tx.txid);
        if let Some(bf) = filter.as_mut() {
            bf.insert(sid);
        }
        iblt.insert(sid);
    }
    Ok(GrapheneBody {
        n,
        filter,
        iblt,
        order: block_order(block),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FallbackReason {
    /// Some block transactions are not in the receiver's pool.
    MissingTransactions,
    DecodeFailure,
    /// Reconstructed set has the wrong size or Merkle root.
    Mismatch,
}

/// Receiver state handed to protocol 2 after protocol 1 fails.
#[derive(Clone, Debug)]
pub struct GrapheneFallback {
    pub reason: FallbackReason,
    /// Pool transactions that passed the block filter.
    pub candidates: Vec<Transaction>,
    pub n: u64,
    pub m: u64,
    pub salt: u64,
    pub fpr: f64,
    pub order: Option<Vec<u64>>,
}

fn assemble(
    mut txs: Vec<Transaction>,
    order: Option<&[u64]>,
    root: &Digest32,
) -> Option<BlockTemplate> {
    txs.sort_unstable_by_key(|t| t.txid);
    let txs = match order {
        Some(o) => apply_order(txs, o).ok()?,
        None => txs,
    };
    let block = BlockTemplate::new(txs).ok()?;
    (block.merkle_root() == *root).then_some(block)
}

/// Rebuilds the block from the receiver's pool, or reports why protocol 2 is needed.
pub fn graphene_decode(
    body: &GrapheneBody,
    pool: &[Transaction],
    root: &Digest32,
) -> std::result::Result<BlockTemplate, GrapheneFallback> {
    let salt = body.salt();
    let mut by_sid: HashMap<u64, Transaction> = HashMap::new();
    let mut local = Iblt::new(body.iblt.cell_count(), body.iblt.k(), salt)
        .expect("shape copied from a valid table");
    for tx in pool {
        let sid = short_id(salt, &tx.txid);
        if body.filter.as_ref().is_none_or(|bf| bf.contains(sid)) {
            by_sid.insert(sid, *tx);
            local.insert(sid);
        }
    }
    let m = pool.len() as u64;
    let fpr = body
        .filter
        .as_ref()
        .map_or(1.0, |bf| expected_fpr(bf.m_bits(), bf.k(), body.n));
    let fallback = |reason, by_sid: HashMap<u64, Transaction>| {
        let mut candidates: Vec<Transaction> = by_sid.into_values().collect();
        candidates.sort_unstable_by_key(|t| t.txid);
        GrapheneFallback {
            reason,
            candidates,
            n: body.n,
            m,
            salt,
            fpr,
            order: body.order.clone(),
        }
    };
    let diff = match body.iblt.subtract(&local).map(|t| t.decode()) {
        Ok(Ok(d)) => d,
        _ => return Err(fallback(FallbackReason::DecodeFailure, by_sid)),
    };
    if !diff.left.is_empty() {
        return Err(fallback(FallbackReason::MissingTransactions, by_sid));
    }
    let extra: HashSet<u64> = diff.right.into_iter().collect();
    let txs: Vec<Transaction> = by_sid
        .iter()
        .filter(|(sid, _)| !extra.contains(sid))
        .map(|(_, tx)| *tx)
        .collect();
    if txs.len() as u64 != body.n {
        return Err(fallback(FallbackReason::Mismatch, by_sid));
    }
    match assemble(txs, body.order.as_deref(), root) {
        Some(b) => Ok(b),
        None => Err(fallback(FallbackReason::Mismatch, by_sid)),
    }
}

/// Receiver's second-round request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protocol2Request {
    /// Filter over the candidate set; `None` means "assume I have nothing".
    pub filter: Option<BloomFilter>,
    pub y_star: u64,
    pub b: u64,
}

impl Protocol2Request {
    pub fn serialized_len(&self) -> usize {
        1 + self.filter.as_ref().map_or(0, BloomFilter::serialized_len)
            + varint_len(self.y_star)
            + varint_len(self.b)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.push(self.filter.is_some() as u8);
        if let Some(bf) = &self.filter {
            bf.write_to(&mut out);
        }
        put_varint(&mut out, self.y_star);
        put_varint(&mut out, self.b);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let filter = match r.u8()? {
            0 => None,
            1 => {
                let (bf, used) = BloomFilter::read_from(r.remaining())?;
                r.skip(used)?;
                Some(bf)
            }
            b => return Err(Error::Decode(format!("bad filter flag {b}"))),
        };
        let y_star = r.varint()?;
        let b = r.varint()?;
        r.finish()?;
        Ok(Protocol2Request { filter, y_star, b })
    }
}

/// Sender's second-round reply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protocol2Response {
    pub shipped: Vec<Transaction>,
    pub iblt: Iblt,
}

impl Protocol2Response {
    pub fn serialized_len(&self) -> usize {
        varint_len(self.shipped.len() as u64)
            + self
                .shipped
                .iter()
                .map(Transaction::wire_len)
                .sum::<usize>()
            + self.iblt.serialized_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_varint(&mut out, self.shipped.len() as u64);
        for tx in &self.shipped {
            tx.write_wire(&mut out);
        }
        self.iblt.write_to(&mut out);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let count = r.bounded_count(TX_RECORD_MIN, true)?;
        let shipped = (0..count).map(|_| r.transaction()).collect::<Result<_>>()?;
        let (iblt, used) = Iblt::read_from(r.remaining())?;
        r.skip(used)?;
        r.finish()?;
        Ok(Protocol2Response { shipped, iblt })
    }
}

/// Lower bound on block transactions among the candidates (`x*`) and upper
/// bound on filter false positives among them (`y*`).
///
/// False positives come from at most `m` non-block pool entries, each passing
/// with probability `fpr`, so `y*` is the Chernoff bound on that count.
pub fn estimate_xy(z: u64, m: u64, fpr: f64, beta: f64) -> (u64, u64) {
    let y_star = if fpr >= 1.0 {
        z
    } else {
        chernoff_upper(fpr * m as f64, beta).min(z)
    };
    (z - y_star, y_star)
}

fn second_round_cells(b: u64, y_star: u64, has_filter: bool, beta: f64) -> u64 {
    let missing_bound = if has_filter {
        chernoff_upper(b as f64, beta)
    } else {
        b
    };
    assured_cells((missing_bound + y_star).max(1))
}

pub fn protocol2_request(fb: &GrapheneFallback, cfg: &GrapheneConfig) -> Result<Protocol2Request> {
    cfg.validate()?;
    let z = fb.candidates.len() as u64;
    let (x_star, y_star) = estimate_xy(z, fb.m, fb.fpr, cfg.beta);
    let room = fb.n.saturating_sub(x_star);
    let b_opt = (z as f64 / (8.0 * cfg.tau * LN_2 * LN_2)).max(1.0);
    let (filter, b) = if z == 0 || room == 0 || b_opt >= room as f64 {
        (None, room)
    } else {
        let b = b_opt.ceil() as u64;
        let (bits, k) = bloom_params(z, b as f64 / room as f64)?;
        let mut bf = BloomFilter::with_params(bits, k, fb.salt ^ SECOND_ROUND_SALT)?;
        for tx in &fb.candidates {
            bf.insert(short_id(fb.salt, &tx.txid));
        }
        (Some(bf), b)
    };
    Ok(Protocol2Request { filter, y_star, b })
}

pub fn protocol2_respond(
    block: &BlockTemplate,
    req: &Protocol2Request,
    salt: u64,
    cfg: &GrapheneConfig,
) -> Result<Protocol2Response> {
    let cells = second_round_cells(req.b, req.y_star, req.filter.is_some(), cfg.beta);
    let mut iblt = Iblt::new(cells, 3, salt ^ SECOND_ROUND_SALT)?;
    let mut shipped = Vec::new();
    for tx in &block.txs {
        let sid = short_id(salt, &tx.txid);
        iblt.insert(sid);
        if req.filter.as_ref().is_none_or(|bf| !bf.contains(sid)) {
            shipped.push(*tx);
        }
    }
    Ok(Protocol2Response { shipped, iblt })
}

/// Result of the second round, with every byte the exchange cost.
#[derive(Clone, Debug)]
pub struct Protocol2Outcome {
    pub block: BlockTemplate,
    pub request_bytes: usize,
    pub response_bytes: usize,
    /// Follow-up fetch of block transactions that slipped past the filter.
    pub fetch_bytes: usize,
    /// Whole-block retransmission after a failed second round.
    pub full_block_bytes: usize,
    pub full_block_fallback: bool,
    pub x_star: u64,
    pub y_star: u64,
}

impl Protocol2Outcome {
    pub fn total_bytes(&self) -> usize {
        self.request_bytes + self.response_bytes + self.fetch_bytes + self.full_block_bytes
    }
}

/// Runs the second round between a receiver in state `fb` and the sender of `block`.
pub fn graphene_protocol2(
    fb: &GrapheneFallback,
    block: &BlockTemplate,
    cfg: &GrapheneConfig,
) -> Result<Protocol2Outcome> {
    let req = protocol2_request(fb, cfg)?;
    let req_wire = req.to_bytes();
    let req = Protocol2Request::from_bytes(&req_wire)?;
    let resp = protocol2_respond(block, &req, fb.salt, cfg)?;
    let resp_wire = resp.to_bytes();
    let resp = Protocol2Response::from_bytes(&resp_wire)?;
    let root = block.merkle_root();

    let mut have: HashMap<u64, Transaction> = HashMap::new();
    let mut local = Iblt::new(resp.iblt.cell_count(), resp.iblt.k(), resp.iblt.salt())?;
    for tx in fb.candidates.iter().chain(&resp.shipped) {
        let sid = short_id(fb.salt, &tx.txid);
        if have.insert(sid, *tx).is_none() {
            local.insert(sid);
        }
    }
    let z = fb.candidates.len() as u64;
    let x_star = z - req.y_star;
    let mut out = Protocol2Outcome {
        block: block.clone(),
        request_bytes: req_wire.len(),
        response_bytes: resp_wire.len(),
        fetch_bytes: 0,
        full_block_bytes: 0,
        full_block_fallback: false,
        x_star,
        y_star: req.y_star,
    };

    let rebuilt = resp
        .iblt
        .subtract(&local)
        .ok()
        .and_then(|t| t.decode().ok())
        .and_then(|diff| {
            for sid in &diff.right {
                have.remove(sid);
            }
            if !diff.left.is_empty() {
                let wanted: HashSet<u64> = diff.left.iter().copied().collect();
                let fetched: Vec<Transaction> = block
                    .txs
                    .iter()
                    .filter(|t| wanted.contains(&short_id(fb.salt, &t.txid)))
                    .copied()
                    .collect();
                out.fetch_bytes = varint_len(wanted.len() as u64)
                    + 8 * wanted.len()
                    + varint_len(fetched.len() as u64)
                    + fetched.iter().map(Transaction::wire_len).sum::<usize>();
                for tx in fetched {
                    have.insert(short_id(fb.salt, &tx.txid), tx);
                }
            }
            let txs: Vec<Transaction> = have.into_values().collect();
            if txs.len() as u64 != fb.n {
                return None;
            }
            assemble(txs, fb.order.as_deref(), &root)
        });
    match rebuilt {
        Some(b) => out.block = b,
        None => {
            out.full_block_fallback = true;
            out.full_block_bytes = block.txs.iter().map(Transaction::wire_len).sum();
        }
    }
    Ok(out)
}
