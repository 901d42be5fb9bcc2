//! End-to-end relay of one block between two peers with different pools,
//! including every repair round a protocol defines.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::mempool::priority_order;
use crate::protocols::compact::{self, CompactBody};
use crate::protocols::dino::{default_generator, dino_decode, dino_encode, DinoBody};
use crate::protocols::graphene::{
    graphene_decode, graphene_encode, graphene_protocol2, GrapheneBody, GrapheneConfig,
};
use crate::protocols::ipfs::{ipfs_decode, ipfs_encode, ContentStore, IpfsBody};
use crate::protocols::xthin::{xthin_exchange, XThinConfig};
use crate::protocols::xthinner::xthinner_exchange;
use crate::protocols::Protocol;
use crate::tx::{Transaction, TxFactory};

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub block_txs: usize,
    /// Sender pool size as a multiple of the block.
    pub multiplier: f64,
    /// Fraction of block transactions the receiver has never seen.
    pub missing: f64,
    /// Receiver-only transactions as a fraction of the sender pool.
    pub extra: f64,
    /// Random transpositions applied to the fee-ordered block.
    pub swaps: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            block_txs: 200,
            multiplier: 2.92,
            missing: 0.0,
            extra: 0.0,
            swaps: 0,
        }
    }
}

/// A block plus the two pools it is relayed between, in arrival order.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub block: BlockTemplate,
    pub sender_pool: Vec<Transaction>,
    pub receiver_pool: Vec<Transaction>,
    pub salt: u64,
}

pub fn random_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&cfg.missing) || !(cfg.extra >= 0.0) || !(cfg.multiplier >= 1.0) {
        return Err(Error::Parameter("scenario fractions out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factory = TxFactory::new(seed);
    let pool_len = ((cfg.block_txs as f64 * cfg.multiplier).round() as usize).max(cfg.block_txs);
    let sender_pool: Vec<Transaction> = (0..pool_len)
        .map(|_| factory.make(rng.random_range(1_000..1_000_000_000)))
        .collect();
    let mut block_txs = priority_order(sender_pool.clone());
    block_txs.truncate(cfg.block_txs);
    for _ in 0..cfg.swaps {
        if block_txs.len() < 2 {
            break;
        }
        let i = rng.random_range(0..block_txs.len());
        let j = rng.random_range(0..block_txs.len());
        block_txs.swap(i, j);
    }
    let mut candidates: Vec<usize> = (0..block_txs.len()).collect();
    candidates.shuffle(&mut rng);
    let drop_count = (cfg.missing * block_txs.len() as f64).round() as usize;
    let dropped: HashSet<_> = candidates[..drop_count]
        .iter()
        .map(|&i| block_txs[i].txid)
        .collect();
    let extra = (cfg.extra * pool_len as f64).round() as usize;
    let mut receiver_pool: Vec<Transaction> = sender_pool
        .iter()
        .filter(|t| !dropped.contains(&t.txid))
        .copied()
        .collect();
    for _ in 0..extra {
        receiver_pool.push(factory.make(rng.random_range(1_000..1_000_000_000)));
    }
    Ok(Scenario {
        block: BlockTemplate::new(block_txs)?,
        sender_pool,
        receiver_pool,
        salt: rng.random(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelayPath {
    /// The first message sufficed.
    Direct,
    /// Missing transactions were requested in a second round.
    Repaired,
    /// Graphene's second protocol completed the block.
    SecondProtocol,
    /// The whole block was retransmitted.
    FullBlock,
}

#[derive(Clone, Debug)]
pub struct Relay {
    pub block: BlockTemplate,
    /// Everything sent in either direction, fixed block bytes included.
    pub bytes: usize,
    pub path: RelayPath,
}

fn full_block_bytes(block: &BlockTemplate) -> usize {
    block.txs.iter().map(Transaction::wire_len).sum()
}

/// Relays `s.block` from sender to receiver under `protocol`. Messages pass
/// through their byte encodings.
pub fn relay(protocol: Protocol, s: &Scenario, graphene: &GrapheneConfig) -> Result<Relay> {
    let base = protocol.base_bytes();
    let root = s.block.merkle_root();
    let (block, body_bytes, extra_bytes, path) = match protocol {
        Protocol::Compact => {
            let wire = compact::compact_encode(&s.block, s.salt).to_bytes()?;
            let body = CompactBody::from_bytes(&wire)?;
            let rec = compact::compact_decode(&body, &s.receiver_pool);
            let repair = compact::repair_bytes(&s.block, &rec.missing);
            let fetched: Vec<Transaction> = rec.missing.iter().map(|&i| s.block.txs[i]).collect();
            let path = if rec.missing.is_empty() {
                RelayPath::Direct
            } else {
                RelayPath::Repaired
            };
            match rec.fill(&fetched) {
                Ok(b) if b.merkle_root() == root => (b, wire.len(), repair, path),
                // a short-id collision resolved to the wrong transaction
                _ => (
                    s.block.clone(),
                    wire.len(),
                    repair + full_block_bytes(&s.block),
                    RelayPath::FullBlock,
                ),
            }
        }
        Protocol::XThin => {
            let cfg = XThinConfig {
                salt: s.salt,
                ..Default::default()
            };
            let x = xthin_exchange(&s.block, &s.receiver_pool, &cfg)?;
            let path = if x.fallback_bytes > 0 {
                RelayPath::FullBlock
            } else if x.rounds > 1 {
                RelayPath::Repaired
            } else {
                RelayPath::Direct
            };
            (
                x.block,
                x.filter_bytes + x.body_bytes,
                x.repair_bytes + x.fallback_bytes,
                path,
            )
        }
        Protocol::Graphene => {
            let cfg = GrapheneConfig {
                salt: s.salt,
                ..*graphene
            };
            // a receiver missing much of the block can hold fewer than n txs
            let m = (s.receiver_pool.len() as u64).max(s.block.txs.len() as u64);
            let wire = graphene_encode(&s.block, m, &cfg)?.to_bytes();
            let body = GrapheneBody::from_bytes(&wire)?;
            match graphene_decode(&body, &s.receiver_pool, &root) {
                Ok(b) => (b, wire.len(), 0, RelayPath::Direct),
                Err(fb) => {
                    let out = graphene_protocol2(&fb, &s.block, &cfg)?;
                    let path = if out.full_block_fallback {
                        RelayPath::FullBlock
                    } else {
                        RelayPath::SecondProtocol
                    };
                    (out.block.clone(), wire.len(), out.total_bytes(), path)
                }
            }
        }
        Protocol::XThinner => {
            let x = xthinner_exchange(&s.block, &s.sender_pool, &s.receiver_pool)?;
            let path = if x.full_block_bytes > 0 {
                RelayPath::FullBlock
            } else if x.missing > 0 {
                RelayPath::Repaired
            } else {
                RelayPath::Direct
            };
            (
                x.block,
                x.body_bytes,
                x.repair_bytes + x.full_block_bytes,
                path,
            )
        }
        Protocol::Ipfs => {
            let wire = ipfs_encode(&s.block).to_bytes()?;
            let body = IpfsBody::from_bytes(&wire)?;
            // content is addressed network-wide, so the sender's pool is reachable
            let mut store = ContentStore::new();
            for tx in s.receiver_pool.iter().chain(&s.sender_pool) {
                store.put(*tx);
            }
            (
                ipfs_decode(&body, &store)?,
                wire.len(),
                0,
                RelayPath::Direct,
            )
        }
        Protocol::Dino => {
            let body = dino_encode(
                &s.block,
                &s.receiver_pool,
                &s.sender_pool,
                &default_generator,
            )?;
            let wire = body.to_bytes();
            let body = DinoBody::from_bytes(&wire)?;
            let b = dino_decode(&body, &s.receiver_pool, &s.sender_pool, &default_generator)?;
            (b, wire.len(), 0, RelayPath::Direct)
        }
    };
    Ok(Relay {
        block,
        bytes: base + body_bytes + extra_bytes,
        path,
    })
}
