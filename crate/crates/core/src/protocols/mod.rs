//! Block compression codecs and their wire-size accounting.

pub mod compact;
pub mod dino;
pub mod graphene;
pub mod ipfs;
pub mod order;
pub mod relay;
pub mod wire;
pub mod xthin;
pub mod xthinner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::block::{BlockTemplate, COINBASE_BYTES, HEADER_BYTES};
use crate::error::{Error, Result};
use crate::tx::Transaction;

pub use compact::{compact_decode, compact_encode, CompactBody};
pub use dino::{default_generator, dino_decode, dino_encode, DinoBody};
pub use graphene::{
    graphene_decode, graphene_encode, graphene_protocol2, GrapheneBody, GrapheneConfig,
    GrapheneFallback,
};
pub use ipfs::{ipfs_decode, ipfs_encode, ContentStore, IpfsBody};
pub use xthin::{xthin_exchange, ThinBody, XThinConfig};
pub use xthinner::{xthinner_decode, xthinner_encode, XthinnerBody};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Compact,
    XThin,
    Graphene,
    XThinner,
    Ipfs,
    Dino,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::Compact,
        Protocol::XThin,
        Protocol::Graphene,
        Protocol::XThinner,
        Protocol::Ipfs,
        Protocol::Dino,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Compact => "compact",
            Protocol::XThin => "xthin",
            Protocol::Graphene => "graphene",
            Protocol::XThinner => "xthinner",
            Protocol::Ipfs => "ipfs",
            Protocol::Dino => "dino",
        }
    }

    /// Bytes the block carries besides the compressed transaction list.
    pub fn base_bytes(self) -> usize {
        match self {
            Protocol::Ipfs => HEADER_BYTES,
            _ => HEADER_BYTES + COINBASE_BYTES,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or_else(|| {
                let names: Vec<&str> = Protocol::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidInput(format!(
                    "unknown protocol '{s}' (valid: {})",
                    names.join(", ")
                ))
            })
    }
}

/// A block as relayed: header, coinbase and the protocol body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedBlock {
    pub protocol: Protocol,
    pub header: [u8; HEADER_BYTES],
    pub coinbase_bytes: usize,
    pub payload: Vec<u8>,
}

impl CompressedBlock {
    pub fn new(protocol: Protocol, block: &BlockTemplate, payload: Vec<u8>) -> Self {
        CompressedBlock {
            protocol,
            header: block.header(),
            coinbase_bytes: protocol.base_bytes() - HEADER_BYTES,
            payload,
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload.len()
    }

    pub fn total_bytes(&self) -> usize {
        HEADER_BYTES + self.coinbase_bytes + self.payload.len()
    }

    pub fn payload_hex(&self) -> String {
        self.payload.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// What each codec needs to know about the peers.
#[derive(Clone, Copy, Debug, Default)]
pub struct Environment<'a> {
    pub salt: u64,
    /// Receiver's mempool (XThin filter, Graphene pool size, XThinner fallback).
    pub receiver_pool: Option<&'a [Transaction]>,
    /// Sender's mempool for XThinner prefix lengths; defaults to the receiver's.
    pub sender_pool: Option<&'a [Transaction]>,
    pub recv_set: Option<&'a [Transaction]>,
    pub send_set: Option<&'a [Transaction]>,
    pub graphene: GrapheneConfig,
    pub xthin: XThinConfig,
}

fn need<'a>(v: Option<&'a [Transaction]>, what: &str, p: Protocol) -> Result<&'a [Transaction]> {
    v.ok_or_else(|| Error::InvalidInput(format!("{p} needs {what} in the environment")))
}

/// Encodes `block` for relay under `protocol`.
pub fn compress(
    protocol: Protocol,
    block: &BlockTemplate,
    env: &Environment<'_>,
) -> Result<CompressedBlock> {
    let payload = match protocol {
        Protocol::Compact => compact_encode(block, env.salt).to_bytes()?,
        Protocol::XThin => {
            let pool = need(env.receiver_pool, "a receiver pool", protocol)?;
            let filter = xthin::receiver_filter(
                pool,
                &XThinConfig {
                    salt: env.salt,
                    ..env.xthin
                },
            )?;
            xthin::xthin_encode(block, &filter).to_bytes()?
        }
        Protocol::Graphene => {
            let pool = need(env.receiver_pool, "a receiver pool", protocol)?;
            let cfg = GrapheneConfig {
                salt: env.salt,
                ..env.graphene
            };
            graphene_encode(block, pool.len() as u64, &cfg)?.to_bytes()
        }
        Protocol::XThinner => {
            let pool = env
                .sender_pool
                .or(env.receiver_pool)
                .ok_or_else(|| Error::InvalidInput("xthinner needs a sender pool".into()))?;
            xthinner_encode(block, pool).to_bytes()
        }
        Protocol::Ipfs => ipfs_encode(block).to_bytes()?,
        Protocol::Dino => {
            let recv = need(env.recv_set, "a receiving list", protocol)?;
            let send = need(env.send_set, "a sending list", protocol)?;
            dino_encode(block, recv, send, &default_generator)?.to_bytes()
        }
    };
    Ok(CompressedBlock::new(protocol, block, payload))
}

/// Serialized size of the compressed block, header and coinbase included.
pub fn measure_size(
    protocol: Protocol,
    block: &BlockTemplate,
    env: &Environment<'_>,
) -> Result<u64> {
    Ok(compress(protocol, block, env)?.total_bytes() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert_eq!("XThinner".parse::<Protocol>().unwrap(), Protocol::XThinner);
        let err = "bogus".parse::<Protocol>().unwrap_err().to_string();
        assert!(err.contains("compact") && err.contains("dino"));
    }
}
