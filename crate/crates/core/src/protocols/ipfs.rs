//! IPFS model: transactions live in a content-addressed store and the block
//! carries only their 32-byte content ids.
//!
//! Body layout: id count (u24) | ids (32 bytes each).

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::protocols::wire::{put_u24, Reader};
use crate::tx::Transaction;

pub const CID_BYTES: usize = 32;
pub const IPFS_FRAMING_BYTES: usize = 3;

pub type ContentId = [u8; 32];

/// SHA-256 of the transaction's wire record.
pub fn content_id(tx: &Transaction) -> ContentId {
    let mut buf = Vec::with_capacity(tx.wire_len());
    tx.write_wire(&mut buf);
    Sha256::digest(&buf).into()
}

/// In-memory stand-in for the content network.
#[derive(Clone, Debug, Default)]
pub struct ContentStore {
    map: HashMap<ContentId, Transaction>,
}

impl ContentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, tx: Transaction) -> ContentId {
        let cid = content_id(&tx);
        self.map.insert(cid, tx);
        cid
    }

    pub fn get(&self, cid: &ContentId) -> Option<&Transaction> {
        self.map.get(cid)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IpfsBody {
    pub ids: Vec<ContentId>,
}

impl IpfsBody {
    pub fn payload_bytes(&self) -> usize {
        CID_BYTES * self.ids.len()
    }

    pub fn serialized_len(&self) -> usize {
        IPFS_FRAMING_BYTES + self.payload_bytes()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.serialized_len());
        put_u24(&mut out, self.ids.len() as u64)?;
        for id in &self.ids {
            out.extend_from_slice(id);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let n = r.bounded_count(CID_BYTES, false)?;
        let ids = (0..n)
            .map(|_| r.take(CID_BYTES).map(|b| b.try_into().unwrap()))
            .collect::<Result<_>>()?;
        r.finish()?;
        Ok(IpfsBody { ids })
    }
}

pub fn ipfs_encode(block: &BlockTemplate) -> IpfsBody {
    IpfsBody {
        ids: block.txs.iter().map(content_id).collect(),
    }
}

/// Fetches every id from `store`; unknown ids fail with their block positions.
pub fn ipfs_decode(body: &IpfsBody, store: &ContentStore) -> Result<BlockTemplate> {
    let mut txs = Vec::with_capacity(body.ids.len());
    let mut missing = Vec::new();
    for (i, cid) in body.ids.iter().enumerate() {
        match store.get(cid) {
            Some(tx) => txs.push(*tx),
            None => missing.push(i),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingContent(missing));
    }
    BlockTemplate::new(txs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::TxFactory;

    #[test]
    fn empty_block_has_empty_payload() {
        let b = BlockTemplate::new(vec![]).unwrap();
        assert_eq!(ipfs_encode(&b).payload_bytes(), 0);
    }

    #[test]
    fn roundtrip_and_missing() {
        let mut f = TxFactory::new(2);
        let txs: Vec<Transaction> = (0..10).map(|i| f.make(i)).collect();
        let block = BlockTemplate::new(txs.clone()).unwrap();
        let mut store = ContentStore::new();
        for tx in &txs[1..] {
            store.put(*tx);
        }
        let body = ipfs_encode(&block);
        assert_eq!(body.payload_bytes(), 320);
        assert_eq!(
            IpfsBody::from_bytes(&body.to_bytes().unwrap()).unwrap(),
            body
        );
        match ipfs_decode(&body, &store) {
            Err(Error::MissingContent(v)) => assert_eq!(v, vec![0]),
            other => panic!("unexpected {other:?}"),
        }
        store.put(txs[0]);
        assert_eq!(ipfs_decode(&body, &store).unwrap(), block);
    }
}
