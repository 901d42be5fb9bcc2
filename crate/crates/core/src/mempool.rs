//! Seedable transaction pool with fee-priority and sorted-id views.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::BlockTemplate;
use crate::error::{Error, Result};
use crate::tx::{FeeRate, Transaction, TxFactory, TxId, DEFAULT_TX_SIZE};

pub const DEFAULT_MULTIPLIER: f64 = 2.92;

/// Source of transaction values in satoshi.
pub trait ValueSampler {
    fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> u64;
}

/// Every draw returns the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantValue(pub u64);

impl ValueSampler for ConstantValue {
    fn sample_value<R: Rng + ?Sized>(&self, _rng: &mut R) -> u64 {
        self.0
    }
}

/// Uniform integer values in `[lo, hi]`.
#[derive(Clone, Copy, Debug)]
pub struct UniformValue {
    pub lo: u64,
    pub hi: u64,
}

impl ValueSampler for UniformValue {
    fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(self.lo..=self.hi)
    }
}

/// Block priority: higher fee first, then ascending txid.
pub fn priority_cmp(a: &Transaction, b: &Transaction) -> Ordering {
    b.fee.cmp(&a.fee).then_with(|| a.txid.cmp(&b.txid))
}

/// Sorts transactions into block priority order.
pub fn priority_order(mut txs: Vec<Transaction>) -> Vec<Transaction> {
    txs.sort_unstable_by(priority_cmp);
    txs
}

#[derive(Clone, Debug)]
pub struct PoolOptions {
    pub fee_rate: FeeRate,
    pub tx_size: u32,
    /// Upper bound on generated entries.
    pub max_entries: usize,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            fee_rate: FeeRate::DEFAULT,
            tx_size: DEFAULT_TX_SIZE,
            max_entries: 50_000_000,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Mempool {
    entries: Vec<Transaction>,
    ids: HashSet<TxId>,
    seed: u64,
}

impl Mempool {
    pub fn new(seed: u64) -> Self {
        Mempool {
            seed,
            ..Default::default()
        }
    }

    pub fn from_transactions(txs: Vec<Transaction>, seed: u64) -> Result<Self> {
        let mut pool = Mempool::new(seed);
        pool.entries.reserve(txs.len());
        pool.ids.reserve(txs.len());
        for tx in txs {
            pool.insert(tx)?;
        }
        Ok(pool)
    }

    pub fn insert(&mut self, tx: Transaction) -> Result<()> {
        if !self.ids.insert(tx.txid) {
            return Err(Error::InvalidInput(format!(
                "txid {} already in mempool",
                tx.txid.to_hex()
            )));
        }
        self.entries.push(tx);
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, txid: &TxId) -> bool {
        self.ids.contains(txid)
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[Transaction] {
        &self.entries
    }

    pub fn total_fees(&self) -> u64 {
        self.entries.iter().map(|t| t.fee).sum()
    }

    pub fn sorted_ids(&self) -> Vec<TxId> {
        let mut ids: Vec<TxId> = self.entries.iter().map(|t| t.txid).collect();
        ids.sort_unstable();
        ids
    }

    /// Entries in ascending txid order.
    pub fn sorted_txs(&self) -> Vec<Transaction> {
        let mut txs = self.entries.clone();
        txs.sort_unstable_by_key(|t| t.txid);
        txs
    }

    pub fn fee_order(&self) -> Vec<Transaction> {
        priority_order(self.entries.clone())
    }

    /// Removes and returns the `capacity` highest-priority transactions.
    pub fn select_block(&mut self, capacity: usize) -> BlockTemplate {
        let txs = if capacity >= self.entries.len() {
            std::mem::take(&mut self.entries)
        } else if capacity == 0 {
            Vec::new()
        } else {
            self.entries.select_nth_unstable_by(capacity, priority_cmp);
            let rest = self.entries.split_off(capacity);
            std::mem::replace(&mut self.entries, rest)
        };
        for tx in &txs {
            self.ids.remove(&tx.txid);
        }
        BlockTemplate::from_unique(priority_order(txs))
    }
}

/// Builds a pool of `round(multiplier * capacity)` transactions.
pub fn generate_mempool<S: ValueSampler>(
    capacity: u64,
    multiplier: f64,
    sampler: &S,
    seed: u64,
) -> Result<Mempool> {
    generate_mempool_with(capacity, multiplier, sampler, seed, &PoolOptions::default())
}

pub fn generate_mempool_with<S: ValueSampler>(
    capacity: u64,
    multiplier: f64,
    sampler: &S,
    seed: u64,
    opts: &PoolOptions,
) -> Result<Mempool> {
    if capacity == 0 {
        return Err(Error::Parameter("capacity must be at least 1".into()));
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::Parameter(format!(
            "multiplier must be positive, got {multiplier}"
        )));
    }
    let want = (multiplier * capacity as f64).round();
    if want > opts.max_entries as f64 {
        return Err(Error::Resource(format!(
            "mempool of {want} entries exceeds budget of {}",
            opts.max_entries
        )));
    }
    let count = want as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factory = TxFactory::new(seed).with_fee_rate(opts.fee_rate);
    factory.size_bytes = opts.tx_size;
    let txs = (0..count)
        .map(|_| factory.make(sampler.sample_value(&mut rng)))
        .collect();
    // Digest ids never collide in practice; the check still runs.
    Mempool::from_transactions(txs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool_with_fees(fees: &[u64]) -> Mempool {
        let mut f = TxFactory::new(11).with_fee_rate(FeeRate::ZERO);
        let txs = fees
            .iter()
            .map(|&fee| {
                let mut t = f.make(0);
                t.fee = fee;
                t
            })
            .collect();
        Mempool::from_transactions(txs, 11).unwrap()
    }

    #[test]
    fn generated_size_follows_multiplier() {
        let p = generate_mempool(1000, 2.92, &ConstantValue(5), 1).unwrap();
        assert_eq!(p.len(), 2920);
        let p = generate_mempool(1, 1.0, &ConstantValue(5), 1).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = UniformValue { lo: 0, hi: 1 << 30 };
        let a = generate_mempool(300, 2.92, &s, 9).unwrap();
        let b = generate_mempool(300, 2.92, &s, 9).unwrap();
        assert_eq!(a.sorted_ids(), b.sorted_ids());
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn over_budget_is_resource_error() {
        let opts = PoolOptions {
            max_entries: 100,
            ..Default::default()
        };
        let r = generate_mempool_with(100, 2.0, &ConstantValue(1), 0, &opts);
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn selects_highest_fees() {
        let mut p = pool_with_fees(&[5, 9, 1]);
        let b = p.select_block(2);
        let fees: Vec<u64> = b.txs.iter().map(|t| t.fee).collect();
        assert_eq!(fees, vec![9, 5]);
        assert_eq!(p.len(), 1);
        assert_eq!(p.entries()[0].fee, 1);
    }

    #[test]
    fn exhausting_capacity_takes_everything() {
        let mut p = pool_with_fees(&[3, 4, 8, 0]);
        let total = p.total_fees();
        let b = p.select_block(10);
        assert_eq!(b.revenue(), total);
        assert!(p.is_empty());
        assert!(pool_with_fees(&[]).select_block(3).is_empty());
    }

    #[test]
    fn ties_resolve_by_txid_for_every_insertion_order() {
        let base = pool_with_fees(&[7, 7, 7, 7, 2]);
        let txs = base.entries().to_vec();
        let mut expected: Vec<TxId> = txs.iter().filter(|t| t.fee == 7).map(|t| t.txid).collect();
        expected.sort();
        expected.truncate(3);
        // every permutation of five entries
        let mut idx: Vec<usize> = (0..5).collect();
        let mut perms = Vec::new();
        permute(&mut idx, 0, &mut perms);
        assert_eq!(perms.len(), 120);
        for perm in perms {
            let order: Vec<Transaction> = perm.iter().map(|&i| txs[i]).collect();
            let mut p = Mempool::from_transactions(order, 0).unwrap();
            assert_eq!(p.select_block(3).txids(), expected);
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, out);
            v.swap(k, i);
        }
    }

    #[test]
    fn views_are_permutations() {
        let p = generate_mempool(50, 2.92, &UniformValue { lo: 0, hi: 1000 }, 4).unwrap();
        let mut a: Vec<TxId> = p.fee_order().iter().map(|t| t.txid).collect();
        a.sort();
        assert_eq!(a, p.sorted_ids());
        assert!(p
            .fee_order()
            .windows(2)
            .all(|w| priority_cmp(&w[0], &w[1]).is_lt()));
    }
}
