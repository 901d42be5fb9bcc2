//! Relays of randomized blocks under every protocol, plus constructed
//! collision and false-positive cases.

use blockpress::block::BlockTemplate;
use blockpress::protocols::compact::{compact_decode, compact_encode, ShortIdKey};
use blockpress::protocols::graphene::GrapheneConfig;
use blockpress::protocols::relay::{random_scenario, relay, RelayPath, Scenario, ScenarioConfig};
use blockpress::protocols::xthin::{receiver_filter, XThinConfig};
use blockpress::protocols::Protocol;
use blockpress::tx::{FeeRate, Transaction, TxFactory, TxId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COLLISION_NONCE: u64 = 0xC0FFEE;
const COLLISION_SEED: u64 = 7;

fn tx(seed: u64, counter: u64, value: u64) -> Transaction {
    Transaction::new(TxId::derive(seed, counter), value, 500, FeeRate::DEFAULT).unwrap()
}

#[test]
#[ignore = "birthday search over 2^25 ids; run once to find the frozen pair"]
fn find_compact_collision() {
    let key = ShortIdKey::new(COLLISION_NONCE);
    let count = 1u64 << 25;
    let mut packed: Vec<u64> = (0..count)
        .map(|c| key.shortid(&tx(COLLISION_SEED, c, 0)) << 16 | (c & 0xffff))
        .collect();
    packed.sort_unstable();
    for w in packed.windows(2) {
        if w[0] >> 16 == w[1] >> 16 {
            let sid = w[0] >> 16;
            let hits: Vec<u64> = (0..count)
                .filter(|&c| key.shortid(&tx(COLLISION_SEED, c, 0)) == sid)
                .collect();
            println!("short id {sid:012x} shared by counters {hits:?}");
        }
    }
}

const COLLIDING: (u64, u64) = (5_397_473, 31_039_933);

fn collision_scenario(receiver_has_both: bool) -> Scenario {
    let a = tx(COLLISION_SEED, COLLIDING.0, 40_000_000);
    let b = tx(COLLISION_SEED, COLLIDING.1, 30_000_000);
    let mut f = TxFactory::new(21);
    let others: Vec<Transaction> = (0..20).map(|i| f.make(1_000_000 + i)).collect();
    let mut block_txs = vec![a];
    block_txs.extend_from_slice(&others[..10]);
    let mut receiver_pool = others.clone();
    receiver_pool.push(b);
    if receiver_has_both {
        receiver_pool.push(a);
    }
    let mut sender_pool = others;
    sender_pool.push(a);
    Scenario {
        block: BlockTemplate::new(block_txs).unwrap(),
        sender_pool,
        receiver_pool,
        salt: COLLISION_NONCE,
    }
}

#[test]
fn frozen_pair_collides() {
    let key = ShortIdKey::new(COLLISION_NONCE);
    let a = tx(COLLISION_SEED, COLLIDING.0, 0);
    let b = tx(COLLISION_SEED, COLLIDING.1, 0);
    assert_ne!(a.txid, b.txid);
    assert_eq!(key.shortid(&a), key.shortid(&b));
    assert_ne!(
        ShortIdKey::new(COLLISION_NONCE + 1).shortid(&a),
        ShortIdKey::new(COLLISION_NONCE + 1).shortid(&b)
    );
}

#[test]
fn ambiguous_short_id_is_requested() {
    let s = collision_scenario(true);
    let rec = compact_decode(&compact_encode(&s.block, s.salt), &s.receiver_pool);
    assert_eq!(rec.missing, vec![0]);
    let r = relay(Protocol::Compact, &s, &GrapheneConfig::default()).unwrap();
    assert_eq!(r.path, RelayPath::Repaired);
    assert_eq!(r.block, s.block);
}

#[test]
fn wrong_match_falls_back_to_full_block() {
    let s = collision_scenario(false);
    let rec = compact_decode(&compact_encode(&s.block, s.salt), &s.receiver_pool);
    assert!(rec.missing.is_empty());
    assert_ne!(rec.slots[0].unwrap().txid, s.block.txs[0].txid);
    let r = relay(Protocol::Compact, &s, &GrapheneConfig::default()).unwrap();
    assert_eq!(r.path, RelayPath::FullBlock);
    assert_eq!(r.block.merkle_root(), s.block.merkle_root());
}

#[test]
fn xthin_false_positive_triggers_second_round() {
    let mut f = TxFactory::new(31);
    let receiver_pool: Vec<Transaction> = (0..300).map(|i| f.make(5_000 + i)).collect();
    let salt = 77;
    let filter = receiver_filter(
        &receiver_pool,
        &XThinConfig {
            salt,
            ..Default::default()
        },
    )
    .unwrap();
    // draw outsiders until one passes the receiver's filter
    let mut outsiders = TxFactory::new(32);
    let fp = (0..1_000_000)
        .map(|_| outsiders.make(9_000))
        .find(|t| filter.contains(t.txid.prefix_u64()))
        .expect("a false positive within 10^6 draws");
    let mut block_txs = receiver_pool[..50].to_vec();
    block_txs.push(fp);
    let mut sender_pool = receiver_pool.clone();
    sender_pool.push(fp);
    let s = Scenario {
        block: BlockTemplate::new(block_txs).unwrap(),
        sender_pool,
        receiver_pool,
        salt,
    };
    let r = relay(Protocol::XThin, &s, &GrapheneConfig::default()).unwrap();
    assert_eq!(r.path, RelayPath::Repaired);
    assert_eq!(r.block, s.block);
}

fn random_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    ScenarioConfig {
        block_txs: rng.random_range(0..160),
        multiplier: rng.random_range(1.0..3.5),
        missing: if rng.random_bool(0.5) {
            rng.random_range(0.0..0.3)
        } else {
            0.0
        },
        extra: if rng.random_bool(0.5) {
            rng.random_range(0.0..0.2)
        } else {
            0.0
        },
        swaps: rng.random_range(0..6),
    }
}

#[test]
fn thousand_relays_per_protocol() {
    let g = GrapheneConfig::default();
    for p in Protocol::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
        let mut paths = Vec::new();
        for i in 0..1000u64 {
            let s = random_scenario(&random_config(&mut rng), i ^ (p as u64) << 32).unwrap();
            let r = relay(p, &s, &g).unwrap();
            assert_eq!(
                r.block.merkle_root(),
                s.block.merkle_root(),
                "{p} trial {i}"
            );
            assert_eq!(r.block, s.block, "{p} trial {i}");
            paths.push(r.path);
        }
        if p == Protocol::Graphene {
            assert!(paths.contains(&RelayPath::SecondProtocol));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compressed_size_accounts_for_payload(seed in any::<u64>(), n in 0usize..120) {
        let cfg = ScenarioConfig { block_txs: n, ..Default::default() };
        let s = random_scenario(&cfg, seed).unwrap();
        let env = blockpress::protocols::Environment {
            salt: s.salt,
            receiver_pool: Some(&s.receiver_pool),
            sender_pool: Some(&s.sender_pool),
            recv_set: Some(&s.receiver_pool),
            send_set: Some(&s.sender_pool),
            ..Default::default()
        };
        for p in Protocol::ALL {
            let c = blockpress::protocols::compress(p, &s.block, &env).unwrap();
            prop_assert_eq!(c.total_bytes(), p.base_bytes() + c.payload.len());
            let r = relay(p, &s, &GrapheneConfig::default()).unwrap();
            prop_assert_eq!(r.path, RelayPath::Direct);
        }
    }
}
