//! Keyed 64-bit digests shared by the sketches.

use std::hash::Hasher;

use siphasher::sip::SipHasher24;

use crate::tx::TxId;

const SECOND_KEY: u64 = 0x6a09_e667_f3bc_c908;

/// SipHash-2-4 of `data` keyed by `salt`.
pub fn keyed_digest64(salt: u64, data: &[u8]) -> u64 {
    let mut h = SipHasher24::new_with_keys(salt, SECOND_KEY);
    h.write(data);
    h.finish()
}

/// 8-byte sketch id of a full txid.
pub fn short_id(salt: u64, txid: &TxId) -> u64 {
    keyed_digest64(salt, &txid.0)
}

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Reduces a 64-bit hash into `[0, n)` without division bias worth caring about.
#[inline]
pub fn reduce(h: u64, n: u64) -> u64 {
    ((h as u128 * n as u128) >> 64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salt_changes_digest() {
        let id = TxId::derive(0, 0);
        assert_ne!(short_id(1, &id), short_id(2, &id));
        assert_eq!(short_id(1, &id), short_id(1, &id));
    }

    #[test]
    fn reduce_stays_in_range() {
        for h in [0, 1, u64::MAX, 1 << 63] {
            assert!(reduce(h, 7) < 7);
        }
    }
}
