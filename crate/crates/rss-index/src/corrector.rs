//! The hash corrector: an equality-lookup accelerator built on top of a
//! bounded-error index.
//!
//! A flat array of signed 8-bit offsets, with `-128` reserved as empty. Each
//! key hashes to up to four slots (the four 32-bit lanes of one 128-bit hash,
//! reduced modulo the table size); at build time the difference between the
//! key's true and predicted rank is written into the first empty slot. A
//! lookup tries the same slots in order: a candidate position that matches
//! byte-for-byte resolves the query without any binary search, and every
//! mismatching candidate still narrows the fallback search window. Lower
//! bound queries never consult this table.

use std::cmp::Ordering;

use serde::Serialize;

use crate::keyspace::Dataset;
use crate::tree::RssIndex;
use thiserror::Error;

/// Slot value marking an empty cell; stored offsets use `[-127, 127]`.
pub const EMPTY_SLOT: i8 = -128;

/// Most probe positions derivable from one 128-bit hash.
pub const MAX_PROBES: usize = 4;

/// Fixed default hash seed; changing it changes every table.
pub const DEFAULT_SEED: u64 = 0x7273_732d_6863_3031;

/// Build parameters for a [`HashCorrector`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HcConfig {
    /// Keys per slot; the table has `ceil(N / load_factor)` slots. The
    /// default of 2/3 costs 12 bits per key.
    pub load_factor: f64,
    /// Probe positions tried per key, `1..=4`.
    pub probes: usize,
    pub seed: u64,
}

impl Default for HcConfig {
    fn default() -> Self {
        HcConfig {
            load_factor: 2.0 / 3.0,
            probes: MAX_PROBES,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HcError {
    #[error("hash corrector requires an error bound of at most 127, got {0}")]
    ErrorBoundTooLarge(u32),
    #[error("load factor must be positive and finite, got {0}")]
    InvalidLoadFactor(f64),
    #[error("probe count must be 1..=4, got {0}")]
    InvalidProbes(usize),
}

/// The offset table. Immutable once built; lookups are read-only.
#[derive(Debug, Clone)]
pub struct HashCorrector {
    slots: Vec<i8>,
    probes: usize,
    seed: u64,
    inserted: usize,
}

impl HashCorrector {
    /// Runs every dataset key through `index`, stores `true - predicted`
    /// rank offsets at the first empty probe position, and silently skips
    /// keys whose probe positions are all occupied (they fall back to the
    /// windowed binary search at query time).
    pub fn build(index: &RssIndex, config: HcConfig) -> Result<Self, HcError> {
        let error = index.config().error;
        if error > 127 {
            return Err(HcError::ErrorBoundTooLarge(error));
        }
        if !(config.load_factor.is_finite() && config.load_factor > 0.0) {
            return Err(HcError::InvalidLoadFactor(config.load_factor));
        }
        if config.probes < 1 || config.probes > MAX_PROBES {
            return Err(HcError::InvalidProbes(config.probes));
        }
        let dataset = index.dataset();
        let slot_count = slot_count_for(dataset.len(), config.load_factor);
        let mut slots = vec![EMPTY_SLOT; slot_count];
        let mut inserted = 0usize;
        for rank in 0..dataset.len() {
            let key = dataset.key(rank);
            let predicted = index.predict_rank(key).rank;
            let offset = rank as i64 - predicted as i64;
            debug_assert!((-127..=127).contains(&offset));
            for position in probe_positions(key, config.seed, config.probes, slot_count) {
                if slots[position] == EMPTY_SLOT {
                    slots[position] = offset as i8;
                    inserted += 1;
                    break;
                }
            }
        }
        Ok(HashCorrector {
            slots,
            probes: config.probes,
            seed: config.seed,
            inserted,
        })
    }

    /// Equality lookup through the corrector. Extensionally identical to
    /// [`RssIndex::lookup_eq`]; only the work performed differs.
    pub fn lookup_eq(&self, index: &RssIndex, q: &[u8]) -> Option<usize> {
        self.lookup_eq_detailed(index, q).0
    }

    /// As [`Self::lookup_eq`], also reporting whether a probe resolved the
    /// query before the fallback binary search (the fast path).
    pub fn lookup_eq_detailed(&self, index: &RssIndex, q: &[u8]) -> (Option<usize>, bool) {
        let prediction = index.predict_rank(q);
        let predicted = prediction.rank as i64;
        let error = index.config().error as i64;
        let dataset = index.dataset();
        let mut left = (prediction.lo as i64).max(predicted - error);
        let mut right = (prediction.hi as i64 - 1).min(predicted + error);
        for position in probe_positions(q, self.seed, self.probes, self.slots.len()) {
            let offset = self.slots[position];
            if offset == EMPTY_SLOT {
                continue;
            }
            let candidate = predicted + offset as i64;
            if candidate < left || candidate > right {
                continue;
            }
            match dataset.key(candidate as usize).cmp(q) {
                Ordering::Equal => return (Some(candidate as usize), true),
                Ordering::Less => left = candidate + 1,
                Ordering::Greater => right = candidate - 1,
            }
        }
        if left > right {
            return (None, false);
        }
        let (mut lo, mut hi) = (left as usize, right as usize + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if dataset.key(mid) < q {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let hit = lo <= right as usize && dataset.key(lo) == q;
        (hit.then_some(lo), false)
    }

    /// Fraction of dataset keys resolved on the fast path.
    pub fn fast_path_rate(&self, index: &RssIndex) -> f64 {
        let dataset = index.dataset();
        let mut fast = 0usize;
        for rank in 0..dataset.len() {
            let key = dataset.key(rank).to_vec();
            let (found, fast_path) = self.lookup_eq_detailed(index, &key);
            debug_assert_eq!(found, Some(rank));
            fast += fast_path as usize;
        }
        fast as f64 / dataset.len() as f64
    }

    /// One byte per slot.
    pub fn memory_bytes(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Keys whose offset was stored at build time.
    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn probes(&self) -> usize {
        self.probes
    }
}

/// `ceil(n / load_factor)` slots. Quotients within 1e-6 of an integer snap to
/// it first, so ratios like 2/3 that are not exactly representable still give
/// `ceil(3n / 2)` rather than one slot more.
fn slot_count_for(n: usize, load_factor: f64) -> usize {
    let raw = n as f64 / load_factor;
    let snapped = if (raw - raw.round()).abs() < 1e-6 {
        raw.round()
    } else {
        raw.ceil()
    };
    (snapped as usize).max(1)
}

/// The four 32-bit lanes of the key's 128-bit hash, each reduced modulo
/// `slot_count`; insertion and lookup share this order.
fn probe_positions(
    key: &[u8],
    seed: u64,
    probes: usize,
    slot_count: usize,
) -> impl Iterator<Item = usize> {
    let hash = murmur3_x64_128(key, seed);
    (0..probes).map(move |lane| ((hash >> (32 * lane)) as u32 as usize) % slot_count)
}

/// MurmurHash3 x64 128-bit variant, seeded with `seed` in both running
/// halves.
pub fn murmur3_x64_128(data: &[u8], seed: u64) -> u128 {
    const C1: u64 = 0x87c3_7b91_1142_53d5;
    const C2: u64 = 0x4cf5_ad43_2745_937f;

    let mut h1 = seed;
    let mut h2 = seed;
    let mut blocks = data.chunks_exact(16);
    for block in &mut blocks {
        let k1 = u64::from_le_bytes(block[..8].try_into().unwrap());
        let k2 = u64::from_le_bytes(block[8..].try_into().unwrap());
        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
        h1 = h1
            .rotate_left(27)
            .wrapping_add(h2)
            .wrapping_mul(5)
            .wrapping_add(0x52dc_e729);
        h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
        h2 = h2
            .rotate_left(31)
            .wrapping_add(h1)
            .wrapping_mul(5)
            .wrapping_add(0x3849_5ab5);
    }
    let tail = blocks.remainder();
    if !tail.is_empty() {
        let mut k1 = 0u64;
        let mut k2 = 0u64;
        for (i, &byte) in tail.iter().enumerate() {
            if i < 8 {
                k1 |= u64::from(byte) << (8 * i);
            } else {
                k2 |= u64::from(byte) << (8 * (i - 8));
            }
        }
        if tail.len() > 8 {
            h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
        }
        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
    }

    h1 ^= data.len() as u64;
    h2 ^= data.len() as u64;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    (u128::from(h2) << 64) | u128::from(h1)
}

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Convenience: how many slots a table over `n` keys would use.
pub fn slots_for(n: usize, load_factor: f64) -> usize {
    slot_count_for(n, load_factor)
}
