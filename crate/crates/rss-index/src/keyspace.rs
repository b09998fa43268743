//! Byte-string keys: validation, ordering rules, and fixed-width chunk
//! extraction.
//!
//! Every model in this crate operates on *chunks*: `K` consecutive bytes of a
//! key packed big-endian into an unsigned integer. Packing preserves byte-wise
//! lexicographic order as long as keys never contain the padding byte `0x00`,
//! which is why that byte (together with the `0x0A` record separator) is
//! banned from keys.

use thiserror::Error;

/// A chunk of up to [`MAX_CHUNK_BYTES`] key bytes packed into a big-endian
/// integer. A chunk extracted with width `K` occupies the low `8*K` bits.
pub type ChunkKey = u128;

/// Widest supported chunk, in bytes.
pub const MAX_CHUNK_BYTES: usize = 16;

/// Byte used to right-pad chunks that run past the end of a key.
pub const PAD_BYTE: u8 = 0x00;

/// Record separator in the on-disk dataset format.
pub const RECORD_SEPARATOR: u8 = 0x0A;

/// Violation found while validating a key sequence. Indices refer to the
/// first offending key.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("key {index} is smaller than its predecessor; keys must be strictly ascending")]
    NotSorted { index: usize },
    #[error("key {index} duplicates its predecessor")]
    DuplicateKey { index: usize },
    #[error("key {index} contains forbidden byte 0x{byte:02x} at offset {offset}")]
    ForbiddenByte {
        index: usize,
        offset: usize,
        byte: u8,
    },
}

/// An immutable, strictly ascending array of byte-string keys.
///
/// Keys are stored back to back in one buffer; `offsets` has `N + 1` entries
/// delimiting them. All query operations return *ranks*: positions in this
/// array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    bytes: Vec<u8>,
    offsets: Vec<usize>,
}

impl Dataset {
    /// Validates `lines` against the dataset invariants and builds a
    /// [`Dataset`] from them. Reports the first violation encountered;
    /// within a key, forbidden bytes are reported before ordering problems.
    pub fn validate<I, B>(lines: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut bytes = Vec::new();
        let mut offsets = vec![0usize];
        let mut prev_start = 0usize;
        for (index, line) in lines.into_iter().enumerate() {
            let key = line.as_ref();
            if let Some(offset) = key
                .iter()
                .position(|&b| b == PAD_BYTE || b == RECORD_SEPARATOR)
            {
                return Err(DatasetError::ForbiddenByte {
                    index,
                    offset,
                    byte: key[offset],
                });
            }
            if index > 0 {
                let prev = &bytes[prev_start..];
                if key < prev {
                    return Err(DatasetError::NotSorted { index });
                }
                if key == prev {
                    return Err(DatasetError::DuplicateKey { index });
                }
            }
            prev_start = bytes.len();
            bytes.extend_from_slice(key);
            offsets.push(bytes.len());
        }
        Ok(Dataset { bytes, offsets })
    }

    /// Sorts and deduplicates `lines` before validating. Ordering violations
    /// can no longer occur, but forbidden bytes are still rejected.
    pub fn sort_dedup<I, B>(lines: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut owned: Vec<Vec<u8>> = lines.into_iter().map(|l| l.as_ref().to_vec()).collect();
        owned.sort_unstable();
        owned.dedup();
        Self::validate(owned)
    }

    /// Number of keys.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The key stored at `rank`.
    #[inline]
    pub fn key(&self, rank: usize) -> &[u8] {
        &self.bytes[self.offsets[rank]..self.offsets[rank + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.len()).map(move |r| self.key(r))
    }

    /// Total bytes of raw key content (the quantity an index is compared
    /// against when measuring compactness).
    pub fn raw_key_bytes(&self) -> usize {
        self.bytes.len()
    }

    pub fn max_key_len(&self) -> usize {
        (0..self.len()).map(|r| self.key(r).len()).max().unwrap_or(0)
    }
}

/// Splits the on-disk dataset format: keys separated by `0x0A`, with one
/// optional trailing separator acting as a terminator.
pub fn split_records(data: &[u8]) -> Vec<&[u8]> {
    if data.is_empty() {
        return Vec::new();
    }
    let body = match data.last() {
        Some(&RECORD_SEPARATOR) => &data[..data.len() - 1],
        _ => data,
    };
    body.split(|&b| b == RECORD_SEPARATOR).collect()
}

/// Packs bytes `[depth*k, (depth+1)*k)` of `key` into a big-endian integer,
/// right-padding with `0x00` once the key is exhausted. Total for every
/// `depth`; shorter keys simply pad.
#[inline]
pub fn extract_chunk(key: &[u8], depth: usize, k: usize) -> ChunkKey {
    debug_assert!(k >= 1 && k <= MAX_CHUNK_BYTES);
    let start = depth.saturating_mul(k);
    let mut value: ChunkKey = 0;
    for i in 0..k {
        let byte = start
            .checked_add(i)
            .and_then(|pos| key.get(pos))
            .copied()
            .unwrap_or(PAD_BYTE);
        value = (value << 8) | ChunkKey::from(byte);
    }
    value
}

/// True once `key` has no bytes left at chunk index `depth`.
#[inline]
pub fn chunk_exhausted(key: &[u8], depth: usize, k: usize) -> bool {
    key.len() <= depth.saturating_mul(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_accepts_sorted_unique() {
        let ds = Dataset::validate(["a", "b", "c"]).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.key(1), b"b");
    }

    #[test]
    fn validate_rejects_out_of_order() {
        let err = Dataset::validate(["b", "a"]).unwrap_err();
        assert_eq!(err, DatasetError::NotSorted { index: 1 });
    }

    #[test]
    fn validate_rejects_duplicates() {
        let err = Dataset::validate(["a", "a"]).unwrap_err();
        assert_eq!(err, DatasetError::DuplicateKey { index: 1 });
    }

    #[test]
    fn validate_rejects_nul() {
        let err = Dataset::validate([&b"a\x00b"[..]]).unwrap_err();
        assert_eq!(
            err,
            DatasetError::ForbiddenByte {
                index: 0,
                offset: 1,
                byte: 0x00
            }
        );
    }

    #[test]
    fn empty_key_must_come_first() {
        assert!(Dataset::validate(["", "a"]).is_ok());
        let err = Dataset::validate(["a", ""]).unwrap_err();
        assert_eq!(err, DatasetError::NotSorted { index: 1 });
    }

    #[test]
    fn sort_dedup_repairs_order() {
        let ds = Dataset::sort_dedup(["c", "a", "b", "a"]).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.key(0), b"a");
        assert_eq!(ds.key(2), b"c");
    }

    #[test]
    fn chunk_extraction_packs_big_endian() {
        assert_eq!(extract_chunk(b"cdeg", 0, 2), 0x6364);
        assert_eq!(extract_chunk(b"cdeg", 1, 2), 0x6567);
        assert_eq!(extract_chunk(b"ab", 1, 2), 0x0000);
    }

    #[test]
    fn chunk_extraction_pads_partial_chunks() {
        assert_eq!(extract_chunk(b"abc", 1, 2), 0x6300);
        assert_eq!(extract_chunk(b"a", 0, 16), (0x61u128) << 120);
        assert_eq!(extract_chunk(b"", 5, 8), 0);
    }

    #[test]
    fn exhaustion_matches_length() {
        assert!(chunk_exhausted(b"ab", 1, 2));
        assert!(!chunk_exhausted(b"abc", 1, 2));
        assert!(chunk_exhausted(b"", 0, 16));
    }

    #[test]
    fn split_records_honors_trailing_terminator() {
        assert_eq!(split_records(b""), Vec::<&[u8]>::new());
        assert_eq!(split_records(b"a\nb"), vec![&b"a"[..], &b"b"[..]]);
        assert_eq!(split_records(b"a\nb\n"), vec![&b"a"[..], &b"b"[..]]);
        assert_eq!(split_records(b"\n"), vec![&b""[..]]);
        assert_eq!(split_records(b"a\n\nb"), vec![&b"a"[..], &b""[..], &b"b"[..]]);
    }

    fn nul_free_key() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(1u8..=255, 0..24).prop_map(|mut v| {
            for b in &mut v {
                if *b == RECORD_SEPARATOR {
                    *b = 0x0B;
                }
            }
            v
        })
    }

    proptest! {
        /// For a < b, chunks agree below the first differing depth and the
        /// first differing chunk orders the same way as the strings.
        #[test]
        fn chunking_preserves_order(a in nul_free_key(), b in nul_free_key(), k in 1usize..=16) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (&a, &b) } else { (&b, &a) };
            let depths = (lo.len().max(hi.len()) / k) + 1;
            let mut split = None;
            for d in 0..=depths {
                let ca = extract_chunk(lo, d, k);
                let cb = extract_chunk(hi, d, k);
                if ca != cb {
                    split = Some((d, ca, cb));
                    break;
                }
            }
            let (_, ca, cb) = split.expect("distinct NUL-free keys must differ in some chunk");
            prop_assert!(ca < cb);
        }
    }
}
