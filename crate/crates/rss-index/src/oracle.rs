//! Plain binary search over the full key array.
//!
//! These functions define the query semantics every index in this crate must
//! reproduce; tests compare learned-index answers against them, and the
//! benchmark harness exposes them as the `oracle` baseline.

use crate::keyspace::Dataset;

/// Exact-match lookup: the rank of `q` if present.
pub fn lookup_eq(dataset: &Dataset, q: &[u8]) -> Option<usize> {
    let rank = lower_bound(dataset, q);
    (rank < dataset.len() && dataset.key(rank) == q).then_some(rank)
}

/// Smallest rank whose key is `>= q`, or `N` when every key is smaller.
pub fn lower_bound(dataset: &Dataset, q: &[u8]) -> usize {
    let mut lo = 0usize;
    let mut hi = dataset.len();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if dataset.key(mid) < q {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset() -> Dataset {
        Dataset::validate(["bat", "cat", "dog", "eel"]).unwrap()
    }

    #[test]
    fn members_resolve_to_their_rank() {
        let ds = dataset();
        assert_eq!(lookup_eq(&ds, b"bat"), Some(0));
        assert_eq!(lookup_eq(&ds, b"eel"), Some(3));
    }

    #[test]
    fn absent_keys_resolve_to_none() {
        let ds = dataset();
        assert_eq!(lookup_eq(&ds, b"aardvark"), None);
        assert_eq!(lookup_eq(&ds, b"cow"), None);
        assert_eq!(lookup_eq(&ds, b"zebra"), None);
    }

    #[test]
    fn lower_bound_edges() {
        let ds = dataset();
        assert_eq!(lower_bound(&ds, b""), 0);
        assert_eq!(lower_bound(&ds, b"bat"), 0);
        assert_eq!(lower_bound(&ds, b"cow"), 2);
        assert_eq!(lower_bound(&ds, b"zzz"), 4);
    }
}
