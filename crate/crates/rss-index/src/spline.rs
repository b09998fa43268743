//! Monotone, error-bounded piecewise-linear models over `(ChunkKey, rank)`
//! points, fronted by a radix table that narrows the knot search.
//!
//! Fitting uses a one-pass greedy corridor: walking the points in key order,
//! the fitter keeps the range of slopes from the current base knot that stays
//! within `±error` of every point seen since. A point whose exact slope falls
//! outside that range ends the segment; its predecessor becomes a knot and the
//! corridor restarts there. Knots are always input points, so predictions
//! interpolate real data and the error guarantee holds for every fitted point.

use crate::keyspace::ChunkKey;
use thiserror::Error;

/// One fitted point: a chunk key and the dataset rank it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplinePoint {
    pub key: ChunkKey,
    pub rank: u64,
}

impl SplinePoint {
    pub fn new(key: ChunkKey, rank: u64) -> Self {
        SplinePoint { key, rank }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("cannot fit a spline over an empty point set")]
    EmptyInput,
}

/// An error-bounded piecewise-linear CDF approximation.
///
/// `radix_table[b]` holds the index of the first knot whose top `radix_bits`
/// key bits are at least `b`; the final entry equals the knot count. Keys are
/// treated as `key_bits`-wide integers (`8 * K` for chunks of width `K`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplineModel {
    key_bits: u32,
    error: u32,
    radix_bits: u32,
    knots: Vec<SplinePoint>,
    radix_table: Vec<u32>,
}

impl SplineModel {
    /// Fits a model over `points`, which must be sorted by key with
    /// non-decreasing ranks. Runs of equal keys are collapsed to a single
    /// representative at the midpoint rank `(first + last) / 2` before
    /// fitting; the guarantee `|predict(p.key) - p.rank| <= error` then holds
    /// for every representative `p`.
    pub fn fit(
        points: &[SplinePoint],
        error: u32,
        radix_bits: u32,
        key_bits: u32,
    ) -> Result<Self, FitError> {
        if points.is_empty() {
            return Err(FitError::EmptyInput);
        }
        debug_assert!(key_bits >= 8 && key_bits <= 128);
        debug_assert!(radix_bits >= 1 && radix_bits <= key_bits);
        debug_assert!(points.windows(2).all(|w| w[0].key <= w[1].key
            && w[0].rank <= w[1].rank));

        let reps = collapse_runs(points);
        let knots = corridor_fit(&reps, error);
        let radix_table = build_radix_table(&knots, radix_bits, key_bits);
        Ok(SplineModel {
            key_bits,
            error,
            radix_bits,
            knots,
            radix_table,
        })
    }

    /// Rank estimate for `key`: linear interpolation between the bracketing
    /// knots, clamped to the first/last knot rank outside the fitted range.
    /// Monotone non-decreasing in `key`.
    pub fn predict(&self, key: ChunkKey) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if key <= first.key {
            return first.rank as f64;
        }
        if key >= last.key {
            return last.rank as f64;
        }
        let (lo, hi) = self.radix_lookup(key);
        // Upper bound: first knot in [lo, hi) with key strictly greater.
        let mut a = lo;
        let mut b = hi;
        while a < b {
            let mid = a + (b - a) / 2;
            if self.knots[mid].key <= key {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        // key lies strictly between the first and last knot, so the upper
        // bound lands in [1, knot_count - 1].
        let right = self.knots[a];
        let left = self.knots[a - 1];
        let t = (key - left.key) as f64 / (right.key - left.key) as f64;
        left.rank as f64 + t * (right.rank as f64 - left.rank as f64)
    }

    /// Knot index window for `key` from the radix table. The knots bracketing
    /// `key` always lie within `[max(lo - 1, 0), hi]`.
    pub fn radix_lookup(&self, key: ChunkKey) -> (usize, usize) {
        let shift = self.key_bits - self.radix_bits;
        let buckets = self.radix_table.len() - 1;
        let bucket = ((key >> shift) as usize).min(buckets - 1);
        (
            self.radix_table[bucket] as usize,
            self.radix_table[bucket + 1] as usize,
        )
    }

    pub fn knots(&self) -> &[SplinePoint] {
        &self.knots
    }

    pub fn error(&self) -> u32 {
        self.error
    }

    pub fn radix_bits(&self) -> u32 {
        self.radix_bits
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    /// Radix table length, `2^radix_bits + 1`.
    pub fn radix_table_len(&self) -> usize {
        self.radix_table.len()
    }
}

/// Collapses runs of equal keys to one point at the midpoint rank of the run.
fn collapse_runs(points: &[SplinePoint]) -> Vec<SplinePoint> {
    let mut reps: Vec<SplinePoint> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let key = points[i].key;
        let first = points[i].rank;
        let mut last = first;
        while i < points.len() && points[i].key == key {
            last = points[i].rank;
            i += 1;
        }
        reps.push(SplinePoint::new(key, first + (last - first) / 2));
    }
    reps
}

fn slope(base: SplinePoint, key: ChunkKey, rank: f64) -> f64 {
    (rank - base.rank as f64) / (key - base.key) as f64
}

/// Greedy corridor pass over strictly-ascending representatives.
fn corridor_fit(reps: &[SplinePoint], error: u32) -> Vec<SplinePoint> {
    let mut knots = vec![reps[0]];
    if reps.len() == 1 {
        return knots;
    }
    let err = error as f64;
    let mut base = reps[0];
    let mut prev = reps[0];
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for &point in &reps[1..] {
        let rank = point.rank as f64;
        let exact = slope(base, point.key, rank);
        if exact > upper || exact < lower {
            knots.push(prev);
            base = prev;
            upper = slope(base, point.key, rank + err);
            lower = slope(base, point.key, rank - err);
        } else {
            upper = upper.min(slope(base, point.key, rank + err));
            lower = lower.max(slope(base, point.key, rank - err));
        }
        prev = point;
    }
    knots.push(prev);
    knots
}

fn build_radix_table(knots: &[SplinePoint], radix_bits: u32, key_bits: u32) -> Vec<u32> {
    let shift = key_bits - radix_bits;
    let buckets = 1usize << radix_bits;
    debug_assert!(knots.len() <= u32::MAX as usize);
    let mut table = vec![0u32; buckets + 1];
    let mut knot = 0usize;
    for (bucket, entry) in table.iter_mut().enumerate() {
        while knot < knots.len() && ((knots[knot].key >> shift) as usize) < bucket {
            knot += 1;
        }
        *entry = knot as u32;
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(raw: &[(u128, u64)]) -> Vec<SplinePoint> {
        raw.iter().map(|&(k, r)| SplinePoint::new(k, r)).collect()
    }

    /// Independent residual oracle: every collapsed representative must sit
    /// within `error` of the prediction, checked point by point.
    fn assert_within_error(model: &SplineModel, points: &[SplinePoint], error: u32) {
        for rep in collapse_runs(points) {
            let predicted = model.predict(rep.key).round() as i64;
            let residual = (predicted - rep.rank as i64).abs();
            assert!(
                residual <= error as i64,
                "residual {residual} > {error} at key {:#x}",
                rep.key
            );
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(
            SplineModel::fit(&[], 0, 6, 64).unwrap_err(),
            FitError::EmptyInput
        );
    }

    #[test]
    fn single_point_predicts_its_rank() {
        let model = SplineModel::fit(&pts(&[(5, 0)]), 0, 6, 64).unwrap();
        assert_eq!(model.knots().len(), 1);
        assert_eq!(model.predict(5), 0.0);
        assert_eq!(model.predict(0), 0.0);
        assert_eq!(model.predict(u64::MAX as u128), 0.0);
    }

    #[test]
    fn collinear_points_keep_two_knots() {
        let points = pts(&[(0, 0), (1, 1), (2, 2), (3, 3)]);
        let model = SplineModel::fit(&points, 0, 6, 64).unwrap();
        assert_eq!(
            model.knots(),
            &[SplinePoint::new(0, 0), SplinePoint::new(3, 3)]
        );
        assert_eq!(model.predict(2), 2.0);
        assert_within_error(&model, &points, 0);
    }

    #[test]
    fn steep_points_fit_within_wide_error() {
        let points = pts(&[(0, 0), (1, 100), (2, 200)]);
        let model = SplineModel::fit(&points, 10, 6, 64).unwrap();
        assert_within_error(&model, &points, 10);
    }

    #[test]
    fn clamps_outside_fitted_range() {
        let points = pts(&[(10, 3), (20, 7)]);
        let model = SplineModel::fit(&points, 0, 6, 64).unwrap();
        assert_eq!(model.predict(0), 3.0);
        assert_eq!(model.predict(9), 3.0);
        assert_eq!(model.predict(21), 7.0);
    }

    #[test]
    fn duplicate_keys_collapse_to_midpoint() {
        // One run of five ranks [0,4]: the representative is rank 2.
        let points = pts(&[(7, 0), (7, 1), (7, 2), (7, 3), (7, 4)]);
        let model = SplineModel::fit(&points, 0, 6, 64).unwrap();
        assert_eq!(model.knots(), &[SplinePoint::new(7, 2)]);
        assert_eq!(model.predict(7), 2.0);
    }

    #[test]
    fn radix_lookup_narrows_to_prefix_bucket() {
        // key_bits = 8, radix_bits = 2: knot prefixes 0, 0, 2, 3.
        let points = pts(&[(0x00, 0), (0x3F, 1), (0x80, 2), (0xC0, 3)]);
        let model = SplineModel::fit(&points, 0, 2, 8).unwrap();
        assert_eq!(model.knots().len(), 4, "nothing collinear here");
        assert_eq!(model.radix_lookup(0x90), (2, 3));
        assert_eq!(model.radix_lookup(0x00), (0, 2));
        assert_eq!(model.radix_lookup(0xFF), (3, 4));
    }

    #[test]
    fn radix_lookup_handles_empty_edge_buckets() {
        // Knot prefixes {2, 3} with radix_bits = 2: prefix 0 yields (0, 0),
        // prefixes above everything yield (n, n).
        let points = pts(&[(0x80, 0), (0xC0, 1)]);
        let model = SplineModel::fit(&points, 0, 2, 8).unwrap();
        assert_eq!(model.radix_lookup(0x00), (0, 0));
        assert_eq!(model.radix_lookup(0x40), (0, 0));
        assert_eq!(model.radix_table_len(), 5);
    }

    #[test]
    fn fitting_is_deterministic() {
        let points: Vec<SplinePoint> = (0..500u64)
            .map(|i| SplinePoint::new((i as u128) * 37 % 1021, (i / 3) * 3))
            .collect();
        let mut sorted = points.clone();
        sorted.sort_by_key(|p| p.key);
        let mut rank = 0;
        let sorted: Vec<SplinePoint> = sorted
            .iter()
            .map(|p| {
                let q = SplinePoint::new(p.key, rank);
                rank += 1;
                q
            })
            .collect();
        let a = SplineModel::fit(&sorted, 3, 6, 16).unwrap();
        let b = SplineModel::fit(&sorted, 3, 6, 16).unwrap();
        assert_eq!(a, b);
    }

    fn strictly_ascending_points(max_len: usize) -> impl Strategy<Value = Vec<SplinePoint>> {
        proptest::collection::btree_set(0u64..1_000_000, 1..max_len).prop_map(|keys| {
            keys.into_iter()
                .enumerate()
                .map(|(rank, key)| SplinePoint::new(key as u128, rank as u64))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn residuals_stay_within_bound(
            points in strictly_ascending_points(200),
            error in 0u32..16,
        ) {
            let model = SplineModel::fit(&points, error, 6, 64).unwrap();
            for p in &points {
                let predicted = model.predict(p.key).round() as i64;
                prop_assert!((predicted - p.rank as i64).abs() <= error as i64);
            }
        }

        #[test]
        fn prediction_is_monotone(
            points in strictly_ascending_points(64),
            a in 0u64..2_000_000,
            b in 0u64..2_000_000,
        ) {
            let model = SplineModel::fit(&points, 4, 6, 64).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(model.predict(lo as u128) <= model.predict(hi as u128));
        }

        #[test]
        fn radix_window_contains_bracketing_knots(
            raw in proptest::collection::btree_set(0u64..(1 << 24), 1..64),
            key in 0u64..(1 << 24),
        ) {
            let points: Vec<SplinePoint> = raw
                .into_iter()
                .enumerate()
                .map(|(rank, key)| SplinePoint::new(key as u128, rank as u64))
                .collect();
            let model = SplineModel::fit(&points, 2, 4, 24).unwrap();
            let key = key as u128;
            let (lo, hi) = model.radix_lookup(key);
            prop_assert!(lo <= hi);
            let knots = model.knots();
            // Brute-force bracket: last knot <= key and first knot > key.
            let below = knots.iter().rposition(|p| p.key <= key);
            let above = knots.iter().position(|p| p.key > key);
            let window = lo.saturating_sub(1)..=hi;
            if let Some(i) = below {
                prop_assert!(window.contains(&i), "lower bracket {i} outside {window:?}");
            }
            if let Some(i) = above {
                prop_assert!(window.contains(&i), "upper bracket {i} outside {window:?}");
            }
        }
    }
}
