//! The RadixStringSpline tree: recursive build, bounded-error rank
//! prediction, equality and lower-bound queries, statistics, and memory
//! accounting.
//!
//! Each node models the chunk at one depth of its key range with an
//! error-bounded spline. Chunk values whose run of keys cannot be predicted
//! within `±error` are *redirected*: the node records the chunk in a sorted
//! redirector array pointing at a child node that models the next `K` bytes
//! of just that run. Queries descend while their chunk hits the redirector;
//! the first miss is guaranteed a bounded prediction, which a short binary
//! search turns into an exact answer.

use std::sync::Arc;

use serde::Serialize;

use crate::keyspace::{chunk_exhausted, extract_chunk, ChunkKey, Dataset};
use crate::spline::{SplineModel, SplinePoint};
use thiserror::Error;

pub const DEFAULT_CHUNK_BYTES: usize = 16;
pub const DEFAULT_ERROR_BOUND: u32 = 127;
pub const DEFAULT_RADIX_FLOOR: u32 = 6;
pub const DEFAULT_RADIX_CEIL: u32 = 20;

/// Modeled size of one node header in the memory report: bounds (2 x u64)
/// plus depth and radix width (2 x u32).
pub const NODE_HEADER_BYTES: usize = 24;
/// Modeled size of one radix-table entry (a knot index).
pub const RADIX_ENTRY_BYTES: usize = 4;
/// Modeled size of a child reference or a knot rank.
pub const WORD_BYTES: usize = 8;

/// Build-time configuration, fixed per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RssConfig {
    /// Chunk width in bytes. 8 and 16 are the recommended settings; any
    /// width in `1..=16` is accepted (small widths are useful for tests and
    /// illustration).
    #[serde(rename = "k")]
    pub chunk_bytes: usize,
    /// Maximum allowed rank error of any non-redirected prediction.
    pub error: u32,
    /// Smallest radix-table width a node may use.
    pub radix_floor: u32,
    /// Largest radix-table width a node may use.
    pub radix_ceil: u32,
    /// Refit each node's spline after removing redirected runs, iterating
    /// until the remaining runs all pass. Experimental; off by default.
    pub refit_redirected: bool,
}

impl Default for RssConfig {
    fn default() -> Self {
        RssConfig {
            chunk_bytes: DEFAULT_CHUNK_BYTES,
            error: DEFAULT_ERROR_BOUND,
            radix_floor: DEFAULT_RADIX_FLOOR,
            radix_ceil: DEFAULT_RADIX_CEIL,
            refit_redirected: false,
        }
    }
}

impl RssConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_bytes < 1 || self.chunk_bytes > crate::keyspace::MAX_CHUNK_BYTES {
            return Err(ConfigError::ChunkBytes(self.chunk_bytes));
        }
        if self.error > 127 {
            return Err(ConfigError::ErrorBound(self.error));
        }
        if self.radix_floor < 1 || self.radix_floor > self.radix_ceil {
            return Err(ConfigError::RadixRange {
                floor: self.radix_floor,
                ceil: self.radix_ceil,
            });
        }
        if self.radix_ceil > 26 {
            return Err(ConfigError::RadixCeilTooLarge(self.radix_ceil));
        }
        Ok(())
    }

    fn key_bits(&self) -> u32 {
        (self.chunk_bytes * 8) as u32
    }

    /// Radix width for a node fitted over `points` representatives:
    /// `ceil(log2(points))` clamped to `[radix_floor, radix_ceil]` and to the
    /// chunk width.
    fn radix_bits_for(&self, points: usize) -> u32 {
        let needed = if points <= 1 {
            0
        } else {
            usize::BITS - (points - 1).leading_zeros()
        };
        needed
            .clamp(self.radix_floor, self.radix_ceil)
            .min(self.key_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("chunk width must be 1..=16 bytes, got {0}")]
    ChunkBytes(usize),
    #[error("error bound must be at most 127, got {0}")]
    ErrorBound(u32),
    #[error("radix bit range is invalid: floor {floor}, ceiling {ceil}")]
    RadixRange { floor: u32, ceil: u32 },
    #[error("radix ceiling {0} would allow oversized tables; maximum is 26")]
    RadixCeilTooLarge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build an index over an empty dataset")]
    EmptyDataset,
}

/// One tree node covering dataset ranks `[lo, hi)` at chunk index `depth`.
#[derive(Debug, Clone)]
pub struct RssNode {
    lo: usize,
    hi: usize,
    depth: usize,
    redirector: Vec<(ChunkKey, RssNode)>,
    spline: SplineModel,
}

impl RssNode {
    /// Half-open rank range this node covers.
    pub fn bounds(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// Chunk index this node models (the root models chunk 0).
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Sorted `(chunk, child)` entries for runs this node could not satisfy.
    pub fn redirector(&self) -> &[(ChunkKey, RssNode)] {
        &self.redirector
    }

    pub fn spline(&self) -> &SplineModel {
        &self.spline
    }
}

/// A bounded-error rank estimate together with the bounds of the node that
/// produced it. The true rank of a member key always lies within `error` of
/// `rank` and inside `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub rank: usize,
    pub lo: usize,
    pub hi: usize,
    pub depth: usize,
}

/// Violation reported by [`RssIndex::verify_error_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("rank {rank} predicted as {predicted}, off by more than {error}")]
pub struct BoundViolation {
    pub rank: usize,
    pub predicted: usize,
    pub error: u32,
}

/// The RadixStringSpline index over one immutable dataset.
#[derive(Debug, Clone)]
pub struct RssIndex {
    root: RssNode,
    config: RssConfig,
    dataset: Arc<Dataset>,
}

impl RssIndex {
    /// Builds the tree over `dataset`. Deterministic: identical datasets and
    /// configs produce identical trees.
    pub fn build(
        dataset: impl Into<Arc<Dataset>>,
        config: RssConfig,
    ) -> Result<Self, BuildError> {
        config.validate()?;
        let dataset = dataset.into();
        if dataset.is_empty() {
            return Err(BuildError::EmptyDataset);
        }
        let root = build_node(&dataset, 0, dataset.len(), 0, &config);
        Ok(RssIndex {
            root,
            config,
            dataset,
        })
    }

    pub fn config(&self) -> &RssConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn shared_dataset(&self) -> Arc<Dataset> {
        Arc::clone(&self.dataset)
    }

    pub fn root(&self) -> &RssNode {
        &self.root
    }

    /// Walks the tree for `q` and returns the final node plus the clamped,
    /// rounded rank estimate from its spline.
    fn locate(&self, q: &[u8]) -> (&RssNode, usize) {
        let k = self.config.chunk_bytes;
        let mut node = &self.root;
        loop {
            let chunk = extract_chunk(q, node.depth, k);
            match node.redirector.binary_search_by_key(&chunk, |e| e.0) {
                Ok(i) => node = &node.redirector[i].1,
                Err(_) => {
                    let raw = node.spline.predict(chunk).round() as i64;
                    let rank = raw.clamp(node.lo as i64, node.hi as i64 - 1) as usize;
                    return (node, rank);
                }
            }
        }
    }

    /// Bounded-error rank estimate for `q`. For any key present in the
    /// dataset, `|rank - true rank| <= config.error`.
    pub fn predict_rank(&self, q: &[u8]) -> Prediction {
        let (node, rank) = self.locate(q);
        Prediction {
            rank,
            lo: node.lo,
            hi: node.hi,
            depth: node.depth,
        }
    }

    /// Inclusive rank window `[rank - error, rank + error]` clamped to the
    /// predicting node's bounds; the last-mile search range.
    pub fn search_window(&self, prediction: &Prediction) -> (usize, usize) {
        let e = self.config.error as usize;
        let lo = prediction.lo.max(prediction.rank.saturating_sub(e));
        let hi = (prediction.hi - 1).min(prediction.rank + e);
        (lo, hi)
    }

    /// Exact-match lookup: binary search restricted to the predicted window.
    pub fn lookup_eq(&self, q: &[u8]) -> Option<usize> {
        let (node, rank) = self.locate(q);
        let e = self.config.error as usize;
        let wl = node.lo.max(rank.saturating_sub(e));
        let wr = (node.hi - 1).min(rank + e);
        let found = self.first_at_least(q, wl, wr + 1);
        (found <= wr && self.dataset.key(found) == q).then_some(found)
    }

    /// Smallest rank whose key is `>= q`, or `N` when every key is smaller.
    ///
    /// The spline only guarantees the window for member keys, so the window
    /// edges are checked and widened exponentially (within the node, then the
    /// whole array) until they bracket `q`.
    pub fn lower_bound(&self, q: &[u8]) -> usize {
        let (node, rank) = self.locate(q);
        let e = self.config.error as usize;
        let n = self.dataset.len();
        let mut wl = node.lo.max(rank.saturating_sub(e));
        let mut wr = (node.hi - 1).min(rank + e);

        let mut step = 1usize;
        while wl > node.lo && self.dataset.key(wl) >= q {
            wl = wl.saturating_sub(step).max(node.lo);
            step <<= 1;
        }
        if wl == node.lo && wl > 0 && self.dataset.key(wl) >= q {
            // The node range brackets every query that reaches it; widening
            // over the whole array keeps the search correct regardless.
            let mut step = 1usize;
            while wl > 0 && self.dataset.key(wl) >= q {
                wl = wl.saturating_sub(step);
                step <<= 1;
            }
        }
        let mut step = 1usize;
        while wr < node.hi - 1 && self.dataset.key(wr) < q {
            wr = (wr + step).min(node.hi - 1);
            step <<= 1;
        }
        if wr == node.hi - 1 && wr < n - 1 && self.dataset.key(wr) < q {
            let mut step = 1usize;
            while wr < n - 1 && self.dataset.key(wr) < q {
                wr = (wr + step).min(n - 1);
                step <<= 1;
            }
        }
        self.first_at_least(q, wl, wr + 1)
    }

    /// First rank in `[lo, hi)` whose key is `>= q`; `hi` if none.
    fn first_at_least(&self, q: &[u8], mut lo: usize, mut hi: usize) -> usize {
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.dataset.key(mid) < q {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Sweeps every dataset key and checks the build-time guarantee
    /// `|predicted - true rank| <= error`.
    pub fn verify_error_bound(&self) -> Result<(), BoundViolation> {
        let e = self.config.error as i64;
        for rank in 0..self.dataset.len() {
            let predicted = self.predict_rank(self.dataset.key(rank)).rank;
            if (predicted as i64 - rank as i64).abs() > e {
                return Err(BoundViolation {
                    rank,
                    predicted,
                    error: self.config.error,
                });
            }
        }
        Ok(())
    }

    /// Structural statistics gathered by a full tree walk.
    pub fn stats(&self) -> StatsReport {
        let mut levels: Vec<LevelStats> = Vec::new();
        let mut depth_sum = 0usize;
        let mut node_count = 0usize;
        walk(&self.root, &mut |node| {
            let level = node.depth;
            if levels.len() <= level {
                levels.resize(
                    level + 1,
                    LevelStats {
                        level: 0,
                        nodes: 0,
                        redirector_entries: 0,
                        knots: 0,
                    },
                );
                for (i, ls) in levels.iter_mut().enumerate() {
                    ls.level = i;
                }
            }
            levels[level].nodes += 1;
            levels[level].redirector_entries += node.redirector.len();
            levels[level].knots += node.spline.knots().len();
            depth_sum += level + 1;
            node_count += 1;
        });
        let k = self.config.chunk_bytes;
        StatsReport {
            node_count,
            max_depth: levels.len(),
            mean_depth: depth_sum as f64 / node_count as f64,
            redirector_entries: levels.iter().map(|l| l.redirector_entries).sum(),
            spline_knots: levels.iter().map(|l| l.knots).sum(),
            root_redirector_keys: self
                .root
                .redirector
                .iter()
                .map(|(c, _)| format!("{:0width$x}", c, width = 2 * k))
                .collect(),
            levels,
        }
    }

    /// Modeled index size, excluding the dataset strings themselves.
    ///
    /// The layout is: per node a [`NODE_HEADER_BYTES`] header; per redirector
    /// entry `K` chunk bytes plus a child reference; per knot `K` chunk bytes
    /// plus a rank; per radix-table entry [`RADIX_ENTRY_BYTES`].
    pub fn memory_bytes(&self) -> MemoryReport {
        let k = self.config.chunk_bytes;
        let mut report = MemoryReport::default();
        walk(&self.root, &mut |node| {
            report.node_header_bytes += NODE_HEADER_BYTES;
            report.redirector_bytes += node.redirector.len() * (k + WORD_BYTES);
            report.knot_bytes += node.spline.knots().len() * (k + WORD_BYTES);
            report.radix_table_bytes += node.spline.radix_table_len() * RADIX_ENTRY_BYTES;
        });
        report.total_bytes = report.node_header_bytes
            + report.redirector_bytes
            + report.knot_bytes
            + report.radix_table_bytes;
        report
    }
}

fn walk<'a>(node: &'a RssNode, visit: &mut impl FnMut(&'a RssNode)) {
    visit(node);
    for (_, child) in &node.redirector {
        walk(child, visit);
    }
}

/// Per-level line in [`StatsReport`]. `level` is the chunk index (root = 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub nodes: usize,
    pub redirector_entries: usize,
    pub knots: usize,
}

/// Tree shape summary. Depths are 1-based levels: a root-only tree has
/// `max_depth == 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub node_count: usize,
    pub max_depth: usize,
    pub mean_depth: f64,
    pub redirector_entries: usize,
    pub spline_knots: usize,
    /// Root redirector chunks, hex-encoded at the configured chunk width.
    pub root_redirector_keys: Vec<String>,
    pub levels: Vec<LevelStats>,
}

/// Modeled byte counts per structure class; `total_bytes` is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub node_header_bytes: usize,
    pub redirector_bytes: usize,
    pub knot_bytes: usize,
    pub radix_table_bytes: usize,
    pub total_bytes: usize,
}

/// Distinct chunk runs for ranks `[lo, hi)` at `depth`: `(chunk, first, last)`
/// with `first..=last` the inclusive global rank run.
fn chunk_runs(
    dataset: &Dataset,
    lo: usize,
    hi: usize,
    depth: usize,
    k: usize,
) -> Vec<(ChunkKey, usize, usize)> {
    let mut runs: Vec<(ChunkKey, usize, usize)> = Vec::new();
    for rank in lo..hi {
        let chunk = extract_chunk(dataset.key(rank), depth, k);
        match runs.last_mut() {
            Some((prev, _, last)) if *prev == chunk => *last = rank,
            Some((prev, _, _)) => {
                debug_assert!(*prev < chunk, "chunks must ascend within a node");
                runs.push((chunk, rank, rank));
            }
            None => runs.push((chunk, rank, rank)),
        }
    }
    runs
}

fn representatives(runs: &[(ChunkKey, usize, usize)]) -> Vec<SplinePoint> {
    runs.iter()
        .map(|&(chunk, first, last)| SplinePoint::new(chunk, (first + (last - first) / 2) as u64))
        .collect()
}

/// `|round(predict(chunk)) - rank| <= error` for both run extremes, using the
/// exact arithmetic queries use.
fn run_satisfied(spline: &SplineModel, chunk: ChunkKey, first: usize, last: usize, error: u32) -> bool {
    let predicted = spline.predict(chunk).round() as i64;
    (predicted - first as i64).abs() <= error as i64
        && (predicted - last as i64).abs() <= error as i64
}

fn build_node(dataset: &Dataset, lo: usize, hi: usize, depth: usize, config: &RssConfig) -> RssNode {
    let k = config.chunk_bytes;
    debug_assert!(lo < hi);
    // Two or more keys that are all exhausted at this depth would be
    // byte-identical, which validation rejects.
    assert!(
        hi - lo < 2 || !chunk_exhausted(dataset.key(hi - 1), depth, k),
        "duplicate keys: ranks [{lo}, {hi}) carry no bytes at chunk {depth}"
    );

    let runs = chunk_runs(dataset, lo, hi, depth, k);
    let reps = representatives(&runs);
    let radix_bits = config.radix_bits_for(reps.len());
    let mut spline = SplineModel::fit(&reps, config.error, radix_bits, config.key_bits())
        .expect("a node covers at least one key");
    drop(reps);

    let mut redirected = vec![false; runs.len()];
    loop {
        let mut changed = false;
        for (i, &(chunk, first, last)) in runs.iter().enumerate() {
            if !redirected[i] && !run_satisfied(&spline, chunk, first, last, config.error) {
                redirected[i] = true;
                changed = true;
            }
        }
        if !changed || !config.refit_redirected {
            break;
        }
        // Refit over the surviving runs and re-check them all.
        let kept: Vec<SplinePoint> = runs
            .iter()
            .zip(&redirected)
            .filter(|(_, &r)| !r)
            .map(|(&(chunk, first, last), _)| {
                SplinePoint::new(chunk, (first + (last - first) / 2) as u64)
            })
            .collect();
        if kept.is_empty() {
            break;
        }
        let radix_bits = config.radix_bits_for(kept.len());
        spline = SplineModel::fit(&kept, config.error, radix_bits, config.key_bits())
            .expect("kept set is non-empty");
    }

    let redirector: Vec<(ChunkKey, RssNode)> = runs
        .iter()
        .zip(&redirected)
        .filter(|(_, &r)| r)
        .map(|(&(chunk, first, last), _)| {
            (chunk, build_node(dataset, first, last + 1, depth + 1, config))
        })
        .collect();

    RssNode {
        lo,
        hi,
        depth,
        redirector,
        spline,
    }
}
