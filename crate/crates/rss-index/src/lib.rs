//! RadixStringSpline: a bounded-error learned index over a sorted,
//! immutable array of byte strings.
//!
//! The index answers two questions about its dataset:
//!
//! * **equality** — [`RssIndex::lookup_eq`] returns the rank of a key if it
//!   is present;
//! * **lower bound** — [`RssIndex::lower_bound`] returns the smallest rank
//!   whose key is greater than or equal to the query.
//!
//! Internally it is a tree of spline models. Each node fits an error-bounded
//! piecewise-linear model over one `K`-byte chunk of its keys; chunk values
//! the model cannot place within `±error` ranks are redirected to child nodes
//! that look at the next `K` bytes. A lookup therefore reads just enough of
//! the string to be told, with a guaranteed bound, where to finish with a
//! short binary search.
//!
//! The optional [`HashCorrector`] layers a flat table of signed 8-bit rank
//! offsets over the index and turns most successful equality lookups into a
//! single hash-and-compare, at a cost of 12 bits per key at the default load
//! factor.
//!
//! ```
//! use rss_index::{Dataset, RssConfig, RssIndex};
//!
//! let dataset = Dataset::validate(["grape", "melon", "peach", "plum"])?;
//! let index = RssIndex::build(dataset, RssConfig::default())?;
//!
//! assert_eq!(index.lookup_eq(b"peach"), Some(2));
//! assert_eq!(index.lookup_eq(b"pear"), None);
//! assert_eq!(index.lower_bound(b"n"), 2);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod corrector;
pub mod keyspace;
pub mod oracle;
pub mod spline;
pub mod tree;

pub use corrector::{HashCorrector, HcConfig, HcError};
pub use keyspace::{
    chunk_exhausted, extract_chunk, split_records, ChunkKey, Dataset, DatasetError,
};
pub use spline::{FitError, SplineModel, SplinePoint};
pub use tree::{
    BoundViolation, BuildError, ConfigError, LevelStats, MemoryReport, Prediction, RssConfig,
    RssIndex, RssNode, StatsReport,
};
