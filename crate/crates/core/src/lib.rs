//! Diversity-aware recommendation engine for game catalogs.
//!
//! The pipeline turns raw playtime logs into top-N recommendations that
//! trade a little accuracy for significantly broader category coverage:
//!
//! 1. [`dataset`]: ingestion, k-core filtering, id interning, splits.
//! 2. [`preferences`]: playtime percentiles and balance-adjusted
//!    category preference scores.
//! 3. [`embedding`]: self-supervised category/item representations from
//!    the item-category graph.
//! 4. [`kmeans`] + [`selection`]: cluster-and-pick neighbor selection
//!    producing a directed interaction subgraph per side.
//! 5. [`propagation`]: asymmetric light graph convolution with learned
//!    layer attention.
//! 6. [`training`]: category-weighted pairwise ranking.
//! 7. [`metrics`]: accuracy and per-user category coverage.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod mat;
pub mod metrics;
pub mod opt;
pub mod par;
pub mod pipeline;
pub mod preferences;
pub mod propagation;
pub mod rng;
pub mod selection;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
