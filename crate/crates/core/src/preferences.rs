//! Balanced implicit preference pre-processing.
//!
//! Raw playtime is heavily skewed, so per-item percentile ranks replace
//! absolute minutes: each interaction becomes the fraction of the item's
//! players whose playtime is at most this user's. User-category
//! preference ratios then compare a user's local category share against
//! that category's share of the globally reachable catalog, boosting
//! rarely occurring categories. The two combine multiplicatively into a
//! per-interaction preference score used downstream for neighbor
//! selection.

use crate::dataset::{CategoryMatrix, PlaytimeMatrix};
use crate::error::{Error, Result};
use crate::mat::{Csr, Dense};
use crate::par;

/// User×item matrix of per-item playtime percentiles in (0, 1]; same
/// support as the playtime matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileMatrix(pub Csr<f64>);

/// Dense user×category preference ratios; zero exactly where the user
/// has never interacted with the category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPreference(pub Dense);

/// Sparse user×item balanced preference scores, positive on every
/// interaction (including zero-playtime ones).
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitPreference(pub Csr<f64>);

/// How the global category share denominator counts catalog items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlobalShareMode {
    /// Count every catalog item sharing at least one category the user
    /// has touched (default).
    #[default]
    TouchedUnion,
    /// Per-category denominator: a touched category's global share is
    /// taken relative to its own item count, collapsing the ratio to the
    /// local share.
    PerCategory,
}

/// Replace each stored playtime with its within-item percentile: the
/// count of the item's players with playtime less than or equal to this
/// one, over the item's player count. Ties share a percentile, so every
/// stored value is positive and the item's longest player gets exactly 1.
pub fn percentile_transform(r: &PlaytimeMatrix) -> PercentileMatrix {
    let by_item = r.0.transpose();
    let transformed = by_item.map_rows(|_, _, playtimes| {
        let mut sorted: Vec<u64> = playtimes.to_vec();
        sorted.sort_unstable();
        let denom = sorted.len() as f64;
        playtimes
            .iter()
            .map(|&t| {
                let at_most = sorted.partition_point(|&x| x <= t);
                at_most as f64 / denom
            })
            .collect()
    });
    PercentileMatrix(transformed.transpose())
}

fn mask_words(n: usize) -> usize {
    n.div_ceil(64)
}

/// User-category preference ratios. For each user and category, the
/// local share (fraction of the user's interactions carrying the
/// category) is divided by the global share (the category's item count
/// over the number of catalog items reachable through any category the
/// user has touched).
pub fn category_preference(
    r: &PlaytimeMatrix,
    rt: &PercentileMatrix,
    q: &CategoryMatrix,
    mode: GlobalShareMode,
) -> Result<CategoryPreference> {
    let n_users = r.0.rows();
    let n_items = r.0.cols();
    let n_cats = q.0.cols();
    if rt.0.rows() != n_users || rt.0.cols() != n_items || q.0.rows() != n_items {
        return Err(Error::data("category_preference shape mismatch"));
    }

    // Per-item category bitmasks and global per-category item counts.
    let words = mask_words(n_cats);
    let mut item_masks = vec![0u64; n_items * words];
    let mut cat_count = vec![0usize; n_cats];
    for i in 0..n_items {
        for &c in q.0.row(i) {
            item_masks[i * words + c / 64] |= 1u64 << (c % 64);
            cat_count[c] += 1;
        }
    }

    let mut p = Dense::zeros(n_users, n_cats);
    par::for_each_row_mut(p.data_mut(), n_cats.max(1), |u, row| {
        if n_cats == 0 {
            return;
        }
        // Touched categories come from the transformed matrix's support;
        // it coincides with the raw support.
        let (interacted, _) = rt.0.row(u);
        if interacted.is_empty() {
            return;
        }
        let mut local_count = vec![0usize; n_cats];
        let mut touched = vec![0u64; words];
        for &i in interacted {
            for &c in q.0.row(i) {
                local_count[c] += 1;
                touched[c / 64] |= 1u64 << (c % 64);
            }
        }
        let n_interacted = r.0.row_nnz(u) as f64;
        let reachable = match mode {
            GlobalShareMode::TouchedUnion => {
                let mut count = 0usize;
                for i in 0..n_items {
                    let m = &item_masks[i * words..(i + 1) * words];
                    if m.iter().zip(&touched).any(|(&a, &b)| a & b != 0) {
                        count += 1;
                    }
                }
                count as f64
            }
            GlobalShareMode::PerCategory => 0.0,
        };
        for (c, out) in row.iter_mut().enumerate() {
            if local_count[c] == 0 {
                continue;
            }
            let local_share = local_count[c] as f64 / n_interacted;
            let global_share = match mode {
                GlobalShareMode::TouchedUnion => cat_count[c] as f64 / reachable,
                GlobalShareMode::PerCategory => 1.0,
            };
            *out = local_share / global_share;
        }
    });
    Ok(CategoryPreference(p))
}

/// Balanced preference per interaction: the sum of the user's preference
/// ratios over the item's categories, scaled by the playtime percentile.
/// Computed on the percentile support only; the dense user×item product
/// is never materialized.
pub fn implicit_preference(
    p: &CategoryPreference,
    q: &CategoryMatrix,
    rt: &PercentileMatrix,
) -> Result<ImplicitPreference> {
    if p.0.cols() != q.0.cols() || q.0.rows() != rt.0.cols() || p.0.rows() != rt.0.rows() {
        return Err(Error::data("implicit_preference shape mismatch"));
    }
    let h = rt.0.map_rows(|u, items, percentiles| {
        let prefs = p.0.row(u);
        items
            .iter()
            .zip(percentiles)
            .map(|(&i, &pct)| {
                let cat_sum: f64 = q.0.row(i).iter().map(|&c| prefs[c]).sum();
                cat_sum * pct
            })
            .collect()
    });
    Ok(ImplicitPreference(h))
}

/// One histogram bin over `[lo, hi)` (the last bin is closed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Equal-width histogram over the given values.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistBin>> {
    if bins < 2 {
        return Err(Error::data("histogram needs at least 2 bins"));
    }
    if values.is_empty() {
        return Err(Error::data("histogram of an empty matrix"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("histogram input contains non-finite values"));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = if width == 0.0 {
            0
        } else {
            (((v - lo) / width) as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins {
                hi
            } else {
                lo + width * (i + 1) as f64
            },
            count,
        })
        .collect())
}

/// Stored values of a sparse matrix as f64 (for histogram reports).
pub fn stored_values_f64(m: &Csr<f64>) -> Vec<f64> {
    m.values().to_vec()
}

pub fn stored_playtimes_f64(m: &PlaytimeMatrix) -> Vec<f64> {
    m.0.values().iter().map(|&v| v as f64).collect()
}
