//! Top-N accuracy and diversity metrics.
//!
//! Recall and Hit Ratio measure ranking accuracy against held-out
//! positives; Coverage measures how much of the category universe a
//! user's list spans (union over all categories of every recommended
//! item). Users with empty test sets are skipped and counted.

use crate::dataset::CategoryMatrix;
use crate::error::{Error, Result};
use crate::mat::{Csr, Dense};
use crate::par;
use crate::propagation::recommend_top_n;

/// Aggregated metrics at each requested list length.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub n_values: Vec<usize>,
    pub recall: Vec<f64>,
    /// Normalized hit count: hits / min(N, |test|).
    pub hit_ratio: Vec<f64>,
    /// Binary per-user hit rate, reported alongside.
    pub hit_ratio_classic: Vec<f64>,
    pub coverage: Vec<f64>,
    pub evaluated_users: usize,
    pub skipped_users: usize,
    /// Fingerprint of the config that produced the model; filled in by
    /// the pipeline layer.
    #[serde(default)]
    pub config_fingerprint: String,
}

fn hits(top: &[usize], test: &[usize]) -> usize {
    debug_assert!(test.windows(2).all(|w| w[0] < w[1]));
    top.iter().filter(|i| test.binary_search(i).is_ok()).count()
}

/// Mean over test-nonempty users of |top-N ∩ test| / |test|.
pub fn recall_at_n(recs: &[Vec<usize>], tests: &[Vec<usize>], n: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut users = 0usize;
    for (top, test) in recs.iter().zip(tests) {
        if test.is_empty() {
            continue;
        }
        users += 1;
        let top = &top[..top.len().min(n)];
        sum += hits(top, test) as f64 / test.len() as f64;
    }
    if users == 0 {
        return Err(Error::data("no user has a nonempty test set"));
    }
    Ok(sum / users as f64)
}

/// Normalized and classic hit ratios: hits / min(N, |test|), and the
/// binary any-hit rate.
pub fn hit_ratio_at_n(recs: &[Vec<usize>], tests: &[Vec<usize>], n: usize) -> Result<(f64, f64)> {
    let mut sum = 0.0;
    let mut classic = 0.0;
    let mut users = 0usize;
    for (top, test) in recs.iter().zip(tests) {
        if test.is_empty() {
            continue;
        }
        users += 1;
        let top = &top[..top.len().min(n)];
        let h = hits(top, test);
        sum += h as f64 / n.min(test.len()) as f64;
        if h > 0 {
            classic += 1.0;
        }
    }
    if users == 0 {
        return Err(Error::data("no user has a nonempty test set"));
    }
    Ok((sum / users as f64, classic / users as f64))
}

/// Mean over users of |∪ categories of top-N| / |C|.
pub fn coverage_at_n(recs: &[Vec<usize>], q: &CategoryMatrix, n: usize) -> Result<f64> {
    if recs.is_empty() {
        return Err(Error::data("coverage of an empty recommendation set"));
    }
    let n_cats = q.0.cols();
    if n_cats == 0 {
        return Err(Error::data("coverage needs at least one category"));
    }
    let mut sum = 0.0;
    for top in recs {
        let top = &top[..top.len().min(n)];
        let mut seen = vec![false; n_cats];
        let mut count = 0usize;
        for &i in top {
            for &c in q.0.row(i) {
                if !seen[c] {
                    seen[c] = true;
                    count += 1;
                }
            }
        }
        sum += count as f64 / n_cats as f64;
    }
    Ok(sum / recs.len() as f64)
}

/// Rank every test-nonempty user once at the largest N, then read all
/// metrics off prefixes. Exclusions are the user's training items.
pub fn evaluate(
    fused_users: &Dense,
    fused_items: &Dense,
    train: &Csr<f64>,
    tests: &[Vec<usize>],
    q: &CategoryMatrix,
    ns: &[usize],
) -> Result<MetricsReport> {
    let n_users = fused_users.rows();
    if tests.len() != n_users {
        return Err(Error::data("test list count does not match user count"));
    }
    if ns.is_empty() {
        return Err(Error::data("no list lengths requested"));
    }
    let max_n = *ns.iter().max().unwrap();
    let evaluated: Vec<usize> = (0..n_users).filter(|&u| !tests[u].is_empty()).collect();
    if evaluated.is_empty() {
        return Err(Error::data("no user has a nonempty test set"));
    }
    let skipped = n_users - evaluated.len();

    let recs: Vec<Vec<usize>> = par::map_range(evaluated.len(), |idx| {
        let u = evaluated[idx];
        let (exclude, _) = train.row(u);
        recommend_top_n(fused_users, fused_items, u, max_n, exclude).items
    });
    let eval_tests: Vec<Vec<usize>> = evaluated.iter().map(|&u| tests[u].clone()).collect();

    let mut report = MetricsReport {
        n_values: ns.to_vec(),
        recall: Vec::with_capacity(ns.len()),
        hit_ratio: Vec::with_capacity(ns.len()),
        hit_ratio_classic: Vec::with_capacity(ns.len()),
        coverage: Vec::with_capacity(ns.len()),
        evaluated_users: evaluated.len(),
        skipped_users: skipped,
        config_fingerprint: String::new(),
    };
    for &n in ns {
        report.recall.push(recall_at_n(&recs, &eval_tests, n)?);
        let (primary, classic) = hit_ratio_at_n(&recs, &eval_tests, n)?;
        report.hit_ratio.push(primary);
        report.hit_ratio_classic.push(classic);
        report.coverage.push(coverage_at_n(&recs, q, n)?);
    }
    Ok(report)
}
