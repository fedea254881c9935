//! Raw data ingestion, k-core filtering, id mapping, and the
//! train/validation/test split.
//!
//! Interactions arrive as (user, item, playtime) records in JSON-lines or
//! CSV form; items arrive as JSON-lines with their category lists. A
//! playtime of zero is a real interaction (the game was acquired but not
//! played), distinct from no interaction, which is simply absent from the
//! sparse matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{Csr, Pattern};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    pub playtime: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawItem {
    pub item_id: String,
    pub categories: Vec<String>,
}

/// Dense, stable id maps for users, items, and categories. Indices are
/// assigned by sorted external id, so they depend only on the surviving
/// entity sets.
#[derive(Debug, Clone)]
pub struct Catalog {
    users: Vec<String>,
    items: Vec<String>,
    categories: Vec<String>,
    user_idx: HashMap<String, usize>,
    item_idx: HashMap<String, usize>,
    category_idx: HashMap<String, usize>,
}

impl Catalog {
    pub fn build(interactions: &[RawInteraction], items: &[RawItem]) -> Catalog {
        let users: BTreeSet<&str> = interactions.iter().map(|r| r.user_id.as_str()).collect();
        let item_ids: BTreeSet<&str> = items.iter().map(|r| r.item_id.as_str()).collect();
        let categories: BTreeSet<&str> = items
            .iter()
            .flat_map(|r| r.categories.iter().map(|c| c.as_str()))
            .collect();
        fn index(set: BTreeSet<&str>) -> (Vec<String>, HashMap<String, usize>) {
            let list: Vec<String> = set.into_iter().map(str::to_owned).collect();
            let map = list
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect();
            (list, map)
        }
        let (users, user_idx) = index(users);
        let (items, item_idx) = index(item_ids);
        let (categories, category_idx) = index(categories);
        Catalog {
            users,
            items,
            categories,
            user_idx,
            item_idx,
            category_idx,
        }
    }

    /// Rebuild a catalog from persisted id lists (already index-ordered).
    pub fn from_ids(users: Vec<String>, items: Vec<String>, categories: Vec<String>) -> Catalog {
        fn index(list: &[String]) -> HashMap<String, usize> {
            list.iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect()
        }
        let (user_idx, item_idx, category_idx) = (index(&users), index(&items), index(&categories));
        Catalog {
            users,
            items,
            categories,
            user_idx,
            item_idx,
            category_idx,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_idx.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_idx.get(id).copied()
    }

    pub fn category_index(&self, id: &str) -> Option<usize> {
        self.category_idx.get(id).copied()
    }

    pub fn user_id(&self, idx: usize) -> &str {
        &self.users[idx]
    }

    pub fn item_id(&self, idx: usize) -> &str {
        &self.items[idx]
    }

    pub fn category_id(&self, idx: usize) -> &str {
        &self.categories[idx]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.users
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn category_ids(&self) -> &[String] {
        &self.categories
    }
}

/// Sparse user×item playtime matrix. Stored entries are interactions
/// (playtime may be zero); absent entries are non-interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaytimeMatrix(pub Csr<u64>);

/// Sparse binary item×category membership.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMatrix(pub Pattern);

/// An id-mapped interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub playtime: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Train,
    Val,
    Test,
}

impl Fold {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Val => "val",
            Fold::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Fold> {
        match s {
            "train" => Ok(Fold::Train),
            "val" => Ok(Fold::Val),
            "test" => Ok(Fold::Test),
            other => Err(Error::data(format!("unknown fold {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<Interaction>,
    pub val: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub seed: u64,
}

impl SplitDataset {
    pub fn fold(&self, fold: Fold) -> &[Interaction] {
        match fold {
            Fold::Train => &self.train,
            Fold::Val => &self.val,
            Fold::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionFormat {
    Jsonl,
    Csv,
}

impl InteractionFormat {
    /// Guess from the file extension; defaults to JSON-lines.
    pub fn from_path(path: &Path) -> InteractionFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => InteractionFormat::Csv,
            _ => InteractionFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct InteractionRecord {
    user_id: String,
    item_id: String,
    playtime: i64,
}

fn check_playtime(rec: InteractionRecord, path: &Path, line: usize) -> Result<RawInteraction> {
    if rec.playtime < 0 {
        return Err(Error::Parse {
            path: path.to_owned(),
            line,
            msg: format!("negative playtime {}", rec.playtime),
        });
    }
    Ok(RawInteraction {
        user_id: rec.user_id,
        item_id: rec.item_id,
        playtime: rec.playtime as u64,
    })
}

/// Read interaction records, merging duplicate (user, item) pairs by
/// summing playtime. The result is sorted by (user, item) and therefore
/// independent of input order.
pub fn ingest_interactions(path: &Path, format: InteractionFormat) -> Result<Vec<RawInteraction>> {
    let mut merged: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut insert = |rec: RawInteraction| {
        *merged.entry((rec.user_id, rec.item_id)).or_insert(0) += rec.playtime;
    };
    match format {
        InteractionFormat::Jsonl => {
            let file = std::fs::File::open(path)?;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: InteractionRecord =
                    serde_json::from_str(&line).map_err(|e| Error::Parse {
                        path: path.to_owned(),
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?;
                insert(check_playtime(rec, path, lineno + 1)?);
            }
        }
        InteractionFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(path)?;
            let headers = reader.headers()?.clone();
            for row in reader.records() {
                let record = row.map_err(|e| {
                    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                    Error::Parse {
                        path: path.to_owned(),
                        line,
                        msg: e.to_string(),
                    }
                })?;
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let rec: InteractionRecord =
                    record
                        .deserialize(Some(&headers))
                        .map_err(|e| Error::Parse {
                            path: path.to_owned(),
                            line,
                            msg: e.to_string(),
                        })?;
                insert(check_playtime(rec, path, line)?);
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|((user_id, item_id), playtime)| RawInteraction {
            user_id,
            item_id,
            playtime,
        })
        .collect())
}

/// Read item records (JSON-lines). Duplicate item ids are merged by
/// category union; items with no categories are dropped.
pub fn ingest_items(path: &Path) -> Result<Vec<RawItem>> {
    let file = std::fs::File::open(path)?;
    let mut merged: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawItem = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        merged
            .entry(rec.item_id)
            .or_default()
            .extend(rec.categories);
    }
    Ok(merged
        .into_iter()
        .filter(|(_, cats)| !cats.is_empty())
        .map(|(item_id, cats)| RawItem {
            item_id,
            categories: cats.into_iter().collect(),
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct KCoreResult {
    pub interactions: Vec<RawInteraction>,
    pub items: Vec<RawItem>,
    /// Set when filtering removed everything.
    pub emptied: bool,
}

/// Iteratively remove users and items with fewer than `k` interactions
/// until a fixed point; the result is the maximal subgraph in which every
/// surviving node has degree >= k. Items without category information are
/// dropped up front.
pub fn filter_k_core(
    interactions: &[RawInteraction],
    items: &[RawItem],
    k: usize,
) -> Result<KCoreResult> {
    if k < 1 {
        return Err(Error::data("k-core requires k >= 1"));
    }
    let items: Vec<RawItem> = items
        .iter()
        .filter(|it| !it.categories.is_empty())
        .cloned()
        .collect();

    // Intern ids for fast degree counting.
    let mut user_ids: Vec<&str> = interactions.iter().map(|r| r.user_id.as_str()).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let user_of: HashMap<&str, usize> = user_ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let item_ids: Vec<&str> = items.iter().map(|r| r.item_id.as_str()).collect();
    let item_of: HashMap<&str, usize> = item_ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    // Edges restricted to items that still have category information.
    let mut edges: Vec<(usize, usize, usize)> = interactions
        .iter()
        .enumerate()
        .filter_map(|(e, r)| {
            item_of
                .get(r.item_id.as_str())
                .map(|&i| (user_of[r.user_id.as_str()], i, e))
        })
        .collect();

    let mut user_alive = vec![true; user_ids.len()];
    let mut item_alive = vec![true; item_ids.len()];
    loop {
        let mut user_deg = vec![0usize; user_ids.len()];
        let mut item_deg = vec![0usize; item_ids.len()];
        for &(u, i, _) in &edges {
            user_deg[u] += 1;
            item_deg[i] += 1;
        }
        let mut changed = false;
        for (u, alive) in user_alive.iter_mut().enumerate() {
            if *alive && user_deg[u] < k {
                *alive = false;
                changed = true;
            }
        }
        for (i, alive) in item_alive.iter_mut().enumerate() {
            if *alive && item_deg[i] < k {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        edges.retain(|&(u, i, _)| user_alive[u] && item_alive[i]);
    }

    let interactions: Vec<RawInteraction> = edges
        .iter()
        .map(|&(_, _, e)| interactions[e].clone())
        .collect();
    let surviving_items: BTreeSet<&str> = interactions.iter().map(|r| r.item_id.as_str()).collect();
    let items: Vec<RawItem> = items
        .into_iter()
        .filter(|it| surviving_items.contains(it.item_id.as_str()))
        .collect();
    let emptied = interactions.is_empty();
    Ok(KCoreResult {
        interactions,
        items,
        emptied,
    })
}

/// Resolve external ids through the catalog.
pub fn index_interactions(
    interactions: &[RawInteraction],
    catalog: &Catalog,
) -> Result<Vec<Interaction>> {
    interactions
        .iter()
        .map(|r| {
            let user = catalog
                .user_index(&r.user_id)
                .ok_or_else(|| Error::data(format!("unknown user id {:?}", r.user_id)))?;
            let item = catalog
                .item_index(&r.item_id)
                .ok_or_else(|| Error::data(format!("unknown item id {:?}", r.item_id)))?;
            Ok(Interaction {
                user,
                item,
                playtime: r.playtime,
            })
        })
        .collect()
}

/// Build the playtime matrix from id-mapped interactions.
pub fn playtime_matrix(
    edges: &[Interaction],
    n_users: usize,
    n_items: usize,
) -> Result<PlaytimeMatrix> {
    let triplets: Vec<(usize, usize, u64)> =
        edges.iter().map(|e| (e.user, e.item, e.playtime)).collect();
    Ok(PlaytimeMatrix(Csr::from_triplets(
        n_users, n_items, &triplets,
    )?))
}

/// Build the binary item×category matrix.
pub fn category_matrix(items: &[RawItem], catalog: &Catalog) -> Result<CategoryMatrix> {
    let mut rows = vec![Vec::new(); catalog.n_items()];
    for it in items {
        let idx = catalog
            .item_index(&it.item_id)
            .ok_or_else(|| Error::data(format!("unknown item id {:?}", it.item_id)))?;
        for c in &it.categories {
            let cidx = catalog
                .category_index(c)
                .ok_or_else(|| Error::data(format!("unknown category {c:?}")))?;
            rows[idx].push(cidx);
        }
    }
    Ok(CategoryMatrix(Pattern::from_rows(
        catalog.n_categories(),
        &rows,
    )?))
}

/// Build both matrices at once.
pub fn build_matrices(
    interactions: &[RawInteraction],
    items: &[RawItem],
    catalog: &Catalog,
) -> Result<(PlaytimeMatrix, CategoryMatrix)> {
    let edges = index_interactions(interactions, catalog)?;
    let r = playtime_matrix(&edges, catalog.n_users(), catalog.n_items())?;
    let q = category_matrix(items, catalog)?;
    Ok((r, q))
}

/// Fold sizes under the rounding rule: validation and test get
/// `floor(ratio * n)`, the remainder goes to train.
pub fn fold_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(Error::data("split ratios must be positive"));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(Error::data("split ratios must sum to 1"));
    }
    let n_val = (rv * n as f64).floor() as usize;
    let n_test = (rs * n as f64).floor() as usize;
    Ok((n - n_val - n_test, n_val, n_test))
}

/// Uniform random partition of the interaction list, deterministic for a
/// fixed seed. Each fold is returned sorted by (user, item).
pub fn split_interactions(
    edges: &[Interaction],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitDataset> {
    if edges.len() < 3 {
        return Err(Error::data(format!(
            "need at least 3 interactions to split, got {}",
            edges.len()
        )));
    }
    let (n_train, n_val, _) = fold_sizes(edges.len(), ratios)?;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    Stream::new(seed, "split").shuffle(&mut order);
    let sorted_fold = |slice: &[usize]| {
        let mut fold: Vec<Interaction> = slice.iter().map(|&i| edges[i]).collect();
        fold.sort_by_key(|e| (e.user, e.item));
        fold
    };
    Ok(SplitDataset {
        train: sorted_fold(&order[..n_train]),
        val: sorted_fold(&order[n_train..n_train + n_val]),
        test: sorted_fold(&order[n_train + n_val..]),
        seed,
    })
}
