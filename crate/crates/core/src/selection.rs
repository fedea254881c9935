//! Clustering-based neighbor selection.
//!
//! For every user, at most one interacted item per item-cluster survives
//! (the one with the highest balanced preference); symmetrically for
//! every item over user-clusters. The two directed edge sets thin the
//! interaction graph from each side while spanning many clusters, which
//! is what later makes propagation diversity-preserving.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kmeans::{ClusterAssignment, EntityKind};
use crate::mat::{Csr, Pattern};
use crate::par;
use crate::preferences::ImplicitPreference;

/// The two selected subgraphs plus full-graph degrees. Edges are stored
/// destination-major: `item_to_user` row u lists the items feeding user
/// u; `user_to_item` row i lists the users feeding item i. Degrees come
/// from the full interaction support, not the subgraphs.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedSubgraphs {
    pub item_to_user: Pattern,
    pub user_to_item: Pattern,
    pub user_degree: Vec<usize>,
    pub item_degree: Vec<usize>,
}

/// Best-preference neighbor per cluster, over one sparse row. Rows are
/// index-sorted, so keeping strict maxima breaks ties toward the lowest
/// index.
fn per_cluster_argmax(neighbors: &[usize], values: &[f64], assignment: &[usize]) -> Vec<usize> {
    let mut best: HashMap<usize, (f64, usize)> = HashMap::with_capacity(neighbors.len());
    for (&n, &v) in neighbors.iter().zip(values) {
        match best.entry(assignment[n]) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if v > e.get().0 {
                    e.insert((v, n));
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert((v, n));
            }
        }
    }
    let mut selected: Vec<usize> = best.values().map(|&(_, n)| n).collect();
    selected.sort_unstable();
    selected
}

/// Items retained for user u: per item-cluster, the interacted item with
/// the highest balanced preference. Clusters the user never touched
/// contribute nothing.
pub fn select_items_for_user(
    u: usize,
    h: &ImplicitPreference,
    item_clusters: &ClusterAssignment,
) -> Vec<usize> {
    let (items, values) = h.0.row(u);
    per_cluster_argmax(items, values, &item_clusters.assignment)
}

/// Users retained for item i, from the item-major transpose of H.
pub fn select_users_for_item(
    i: usize,
    ht: &Csr<f64>,
    user_clusters: &ClusterAssignment,
) -> Vec<usize> {
    let (users, values) = ht.row(i);
    per_cluster_argmax(users, values, &user_clusters.assignment)
}

/// Run both selections over the whole graph. Degrees are taken from the
/// support of H (the full train interaction graph).
pub fn build_subgraphs(
    h: &ImplicitPreference,
    user_clusters: &ClusterAssignment,
    item_clusters: &ClusterAssignment,
) -> Result<DirectedSubgraphs> {
    let n_users = h.0.rows();
    let n_items = h.0.cols();
    if user_clusters.kind != EntityKind::User || item_clusters.kind != EntityKind::Item {
        return Err(Error::data("cluster assignment kinds are swapped"));
    }
    if user_clusters.assignment.len() != n_users {
        return Err(Error::data("user cluster assignment length mismatch"));
    }
    if item_clusters.assignment.len() != n_items {
        return Err(Error::data("item cluster assignment length mismatch"));
    }
    let ht = h.0.transpose();

    let user_rows = par::map_range(n_users, |u| select_items_for_user(u, h, item_clusters));
    let item_rows = par::map_range(n_items, |i| select_users_for_item(i, &ht, user_clusters));

    let user_degree: Vec<usize> = (0..n_users).map(|u| h.0.row_nnz(u)).collect();
    let item_degree: Vec<usize> = (0..n_items).map(|i| ht.row_nnz(i)).collect();
    Ok(DirectedSubgraphs {
        item_to_user: Pattern::from_rows(n_items, &user_rows)?,
        user_to_item: Pattern::from_rows(n_users, &item_rows)?,
        user_degree,
        item_degree,
    })
}

/// Identity clustering (every point its own cluster). Used for the
/// selection-disabled ablation: with singleton clusters the argmax keeps
/// every interaction.
pub fn singleton_clusters(n: usize, kind: EntityKind) -> ClusterAssignment {
    ClusterAssignment {
        kind,
        k: n,
        assignment: (0..n).collect(),
        centroids: crate::mat::Dense::zeros(0, 0),
        iterations: 0,
    }
}
