//! Asymmetric graph propagation with attention-weighted layer fusion.
//!
//! Users aggregate only their selected items and items only their
//! selected users, but normalization always uses full-graph degrees, so
//! thinning the edges never inflates the survivors' influence. Layers
//! carry no weights or nonlinearities; the final embedding is a
//! softmax-attention mix of all layer outputs, and scores are plain dot
//! products.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mat::{dot, Dense, Pattern};
use crate::par;
use crate::rng::Stream;
use crate::selection::DirectedSubgraphs;

/// Trainable state of the ranking model: layer-0 embeddings for both
/// sides plus one attention logit per layer output (L+1 in total).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub user_emb: Dense,
    pub item_emb: Dense,
    pub logits: Vec<f64>,
}

impl ModelParams {
    pub fn init(n_users: usize, n_items: usize, d: usize, n_layers: usize, seed: u64) -> Self {
        let mut u_rng = Stream::new(seed, "user_emb");
        let mut i_rng = Stream::new(seed, "item_emb");
        let mut user_emb = Dense::zeros(n_users, d);
        for v in user_emb.data_mut() {
            *v = u_rng.normal() * 0.1;
        }
        let mut item_emb = Dense::zeros(n_items, d);
        for v in item_emb.data_mut() {
            *v = i_rng.normal() * 0.1;
        }
        ModelParams {
            user_emb,
            item_emb,
            logits: vec![0.0; n_layers + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.user_emb.cols()
    }
}

/// Selected subgraphs plus the reverse-direction edge lists needed by
/// backpropagation, with degree invariants checked once.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub sub: DirectedSubgraphs,
    /// Transpose of `sub.item_to_user`: row i lists users that selected i.
    pub users_fed_by_item: Pattern,
    /// Transpose of `sub.user_to_item`: row u lists items that selected u.
    pub items_fed_by_user: Pattern,
}

impl Propagator {
    pub fn new(sub: DirectedSubgraphs) -> Result<Self> {
        for u in 0..sub.item_to_user.rows() {
            if sub.item_to_user.row_nnz(u) > 0 && sub.user_degree[u] == 0 {
                return Err(Error::data(format!("user {u} has edges but degree 0")));
            }
            for &i in sub.item_to_user.row(u) {
                if sub.item_degree[i] == 0 {
                    return Err(Error::data(format!("item {i} has edges but degree 0")));
                }
            }
        }
        for i in 0..sub.user_to_item.rows() {
            if sub.user_to_item.row_nnz(i) > 0 && sub.item_degree[i] == 0 {
                return Err(Error::data(format!("item {i} has edges but degree 0")));
            }
            for &u in sub.user_to_item.row(i) {
                if sub.user_degree[u] == 0 {
                    return Err(Error::data(format!("user {u} has edges but degree 0")));
                }
            }
        }
        let users_fed_by_item = sub.item_to_user.transpose();
        let items_fed_by_user = sub.user_to_item.transpose();
        Ok(Propagator {
            sub,
            users_fed_by_item,
            items_fed_by_user,
        })
    }

    fn coeff(&self, u: usize, i: usize) -> f64 {
        1.0 / ((self.sub.user_degree[u] * self.sub.item_degree[i]) as f64).sqrt()
    }

    /// One hop into users: each user sums its selected items' vectors.
    pub fn hop_to_users(&self, item_table: &Dense) -> Dense {
        let d = item_table.cols();
        let rows = par::map_range(self.sub.item_to_user.rows(), |u| {
            let mut acc = vec![0.0; d];
            for &i in self.sub.item_to_user.row(u) {
                let c = self.coeff(u, i);
                for (a, &x) in acc.iter_mut().zip(item_table.row(i)) {
                    *a += c * x;
                }
            }
            acc
        });
        Dense::from_vec(
            self.sub.item_to_user.rows(),
            d,
            rows.into_iter().flatten().collect(),
        )
    }

    /// One hop into items: each item sums its selected users' vectors.
    pub fn hop_to_items(&self, user_table: &Dense) -> Dense {
        let d = user_table.cols();
        let rows = par::map_range(self.sub.user_to_item.rows(), |i| {
            let mut acc = vec![0.0; d];
            for &u in self.sub.user_to_item.row(i) {
                let c = self.coeff(u, i);
                for (a, &x) in acc.iter_mut().zip(user_table.row(u)) {
                    *a += c * x;
                }
            }
            acc
        });
        Dense::from_vec(
            self.sub.user_to_item.rows(),
            d,
            rows.into_iter().flatten().collect(),
        )
    }

    /// Adjoint of `hop_to_users`: routes user-side gradients back to the
    /// items that fed them.
    pub fn hop_to_users_adjoint(&self, user_grads: &Dense) -> Dense {
        let d = user_grads.cols();
        let rows = par::map_range(self.users_fed_by_item.rows(), |i| {
            let mut acc = vec![0.0; d];
            for &u in self.users_fed_by_item.row(i) {
                let c = self.coeff(u, i);
                for (a, &x) in acc.iter_mut().zip(user_grads.row(u)) {
                    *a += c * x;
                }
            }
            acc
        });
        Dense::from_vec(
            self.users_fed_by_item.rows(),
            d,
            rows.into_iter().flatten().collect(),
        )
    }

    /// Adjoint of `hop_to_items`.
    pub fn hop_to_items_adjoint(&self, item_grads: &Dense) -> Dense {
        let d = item_grads.cols();
        let rows = par::map_range(self.items_fed_by_user.rows(), |u| {
            let mut acc = vec![0.0; d];
            for &i in self.items_fed_by_user.row(u) {
                let c = self.coeff(u, i);
                for (a, &x) in acc.iter_mut().zip(item_grads.row(i)) {
                    *a += c * x;
                }
            }
            acc
        });
        Dense::from_vec(
            self.items_fed_by_user.rows(),
            d,
            rows.into_iter().flatten().collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub user_layers: Vec<Dense>,
    pub item_layers: Vec<Dense>,
    pub attention: Vec<f64>,
    pub fused_users: Dense,
    pub fused_items: Dense,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Attention-weighted sum of layer tables; one weight per layer, shared
/// between users and items.
pub fn combine_layers(
    user_layers: &[Dense],
    item_layers: &[Dense],
    logits: &[f64],
) -> Result<(Dense, Dense, Vec<f64>)> {
    if user_layers.len() != logits.len() || item_layers.len() != logits.len() {
        return Err(Error::data("layer count does not match logit count"));
    }
    let alpha = softmax(logits);
    let mix = |layers: &[Dense]| {
        let mut out = Dense::zeros(layers[0].rows(), layers[0].cols());
        for (l, table) in layers.iter().enumerate() {
            let a = alpha[l];
            for (o, &x) in out.data_mut().iter_mut().zip(table.data()) {
                *o += a * x;
            }
        }
        out
    };
    Ok((mix(user_layers), mix(item_layers), alpha))
}

/// Synchronous L-layer propagation from the layer-0 tables, then fusion.
pub fn propagate(
    params: &ModelParams,
    prop: &Propagator,
    n_layers: usize,
) -> Result<PropagationResult> {
    if params.logits.len() != n_layers + 1 {
        return Err(Error::data(format!(
            "expected {} attention logits, found {}",
            n_layers + 1,
            params.logits.len()
        )));
    }
    let mut user_layers = vec![params.user_emb.clone()];
    let mut item_layers = vec![params.item_emb.clone()];
    for l in 0..n_layers {
        let next_users = prop.hop_to_users(&item_layers[l]);
        let next_items = prop.hop_to_items(&user_layers[l]);
        user_layers.push(next_users);
        item_layers.push(next_items);
    }
    let (fused_users, fused_items, attention) =
        combine_layers(&user_layers, &item_layers, &params.logits)?;
    if !fused_users.is_finite() || !fused_items.is_finite() {
        return Err(Error::numeric("propagation produced non-finite values"));
    }
    Ok(PropagationResult {
        user_layers,
        item_layers,
        attention,
        fused_users,
        fused_items,
    })
}

/// Predicted affinity of a user-item pair.
pub fn score(e_u: &[f64], e_i: &[f64]) -> f64 {
    dot(e_u, e_i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    /// True when fewer than the requested N items were available.
    pub short: bool,
}

/// Top-N items for one user by descending score (ties to the lowest
/// index), skipping `exclude` (the user's training items, sorted).
pub fn recommend_top_n(
    fused_users: &Dense,
    fused_items: &Dense,
    u: usize,
    n: usize,
    exclude: &[usize],
) -> RankedList {
    debug_assert!(exclude.windows(2).all(|w| w[0] < w[1]));
    let e_u = fused_users.row(u);
    let mut scored: Vec<(f64, usize)> = (0..fused_items.rows())
        .filter(|i| exclude.binary_search(i).is_err())
        .map(|i| (score(e_u, fused_items.row(i)), i))
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if scored.len() > n {
        scored.select_nth_unstable_by(n - 1, by_rank);
        scored.truncate(n);
    }
    scored.sort_by(by_rank);
    let short = scored.len() < n;
    RankedList {
        items: scored.iter().map(|&(_, i)| i).collect(),
        scores: scored.iter().map(|&(s, _)| s).collect(),
        short,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::EntityKind;
    use crate::mat::Csr;
    use crate::preferences::ImplicitPreference;
    use crate::rng::Stream;
    use crate::selection::{build_subgraphs, singleton_clusters, DirectedSubgraphs};

    fn full_propagator(n_users: usize, n_items: usize, edges: &[(usize, usize)]) -> Propagator {
        let triplets: Vec<(usize, usize, f64)> = edges.iter().map(|&(u, i)| (u, i, 1.0)).collect();
        let h = ImplicitPreference(Csr::from_triplets(n_users, n_items, &triplets).unwrap());
        let sub = build_subgraphs(
            &h,
            &singleton_clusters(n_users, EntityKind::User),
            &singleton_clusters(n_items, EntityKind::Item),
        )
        .unwrap();
        Propagator::new(sub).unwrap()
    }

    #[test]
    fn single_edge_swaps_embeddings() {
        let prop = full_propagator(1, 1, &[(0, 0)]);
        let params = ModelParams {
            user_emb: Dense::from_vec(1, 2, vec![1.0, 2.0]),
            item_emb: Dense::from_vec(1, 2, vec![3.0, 4.0]),
            logits: vec![0.0, 0.0],
        };
        let out = propagate(&params, &prop, 1).unwrap();
        assert_eq!(out.user_layers[1].row(0), &[3.0, 4.0]);
        assert_eq!(out.item_layers[1].row(0), &[1.0, 2.0]);
    }

    #[test]
    fn orphaned_user_goes_to_zero() {
        // User 1 interacted but none of its edges were selected for it.
        let h = ImplicitPreference(
            Csr::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.4)]).unwrap(),
        );
        let sub = build_subgraphs(
            &h,
            &singleton_clusters(2, EntityKind::User),
            &singleton_clusters(2, EntityKind::Item),
        )
        .unwrap();
        let mut sub = sub;
        // Manually orphan user 1 on the item→user side.
        sub.item_to_user =
            Pattern::from_rows(2, &[sub.item_to_user.row(0).to_vec(), vec![]]).unwrap();
        let prop = Propagator::new(sub).unwrap();
        let params = ModelParams::init(2, 2, 3, 2, 1);
        let out = propagate(&params, &prop, 2).unwrap();
        assert_eq!(out.user_layers[1].row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_degree_with_edges_is_rejected() {
        let sub = DirectedSubgraphs {
            item_to_user: Pattern::from_rows(1, &[vec![0]]).unwrap(),
            user_to_item: Pattern::from_rows(1, &[vec![]]).unwrap(),
            user_degree: vec![1],
            item_degree: vec![0],
        };
        assert!(Propagator::new(sub).is_err());
    }

    // Dense oracle: stack users and items into one table and multiply by
    // the full normalized bipartite adjacency.
    fn dense_oracle(
        n_users: usize,
        n_items: usize,
        edges: &[(usize, usize)],
        params: &ModelParams,
        n_layers: usize,
    ) -> (Vec<Dense>, Vec<Dense>) {
        let d = params.dim();
        let mut du = vec![0usize; n_users];
        let mut di = vec![0usize; n_items];
        for &(u, i) in edges {
            du[u] += 1;
            di[i] += 1;
        }
        let n = n_users + n_items;
        let mut adj = Dense::zeros(n, n);
        for &(u, i) in edges {
            let c = 1.0 / ((du[u] * di[i]) as f64).sqrt();
            adj.set(u, n_users + i, c);
            adj.set(n_users + i, u, c);
        }
        let mut table = Dense::zeros(n, d);
        for u in 0..n_users {
            table.row_mut(u).copy_from_slice(params.user_emb.row(u));
        }
        for i in 0..n_items {
            table
                .row_mut(n_users + i)
                .copy_from_slice(params.item_emb.row(i));
        }
        let mut user_layers = Vec::new();
        let mut item_layers = Vec::new();
        for _ in 0..=n_layers {
            let mut ul = Dense::zeros(n_users, d);
            let mut il = Dense::zeros(n_items, d);
            for u in 0..n_users {
                ul.row_mut(u).copy_from_slice(table.row(u));
            }
            for i in 0..n_items {
                il.row_mut(i).copy_from_slice(table.row(n_users + i));
            }
            user_layers.push(ul);
            item_layers.push(il);
            table = adj.matmul(&table);
        }
        (user_layers, item_layers)
    }

    #[test]
    fn full_selection_matches_dense_oracle() {
        let mut rng = Stream::new(31, "prop");
        for trial in 0..10 {
            let n_users = 4;
            let n_items = 4;
            let mut edges = Vec::new();
            for u in 0..n_users {
                for i in 0..n_items {
                    if rng.f64() < 0.6 {
                        edges.push((u, i));
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 0));
            }
            let prop = full_propagator(n_users, n_items, &edges);
            let params = ModelParams::init(n_users, n_items, 3, 3, trial);
            let out = propagate(&params, &prop, 3).unwrap();
            let (ou, oi) = dense_oracle(n_users, n_items, &edges, &params, 3);
            for l in 0..=3 {
                for (a, b) in out.user_layers[l].data().iter().zip(ou[l].data()) {
                    assert!((a - b).abs() < 1e-10, "trial {trial} layer {l}");
                }
                for (a, b) in out.item_layers[l].data().iter().zip(oi[l].data()) {
                    assert!((a - b).abs() < 1e-10, "trial {trial} layer {l}");
                }
            }
        }
    }

    #[test]
    fn propagation_is_linear_in_layer_zero() {
        let mut rng = Stream::new(32, "lin");
        let prop = full_propagator(3, 3, &[(0, 0), (0, 1), (1, 1), (2, 2), (1, 2)]);
        let mut make = |seed| {
            let mut p = ModelParams::init(3, 3, 2, 2, seed);
            for v in p.user_emb.data_mut() {
                *v = rng.normal();
            }
            for v in p.item_emb.data_mut() {
                *v = rng.normal();
            }
            p.logits = vec![0.3, -0.2, 0.5];
            p
        };
        let a = make(1);
        let b = make(2);
        let mut summed = a.clone();
        for (x, &y) in summed.user_emb.data_mut().iter_mut().zip(b.user_emb.data()) {
            *x += y;
        }
        for (x, &y) in summed.item_emb.data_mut().iter_mut().zip(b.item_emb.data()) {
            *x += y;
        }
        let oa = propagate(&a, &prop, 2).unwrap();
        let ob = propagate(&b, &prop, 2).unwrap();
        let os = propagate(&summed, &prop, 2).unwrap();
        for ((x, y), z) in oa
            .fused_users
            .data()
            .iter()
            .zip(ob.fused_users.data())
            .zip(os.fused_users.data())
        {
            assert!((x + y - z).abs() < 1e-10);
        }
        for ((x, y), z) in oa
            .fused_items
            .data()
            .iter()
            .zip(ob.fused_items.data())
            .zip(os.fused_items.data())
        {
            assert!((x + y - z).abs() < 1e-10);
        }
    }

    #[test]
    fn adjoints_transpose_the_hops() {
        // <hop(x), y> == <x, adjoint(y)> for random tables.
        let mut rng = Stream::new(33, "adj");
        let prop = full_propagator(4, 5, &[(0, 0), (0, 3), (1, 1), (2, 4), (3, 2), (3, 4)]);
        for _ in 0..5 {
            let mut items = Dense::zeros(5, 3);
            for v in items.data_mut() {
                *v = rng.normal();
            }
            let mut user_grads = Dense::zeros(4, 3);
            for v in user_grads.data_mut() {
                *v = rng.normal();
            }
            let lhs: f64 = prop
                .hop_to_users(&items)
                .data()
                .iter()
                .zip(user_grads.data())
                .map(|(&a, &b)| a * b)
                .sum();
            let rhs: f64 = items
                .data()
                .iter()
                .zip(prop.hop_to_users_adjoint(&user_grads).data())
                .map(|(&a, &b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() < 1e-10);

            let mut users = Dense::zeros(4, 3);
            for v in users.data_mut() {
                *v = rng.normal();
            }
            let mut item_grads = Dense::zeros(5, 3);
            for v in item_grads.data_mut() {
                *v = rng.normal();
            }
            let lhs: f64 = prop
                .hop_to_items(&users)
                .data()
                .iter()
                .zip(item_grads.data())
                .map(|(&a, &b)| a * b)
                .sum();
            let rhs: f64 = users
                .data()
                .iter()
                .zip(prop.hop_to_items_adjoint(&item_grads).data())
                .map(|(&a, &b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn softmax_cases() {
        let a = softmax(&[0.0, 0.0, 0.0]);
        for &x in &a {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let a = softmax(&[0.0, 2.0f64.ln(), 4.0f64.ln()]);
        assert!((a[0] - 1.0 / 7.0).abs() < 1e-12);
        assert!((a[1] - 2.0 / 7.0).abs() < 1e-12);
        assert!((a[2] - 4.0 / 7.0).abs() < 1e-12);
        let a = softmax(&[30.0, 0.0]);
        assert!(a[0] > 1.0 - 1e-9);
        // Probability vector under extreme logits.
        let a = softmax(&[1000.0, -1000.0, 500.0]);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn combine_layers_saturates_and_averages() {
        let l0u = Dense::from_vec(1, 2, vec![1.0, 0.0]);
        let l1u = Dense::from_vec(1, 2, vec![0.0, 1.0]);
        let l0i = Dense::from_vec(1, 2, vec![2.0, 0.0]);
        let l1i = Dense::from_vec(1, 2, vec![0.0, 2.0]);
        let (fu, fi, alpha) = combine_layers(
            &[l0u.clone(), l1u.clone()],
            &[l0i.clone(), l1i.clone()],
            &[0.0, 0.0],
        )
        .unwrap();
        assert_eq!(fu.row(0), &[0.5, 0.5]);
        assert_eq!(fi.row(0), &[1.0, 1.0]);
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let (fu, _, _) = combine_layers(&[l0u, l1u], &[l0i, l1i], &[30.0, 0.0]).unwrap();
        assert!((fu.get(0, 0) - 1.0).abs() < 1e-9);
        assert!(fu.get(0, 1).abs() < 1e-9);
    }

    #[test]
    fn score_is_a_dot_product() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(score(&[2.0, 3.0], &[2.0, 3.0]), 13.0);
        assert_eq!(score(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
    }

    #[test]
    fn top_n_respects_ties_exclusions_and_order() {
        let users = Dense::from_vec(1, 1, vec![1.0]);
        // Equal scores: first N indices win.
        let items = Dense::from_vec(4, 1, vec![1.0, 1.0, 1.0, 1.0]);
        let out = recommend_top_n(&users, &items, 0, 2, &[]);
        assert_eq!(out.items, vec![0, 1]);
        assert!(!out.short);
        // Everything but item 2 excluded.
        let out = recommend_top_n(&users, &items, 0, 2, &[0, 1, 3]);
        assert_eq!(out.items, vec![2]);
        assert!(out.short);
        // Hand-set scores sort descending.
        let items = Dense::from_vec(5, 1, vec![0.3, 0.9, -0.2, 0.9, 0.5]);
        let out = recommend_top_n(&users, &items, 0, 5, &[]);
        assert_eq!(out.items, vec![1, 3, 4, 0, 2]);
        assert_eq!(out.scores[0], 0.9);
        // Positive scaling leaves the ranking unchanged.
        let mut scaled = items.clone();
        for v in scaled.data_mut() {
            *v *= 7.5;
        }
        let out2 = recommend_top_n(&users, &scaled, 0, 5, &[]);
        assert_eq!(out.items, out2.items);
    }
}
