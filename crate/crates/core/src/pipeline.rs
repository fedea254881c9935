//! End-to-end pipeline composition.
//!
//! `prepare` runs everything that does not depend on the selection or
//! training knobs: k-core filtering, splitting, preference learning,
//! and graph representation learning. `run_cell` then takes one knob
//! setting (betas, selection switches, weighting) through clustering,
//! selection, training, and evaluation, so sweeps share a single
//! `PreparedData`.

use crate::dataset::{
    self, Catalog, CategoryMatrix, Interaction, PlaytimeMatrix, RawInteraction, RawItem,
    SplitDataset,
};
use crate::embedding::{
    augmented_item_embeddings, build_category_graph, train_dgi, user_embeddings,
};
use crate::error::{Error, Result};
use crate::io::SweepRow;
use crate::kmeans::{cluster_count, kmeans, ClusterAssignment, EntityKind};
use crate::mat::Dense;
use crate::metrics::{evaluate, MetricsReport};
use crate::preferences::{
    category_preference, implicit_preference, percentile_transform, CategoryPreference,
    GlobalShareMode, ImplicitPreference, PercentileMatrix,
};
use crate::propagation::{propagate, ModelParams, Propagator};
use crate::selection::{build_subgraphs, singleton_clusters, DirectedSubgraphs};
use crate::training::{category_weights, fit, TrainReport, TrainSettings};

/// Every knob of the pipeline in one place. Defaults follow the
/// reference configuration: 5-core filtering, 6:2:2 split, d=32,
/// beta_u=0.6, beta_i=0.06, 3 propagation layers, evaluation at
/// N in {100, 150, 200}.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub k_core: usize,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    pub d: usize,
    pub dgi_epochs: usize,
    pub dgi_lr: f64,
    pub global_share_mode: GlobalShareMode,
    pub beta_u: f64,
    pub beta_i: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub n_layers: usize,
    pub train: TrainSettings,
    pub eval_ns: Vec<usize>,
    /// Select representative items per user (off = keep all items).
    pub selection_us: bool,
    /// Select representative users per item (off = keep all users).
    pub selection_is: bool,
    /// Weight positives by category rarity (off = uniform weights).
    pub use_weights: bool,
    /// Initialize layer-0 tables from the learned representations
    /// instead of random normal.
    pub warm_start: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            k_core: 5,
            ratios: (0.6, 0.2, 0.2),
            seed: 0,
            d: 32,
            dgi_epochs: 200,
            dgi_lr: 0.001,
            global_share_mode: GlobalShareMode::TouchedUnion,
            beta_u: 0.6,
            beta_i: 0.06,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-4,
            n_layers: 3,
            train: TrainSettings::default(),
            eval_ns: vec![100, 150, 200],
            selection_us: true,
            selection_is: true,
            use_weights: true,
            warm_start: false,
        }
    }
}

/// Reject knob values outside their domains before any heavy work.
pub fn validate(params: &PipelineParams) -> Result<()> {
    for (name, beta) in [("beta_u", params.beta_u), ("beta_i", params.beta_i)] {
        if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
            return Err(Error::data(format!(
                "{name} must lie in (0, 1], got {beta}"
            )));
        }
    }
    if params.d == 0 {
        return Err(Error::data("embedding dimension must be at least 1"));
    }
    if params.eval_ns.is_empty() {
        return Err(Error::data("need at least one evaluation list length"));
    }
    Ok(())
}

/// Everything shared across sweep cells: the filtered catalog, split,
/// preference matrices, and learned representations.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub catalog: Catalog,
    pub split: SplitDataset,
    pub train_matrix: PlaytimeMatrix,
    pub q: CategoryMatrix,
    pub percentiles: PercentileMatrix,
    pub preferences: CategoryPreference,
    pub balanced: ImplicitPreference,
    /// Per-user sorted validation / test item lists.
    pub val_items: Vec<Vec<usize>>,
    pub test_items: Vec<Vec<usize>>,
    /// User representations (|U| x d) used for user clustering.
    pub user_repr: Dense,
    /// Augmented item representations (|I| x 2d) used for item clustering.
    pub item_repr: Dense,
    pub dgi_losses: Vec<f64>,
}

/// Group a fold's interactions into per-user sorted item lists.
pub fn per_user_items(edges: &[Interaction], n_users: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_users];
    for e in edges {
        out[e.user].push(e.item);
    }
    for row in &mut out {
        row.sort_unstable();
    }
    out
}

pub fn prepare(
    interactions: &[RawInteraction],
    items: &[RawItem],
    params: &PipelineParams,
) -> Result<PreparedData> {
    validate(params)?;
    let kept = dataset::filter_k_core(interactions, items, params.k_core)?;
    if kept.emptied {
        return Err(Error::data(format!(
            "{}-core filtering removed every interaction",
            params.k_core
        )));
    }
    let catalog = Catalog::build(&kept.interactions, &kept.items);
    let edges = dataset::index_interactions(&kept.interactions, &catalog)?;
    let split = dataset::split_interactions(&edges, params.ratios, params.seed)?;
    let train_matrix =
        dataset::playtime_matrix(&split.train, catalog.n_users(), catalog.n_items())?;
    let q = dataset::category_matrix(&kept.items, &catalog)?;

    let percentiles = percentile_transform(&train_matrix);
    let preferences =
        category_preference(&train_matrix, &percentiles, &q, params.global_share_mode)?;
    let balanced = implicit_preference(&preferences, &q, &percentiles)?;

    let graph = build_category_graph(&q)?;
    let dgi = train_dgi(
        &graph,
        params.d,
        params.dgi_epochs,
        params.dgi_lr,
        params.seed,
    )?;
    let user_repr = user_embeddings(&preferences, &dgi.category_embeddings)?;
    let item_repr = augmented_item_embeddings(&q, &dgi.category_embeddings, &dgi.item_embeddings)?;

    let val_items = per_user_items(&split.val, catalog.n_users());
    let test_items = per_user_items(&split.test, catalog.n_users());
    Ok(PreparedData {
        catalog,
        split,
        train_matrix,
        q,
        percentiles,
        preferences,
        balanced,
        val_items,
        test_items,
        user_repr,
        item_repr,
        dgi_losses: dgi.losses,
    })
}

/// Cluster users and items under the cell's selection switches. A
/// disabled side or beta = 1 yields singleton clusters, which makes
/// selection keep the full edge set exactly.
pub fn cluster_entities(
    user_repr: &Dense,
    item_repr: &Dense,
    params: &PipelineParams,
) -> Result<(ClusterAssignment, ClusterAssignment)> {
    let n_users = user_repr.rows();
    let n_items = item_repr.rows();
    let k_u = cluster_count(params.beta_u, n_users);
    let users = if !params.selection_is || k_u == n_users {
        singleton_clusters(n_users, EntityKind::User)
    } else {
        kmeans(
            user_repr,
            k_u,
            EntityKind::User,
            params.seed,
            params.kmeans_max_iter,
            params.kmeans_tol,
        )?
    };
    let k_i = cluster_count(params.beta_i, n_items);
    let items = if !params.selection_us || k_i == n_items {
        singleton_clusters(n_items, EntityKind::Item)
    } else {
        kmeans(
            item_repr,
            k_i,
            EntityKind::Item,
            params.seed,
            params.kmeans_max_iter,
            params.kmeans_tol,
        )?
    };
    Ok((users, items))
}

/// Initial model parameters, optionally seeded from the category-aware
/// representations (item side truncated to the first d columns).
pub fn warm_start_params(
    user_repr: &Dense,
    item_repr: &Dense,
    params: &PipelineParams,
) -> ModelParams {
    let n_users = user_repr.rows();
    let n_items = item_repr.rows();
    let mut init = ModelParams::init(n_users, n_items, params.d, params.n_layers, params.seed);
    if params.warm_start {
        init.user_emb = user_repr.clone();
        let mut item_emb = Dense::zeros(n_items, params.d);
        for i in 0..n_items {
            item_emb
                .row_mut(i)
                .copy_from_slice(&item_repr.row(i)[..params.d]);
        }
        init.item_emb = item_emb;
    }
    init
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub metrics: MetricsReport,
    pub train_report: TrainReport,
    pub model: ModelParams,
    pub fused_users: Dense,
    pub fused_items: Dense,
    pub subgraphs: DirectedSubgraphs,
    pub user_clusters: ClusterAssignment,
    pub item_clusters: ClusterAssignment,
}

/// One full post-representation run: cluster, select, train, evaluate.
pub fn run_cell(prep: &PreparedData, params: &PipelineParams) -> Result<CellResult> {
    validate(params)?;
    let (user_clusters, item_clusters) =
        cluster_entities(&prep.user_repr, &prep.item_repr, params)?;
    let subgraphs = build_subgraphs(&prep.balanced, &user_clusters, &item_clusters)?;
    let prop = Propagator::new(subgraphs.clone())?;
    let weights = if params.use_weights {
        category_weights(&prep.q)?
    } else {
        vec![1.0; prep.catalog.n_items()]
    };
    let init = warm_start_params(&prep.user_repr, &prep.item_repr, params);
    let (model, train_report) = fit(
        &prep.balanced.0,
        &prep.val_items,
        &prop,
        &weights,
        &params.train,
        init,
    )?;
    let out = propagate(&model, &prop, params.n_layers)?;
    let metrics = evaluate(
        &out.fused_users,
        &out.fused_items,
        &prep.balanced.0,
        &prep.test_items,
        &prep.q,
        &params.eval_ns,
    )?;
    Ok(CellResult {
        metrics,
        train_report,
        model,
        fused_users: out.fused_users,
        fused_items: out.fused_items,
        subgraphs,
        user_clusters,
        item_clusters,
    })
}

/// One sweep grid cell: the five knobs that vary across the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub beta_u: f64,
    pub beta_i: f64,
    pub selection_us: bool,
    pub selection_is: bool,
    pub weights: bool,
}

pub fn cell_params(base: &PipelineParams, cell: &SweepCell) -> PipelineParams {
    let mut p = base.clone();
    p.beta_u = cell.beta_u;
    p.beta_i = cell.beta_i;
    p.selection_us = cell.selection_us;
    p.selection_is = cell.selection_is;
    p.use_weights = cell.weights;
    p
}

/// Run every cell against shared prepared data. Failed cells produce
/// rows with empty metrics and an error string; the sweep continues.
pub fn sweep(
    prep: &PreparedData,
    base: &PipelineParams,
    cells: &[SweepCell],
) -> Result<(Vec<SweepRow>, Vec<String>)> {
    if cells.is_empty() {
        return Err(Error::data("sweep grid is empty"));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        let params = cell_params(base, cell);
        let metrics = match run_cell(prep, &params) {
            Ok(result) => Some(result.metrics),
            Err(e) => {
                failures.push(format!(
                    "cell beta_u={} beta_i={} us={} is={} w={}: {e}",
                    cell.beta_u, cell.beta_i, cell.selection_us, cell.selection_is, cell.weights
                ));
                None
            }
        };
        for (pos, &n) in base.eval_ns.iter().enumerate() {
            rows.push(SweepRow {
                beta_u: cell.beta_u,
                beta_i: cell.beta_i,
                selection_us: cell.selection_us,
                selection_is: cell.selection_is,
                weights: cell.weights,
                n,
                metrics: metrics.as_ref().map(|m| {
                    (
                        m.recall[pos],
                        m.hit_ratio[pos],
                        m.hit_ratio_classic[pos],
                        m.coverage[pos],
                    )
                }),
            });
        }
    }
    Ok((rows, failures))
}
