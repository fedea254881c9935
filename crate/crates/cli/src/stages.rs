//! Pipeline stages. Each stage reads its predecessors' persisted
//! artifacts from the workdir, computes its piece, and writes its own
//! artifacts atomically together with a manifest.

use std::path::{Path, PathBuf};

use divrec_core::dataset::{self, Catalog, InteractionFormat, RawItem, SplitDataset};
use divrec_core::embedding::{
    augmented_item_embeddings, build_category_graph, train_dgi, user_embeddings,
};
use divrec_core::io::{self, DenseMeta, Manifest, MatrixMeta, RecommendationLine};
use divrec_core::mat::Dense;
use divrec_core::metrics::{self, MetricsReport};
use divrec_core::pipeline::{self, cluster_entities, per_user_items, warm_start_params};
use divrec_core::pipeline::{PipelineParams, SweepCell};
use divrec_core::preferences::{
    category_preference, histogram, implicit_preference, percentile_transform,
    stored_playtimes_f64, stored_values_f64, CategoryPreference, ImplicitPreference,
};
use divrec_core::propagation::{propagate, recommend_top_n, Propagator};
use divrec_core::selection::build_subgraphs;
use divrec_core::training::{category_weights, fit};
use divrec_core::{Error, Result};

use crate::config::{PipelineConfig, UsageError};

pub const INTERACTIONS_FILTERED: &str = "interactions_filtered.csv";
pub const ITEMS_FILTERED: &str = "items_filtered.jsonl";
pub const CATALOG_USERS: &str = "catalog_users.csv";
pub const CATALOG_ITEMS: &str = "catalog_items.csv";
pub const CATALOG_CATEGORIES: &str = "catalog_categories.csv";
pub const SPLIT: &str = "split.csv";
pub const PERCENTILES: &str = "percentiles.csv";
pub const PREFERENCES: &str = "preferences.csv";
pub const BALANCED: &str = "balanced.csv";
pub const HIST_PLAYTIME: &str = "hist_playtime.csv";
pub const HIST_PERCENTILE: &str = "hist_percentile.csv";
pub const HIST_BALANCED: &str = "hist_balanced.csv";
pub const CATEGORY_EMB: &str = "category_emb.f32";
pub const ITEM_EMB: &str = "item_emb.f32";
pub const USER_REPR: &str = "user_repr.f32";
pub const ITEM_REPR: &str = "item_repr.f32";
pub const DGI_LOSSES: &str = "dgi_losses.json";
pub const USER_CLUSTERS: &str = "user_clusters.csv";
pub const ITEM_CLUSTERS: &str = "item_clusters.csv";
pub const SUBGRAPHS: &str = "subgraphs.csv";
pub const PARAMS_USER: &str = "params_user.f32";
pub const PARAMS_ITEM: &str = "params_item.f32";
pub const LOGITS: &str = "logits.json";
pub const FUSED_USERS: &str = "fused_users.f32";
pub const FUSED_ITEMS: &str = "fused_items.f32";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const METRICS: &str = "metrics.json";
pub const SWEEP: &str = "sweep.csv";

/// Shared state for one invocation: the effective config, the derived
/// pipeline knobs, and the config fingerprint stamped on artifacts.
pub struct StageCtx {
    pub cfg: PipelineConfig,
    pub params: PipelineParams,
    pub fingerprint: String,
    pub force: bool,
}

impl StageCtx {
    pub fn new(cfg: PipelineConfig, force: bool) -> std::result::Result<StageCtx, UsageError> {
        let params = cfg.to_params()?;
        pipeline::validate(&params).map_err(|e| UsageError(e.to_string()))?;
        let fingerprint = cfg.fingerprint();
        Ok(StageCtx {
            cfg,
            params,
            fingerprint,
            force,
        })
    }

    pub fn workdir(&self) -> &Path {
        &self.cfg.paths.workdir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workdir().join(name)
    }

    fn manifest(&self, stage: &str) -> Manifest {
        let mut m = Manifest::new(stage, &self.fingerprint, self.params.seed);
        m.config = serde_json::to_value(&self.cfg).unwrap_or(serde_json::Value::Null);
        m
    }

    fn finish_stage(&self, mut manifest: Manifest, inputs: &[&str]) -> Result<Manifest> {
        for name in inputs {
            manifest.record_input(&self.path(name))?;
        }
        let name = format!("manifest_{}.json", manifest.stage);
        io::write_manifest(&self.path(&name), &manifest)?;
        Ok(manifest)
    }

    /// Gate on an upstream stage: its manifest must exist, and a config
    /// fingerprint mismatch is reported (suppressed by --force).
    fn require_stage(&self, stage: &str) -> Result<Manifest> {
        let path = self.path(&format!("manifest_{stage}.json"));
        if !path.exists() {
            return Err(Error::data(format!(
                "missing {stage} artifacts in {}: run {stage} first",
                self.workdir().display()
            )));
        }
        let manifest = io::read_manifest(&path)?;
        if manifest.config_fingerprint != self.fingerprint && !self.force {
            eprintln!(
                "warning: {stage} artifacts in {} were produced with a different \
                 config; rerun {stage} (or pass --force to silence this warning)",
                self.workdir().display()
            );
        }
        Ok(manifest)
    }

    fn load_catalog(&self) -> Result<Catalog> {
        let users = io::read_id_index_csv(&self.path(CATALOG_USERS))?;
        let items = io::read_id_index_csv(&self.path(CATALOG_ITEMS))?;
        let categories = io::read_id_index_csv(&self.path(CATALOG_CATEGORIES))?;
        Ok(Catalog::from_ids(users, items, categories))
    }

    fn load_items(&self) -> Result<Vec<RawItem>> {
        dataset::ingest_items(&self.path(ITEMS_FILTERED))
    }

    fn load_split(&self) -> Result<SplitDataset> {
        io::read_split_csv(&self.path(SPLIT))
    }

    fn load_balanced(&self) -> Result<ImplicitPreference> {
        let (_, m) = io::read_sparse_csv(&self.path(BALANCED))?;
        Ok(ImplicitPreference(m))
    }

    fn load_dense(&self, name: &str) -> Result<Dense> {
        let (_, m) = io::read_dense_f32(&self.path(name))?;
        Ok(m)
    }
}

fn dense_meta(name: &str, m: &Dense, seed: Option<u64>, epochs: Option<usize>) -> DenseMeta {
    DenseMeta {
        name: name.to_string(),
        rows: m.rows(),
        cols: m.cols(),
        seed,
        epochs,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    io::atomic_write(path, format!("{json}\n").as_bytes())
}

/// Read the raw inputs, apply the k-core filter, index ids, and split
/// interactions into train/validation/test folds.
pub fn ingest(ctx: &StageCtx) -> Result<()> {
    std::fs::create_dir_all(ctx.workdir())?;
    let inter_path = &ctx.cfg.paths.interactions;
    let items_path = &ctx.cfg.paths.items;
    let raw_inter =
        dataset::ingest_interactions(inter_path, InteractionFormat::from_path(inter_path))?;
    let raw_items = dataset::ingest_items(items_path)?;
    let kept = dataset::filter_k_core(&raw_inter, &raw_items, ctx.params.k_core)?;
    if kept.emptied {
        return Err(Error::data(format!(
            "{}-core filtering removed every interaction; lower dataset.k_core",
            ctx.params.k_core
        )));
    }
    let catalog = Catalog::build(&kept.interactions, &kept.items);
    let edges = dataset::index_interactions(&kept.interactions, &catalog)?;
    let split = dataset::split_interactions(&edges, ctx.params.ratios, ctx.params.seed)?;

    io::write_interactions_csv(&ctx.path(INTERACTIONS_FILTERED), &kept.interactions)?;
    io::write_items_jsonl(&ctx.path(ITEMS_FILTERED), &kept.items)?;
    io::write_id_index_csv(&ctx.path(CATALOG_USERS), catalog.user_ids())?;
    io::write_id_index_csv(&ctx.path(CATALOG_ITEMS), catalog.item_ids())?;
    io::write_id_index_csv(&ctx.path(CATALOG_CATEGORIES), catalog.category_ids())?;
    io::write_split_csv(&ctx.path(SPLIT), &split)?;

    let mut manifest = ctx.manifest("ingest");
    manifest.record_input(inter_path)?;
    manifest.record_input(items_path)?;
    ctx.finish_stage(manifest, &[])?;
    println!(
        "ingest: kept {} users, {} items, {} categories; split {} interactions \
         into train {} / val {} / test {}",
        catalog.n_users(),
        catalog.n_items(),
        catalog.n_categories(),
        edges.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

/// Turn train-fold playtimes into percentile, category preference, and
/// balanced preference matrices, plus distribution histograms.
pub fn preprocess(ctx: &StageCtx) -> Result<()> {
    ctx.require_stage("ingest")?;
    let catalog = ctx.load_catalog()?;
    let items = ctx.load_items()?;
    let split = ctx.load_split()?;
    let train_matrix =
        dataset::playtime_matrix(&split.train, catalog.n_users(), catalog.n_items())?;
    let q = dataset::category_matrix(&items, &catalog)?;

    let percentiles = percentile_transform(&train_matrix);
    let preferences = category_preference(
        &train_matrix,
        &percentiles,
        &q,
        ctx.params.global_share_mode,
    )?;
    let balanced = implicit_preference(&preferences, &q, &percentiles)?;

    let sparse_meta = |name: &str, m: &divrec_core::mat::Csr<f64>| MatrixMeta {
        name: name.to_string(),
        rows: m.rows(),
        cols: m.cols(),
        source: SPLIT.to_string(),
    };
    io::write_sparse_csv(
        &ctx.path(PERCENTILES),
        &sparse_meta("percentiles", &percentiles.0),
        &percentiles.0,
    )?;
    io::write_dense_csv(&ctx.path(PREFERENCES), &preferences.0)?;
    io::write_sparse_csv(
        &ctx.path(BALANCED),
        &sparse_meta("balanced_preference", &balanced.0),
        &balanced.0,
    )?;
    let bins = ctx.cfg.eval.histogram_bins;
    io::write_histogram_csv(
        &ctx.path(HIST_PLAYTIME),
        &histogram(&stored_playtimes_f64(&train_matrix), bins)?,
    )?;
    io::write_histogram_csv(
        &ctx.path(HIST_PERCENTILE),
        &histogram(&stored_values_f64(&percentiles.0), bins)?,
    )?;
    io::write_histogram_csv(
        &ctx.path(HIST_BALANCED),
        &histogram(&stored_values_f64(&balanced.0), bins)?,
    )?;

    let manifest = ctx.manifest("preprocess");
    ctx.finish_stage(
        manifest,
        &[
            SPLIT,
            ITEMS_FILTERED,
            CATALOG_USERS,
            CATALOG_ITEMS,
            CATALOG_CATEGORIES,
        ],
    )?;
    println!(
        "preprocess: {} train interactions balanced across {} categories",
        balanced.0.nnz(),
        catalog.n_categories()
    );
    Ok(())
}

/// Learn item and category embeddings on the item-category graph, then
/// derive the user and augmented item representations.
pub fn embed(ctx: &StageCtx) -> Result<()> {
    ctx.require_stage("preprocess")?;
    let catalog = ctx.load_catalog()?;
    let items = ctx.load_items()?;
    let q = dataset::category_matrix(&items, &catalog)?;
    let p = CategoryPreference(io::read_dense_csv(&ctx.path(PREFERENCES))?);
    if p.0.rows() != catalog.n_users() || p.0.cols() != catalog.n_categories() {
        return Err(Error::data(format!(
            "{PREFERENCES} is {}x{}, expected {}x{}",
            p.0.rows(),
            p.0.cols(),
            catalog.n_users(),
            catalog.n_categories()
        )));
    }

    let graph = build_category_graph(&q)?;
    let dgi = train_dgi(
        &graph,
        ctx.params.d,
        ctx.params.dgi_epochs,
        ctx.params.dgi_lr,
        ctx.params.seed,
    )?;
    let user_repr = user_embeddings(&p, &dgi.category_embeddings)?;
    let item_repr = augmented_item_embeddings(&q, &dgi.category_embeddings, &dgi.item_embeddings)?;

    let seed = Some(ctx.params.seed);
    let epochs = Some(ctx.params.dgi_epochs);
    io::write_dense_f32(
        &ctx.path(CATEGORY_EMB),
        &dense_meta(
            "category_embeddings",
            &dgi.category_embeddings,
            seed,
            epochs,
        ),
        &dgi.category_embeddings,
    )?;
    io::write_dense_f32(
        &ctx.path(ITEM_EMB),
        &dense_meta("item_embeddings", &dgi.item_embeddings, seed, epochs),
        &dgi.item_embeddings,
    )?;
    io::write_dense_f32(
        &ctx.path(USER_REPR),
        &dense_meta("user_representations", &user_repr, seed, epochs),
        &user_repr,
    )?;
    io::write_dense_f32(
        &ctx.path(ITEM_REPR),
        &dense_meta("item_representations", &item_repr, seed, epochs),
        &item_repr,
    )?;
    write_json(&ctx.path(DGI_LOSSES), &dgi.losses)?;

    let manifest = ctx.manifest("embed");
    ctx.finish_stage(
        manifest,
        &[
            PREFERENCES,
            ITEMS_FILTERED,
            CATALOG_USERS,
            CATALOG_ITEMS,
            CATALOG_CATEGORIES,
        ],
    )?;
    let final_loss = dgi.losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "embed: {} epochs on {} nodes (final loss {:.6}); d = {}",
        dgi.losses.len(),
        graph.n_nodes(),
        final_loss,
        ctx.params.d
    );
    Ok(())
}

/// Cluster the representations and keep, per cluster, each entity's
/// best-preference neighbor, producing the two directed subgraphs.
pub fn select(ctx: &StageCtx) -> Result<()> {
    ctx.require_stage("embed")?;
    let user_repr = ctx.load_dense(USER_REPR)?;
    let item_repr = ctx.load_dense(ITEM_REPR)?;
    let balanced = ctx.load_balanced()?;
    if balanced.0.rows() != user_repr.rows() || balanced.0.cols() != item_repr.rows() {
        return Err(Error::data(format!(
            "{BALANCED} is {}x{}, expected {}x{}",
            balanced.0.rows(),
            balanced.0.cols(),
            user_repr.rows(),
            item_repr.rows()
        )));
    }

    let (user_clusters, item_clusters) = cluster_entities(&user_repr, &item_repr, &ctx.params)?;
    let sub = build_subgraphs(&balanced, &user_clusters, &item_clusters)?;

    io::write_clusters_csv(
        &ctx.path(USER_CLUSTERS),
        "user",
        user_clusters.k,
        &user_clusters.assignment,
    )?;
    io::write_clusters_csv(
        &ctx.path(ITEM_CLUSTERS),
        "item",
        item_clusters.k,
        &item_clusters.assignment,
    )?;
    io::write_subgraph_csv(&ctx.path(SUBGRAPHS), &sub)?;

    let manifest = ctx.manifest("select");
    ctx.finish_stage(manifest, &[USER_REPR, ITEM_REPR, BALANCED])?;
    println!(
        "select: {} user clusters, {} item clusters; kept {} of {} directed edges",
        user_clusters.k,
        item_clusters.k,
        sub.item_to_user.nnz() + sub.user_to_item.nnz(),
        2 * balanced.0.nnz()
    );
    Ok(())
}

/// Train the ranking model on the selected subgraphs and persist both
/// the raw parameters and the fused post-propagation tables.
pub fn train(ctx: &StageCtx) -> Result<()> {
    ctx.require_stage("select")?;
    let catalog = ctx.load_catalog()?;
    let items = ctx.load_items()?;
    let split = ctx.load_split()?;
    let q = dataset::category_matrix(&items, &catalog)?;
    let balanced = ctx.load_balanced()?;
    let sub = io::read_subgraph_csv(&ctx.path(SUBGRAPHS), &balanced.0)?;
    let prop = Propagator::new(sub)?;
    let weights = if ctx.params.use_weights {
        category_weights(&q)?
    } else {
        vec![1.0; catalog.n_items()]
    };
    let val_items = per_user_items(&split.val, catalog.n_users());
    let user_repr = ctx.load_dense(USER_REPR)?;
    let item_repr = ctx.load_dense(ITEM_REPR)?;
    let init = warm_start_params(&user_repr, &item_repr, &ctx.params);

    let (model, report) = fit(
        &balanced.0,
        &val_items,
        &prop,
        &weights,
        &ctx.params.train,
        init,
    )?;
    let out = propagate(&model, &prop, ctx.params.n_layers)?;

    let seed = Some(ctx.params.train.seed);
    let epochs = Some(report.stopped_epoch);
    io::write_dense_f32(
        &ctx.path(PARAMS_USER),
        &dense_meta("user_parameters", &model.user_emb, seed, epochs),
        &model.user_emb,
    )?;
    io::write_dense_f32(
        &ctx.path(PARAMS_ITEM),
        &dense_meta("item_parameters", &model.item_emb, seed, epochs),
        &model.item_emb,
    )?;
    write_json(&ctx.path(LOGITS), &model.logits)?;
    io::write_dense_f32(
        &ctx.path(FUSED_USERS),
        &dense_meta("fused_users", &out.fused_users, seed, epochs),
        &out.fused_users,
    )?;
    io::write_dense_f32(
        &ctx.path(FUSED_ITEMS),
        &dense_meta("fused_items", &out.fused_items, seed, epochs),
        &out.fused_items,
    )?;
    write_json(&ctx.path(TRAIN_REPORT), &report)?;

    let manifest = ctx.manifest("train");
    ctx.finish_stage(
        manifest,
        &[
            BALANCED,
            SUBGRAPHS,
            SPLIT,
            USER_REPR,
            ITEM_REPR,
            ITEMS_FILTERED,
            CATALOG_USERS,
            CATALOG_ITEMS,
            CATALOG_CATEGORIES,
        ],
    )?;
    println!(
        "train: best epoch {} of {} (val recall@{} {:.4}); {:.1}s",
        report.best_epoch,
        report.stopped_epoch,
        ctx.params.train.early_stop_n,
        report
            .val_recall
            .get(report.best_epoch - 1)
            .copied()
            .unwrap_or(0.0),
        report.wall_clock_secs
    );
    Ok(())
}

/// Score the test fold with the fused tables and write the metrics
/// report (recall, hit ratio, category coverage at each N).
pub fn evaluate(ctx: &StageCtx) -> Result<MetricsReport> {
    ctx.require_stage("ingest")?;
    ctx.require_stage("preprocess")?;
    ctx.require_stage("train")?;
    let catalog = ctx.load_catalog()?;
    let items = ctx.load_items()?;
    let split = ctx.load_split()?;
    let q = dataset::category_matrix(&items, &catalog)?;
    let balanced = ctx.load_balanced()?;
    let fused_users = ctx.load_dense(FUSED_USERS)?;
    let fused_items = ctx.load_dense(FUSED_ITEMS)?;
    let test_items = per_user_items(&split.test, catalog.n_users());

    let mut report = metrics::evaluate(
        &fused_users,
        &fused_items,
        &balanced.0,
        &test_items,
        &q,
        &ctx.params.eval_ns,
    )?;
    report.config_fingerprint = ctx.fingerprint.clone();
    write_json(&ctx.path(METRICS), &report)?;

    let manifest = ctx.manifest("evaluate");
    ctx.finish_stage(
        manifest,
        &[
            FUSED_USERS,
            FUSED_ITEMS,
            BALANCED,
            SPLIT,
            ITEMS_FILTERED,
            CATALOG_USERS,
            CATALOG_ITEMS,
            CATALOG_CATEGORIES,
        ],
    )?;
    for (pos, &n) in report.n_values.iter().enumerate() {
        println!(
            "evaluate: N={n} recall {:.4} hit_ratio {:.4} coverage {:.4}",
            report.recall[pos], report.hit_ratio[pos], report.coverage[pos]
        );
    }
    Ok(report)
}

/// Top-N list for one user from the persisted fused tables, with
/// training interactions excluded and external ids restored.
pub fn recommend(ctx: &StageCtx, user_id: &str, n: usize) -> Result<RecommendationLine> {
    ctx.require_stage("ingest")?;
    ctx.require_stage("preprocess")?;
    ctx.require_stage("train")?;
    let catalog = ctx.load_catalog()?;
    let balanced = ctx.load_balanced()?;
    let fused_users = ctx.load_dense(FUSED_USERS)?;
    let fused_items = ctx.load_dense(FUSED_ITEMS)?;
    let u = catalog
        .user_index(user_id)
        .ok_or_else(|| Error::data(format!("unknown user id {user_id:?}")))?;
    let (exclude, _) = balanced.0.row(u);
    let ranked = recommend_top_n(&fused_users, &fused_items, u, n, exclude);
    Ok(RecommendationLine {
        user_id: user_id.to_string(),
        item_ids: ranked
            .items
            .iter()
            .map(|&i| catalog.item_ids()[i].clone())
            .collect(),
        scores: ranked.scores,
    })
}

/// Run every cell of the hyperparameter grid against one shared data
/// preparation and write a CSV summary. Failed cells keep their row
/// with empty metric fields.
pub fn sweep(ctx: &StageCtx, beta_u: &[f64], beta_i: &[f64], ablations: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(ctx.workdir())?;
    let inter_path = &ctx.cfg.paths.interactions;
    let items_path = &ctx.cfg.paths.items;
    let raw_inter =
        dataset::ingest_interactions(inter_path, InteractionFormat::from_path(inter_path))?;
    let raw_items = dataset::ingest_items(items_path)?;
    let prep = pipeline::prepare(&raw_inter, &raw_items, &ctx.params)?;

    let beta_u = if beta_u.is_empty() {
        vec![ctx.params.beta_u]
    } else {
        beta_u.to_vec()
    };
    let beta_i = if beta_i.is_empty() {
        vec![ctx.params.beta_i]
    } else {
        beta_i.to_vec()
    };
    let mut cells = Vec::new();
    for &bu in &beta_u {
        for &bi in &beta_i {
            cells.push(SweepCell {
                beta_u: bu,
                beta_i: bi,
                selection_us: true,
                selection_is: true,
                weights: ctx.params.use_weights,
            });
        }
    }
    if ablations {
        let (bu, bi) = (ctx.params.beta_u, ctx.params.beta_i);
        let w = ctx.params.use_weights;
        for (us, is, weights) in [
            (false, true, w),
            (true, false, w),
            (false, false, w),
            (true, true, false),
        ] {
            cells.push(SweepCell {
                beta_u: bu,
                beta_i: bi,
                selection_us: us,
                selection_is: is,
                weights,
            });
        }
    }

    let (rows, failures) = pipeline::sweep(&prep, &ctx.params, &cells)?;
    let path = ctx.path(SWEEP);
    io::write_sweep_csv(&path, &rows)?;
    for failure in &failures {
        eprintln!("warning: sweep {failure}");
    }

    let mut manifest = ctx.manifest("sweep");
    manifest.record_input(inter_path)?;
    manifest.record_input(items_path)?;
    ctx.finish_stage(manifest, &[])?;
    println!(
        "sweep: {} cells ({} failed); wrote {}",
        cells.len(),
        failures.len(),
        path.display()
    );
    Ok(path)
}

/// Every stage in order, each one persisting its artifacts and reading
/// its predecessors' back from disk.
pub fn all(ctx: &StageCtx) -> Result<()> {
    ingest(ctx)?;
    preprocess(ctx)?;
    embed(ctx)?;
    select(ctx)?;
    train(ctx)?;
    evaluate(ctx)?;
    Ok(())
}

/// Generate a block-structured synthetic dataset at the configured
/// input paths.
pub fn make_synthetic(
    ctx: &StageCtx,
    users: usize,
    items: usize,
    categories: usize,
    seed: u64,
    zero_share: Option<f64>,
    per_user: Option<usize>,
) -> Result<()> {
    let mut cfg = divrec_core::synth::SynthConfig::new(users, items, categories, seed);
    if let Some(z) = zero_share {
        cfg.zero_share = z;
    }
    if let Some(p) = per_user {
        cfg.interactions_per_user = p;
    }
    let dataset = divrec_core::synth::generate(&cfg)?;
    for path in [&ctx.cfg.paths.interactions, &ctx.cfg.paths.items] {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
    }
    io::write_interactions_csv(&ctx.cfg.paths.interactions, &dataset.interactions)?;
    io::write_items_jsonl(&ctx.cfg.paths.items, &dataset.items)?;
    println!(
        "make-synthetic: wrote {} interactions to {} and {} items to {}",
        dataset.interactions.len(),
        ctx.cfg.paths.interactions.display(),
        dataset.items.len(),
        ctx.cfg.paths.items.display()
    );
    Ok(())
}
