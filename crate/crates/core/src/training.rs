//! Weighted pairwise ranking training.
//!
//! Positives are weighted by their items' category rarity: per-category
//! occurrence counts are inverted, normalized to mean 1 across
//! categories, and summed per item, so items carrying rare categories
//! push harder. Each positive is paired with a uniformly sampled
//! non-interacted item; the loss is the weighted BPR objective computed
//! through the full propagation stack, and all gradients are exact.

use std::time::Instant;

use crate::dataset::CategoryMatrix;
use crate::error::{Error, Result};
use crate::mat::{dot, Csr, Dense};
use crate::metrics;
use crate::opt::{sigmoid, softplus, Adam};
use crate::par;
use crate::propagation::{propagate, ModelParams, PropagationResult, Propagator};
use crate::rng::Stream;

/// Per-item positive weights from category frequencies: w = Q·(ñ/‖ñ‖₁·|C|)
/// with ñ the reciprocal per-category item counts.
pub fn category_weights(q: &CategoryMatrix) -> Result<Vec<f64>> {
    let n_items = q.0.rows();
    let n_cats = q.0.cols();
    let mut counts = vec![0usize; n_cats];
    for i in 0..n_items {
        for &c in q.0.row(i) {
            counts[c] += 1;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::data(format!("category {c} has no items")));
    }
    let recip: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
    let norm: f64 = recip.iter().sum();
    let scaled: Vec<f64> = recip.iter().map(|&r| r / norm * n_cats as f64).collect();
    Ok((0..n_items)
        .map(|i| q.0.row(i).iter().map(|&c| scaled[c]).sum())
        .collect())
}

/// One uniformly sampled item outside the user's training items
/// (resampling on collision).
pub fn sample_negative(train_items: &[usize], n_items: usize, rng: &mut Stream) -> Result<usize> {
    debug_assert!(train_items.windows(2).all(|w| w[0] < w[1]));
    if train_items.len() >= n_items {
        return Err(Error::data("user has interacted with every item"));
    }
    loop {
        let j = rng.below(n_items);
        if train_items.binary_search(&j).is_err() {
            return Ok(j);
        }
    }
}

/// A mini-batch of (user, positive, negative) triples.
#[derive(Debug, Clone)]
pub struct BprBatch {
    pub users: Vec<usize>,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

/// Gradients matching `ModelParams` shape.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub user_emb: Dense,
    pub item_emb: Dense,
    pub logits: Vec<f64>,
}

/// Which parameters the L2 term touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegScope {
    /// Layer-0 rows of the batch's users/positives/negatives (counted per
    /// occurrence) plus the attention logits.
    #[default]
    BatchLocal,
    /// Every parameter.
    Full,
}

/// Weighted BPR loss over one batch, with exact gradients through the
/// linear propagation and the softmax attention.
pub fn bpr_loss_and_grads(
    params: &ModelParams,
    prop: &Propagator,
    n_layers: usize,
    batch: &BprBatch,
    weights: &[f64],
    lambda: f64,
    scope: RegScope,
) -> Result<(f64, ParamGrads)> {
    if batch.users.len() != batch.pos.len() || batch.users.len() != batch.neg.len() {
        return Err(Error::data("ragged batch"));
    }
    let out = propagate(params, prop, n_layers)?;
    let fu = &out.fused_users;
    let fi = &out.fused_items;

    // Margins can be computed independently per sample.
    let margins: Vec<f64> = par::map_range(batch.users.len(), |b| {
        let eu = fu.row(batch.users[b]);
        dot(eu, fi.row(batch.pos[b])) - dot(eu, fi.row(batch.neg[b]))
    });

    let mut loss = 0.0;
    for (b, &m) in margins.iter().enumerate() {
        loss += weights[batch.pos[b]] * softplus(-m);
    }

    // d loss / d fused tables, scattered sequentially in batch order.
    let d = fu.cols();
    let mut gfu = Dense::zeros(fu.rows(), d);
    let mut gfi = Dense::zeros(fi.rows(), d);
    for (b, &m) in margins.iter().enumerate() {
        let (u, i, j) = (batch.users[b], batch.pos[b], batch.neg[b]);
        let g = -weights[i] * sigmoid(-m);
        for (acc, (&pi, &pj)) in gfu
            .row_mut(u)
            .iter_mut()
            .zip(fi.row(i).iter().zip(fi.row(j)))
        {
            *acc += g * (pi - pj);
        }
        let eu = fu.row(u);
        for (acc, &x) in gfi.row_mut(i).iter_mut().zip(eu) {
            *acc += g * x;
        }
        for (acc, &x) in gfi.row_mut(j).iter_mut().zip(eu) {
            *acc -= g * x;
        }
    }

    // Attention backward: s_l = <G_fused, layer_l>, then softmax jacobian.
    let frob =
        |a: &Dense, b: &Dense| -> f64 { a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).sum() };
    let s: Vec<f64> = (0..=n_layers)
        .map(|l| frob(&gfu, &out.user_layers[l]) + frob(&gfi, &out.item_layers[l]))
        .collect();
    let alpha = &out.attention;
    let s_dot_alpha: f64 = s.iter().zip(alpha).map(|(&a, &b)| a * b).sum();
    let mut d_logits: Vec<f64> = (0..=n_layers)
        .map(|l| alpha[l] * (s[l] - s_dot_alpha))
        .collect();

    // Layer-0 gradients: reverse the synchronous propagation. BU/BI hold
    // the gradient w.r.t. layer-l tables, starting at the top.
    let mut bu = scale_dense(&gfu, alpha[n_layers]);
    let mut bi = scale_dense(&gfi, alpha[n_layers]);
    for l in (0..n_layers).rev() {
        let mut nbu = prop.hop_to_items_adjoint(&bi);
        add_scaled(&mut nbu, &gfu, alpha[l]);
        let mut nbi = prop.hop_to_users_adjoint(&bu);
        add_scaled(&mut nbi, &gfi, alpha[l]);
        bu = nbu;
        bi = nbi;
    }

    // L2 term.
    match scope {
        RegScope::BatchLocal => {
            for b in 0..batch.users.len() {
                let (u, i, j) = (batch.users[b], batch.pos[b], batch.neg[b]);
                loss += lambda * sq_norm(params.user_emb.row(u));
                loss += lambda * sq_norm(params.item_emb.row(i));
                loss += lambda * sq_norm(params.item_emb.row(j));
                add_row_scaled(&mut bu, u, params.user_emb.row(u), 2.0 * lambda);
                add_row_scaled(&mut bi, i, params.item_emb.row(i), 2.0 * lambda);
                add_row_scaled(&mut bi, j, params.item_emb.row(j), 2.0 * lambda);
            }
            loss += lambda * sq_norm(&params.logits);
            for (g, &x) in d_logits.iter_mut().zip(&params.logits) {
                *g += 2.0 * lambda * x;
            }
        }
        RegScope::Full => {
            loss += lambda
                * (sq_norm(params.user_emb.data())
                    + sq_norm(params.item_emb.data())
                    + sq_norm(&params.logits));
            for (g, &x) in bu.data_mut().iter_mut().zip(params.user_emb.data()) {
                *g += 2.0 * lambda * x;
            }
            for (g, &x) in bi.data_mut().iter_mut().zip(params.item_emb.data()) {
                *g += 2.0 * lambda * x;
            }
            for (g, &x) in d_logits.iter_mut().zip(&params.logits) {
                *g += 2.0 * lambda * x;
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::numeric("training loss is not finite"));
    }
    Ok((
        loss,
        ParamGrads {
            user_emb: bu,
            item_emb: bi,
            logits: d_logits,
        },
    ))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum()
}

fn scale_dense(a: &Dense, s: f64) -> Dense {
    let mut out = a.clone();
    for v in out.data_mut() {
        *v *= s;
    }
    out
}

fn add_scaled(acc: &mut Dense, a: &Dense, s: f64) {
    for (o, &x) in acc.data_mut().iter_mut().zip(a.data()) {
        *o += s * x;
    }
}

fn add_row_scaled(acc: &mut Dense, row: usize, src: &[f64], s: f64) {
    for (o, &x) in acc.row_mut(row).iter_mut().zip(src) {
        *o += s * x;
    }
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub lr: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub n_layers: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub negatives: usize,
    /// List length for the early-stopping validation Recall.
    pub early_stop_n: usize,
    pub full_reg: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            lr: 0.001,
            lambda: 1e-5,
            batch_size: 2048,
            n_layers: 3,
            patience: 10,
            max_epochs: 500,
            seed: 0,
            negatives: 1,
            early_stop_n: 100,
            full_reg: false,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainReport {
    /// Mean per-positive loss of each epoch (1-based epochs).
    pub epoch_loss: Vec<f64>,
    /// Validation Recall after each epoch.
    pub val_recall: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub wall_clock_secs: f64,
}

/// Mini-batch training with early stopping on validation Recall; returns
/// the parameters from the best validation epoch.
pub fn fit(
    train: &Csr<f64>,
    val: &[Vec<usize>],
    prop: &Propagator,
    weights: &[f64],
    cfg: &TrainSettings,
    init: ModelParams,
) -> Result<(ModelParams, TrainReport)> {
    let started = Instant::now();
    let n_items = train.cols();
    let positives: Vec<(usize, usize)> = train.iter().map(|(u, i, _)| (u, i)).collect();
    if positives.is_empty() {
        return Err(Error::data("no training interactions"));
    }
    let mut params = init;
    let mut adam_users = Adam::new(cfg.lr, params.user_emb.data().len());
    let mut adam_items = Adam::new(cfg.lr, params.item_emb.data().len());
    let mut adam_logits = Adam::new(cfg.lr, params.logits.len());
    let mut shuffle_rng = Stream::new(cfg.seed, "shuffle");
    let mut neg_rng = Stream::new(cfg.seed, "negatives");
    let scope = if cfg.full_reg {
        RegScope::Full
    } else {
        RegScope::BatchLocal
    };

    let mut report = TrainReport {
        epoch_loss: Vec::new(),
        val_recall: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
        wall_clock_secs: 0.0,
    };
    let mut best_params = params.clone();
    let mut best_recall = f64::NEG_INFINITY;
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..positives.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = BprBatch {
                users: Vec::with_capacity(chunk.len() * cfg.negatives),
                pos: Vec::with_capacity(chunk.len() * cfg.negatives),
                neg: Vec::with_capacity(chunk.len() * cfg.negatives),
            };
            for &idx in chunk {
                let (u, i) = positives[idx];
                let (items, _) = train.row(u);
                for _ in 0..cfg.negatives {
                    batch.users.push(u);
                    batch.pos.push(i);
                    batch
                        .neg
                        .push(sample_negative(items, n_items, &mut neg_rng)?);
                }
            }
            let (loss, grads) = bpr_loss_and_grads(
                &params,
                prop,
                cfg.n_layers,
                &batch,
                weights,
                cfg.lambda,
                scope,
            )
            .map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("{msg} (epoch {epoch})")),
                other => other,
            })?;
            epoch_loss += loss;
            adam_users.step(params.user_emb.data_mut(), grads.user_emb.data());
            adam_items.step(params.item_emb.data_mut(), grads.item_emb.data());
            adam_logits.step(&mut params.logits, &grads.logits);
        }
        report.epoch_loss.push(epoch_loss / positives.len() as f64);

        let recall = validation_recall(&params, prop, cfg.n_layers, train, val, cfg.early_stop_n)?;
        report.val_recall.push(recall);
        if recall > best_recall {
            best_recall = recall;
            best_params = params.clone();
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        report.stopped_epoch = epoch;
        if since_best >= cfg.patience {
            break;
        }
    }
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok((best_params, report))
}

fn validation_recall(
    params: &ModelParams,
    prop: &Propagator,
    n_layers: usize,
    train: &Csr<f64>,
    val: &[Vec<usize>],
    n: usize,
) -> Result<f64> {
    let out: PropagationResult = propagate(params, prop, n_layers)?;
    let evaluated: Vec<usize> = (0..val.len()).filter(|&u| !val[u].is_empty()).collect();
    if evaluated.is_empty() {
        return Err(Error::data("validation fold has no users with items"));
    }
    let recs: Vec<Vec<usize>> = par::map_range(evaluated.len(), |idx| {
        let u = evaluated[idx];
        let (exclude, _) = train.row(u);
        crate::propagation::recommend_top_n(&out.fused_users, &out.fused_items, u, n, exclude).items
    });
    let tests: Vec<Vec<usize>> = evaluated.iter().map(|&u| val[u].clone()).collect();
    metrics::recall_at_n(&recs, &tests, n)
}
