//! Category-aware representations from the item-category graph.
//!
//! The category membership matrix becomes an undirected bipartite graph
//! (items on one side, categories on the other). Deep Graph Infomax
//! trains node embeddings on it: a one-layer graph encoder produces node
//! vectors, a corrupted copy of the graph (shuffled feature rows)
//! produces negatives, and a bilinear discriminator learns to tell them
//! apart from a global summary vector. Item and category blocks of the
//! trained table then derive user embeddings (preference-weighted
//! category mix) and augmented item embeddings (category mix
//! concatenated with the item's own vector).

use crate::dataset::CategoryMatrix;
use crate::error::{Error, Result};
use crate::mat::{Csr, Dense};
use crate::opt::{sigmoid, softplus, Adam};
use crate::preferences::CategoryPreference;
use crate::rng::Stream;

/// Undirected item-category graph with the symmetric degree-normalized
/// adjacency (self-loops included) cached. Nodes 0..n_items are items;
/// nodes n_items..n_items+n_cats are categories.
#[derive(Debug, Clone)]
pub struct ItemCategoryGraph {
    n_items: usize,
    n_cats: usize,
    n_edges: usize,
    adj: Csr<f64>,
}

impl ItemCategoryGraph {
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_cats(&self) -> usize {
        self.n_cats
    }

    pub fn n_nodes(&self) -> usize {
        self.n_items + self.n_cats
    }

    /// Item-category edge count (excluding self-loops).
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Normalized adjacency including self-loops; symmetric.
    pub fn adjacency(&self) -> &Csr<f64> {
        &self.adj
    }
}

/// Degree-normalized adjacency over items ∪ categories. Each edge (i,c)
/// gets weight 1/sqrt((deg_i+1)(deg_c+1)), each node a self-loop
/// 1/(deg+1); the +1 accounts for the self-loop itself.
pub fn build_category_graph(q: &CategoryMatrix) -> Result<ItemCategoryGraph> {
    let n_items = q.0.rows();
    let n_cats = q.0.cols();
    let n = n_items + n_cats;
    let mut cat_deg = vec![0usize; n_cats];
    for i in 0..n_items {
        for &c in q.0.row(i) {
            cat_deg[c] += 1;
        }
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * q.0.nnz() + n);
    for i in 0..n_items {
        let deg_i = q.0.row_nnz(i);
        for &c in q.0.row(i) {
            let w = 1.0 / (((deg_i + 1) * (cat_deg[c] + 1)) as f64).sqrt();
            triplets.push((i, n_items + c, w));
            triplets.push((n_items + c, i, w));
        }
        triplets.push((i, i, 1.0 / (deg_i + 1) as f64));
    }
    for (c, &deg) in cat_deg.iter().enumerate() {
        triplets.push((n_items + c, n_items + c, 1.0 / (deg + 1) as f64));
    }
    Ok(ItemCategoryGraph {
        n_items,
        n_cats,
        n_edges: q.0.nnz(),
        adj: Csr::from_triplets(n, n, &triplets)?,
    })
}

/// Trainable state: a feature row per node, one encoder weight, the
/// rectifier's negative slope, and the discriminator's bilinear form.
#[derive(Debug, Clone)]
pub struct DgiParams {
    pub features: Dense,
    pub weight: Dense,
    pub bilinear: Dense,
    pub slope: f64,
}

impl DgiParams {
    pub fn init(n_nodes: usize, d: usize, seed: u64) -> Self {
        let mut feat_rng = Stream::new(seed, "dgi_features");
        let mut w_rng = Stream::new(seed, "dgi_weight");
        let mut b_rng = Stream::new(seed, "dgi_bilinear");
        let mut features = Dense::zeros(n_nodes, d);
        for v in features.data_mut() {
            *v = feat_rng.normal() * 0.1;
        }
        let mut weight = Dense::zeros(d, d);
        for v in weight.data_mut() {
            *v = w_rng.normal() * 0.1;
        }
        let mut bilinear = Dense::zeros(d, d);
        for v in bilinear.data_mut() {
            *v = b_rng.normal() * 0.1;
        }
        DgiParams {
            features,
            weight,
            bilinear,
            slope: 0.25,
        }
    }

    fn dim(&self) -> usize {
        self.weight.rows()
    }
}

fn prelu(y: &Dense, slope: f64) -> Dense {
    let mut h = y.clone();
    for v in h.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    h
}

/// Encoder output for a given feature table: PReLU(Â · X · W).
fn encode(adj: &Csr<f64>, x: &Dense, params: &DgiParams) -> (Dense, Dense, Dense) {
    let z = adj.matmul_dense(x);
    let y = z.matmul(&params.weight);
    let h = prelu(&y, params.slope);
    (z, y, h)
}

/// Final node embeddings under the current parameters (uncorrupted path).
pub fn encoder_embeddings(graph: &ItemCategoryGraph, params: &DgiParams) -> Dense {
    encode(&graph.adj, &params.features, params).2
}

struct Forward {
    z: Dense,
    y: Dense,
    h: Dense,
    zc: Dense,
    yc: Dense,
    hc: Dense,
    summary: Vec<f64>,
    scores_pos: Vec<f64>,
    scores_neg: Vec<f64>,
    loss: f64,
}

fn forward(graph: &ItemCategoryGraph, params: &DgiParams, perm: &[usize]) -> Result<Forward> {
    let n = graph.n_nodes();
    let d = params.dim();
    if perm.len() != n {
        return Err(Error::data("corruption permutation length mismatch"));
    }
    let (z, y, h) = encode(&graph.adj, &params.features, params);

    let mut corrupted = Dense::zeros(n, d);
    for v in 0..n {
        corrupted
            .row_mut(v)
            .copy_from_slice(params.features.row(perm[v]));
    }
    let (zc, yc, hc) = encode(&graph.adj, &corrupted, params);

    let mut summary = vec![0.0; d];
    for v in 0..n {
        for (s, &x) in summary.iter_mut().zip(h.row(v)) {
            *s += x;
        }
    }
    for s in summary.iter_mut() {
        *s = sigmoid(*s / n as f64);
    }

    // bs = B · s, shared by every discriminator score.
    let mut bs = vec![0.0; d];
    for a in 0..d {
        bs[a] = crate::mat::dot(params.bilinear.row(a), &summary);
    }
    let scores_pos: Vec<f64> = (0..n).map(|v| crate::mat::dot(h.row(v), &bs)).collect();
    let scores_neg: Vec<f64> = (0..n).map(|v| crate::mat::dot(hc.row(v), &bs)).collect();

    // Binary cross-entropy with logits, positives → 1, corrupted → 0.
    let mut loss = 0.0;
    for v in 0..n {
        loss += softplus(-scores_pos[v]) + softplus(scores_neg[v]);
    }
    loss /= (2 * n) as f64;
    Ok(Forward {
        z,
        y,
        h,
        zc,
        yc,
        hc,
        summary,
        scores_pos,
        scores_neg,
        loss,
    })
}

/// Objective value only (used by finite-difference checks).
pub fn dgi_loss(graph: &ItemCategoryGraph, params: &DgiParams, perm: &[usize]) -> Result<f64> {
    Ok(forward(graph, params, perm)?.loss)
}

#[derive(Debug, Clone)]
pub struct DgiGrads {
    pub features: Dense,
    pub weight: Dense,
    pub bilinear: Dense,
    pub slope: f64,
}

/// Loss and exact gradients for one corruption draw.
pub fn dgi_grads(
    graph: &ItemCategoryGraph,
    params: &DgiParams,
    perm: &[usize],
) -> Result<(f64, DgiGrads)> {
    let n = graph.n_nodes();
    let d = params.dim();
    let fwd = forward(graph, params, perm)?;
    let scale = 1.0 / (2 * n) as f64;

    // d loss / d score.
    let g_pos: Vec<f64> = fwd
        .scores_pos
        .iter()
        .map(|&s| (sigmoid(s) - 1.0) * scale)
        .collect();
    let g_neg: Vec<f64> = fwd.scores_neg.iter().map(|&s| sigmoid(s) * scale).collect();

    // t = Σ_v g_pos[v]·H[v] + g_neg[v]·H̃[v]; dB = t ⊗ s; ds = Bᵀt.
    let mut t = vec![0.0; d];
    for v in 0..n {
        for (acc, (&hp, &hn)) in t.iter_mut().zip(fwd.h.row(v).iter().zip(fwd.hc.row(v))) {
            *acc += g_pos[v] * hp + g_neg[v] * hn;
        }
    }
    let mut d_bilinear = Dense::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            d_bilinear.set(a, b, t[a] * fwd.summary[b]);
        }
    }
    let mut d_summary = vec![0.0; d];
    for b in 0..d {
        let mut acc = 0.0;
        for a in 0..d {
            acc += t[a] * params.bilinear.get(a, b);
        }
        d_summary[b] = acc;
    }
    // Through the logistic squashing and the mean.
    let d_mean: Vec<f64> = d_summary
        .iter()
        .zip(&fwd.summary)
        .map(|(&g, &s)| g * s * (1.0 - s))
        .collect();

    let mut bs = vec![0.0; d];
    for a in 0..d {
        bs[a] = crate::mat::dot(params.bilinear.row(a), &fwd.summary);
    }

    // dH[v] = g_pos[v]·bs + d_mean/n; dH̃[v] = g_neg[v]·bs.
    let mut dh = Dense::zeros(n, d);
    let mut dhc = Dense::zeros(n, d);
    for v in 0..n {
        let rp = dh.row_mut(v);
        for j in 0..d {
            rp[j] = g_pos[v] * bs[j] + d_mean[j] / n as f64;
        }
        let rn = dhc.row_mut(v);
        for j in 0..d {
            rn[j] = g_neg[v] * bs[j];
        }
    }

    // Rectifier backward on both paths; slope gradient collects the
    // negative-side pre-activations.
    let mut d_slope = 0.0;
    let mut dy = dh;
    for (g, &y) in dy.data_mut().iter_mut().zip(fwd.y.data()) {
        if y < 0.0 {
            d_slope += *g * y;
            *g *= params.slope;
        }
    }
    let mut dyc = dhc;
    for (g, &y) in dyc.data_mut().iter_mut().zip(fwd.yc.data()) {
        if y < 0.0 {
            d_slope += *g * y;
            *g *= params.slope;
        }
    }

    // Y = Z·W ⇒ dW = ZᵀdY (+ corrupted path), dZ = dY·Wᵀ.
    let mut d_weight = fwd.z.transpose().matmul(&dy);
    let dwc = fwd.zc.transpose().matmul(&dyc);
    for (a, &b) in d_weight.data_mut().iter_mut().zip(dwc.data()) {
        *a += b;
    }
    let w_t = params.weight.transpose();
    let dz = dy.matmul(&w_t);
    let dzc = dyc.matmul(&w_t);

    // Z = Â·X with Â symmetric ⇒ dX = Â·dZ; the corrupted path routes
    // through the permutation: X̃[v] = X[perm[v]].
    let mut d_features = graph.adj.matmul_dense(&dz);
    let d_corrupted = graph.adj.matmul_dense(&dzc);
    for v in 0..n {
        let src = d_corrupted.row(v).to_vec();
        let dst = d_features.row_mut(perm[v]);
        for (a, b) in dst.iter_mut().zip(src) {
            *a += b;
        }
    }

    Ok((
        fwd.loss,
        DgiGrads {
            features: d_features,
            weight: d_weight,
            bilinear: d_bilinear,
            slope: d_slope,
        },
    ))
}

/// Per-tensor optimizer state for DGI training.
pub struct DgiOptimizer {
    features: Adam,
    weight: Adam,
    bilinear: Adam,
    slope: Adam,
}

impl DgiOptimizer {
    pub fn new(lr: f64, params: &DgiParams) -> Self {
        DgiOptimizer {
            features: Adam::new(lr, params.features.data().len()),
            weight: Adam::new(lr, params.weight.data().len()),
            bilinear: Adam::new(lr, params.bilinear.data().len()),
            slope: Adam::new(lr, 1),
        }
    }
}

/// One full-batch step with an externally supplied corruption
/// permutation; returns the pre-step loss.
pub fn dgi_epoch(
    graph: &ItemCategoryGraph,
    params: &mut DgiParams,
    opt: &mut DgiOptimizer,
    perm: &[usize],
) -> Result<f64> {
    let (loss, grads) = dgi_grads(graph, params, perm)?;
    if !loss.is_finite() {
        return Err(Error::numeric("dgi loss is not finite"));
    }
    opt.features
        .step(params.features.data_mut(), grads.features.data());
    opt.weight
        .step(params.weight.data_mut(), grads.weight.data());
    opt.bilinear
        .step(params.bilinear.data_mut(), grads.bilinear.data());
    let mut s = [params.slope];
    opt.slope.step(&mut s, &[grads.slope]);
    params.slope = s[0];
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct DgiOutput {
    pub item_embeddings: Dense,
    pub category_embeddings: Dense,
    pub losses: Vec<f64>,
}

/// Train DGI on the item-category graph; deterministic per seed. The
/// returned tables are the item and category blocks of the final encoder
/// output.
pub fn train_dgi(
    graph: &ItemCategoryGraph,
    d: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<DgiOutput> {
    if d == 0 {
        return Err(Error::data("embedding dimension must be at least 1"));
    }
    if epochs == 0 {
        return Err(Error::data("dgi needs at least 1 epoch"));
    }
    let n = graph.n_nodes();
    let mut params = DgiParams::init(n, d, seed);
    let mut opt = DgiOptimizer::new(lr, &params);
    let mut corrupt = Stream::new(seed, "dgi_corrupt");
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let perm = corrupt.permutation(n);
        let loss = dgi_epoch(graph, &mut params, &mut opt, &perm).map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("{msg} (epoch {epoch})")),
            other => other,
        })?;
        losses.push(loss);
    }
    let h = encoder_embeddings(graph, &params);
    let mut item_embeddings = Dense::zeros(graph.n_items, d);
    for i in 0..graph.n_items {
        item_embeddings.row_mut(i).copy_from_slice(h.row(i));
    }
    let mut category_embeddings = Dense::zeros(graph.n_cats, d);
    for c in 0..graph.n_cats {
        category_embeddings
            .row_mut(c)
            .copy_from_slice(h.row(graph.n_items + c));
    }
    Ok(DgiOutput {
        item_embeddings,
        category_embeddings,
        losses,
    })
}

/// User embeddings: each user's category-preference row mixes the
/// category table.
pub fn user_embeddings(p: &CategoryPreference, e_c: &Dense) -> Result<Dense> {
    if p.0.cols() != e_c.rows() {
        return Err(Error::data("user_embeddings: P columns != E_C rows"));
    }
    Ok(p.0.matmul(e_c))
}

/// Augmented item embeddings: the sum of the item's category vectors
/// concatenated with the item's own vector; width 2d.
pub fn augmented_item_embeddings(q: &CategoryMatrix, e_c: &Dense, e_i: &Dense) -> Result<Dense> {
    if q.0.cols() != e_c.rows() || q.0.rows() != e_i.rows() || e_c.cols() != e_i.cols() {
        return Err(Error::data("augmented_item_embeddings shape mismatch"));
    }
    let category_mix = q.0.sum_rows(e_c);
    Ok(category_mix.concat_cols(e_i))
}
