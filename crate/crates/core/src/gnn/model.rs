//! The bipartite graph convolution model: embeddings, four conv blocks with
//! batch normalization, max + attention pooling per node side, and a dense
//! head predicting one value per portfolio configuration.
//!
//! A conv block is a (cons←var, var←cons) pair of half-convolutions. Each
//! half-convolution updates the target side as
//!
//! ```text
//! h'_t = ReLU(BN(W_root · h_t + mean_{edges into t}(W_neigh · h_src + w_edge * e) + bias))
//! ```
//!
//! with a zero aggregate for isolated nodes. Mean aggregation and the two
//! order-free poolings make the network invariant to node order and
//! indifferent to graph size. All arithmetic is f64; backward passes are
//! hand-derived reverse-mode gradients, checked against central differences
//! in the test suite.

// Index-based loops in this module mirror the layer equations; clippy's
// iterator rewrites obscure the math.
#![allow(clippy::needless_range_loop)]

use crate::graph::{BipartiteGraph, CONS_FEATURES, VAR_FEATURES};
use crate::rng::SplitMix64;

use super::tensor::Tensor;
use super::GnnError;

pub const DEFAULT_HIDDEN: usize = 64;
pub const N_BLOCKS: usize = 4;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Dense layer, `weight` is [out, in].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearLayer {
    fn init(rng: &mut SplitMix64, n_out: usize, n_in: usize) -> Self {
        let bound = (6.0 / n_in as f64).sqrt();
        let data = (0..n_out * n_in).map(|_| rng.uniform(-bound, bound)).collect();
        Self {
            weight: Tensor::from_data(&[n_out, n_in], data),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    /// x [n, in] -> x · weight^T + bias, [n, out].
    fn forward(&self, x: &Tensor) -> Tensor {
        let mut out = matmul_wt(x, &self.weight);
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (o, b) in self.bias.data().iter().enumerate() {
                row[o] += b;
            }
        }
        out
    }

    /// Accumulate grads into `gs` = [g_weight, g_bias]; returns the input grad.
    fn backward(&self, x: &Tensor, g_out: &Tensor, gs: &mut [Tensor]) -> Tensor {
        let (g_weight, g_bias) = {
            let (a, b) = gs.split_at_mut(1);
            (&mut a[0], &mut b[0])
        };
        accumulate_matmul_grads(x, g_out, g_weight);
        for i in 0..g_out.rows() {
            for (o, g) in g_out.row(i).iter().enumerate() {
                g_bias.data_mut()[o] += g;
            }
        }
        matmul_w(g_out, &self.weight)
    }
}

/// Per-channel batch normalization over the node dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[width], 1.0),
            beta: Tensor::zeros(&[width]),
            running_mean: Tensor::zeros(&[width]),
            running_var: Tensor::filled(&[width], 1.0),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }
}

/// One half-convolution (message pass into one node side).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfConv {
    pub root: Tensor,
    pub neigh: Tensor,
    pub edge_weight: Tensor,
    pub bias: Tensor,
    pub bn: BatchNorm,
}

impl HalfConv {
    fn init(rng: &mut SplitMix64, hidden: usize) -> Self {
        let bound = (6.0 / hidden as f64).sqrt();
        let mut mat = || {
            let data = (0..hidden * hidden)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            Tensor::from_data(&[hidden, hidden], data)
        };
        let root = mat();
        let neigh = mat();
        let edge = (0..hidden).map(|_| rng.uniform(-bound, bound)).collect();
        Self {
            root,
            neigh,
            edge_weight: Tensor::from_data(&[hidden], edge),
            bias: Tensor::zeros(&[hidden]),
            bn: BatchNorm::new(hidden),
        }
    }
}

/// A (cons←var, var←cons) half-convolution pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub cons_from_var: HalfConv,
    pub var_from_cons: HalfConv,
}

/// Scalar score head for softmax-attention pooling on one node side.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub score: Tensor,
    pub bias: Tensor,
}

impl Attention {
    fn init(rng: &mut SplitMix64, hidden: usize) -> Self {
        let bound = (6.0 / hidden as f64).sqrt();
        Self {
            score: Tensor::from_data(
                &[hidden],
                (0..hidden).map(|_| rng.uniform(-bound, bound)).collect(),
            ),
            bias: Tensor::zeros(&[1]),
        }
    }
}

/// The full predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub schema_version: u32,
    pub hidden: usize,
    pub n_outputs: usize,
    pub var_embed: LinearLayer,
    pub cons_embed: LinearLayer,
    pub blocks: Vec<ConvBlock>,
    pub var_att: Attention,
    pub cons_att: Attention,
    pub head_hidden: LinearLayer,
    pub head_out: LinearLayer,
}

/// train = batch statistics feed normalization; eval = frozen running stats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

// Parameter layout constants; see `param_names` for the full order.
const P_PER_HALF: usize = 6;
const P_BLOCK_BASE: usize = 4;

impl GnnModel {
    /// Random initialization. `n_outputs` must equal the portfolio size the
    /// model will be trained for.
    pub fn new(hidden: usize, n_outputs: usize, schema_version: u32, seed: u64) -> Self {
        assert!(hidden > 0 && n_outputs > 0);
        let mut rng = SplitMix64::new(seed ^ 0xC0FF_EE11_D00D_F00D);
        let var_embed = LinearLayer::init(&mut rng, hidden, VAR_FEATURES);
        let cons_embed = LinearLayer::init(&mut rng, hidden, CONS_FEATURES);
        let blocks = (0..N_BLOCKS)
            .map(|_| ConvBlock {
                cons_from_var: HalfConv::init(&mut rng, hidden),
                var_from_cons: HalfConv::init(&mut rng, hidden),
            })
            .collect();
        let var_att = Attention::init(&mut rng, hidden);
        let cons_att = Attention::init(&mut rng, hidden);
        let head_hidden = LinearLayer::init(&mut rng, 4 * hidden, 4 * hidden);
        let head_out = LinearLayer::init(&mut rng, n_outputs, 4 * hidden);
        Self {
            schema_version,
            hidden,
            n_outputs,
            var_embed,
            cons_embed,
            blocks,
            var_att,
            cons_att,
            head_hidden,
            head_out,
        }
    }

    /// Width of the pooled latent (two poolings per node side).
    pub fn latent_width(&self) -> usize {
        4 * self.hidden
    }

    fn att_base(&self) -> usize {
        P_BLOCK_BASE + self.blocks.len() * 2 * P_PER_HALF
    }

    /// Trainable parameters in a stable order, named for diagnostics and
    /// serialization. Running batch-norm statistics are state, not
    /// parameters, and are not listed here.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec![
            "var_embed.weight".to_string(),
            "var_embed.bias".to_string(),
            "cons_embed.weight".to_string(),
            "cons_embed.bias".to_string(),
        ];
        for b in 0..self.blocks.len() {
            for half in ["cv", "vc"] {
                for part in ["root", "neigh", "edge_weight", "bias", "bn.gamma", "bn.beta"] {
                    names.push(format!("block{b}.{half}.{part}"));
                }
            }
        }
        names.extend(
            [
                "var_att.score",
                "var_att.bias",
                "cons_att.score",
                "cons_att.bias",
                "head_hidden.weight",
                "head_hidden.bias",
                "head_out.weight",
                "head_out.bias",
            ]
            .map(String::from),
        );
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = vec![
            &self.var_embed.weight,
            &self.var_embed.bias,
            &self.cons_embed.weight,
            &self.cons_embed.bias,
        ];
        for block in &self.blocks {
            for half in [&block.cons_from_var, &block.var_from_cons] {
                out.push(&half.root);
                out.push(&half.neigh);
                out.push(&half.edge_weight);
                out.push(&half.bias);
                out.push(&half.bn.gamma);
                out.push(&half.bn.beta);
            }
        }
        out.push(&self.var_att.score);
        out.push(&self.var_att.bias);
        out.push(&self.cons_att.score);
        out.push(&self.cons_att.bias);
        out.push(&self.head_hidden.weight);
        out.push(&self.head_hidden.bias);
        out.push(&self.head_out.weight);
        out.push(&self.head_out.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.var_embed.weight,
            &mut self.var_embed.bias,
            &mut self.cons_embed.weight,
            &mut self.cons_embed.bias,
        ];
        for block in &mut self.blocks {
            for half in [&mut block.cons_from_var, &mut block.var_from_cons] {
                out.push(&mut half.root);
                out.push(&mut half.neigh);
                out.push(&mut half.edge_weight);
                out.push(&mut half.bias);
                out.push(&mut half.bn.gamma);
                out.push(&mut half.bn.beta);
            }
        }
        out.push(&mut self.var_att.score);
        out.push(&mut self.var_att.bias);
        out.push(&mut self.cons_att.score);
        out.push(&mut self.cons_att.bias);
        out.push(&mut self.head_hidden.weight);
        out.push(&mut self.head_hidden.bias);
        out.push(&mut self.head_out.weight);
        out.push(&mut self.head_out.bias);
        out
    }

    /// Batch-norm running statistics in (mean, var) pairs, block-major with
    /// the cons-side half first, for serialization.
    pub fn running_stats(&self) -> Vec<(&Tensor, &Tensor)> {
        self.blocks
            .iter()
            .flat_map(|b| {
                [
                    (&b.cons_from_var.bn.running_mean, &b.cons_from_var.bn.running_var),
                    (&b.var_from_cons.bn.running_mean, &b.var_from_cons.bn.running_var),
                ]
            })
            .collect()
    }

    pub fn all_parameters_finite(&self) -> bool {
        self.params().iter().all(|t| t.all_finite())
            && self.running_stats().iter().all(|(m, v)| {
                m.all_finite() && v.all_finite() && v.data().iter().all(|x| *x >= 0.0)
            })
    }
}

/// Gradients for every trainable parameter, aligned with
/// [`GnnModel::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Tensor>,
}

impl Grads {
    fn zeros_like(model: &GnnModel) -> Self {
        Self {
            tensors: model.params().iter().map(|t| t.zeros_like()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

/// Graphs stacked for one forward pass: node features concatenated per side,
/// edges re-indexed into the stacked rows.
pub(super) struct Batch<'a> {
    pub graphs: Vec<&'a BipartiteGraph>,
    pub var_offset: Vec<usize>,
    pub cons_offset: Vec<usize>,
    /// (global cons row, global var row, edge feature)
    pub edges: Vec<(usize, usize, f64)>,
    pub var_deg: Vec<f64>,
    pub cons_deg: Vec<f64>,
    pub var_x: Tensor,
    pub cons_x: Tensor,
}

impl<'a> Batch<'a> {
    pub fn new(graphs: &[&'a BipartiteGraph], schema_version: u32) -> Result<Self, GnnError> {
        if graphs.is_empty() {
            return Err(GnnError::EmptyBatch);
        }
        let mut var_offset = Vec::with_capacity(graphs.len());
        let mut cons_offset = Vec::with_capacity(graphs.len());
        let mut total_vars = 0;
        let mut total_cons = 0;
        let mut n_edges = 0;
        for graph in graphs {
            if graph.schema_version != schema_version {
                return Err(GnnError::SchemaMismatch {
                    model: schema_version,
                    graph: graph.schema_version,
                });
            }
            if graph.n_vars() == 0 {
                return Err(GnnError::NoVariables(graph.instance_id.clone()));
            }
            var_offset.push(total_vars);
            cons_offset.push(total_cons);
            total_vars += graph.n_vars();
            total_cons += graph.n_cons();
            n_edges += graph.n_edges();
        }

        let mut var_x = Tensor::zeros(&[total_vars, VAR_FEATURES]);
        let mut cons_x = Tensor::zeros(&[total_cons, CONS_FEATURES]);
        let mut edges = Vec::with_capacity(n_edges);
        let mut var_deg = vec![0.0; total_vars];
        let mut cons_deg = vec![0.0; total_cons];
        for (g, graph) in graphs.iter().enumerate() {
            let vo = var_offset[g];
            let co = cons_offset[g];
            for (j, feats) in graph.var_features.iter().enumerate() {
                var_x.row_mut(vo + j).copy_from_slice(feats);
            }
            for (i, feats) in graph.cons_features.iter().enumerate() {
                cons_x.row_mut(co + i).copy_from_slice(feats);
            }
            for edge in &graph.edges {
                let c = co + edge.cons;
                let v = vo + edge.var;
                edges.push((c, v, edge.coeff));
                cons_deg[c] += 1.0;
                var_deg[v] += 1.0;
            }
        }

        Ok(Self {
            graphs: graphs.to_vec(),
            var_offset,
            cons_offset,
            edges,
            var_deg,
            cons_deg,
            var_x,
            cons_x,
        })
    }

    fn var_range(&self, g: usize) -> (usize, usize) {
        (self.var_offset[g], self.var_offset[g] + self.graphs[g].n_vars())
    }

    fn cons_range(&self, g: usize) -> (usize, usize) {
        (self.cons_offset[g], self.cons_offset[g] + self.graphs[g].n_cons())
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

struct BnCache {
    /// Statistics used for normalization (batch stats in train mode,
    /// running stats in eval mode).
    mean: Vec<f64>,
    var: Vec<f64>,
    x_hat: Tensor,
    /// Whether `mean`/`var` are fresh batch statistics.
    from_batch: bool,
}

struct HalfCache {
    h_src: Tensor,
    h_tgt: Tensor,
    bn: BnCache,
    out: Tensor,
}

struct SidePoolCache {
    /// Argmax row (global index) per channel, one vec per graph; empty for
    /// graphs with no nodes on this side.
    argmax: Vec<Vec<usize>>,
    /// Softmax attention weights per graph (aligned with the side's rows).
    alpha: Vec<Vec<f64>>,
}

pub(super) struct ForwardCache<'a> {
    batch: Batch<'a>,
    halves: Vec<HalfCache>,
    var_pool: SidePoolCache,
    cons_pool: SidePoolCache,
    latent: Tensor,
    head_pre: Tensor,
    head_act: Tensor,
    pub out: Tensor,
}

fn relu_inplace(x: &mut Tensor) {
    for v in x.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn bn_forward(bn: &BatchNorm, x: &Tensor, train: bool) -> (Tensor, BnCache) {
    let (n, width) = (x.rows(), x.cols());
    let (mean, var, from_batch) = if train && n > 0 {
        let mut mean = vec![0.0; width];
        for i in 0..n {
            let row = x.row(i);
            for ch in 0..width {
                mean[ch] += row[ch];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; width];
        for i in 0..n {
            let row = x.row(i);
            for ch in 0..width {
                let d = row[ch] - mean[ch];
                var[ch] += d * d;
            }
        }
        for v in &mut var {
            *v /= n as f64;
        }
        (mean, var, true)
    } else {
        (
            bn.running_mean.data().to_vec(),
            bn.running_var.data().to_vec(),
            false,
        )
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
    let mut x_hat = Tensor::zeros(&[n, width]);
    let mut out = Tensor::zeros(&[n, width]);
    for i in 0..n {
        let row = x.row(i);
        for ch in 0..width {
            let hat = (row[ch] - mean[ch]) * inv_std[ch];
            *x_hat.at_mut(i, ch) = hat;
            *out.at_mut(i, ch) = bn.gamma.data()[ch] * hat + bn.beta.data()[ch];
        }
    }
    (
        out,
        BnCache {
            mean,
            var,
            x_hat,
            from_batch,
        },
    )
}

fn half_conv_forward(
    conv: &HalfConv,
    h_src: &Tensor,
    h_tgt: &Tensor,
    // (target row, source row, edge value) triples for this direction.
    edges: impl Iterator<Item = (usize, usize, f64)>,
    tgt_deg: &[f64],
    train: bool,
) -> HalfCache {
    let hidden = conv.root.rows();
    let n_tgt = h_tgt.rows();

    // Project all source nodes once, then sweep the edges.
    let neigh_proj = matmul_wt(h_src, &conv.neigh);
    let mut agg = Tensor::zeros(&[n_tgt, hidden]);
    let ew = conv.edge_weight.data();
    for (t, s, e) in edges {
        let src = neigh_proj.row(s);
        let row = agg.row_mut(t);
        for ch in 0..hidden {
            row[ch] += src[ch] + ew[ch] * e;
        }
    }
    for t in 0..n_tgt {
        if tgt_deg[t] > 0.0 {
            for v in agg.row_mut(t) {
                *v /= tgt_deg[t];
            }
        }
    }

    let mut pre = matmul_wt(h_tgt, &conv.root);
    for t in 0..n_tgt {
        let a = agg.row(t).to_vec();
        let row = pre.row_mut(t);
        for ch in 0..hidden {
            row[ch] += a[ch] + conv.bias.data()[ch];
        }
    }

    let (mut out, bn) = bn_forward(&conv.bn, &pre, train);
    relu_inplace(&mut out);
    HalfCache {
        h_src: h_src.clone(),
        h_tgt: h_tgt.clone(),
        bn,
        out,
    }
}

/// x [n, d_in] times w^T where w is [d_out, d_in].
fn matmul_wt(x: &Tensor, w: &Tensor) -> Tensor {
    let n = x.rows();
    let (d_out, d_in) = (w.rows(), w.cols());
    debug_assert_eq!(x.cols(), d_in);
    let mut out = Tensor::zeros(&[n, d_out]);
    for i in 0..n {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for o in 0..d_out {
            let wr = w.row(o);
            let mut acc = 0.0;
            for k in 0..d_in {
                acc += wr[k] * xi[k];
            }
            oi[o] = acc;
        }
    }
    out
}

/// For out = x · w^T: accumulate g_w += g_out^T · x.
fn accumulate_matmul_grads(x: &Tensor, g_out: &Tensor, g_w: &mut Tensor) {
    let n = x.rows();
    let (d_out, d_in) = (g_w.rows(), g_w.cols());
    for i in 0..n {
        let xi = x.row(i);
        let gi = g_out.row(i);
        for o in 0..d_out {
            let g = gi[o];
            if g == 0.0 {
                continue;
            }
            let row = g_w.row_mut(o);
            for k in 0..d_in {
                row[k] += g * xi[k];
            }
        }
    }
}

/// For out = x · w^T: g_x = g_out · w.
fn matmul_w(g_out: &Tensor, w: &Tensor) -> Tensor {
    let n = g_out.rows();
    let (d_out, d_in) = (w.rows(), w.cols());
    let mut g_x = Tensor::zeros(&[n, d_in]);
    for i in 0..n {
        let gi = g_out.row(i);
        let go = g_x.row_mut(i);
        for o in 0..d_out {
            let g = gi[o];
            if g == 0.0 {
                continue;
            }
            let wr = w.row(o);
            for k in 0..d_in {
                go[k] += g * wr[k];
            }
        }
    }
    g_x
}

fn pool_side(
    h: &Tensor,
    att: &Attention,
    ranges: impl Iterator<Item = (usize, usize)>,
    latent: &mut Tensor,
    latent_col: usize,
) -> SidePoolCache {
    let hidden = h.cols();
    let mut argmax_all = Vec::new();
    let mut alpha_all = Vec::new();
    for (g, (start, end)) in ranges.enumerate() {
        if start == end {
            // Empty side: both pooled vectors stay zero.
            argmax_all.push(Vec::new());
            alpha_all.push(Vec::new());
            continue;
        }
        // Channel-wise max with first-max tie-breaking.
        let mut argmax = vec![start; hidden];
        for ch in 0..hidden {
            let mut best = h.at(start, ch);
            for row in start + 1..end {
                if h.at(row, ch) > best {
                    best = h.at(row, ch);
                    argmax[ch] = row;
                }
            }
            *latent.at_mut(g, latent_col + ch) = best;
        }
        // Softmax attention over the side's nodes.
        let scores: Vec<f64> = (start..end)
            .map(|row| {
                let hr = h.row(row);
                let mut s = att.bias.data()[0];
                for ch in 0..hidden {
                    s += att.score.data()[ch] * hr[ch];
                }
                s
            })
            .collect();
        let max_score = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut alpha: Vec<f64> = scores.iter().map(|s| (s - max_score).exp()).collect();
        let total: f64 = alpha.iter().sum();
        for a in &mut alpha {
            *a /= total;
        }
        for (offset, &a) in alpha.iter().enumerate() {
            let hr = h.row(start + offset);
            for ch in 0..hidden {
                *latent.at_mut(g, latent_col + hidden + ch) += a * hr[ch];
            }
        }
        argmax_all.push(argmax);
        alpha_all.push(alpha);
    }
    SidePoolCache {
        argmax: argmax_all,
        alpha: alpha_all,
    }
}

impl GnnModel {
    pub(super) fn forward_batch<'a>(
        &self,
        graphs: &[&'a BipartiteGraph],
        mode: ForwardMode,
    ) -> Result<ForwardCache<'a>, GnnError> {
        let batch = Batch::new(graphs, self.schema_version)?;
        let train = mode == ForwardMode::Train;
        let hidden = self.hidden;

        let hv0 = self.var_embed.forward(&batch.var_x);
        let hc0 = self.cons_embed.forward(&batch.cons_x);

        let mut halves = Vec::with_capacity(2 * self.blocks.len());
        let mut hv = hv0;
        let mut hc = hc0;
        for block in &self.blocks {
            let cv = half_conv_forward(
                &block.cons_from_var,
                &hv,
                &hc,
                batch.edges.iter().copied(),
                &batch.cons_deg,
                train,
            );
            hc = cv.out.clone();
            halves.push(cv);
            let vc = half_conv_forward(
                &block.var_from_cons,
                &hc,
                &hv,
                batch.edges.iter().map(|&(c, v, e)| (v, c, e)),
                &batch.var_deg,
                train,
            );
            hv = vc.out.clone();
            halves.push(vc);
        }

        // Latent layout per graph: [var_max, var_att, cons_max, cons_att].
        let n_graphs = batch.graphs.len();
        let mut latent = Tensor::zeros(&[n_graphs, 4 * hidden]);
        let var_pool = pool_side(
            &hv,
            &self.var_att,
            (0..n_graphs).map(|g| batch.var_range(g)),
            &mut latent,
            0,
        );
        let cons_pool = pool_side(
            &hc,
            &self.cons_att,
            (0..n_graphs).map(|g| batch.cons_range(g)),
            &mut latent,
            2 * hidden,
        );

        let head_pre = self.head_hidden.forward(&latent);
        let mut head_act = head_pre.clone();
        relu_inplace(&mut head_act);
        let out = self.head_out.forward(&head_act);

        Ok(ForwardCache {
            batch,
            halves,
            var_pool,
            cons_pool,
            latent,
            head_pre,
            head_act,
            out,
        })
    }

    /// Fold the batch statistics recorded in `cache` into the running
    /// estimates: `running <- (1 - momentum) * running + momentum * batch`.
    pub(super) fn update_running_stats(&mut self, cache: &ForwardCache<'_>) {
        for (idx, half) in cache.halves.iter().enumerate() {
            if !half.bn.from_batch || half.h_tgt.rows() == 0 {
                continue;
            }
            let block = idx / 2;
            let bn = if idx % 2 == 0 {
                &mut self.blocks[block].cons_from_var.bn
            } else {
                &mut self.blocks[block].var_from_cons.bn
            };
            let m = bn.momentum;
            for ch in 0..bn.running_mean.len() {
                let rm = &mut bn.running_mean.data_mut()[ch];
                *rm = (1.0 - m) * *rm + m * half.bn.mean[ch];
            }
            for ch in 0..bn.running_var.len() {
                let rv = &mut bn.running_var.data_mut()[ch];
                *rv = (1.0 - m) * *rv + m * half.bn.var[ch];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

fn bn_backward(
    bn: &BatchNorm,
    cache: &BnCache,
    g_out: &Tensor,
    g_gamma: &mut Tensor,
    g_beta: &mut Tensor,
) -> Tensor {
    let (n, width) = (g_out.rows(), g_out.cols());
    let mut g_x = Tensor::zeros(&[n, width]);
    if n == 0 {
        return g_x;
    }
    let inv_std: Vec<f64> = cache.var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
    for ch in 0..width {
        let mut sum_g = 0.0;
        let mut sum_g_xhat = 0.0;
        for i in 0..n {
            let g = g_out.at(i, ch);
            sum_g += g;
            sum_g_xhat += g * cache.x_hat.at(i, ch);
        }
        g_beta.data_mut()[ch] += sum_g;
        g_gamma.data_mut()[ch] += sum_g_xhat;
        let gamma = bn.gamma.data()[ch];
        if cache.from_batch {
            let mean_g = sum_g / n as f64;
            let mean_g_xhat = sum_g_xhat / n as f64;
            for i in 0..n {
                let g = g_out.at(i, ch);
                *g_x.at_mut(i, ch) =
                    gamma * inv_std[ch] * (g - mean_g - cache.x_hat.at(i, ch) * mean_g_xhat);
            }
        } else {
            // Frozen statistics: BN is an affine map per channel.
            for i in 0..n {
                *g_x.at_mut(i, ch) = gamma * inv_std[ch] * g_out.at(i, ch);
            }
        }
    }
    g_x
}

struct HalfGrads {
    g_src: Tensor,
    g_tgt: Tensor,
}

/// `gs` is the contiguous grad region [root, neigh, edge_weight, bias,
/// bn.gamma, bn.beta] for this half-convolution.
fn half_conv_backward(
    conv: &HalfConv,
    cache: &HalfCache,
    g_out: &Tensor,
    edges: impl Iterator<Item = (usize, usize, f64)>,
    tgt_deg: &[f64],
    gs: &mut [Tensor],
) -> HalfGrads {
    let hidden = conv.root.rows();
    let n_tgt = cache.h_tgt.rows();
    let n_src = cache.h_src.rows();

    // ReLU mask from the stored activations.
    let mut g_bn_out = g_out.clone();
    for i in 0..n_tgt {
        for ch in 0..hidden {
            if cache.out.at(i, ch) <= 0.0 {
                *g_bn_out.at_mut(i, ch) = 0.0;
            }
        }
    }

    let (g_root, g_neigh, g_edge_weight, g_bias, g_gamma, g_beta) = {
        let (a, rest) = gs.split_at_mut(1);
        let (b, rest) = rest.split_at_mut(1);
        let (c, rest) = rest.split_at_mut(1);
        let (d, rest) = rest.split_at_mut(1);
        let (e, f) = rest.split_at_mut(1);
        (&mut a[0], &mut b[0], &mut c[0], &mut d[0], &mut e[0], &mut f[0])
    };

    let g_pre = bn_backward(&conv.bn, &cache.bn, &g_bn_out, g_gamma, g_beta);

    // pre = root-projection + aggregate + bias.
    for i in 0..n_tgt {
        for (ch, g) in g_pre.row(i).iter().enumerate() {
            g_bias.data_mut()[ch] += g;
        }
    }
    accumulate_matmul_grads(&cache.h_tgt, &g_pre, g_root);
    let g_tgt = matmul_w(&g_pre, &conv.root);

    // aggregate[t] = (1/deg_t) * sum over edges (neigh_proj[s] + edge_w * e).
    let mut g_neigh_proj = Tensor::zeros(&[n_src, hidden]);
    for (t, s, e) in edges {
        let scale = 1.0 / tgt_deg[t];
        let g_row = g_pre.row(t).to_vec();
        let np = g_neigh_proj.row_mut(s);
        for ch in 0..hidden {
            let g_msg = g_row[ch] * scale;
            np[ch] += g_msg;
            g_edge_weight.data_mut()[ch] += g_msg * e;
        }
    }
    accumulate_matmul_grads(&cache.h_src, &g_neigh_proj, g_neigh);
    let g_src = matmul_w(&g_neigh_proj, &conv.neigh);

    HalfGrads { g_src, g_tgt }
}

/// `gs` is the contiguous grad region [score, bias] for this side's
/// attention head.
#[allow(clippy::too_many_arguments)]
fn pool_side_backward(
    h: &Tensor,
    att: &Attention,
    pool: &SidePoolCache,
    ranges: Vec<(usize, usize)>,
    g_latent: &Tensor,
    latent_col: usize,
    g_h: &mut Tensor,
    gs: &mut [Tensor],
) {
    let (g_score, g_bias) = {
        let (a, b) = gs.split_at_mut(1);
        (&mut a[0], &mut b[0])
    };
    let hidden = h.cols();
    for (g, (start, end)) in ranges.into_iter().enumerate() {
        if start == end {
            continue;
        }
        // Max pool: route to the stored argmax rows.
        for ch in 0..hidden {
            *g_h.at_mut(pool.argmax[g][ch], ch) += g_latent.at(g, latent_col + ch);
        }
        // Attention pool.
        let alpha = &pool.alpha[g];
        let g_att_vec: Vec<f64> = (0..hidden)
            .map(|ch| g_latent.at(g, latent_col + hidden + ch))
            .collect();
        let d_alpha: Vec<f64> = (start..end)
            .map(|row| {
                let hr = h.row(row);
                let mut acc = 0.0;
                for ch in 0..hidden {
                    acc += g_att_vec[ch] * hr[ch];
                }
                acc
            })
            .collect();
        let dot: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        for (offset, row) in (start..end).enumerate() {
            let a = alpha[offset];
            let ds = a * (d_alpha[offset] - dot);
            let hr = h.row(row).to_vec();
            let gr = g_h.row_mut(row);
            for ch in 0..hidden {
                gr[ch] += a * g_att_vec[ch] + ds * att.score.data()[ch];
            }
            for ch in 0..hidden {
                g_score.data_mut()[ch] += ds * hr[ch];
            }
            g_bias.data_mut()[0] += ds;
        }
    }
}

impl GnnModel {
    /// Reverse-mode gradients for an output-layer gradient `g_out`
    /// ([n_graphs, n_outputs]). Exact for the train-mode forward pass that
    /// produced `cache`.
    pub(super) fn backward_batch(&self, cache: &ForwardCache<'_>, g_out: &Tensor) -> Grads {
        let mut grads = Grads::zeros_like(self);
        let hidden = self.hidden;
        let att_base = self.att_base();

        // Head output layer.
        let g_head_act = self.head_out.backward(
            &cache.head_act,
            g_out,
            &mut grads.tensors[att_base + 6..att_base + 8],
        );
        // Head hidden ReLU.
        let mut g_head_pre = g_head_act;
        for i in 0..g_head_pre.rows() {
            for ch in 0..g_head_pre.cols() {
                if cache.head_pre.at(i, ch) <= 0.0 {
                    *g_head_pre.at_mut(i, ch) = 0.0;
                }
            }
        }
        let g_latent = self.head_hidden.backward(
            &cache.latent,
            &g_head_pre,
            &mut grads.tensors[att_base + 4..att_base + 6],
        );

        // Pooling back into the final node activations.
        let final_hv = &cache.halves[cache.halves.len() - 1].out;
        let final_hc = &cache.halves[cache.halves.len() - 2].out;
        let mut g_hv = final_hv.zeros_like();
        let mut g_hc = final_hc.zeros_like();
        let n_graphs = cache.batch.graphs.len();
        pool_side_backward(
            final_hv,
            &self.var_att,
            &cache.var_pool,
            (0..n_graphs).map(|g| cache.batch.var_range(g)).collect(),
            &g_latent,
            0,
            &mut g_hv,
            &mut grads.tensors[att_base..att_base + 2],
        );
        pool_side_backward(
            final_hc,
            &self.cons_att,
            &cache.cons_pool,
            (0..n_graphs).map(|g| cache.batch.cons_range(g)).collect(),
            &g_latent,
            2 * hidden,
            &mut g_hc,
            &mut grads.tensors[att_base + 2..att_base + 4],
        );

        // Blocks in reverse. Half order in cache: [cv0, vc0, cv1, vc1, ...].
        for block_idx in (0..self.blocks.len()).rev() {
            let block = &self.blocks[block_idx];
            let base = P_BLOCK_BASE + block_idx * 2 * P_PER_HALF;

            // var <- cons half: src = cons (cv output), tgt = var.
            let vc_grads = half_conv_backward(
                &block.var_from_cons,
                &cache.halves[2 * block_idx + 1],
                &g_hv,
                cache.batch.edges.iter().map(|&(c, v, e)| (v, c, e)),
                &cache.batch.var_deg,
                &mut grads.tensors[base + P_PER_HALF..base + 2 * P_PER_HALF],
            );
            for (a, b) in g_hc.data_mut().iter_mut().zip(vc_grads.g_src.data()) {
                *a += b;
            }
            g_hv = vc_grads.g_tgt;

            // cons <- var half: src = var (block input), tgt = cons.
            let cv_grads = half_conv_backward(
                &block.cons_from_var,
                &cache.halves[2 * block_idx],
                &g_hc,
                cache.batch.edges.iter().copied(),
                &cache.batch.cons_deg,
                &mut grads.tensors[base..base + P_PER_HALF],
            );
            for (a, b) in g_hv.data_mut().iter_mut().zip(cv_grads.g_src.data()) {
                *a += b;
            }
            g_hc = cv_grads.g_tgt;
        }

        // Embeddings.
        self.var_embed
            .backward(&cache.batch.var_x, &g_hv, &mut grads.tensors[0..2]);
        self.cons_embed
            .backward(&cache.batch.cons_x, &g_hc, &mut grads.tensors[2..4]);
        grads
    }
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::tiny_graph;
    use super::*;
    use crate::graph::{to_bipartite, FeatureSchema};
    use crate::milp::{MilpInstance, ObjSense, VarType};

    #[test]
    fn zero_weights_propagate_head_bias() {
        let mut model = GnnModel::new(4, 3, 1, 0);
        for tensor in model.params_mut() {
            for v in tensor.data_mut() {
                *v = 0.0;
            }
        }
        // BN identity shape: gamma = 1, running stats (0, 1), eval mode.
        for block in &mut model.blocks {
            for half in [&mut block.cons_from_var, &mut block.var_from_cons] {
                half.bn.gamma = Tensor::filled(&[4], 1.0);
            }
        }
        let bias = vec![0.5, -1.5, 2.0];
        model.head_out.bias = Tensor::from_data(&[3], bias.clone());
        let graph = tiny_graph(7, 1, 1);
        let cache = model.forward_batch(&[&graph], ForwardMode::Eval).unwrap();
        assert_eq!(cache.out.row(0), bias.as_slice());
    }

    #[test]
    fn forward_accepts_graph_without_constraints() {
        let model = GnnModel::new(8, 4, 1, 3);
        let inst = MilpInstance {
            id: "vars-only".into(),
            sense: ObjSense::Maximize,
            objective: vec![1.0, -2.0],
            var_types: vec![VarType::Integer, VarType::Continuous],
            var_lb: vec![Some(0.0), None],
            var_ub: vec![None, Some(1.0)],
            constraints: vec![],
        };
        let graph = to_bipartite(&inst, &FeatureSchema::for_instance(&inst));
        let cache = model.forward_batch(&[&graph], ForwardMode::Eval).unwrap();
        assert_eq!(cache.out.cols(), 4);
        assert!(cache.out.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forward_rejects_zero_variables() {
        let model = GnnModel::new(4, 2, 1, 0);
        let graph = BipartiteGraph {
            instance_id: "empty".into(),
            schema_version: 1,
            var_features: vec![],
            cons_features: vec![],
            edges: vec![],
        };
        assert!(matches!(
            model.forward_batch(&[&graph], ForwardMode::Eval),
            Err(GnnError::NoVariables(_))
        ));
    }

    #[test]
    fn forward_rejects_schema_mismatch() {
        let model = GnnModel::new(4, 2, 1, 0);
        let mut graph = tiny_graph(1, 2, 1);
        graph.schema_version = 9;
        assert!(matches!(
            model.forward_batch(&[&graph], ForwardMode::Eval),
            Err(GnnError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = GnnModel::new(8, 4, 1, 11);
        let graph = tiny_graph(5, 6, 4);
        let a = model.forward_batch(&[&graph], ForwardMode::Eval).unwrap();
        let b = model.forward_batch(&[&graph], ForwardMode::Eval).unwrap();
        assert_eq!(a.out, b.out);
    }

    #[test]
    fn batched_eval_equals_per_graph_eval() {
        let model = GnnModel::new(8, 4, 1, 13);
        let g1 = tiny_graph(1, 5, 3);
        let g2 = tiny_graph(2, 7, 2);
        let batch = model.forward_batch(&[&g1, &g2], ForwardMode::Eval).unwrap();
        let single1 = model.forward_batch(&[&g1], ForwardMode::Eval).unwrap();
        let single2 = model.forward_batch(&[&g2], ForwardMode::Eval).unwrap();
        for (a, b) in batch.out.row(0).iter().zip(single1.out.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in batch.out.row(1).iter().zip(single2.out.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn param_names_align_with_params() {
        let model = GnnModel::new(8, 4, 1, 0);
        assert_eq!(model.param_names().len(), model.params().len());
        assert_eq!(model.params().len(), 4 + 4 * 2 * 6 + 4 + 4);
    }
}
