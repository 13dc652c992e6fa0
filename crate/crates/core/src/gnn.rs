//! The four message-passing layers and the layer block
//! (layer → batch norm → ELU → dropout).
//!
//! Layer formulas, with `H` the `n×d` node matrix:
//!
//! * GCN: `H' = D̂^{-1/2}(A+I)D̂^{-1/2} · H · W`
//! * GraphSAGE (mean): `h'_v = W_selfᵀ h_v + W_neighᵀ mean_{u∈N(v)} h_u`,
//!   the mean of an empty neighborhood being zero.
//! * GAT: per head, `z = H·W`, `e_vu = LeakyReLU(a_srcᵀ z_v + a_dstᵀ z_u)`,
//!   `α_v· = softmax over N(v) ∪ {v}`, `h'_v = Σ_u α_vu z_u`; heads are
//!   concatenated.
//! * TAGCN: `H' = Σ_{k=0..K} S^k · H · W_k` with `S = D^{-1/2} A D^{-1/2}`.
//!
//! Layers carry no bias: every layer is immediately followed by batch
//! normalization, whose shift makes one redundant.

use serde::{Deserialize, Serialize};

use crate::graphbuild::PageOperators;
use crate::nncore::{
    dropout_backward, dropout_forward, elu_backward, elu_forward, glorot_uniform, BatchNorm, BatchNormCache, Matrix,
    Mode, NnError, ParamId, ParamStore,
};
use crate::seed;

pub const DEFAULT_GAT_HEADS: usize = 4;
pub const DEFAULT_TAGCN_HOPS: usize = 3;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnKind {
    Gcn,
    Gat,
    Sage,
    Tagcn,
}

impl GnnKind {
    pub const ALL: [GnnKind; 4] = [GnnKind::Gcn, GnnKind::Gat, GnnKind::Sage, GnnKind::Tagcn];

    pub fn name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "gcn",
            GnnKind::Gat => "gat",
            GnnKind::Sage => "sage",
            GnnKind::Tagcn => "tagcn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Display name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "GCN",
            GnnKind::Gat => "GAT",
            GnnKind::Sage => "GraphSAGE",
            GnnKind::Tagcn => "TAGCN",
        }
    }

    /// One-letter abbreviation used for dual-branch pairs ("S+T").
    pub fn letter(self) -> char {
        match self {
            GnnKind::Gcn => 'G',
            GnnKind::Gat => 'A',
            GnnKind::Sage => 'S',
            GnnKind::Tagcn => 'T',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnLayerSpec {
    pub kind: GnnKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub heads: usize,
    pub hops: usize,
    pub leaky_slope: f64,
}

impl GnnLayerSpec {
    pub fn new(kind: GnnKind, in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind,
            in_dim,
            out_dim,
            heads: DEFAULT_GAT_HEADS,
            hops: DEFAULT_TAGCN_HOPS,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_hops(mut self, hops: usize) -> Self {
        self.hops = hops;
        self
    }

    /// Reason the spec is inconsistent, if it is.
    pub fn check(&self) -> Option<String> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Some("layer dims must be positive".into());
        }
        match self.kind {
            GnnKind::Gat if self.heads == 0 || self.out_dim % self.heads != 0 => {
                Some(format!("GAT out_dim {} not divisible by {} heads", self.out_dim, self.heads))
            }
            GnnKind::Tagcn if self.hops == 0 => Some("TAGCN needs at least one hop".into()),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// GCN
// ---------------------------------------------------------------------------

pub fn gcn_forward(h: &Matrix, a_hat: &Matrix, w: &Matrix) -> Result<Matrix, NnError> {
    a_hat.matmul(h)?.matmul(w)
}

/// Returns `(dH, dW)`; the operator is constant.
pub fn gcn_backward(h: &Matrix, a_hat: &Matrix, w: &Matrix, dout: &Matrix) -> Result<(Matrix, Matrix), NnError> {
    let ah = a_hat.matmul(h)?;
    let dw = ah.t_matmul(dout)?;
    let dh = a_hat.t_matmul(&dout.matmul_t(w)?)?;
    Ok((dh, dw))
}

// ---------------------------------------------------------------------------
// GraphSAGE (mean aggregator)
// ---------------------------------------------------------------------------

/// Row `v` is the mean of `h` over `neighbors[v]`, zero when empty.
pub fn mean_aggregate(h: &Matrix, neighbors: &[Vec<usize>]) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for (v, nb) in neighbors.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let inv = 1.0 / nb.len() as f64;
        let row = out.row_mut(v);
        for &u in nb {
            row.iter_mut().zip(h.row(u)).for_each(|(o, x)| *o += x);
        }
        row.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

/// Adjoint of [`mean_aggregate`].
fn mean_aggregate_backward(dagg: &Matrix, neighbors: &[Vec<usize>]) -> Matrix {
    let mut dh = Matrix::zeros(dagg.rows(), dagg.cols());
    for (v, nb) in neighbors.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let inv = 1.0 / nb.len() as f64;
        for &u in nb {
            dh.row_mut(u).iter_mut().zip(dagg.row(v)).for_each(|(o, g)| *o += inv * g);
        }
    }
    dh
}

pub fn sage_forward(h: &Matrix, neighbors: &[Vec<usize>], w_self: &Matrix, w_neigh: &Matrix) -> Result<Matrix, NnError> {
    if neighbors.len() != h.rows() {
        return Err(NnError::Shape(format!("sage: {} neighbor lists for {} nodes", neighbors.len(), h.rows())));
    }
    let mut out = h.matmul(w_self)?;
    out.add_assign(&mean_aggregate(h, neighbors).matmul(w_neigh)?);
    Ok(out)
}

/// Returns `(dH, dW_self, dW_neigh)`.
pub fn sage_backward(
    h: &Matrix,
    neighbors: &[Vec<usize>],
    w_self: &Matrix,
    w_neigh: &Matrix,
    dout: &Matrix,
) -> Result<(Matrix, Matrix, Matrix), NnError> {
    let agg = mean_aggregate(h, neighbors);
    let dw_self = h.t_matmul(dout)?;
    let dw_neigh = agg.t_matmul(dout)?;
    let mut dh = dout.matmul_t(w_self)?;
    dh.add_assign(&mean_aggregate_backward(&dout.matmul_t(w_neigh)?, neighbors));
    Ok((dh, dw_self, dw_neigh))
}

// ---------------------------------------------------------------------------
// GAT
// ---------------------------------------------------------------------------

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Closed neighborhood `N(v) ∪ {v}`, ascending.
fn closed_neighborhoods(neighbors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    neighbors
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            let mut c = nb.clone();
            let pos = c.partition_point(|&u| u < v);
            c.insert(pos, v);
            c
        })
        .collect()
}

#[derive(Debug, Clone)]
struct GatHeadCache {
    z: Matrix,
    /// `pre[v][t]` is the pre-activation score towards `closed[v][t]`.
    pre: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GatCache {
    closed: Vec<Vec<usize>>,
    heads: Vec<GatHeadCache>,
}

impl GatCache {
    /// Attention coefficients of `head`: entry `[v][t]` weighs the `t`-th
    /// member of `closed_neighborhood(v)`.
    pub fn attention(&self, head: usize) -> &[Vec<f64>] {
        &self.heads[head].alpha
    }

    pub fn closed_neighborhood(&self, v: usize) -> &[usize] {
        &self.closed[v]
    }
}

/// `heads[h] = (W_h, a_h)` with `W_h: d×d'` and `a_h: 1×2d'`
/// (`a_src ‖ a_dst`).
pub fn gat_forward(
    h: &Matrix,
    neighbors: &[Vec<usize>],
    heads: &[(&Matrix, &Matrix)],
    slope: f64,
) -> Result<(Matrix, GatCache), NnError> {
    let n = h.rows();
    if neighbors.len() != n {
        return Err(NnError::Shape(format!("gat: {} neighbor lists for {n} nodes", neighbors.len())));
    }
    let closed = closed_neighborhoods(neighbors);
    let widths: Vec<usize> = heads.iter().map(|(w, _)| w.cols()).collect();
    let mut out = Matrix::zeros(n, widths.iter().sum());
    let mut caches = Vec::with_capacity(heads.len());
    let mut offset = 0;
    for (&(w, a), &dh) in heads.iter().zip(&widths) {
        if a.rows() != 1 || a.cols() != 2 * dh {
            return Err(NnError::shape("gat attention vector", (1, 2 * dh), a.shape()));
        }
        let z = h.matmul(w)?;
        let (a_src, a_dst) = a.row(0).split_at(dh);
        let s_src: Vec<f64> = (0..n).map(|v| dot(z.row(v), a_src)).collect();
        let s_dst: Vec<f64> = (0..n).map(|v| dot(z.row(v), a_dst)).collect();
        let mut pre = Vec::with_capacity(n);
        let mut alpha = Vec::with_capacity(n);
        for v in 0..n {
            let p: Vec<f64> = closed[v].iter().map(|&u| s_src[v] + s_dst[u]).collect();
            let e: Vec<f64> = p.iter().map(|&x| leaky(x, slope)).collect();
            let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = e.iter().map(|x| (x - max).exp()).collect();
            let sum: f64 = ex.iter().sum();
            let al: Vec<f64> = ex.iter().map(|x| x / sum).collect();
            let row = &mut out.row_mut(v)[offset..offset + dh];
            for (&u, &coef) in closed[v].iter().zip(&al) {
                row.iter_mut().zip(z.row(u)).for_each(|(o, zu)| *o += coef * zu);
            }
            pre.push(p);
            alpha.push(al);
        }
        caches.push(GatHeadCache { z, pre, alpha });
        offset += dh;
    }
    Ok((out, GatCache { closed, heads: caches }))
}

/// Returns `dH` and per head `(dW_h, da_h)`.
pub fn gat_backward(
    h: &Matrix,
    heads: &[(&Matrix, &Matrix)],
    slope: f64,
    cache: &GatCache,
    dout: &Matrix,
) -> Result<(Matrix, Vec<(Matrix, Matrix)>), NnError> {
    let n = h.rows();
    let mut dh_total = Matrix::zeros(n, h.cols());
    let mut grads = Vec::with_capacity(heads.len());
    let mut offset = 0;
    for (&(w, a), hc) in heads.iter().zip(&cache.heads) {
        let dh = w.cols();
        let (a_src, a_dst) = a.row(0).split_at(dh);
        let mut dz = Matrix::zeros(n, dh);
        let mut ds_src = vec![0.0; n];
        let mut ds_dst = vec![0.0; n];
        for v in 0..n {
            let g = &dout.row(v)[offset..offset + dh];
            let nb = &cache.closed[v];
            let al = &hc.alpha[v];
            // out_v = Σ α_vu z_u
            let dalpha: Vec<f64> = nb.iter().map(|&u| dot(g, hc.z.row(u))).collect();
            for (&u, &coef) in nb.iter().zip(al) {
                dz.row_mut(u).iter_mut().zip(g).for_each(|(o, gi)| *o += coef * gi);
            }
            // softmax backward
            let inner: f64 = al.iter().zip(&dalpha).map(|(x, y)| x * y).sum();
            for (t, &u) in nb.iter().enumerate() {
                let de = al[t] * (dalpha[t] - inner);
                let dp = if hc.pre[v][t] > 0.0 { de } else { slope * de };
                ds_src[v] += dp;
                ds_dst[u] += dp;
            }
        }
        let mut da = vec![0.0; 2 * dh];
        for v in 0..n {
            let zv = hc.z.row(v);
            for k in 0..dh {
                da[k] += ds_src[v] * zv[k];
                da[dh + k] += ds_dst[v] * zv[k];
            }
            let row = dz.row_mut(v);
            for k in 0..dh {
                row[k] += ds_src[v] * a_src[k] + ds_dst[v] * a_dst[k];
            }
        }
        let dw = h.t_matmul(&dz)?;
        dh_total.add_assign(&dz.matmul_t(w)?);
        grads.push((dw, Matrix::from_vec(1, 2 * dh, da)));
        offset += dh;
    }
    Ok((dh_total, grads))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// TAGCN
// ---------------------------------------------------------------------------

/// `Σ_k S^k H W_k`; also returns the propagated features `S^k H`.
pub fn tagcn_forward(h: &Matrix, s: &Matrix, ws: &[&Matrix]) -> Result<(Matrix, Vec<Matrix>), NnError> {
    let first = ws.first().ok_or_else(|| NnError::Shape("tagcn needs at least W_0".into()))?;
    let mut powers = Vec::with_capacity(ws.len());
    powers.push(h.clone());
    for _ in 1..ws.len() {
        let next = s.matmul(powers.last().unwrap())?;
        powers.push(next);
    }
    let mut out = Matrix::zeros(h.rows(), first.cols());
    for (p, w) in powers.iter().zip(ws) {
        out.add_assign(&p.matmul(w)?);
    }
    Ok((out, powers))
}

/// Returns `dH` and `dW_k` for each hop.
pub fn tagcn_backward(
    s: &Matrix,
    ws: &[&Matrix],
    powers: &[Matrix],
    dout: &Matrix,
) -> Result<(Matrix, Vec<Matrix>), NnError> {
    let dws = powers.iter().map(|p| p.t_matmul(dout)).collect::<Result<Vec<_>, _>>()?;
    // dH = Σ_k (Sᵀ)^k dP_k, evaluated Horner-style from the last hop
    let mut acc = dout.matmul_t(ws[ws.len() - 1])?;
    for w in ws[..ws.len() - 1].iter().rev() {
        let mut next = s.t_matmul(&acc)?;
        next.add_assign(&dout.matmul_t(w)?);
        acc = next;
    }
    Ok((acc, dws))
}

// ---------------------------------------------------------------------------
// Parameterized layer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum GnnLayer {
    Gcn { w: ParamId },
    Sage { w_self: ParamId, w_neigh: ParamId },
    Gat { heads: Vec<(ParamId, ParamId)>, slope: f64 },
    Tagcn { ws: Vec<ParamId> },
}

#[derive(Debug, Clone)]
pub enum LayerCache {
    None,
    Gat(GatCache),
    Tagcn(Vec<Matrix>),
}

impl GnnLayer {
    /// Register Glorot-initialized weights under `prefix`.
    ///
    /// # Panics
    /// If the spec is inconsistent (see [`GnnLayerSpec::check`]).
    pub fn register(store: &mut ParamStore, prefix: &str, spec: &GnnLayerSpec, rng: &mut seed::Rng) -> Self {
        if let Some(reason) = spec.check() {
            panic!("invalid layer spec: {reason}");
        }
        let (d, h) = (spec.in_dim, spec.out_dim);
        let mut weight = |name: String, rows: usize, cols: usize| store.add(name, glorot_uniform(rng, rows, cols), true);
        match spec.kind {
            GnnKind::Gcn => GnnLayer::Gcn { w: weight(format!("{prefix}.w"), d, h) },
            GnnKind::Sage => GnnLayer::Sage {
                w_self: weight(format!("{prefix}.w_self"), d, h),
                w_neigh: weight(format!("{prefix}.w_neigh"), d, h),
            },
            GnnKind::Gat => {
                let width = h / spec.heads;
                let heads = (0..spec.heads)
                    .map(|k| {
                        let w = weight(format!("{prefix}.head{k}.w"), d, width);
                        let a = weight(format!("{prefix}.head{k}.a"), 1, 2 * width);
                        (w, a)
                    })
                    .collect();
                GnnLayer::Gat { heads, slope: spec.leaky_slope }
            }
            GnnKind::Tagcn => GnnLayer::Tagcn {
                ws: (0..=spec.hops).map(|k| weight(format!("{prefix}.w{k}"), d, h)).collect(),
            },
        }
    }

    pub fn forward(&self, store: &ParamStore, h: &Matrix, ops: &PageOperators) -> Result<(Matrix, LayerCache), NnError> {
        match self {
            GnnLayer::Gcn { w } => Ok((gcn_forward(h, &ops.gcn, store.value(*w))?, LayerCache::None)),
            GnnLayer::Sage { w_self, w_neigh } => Ok((
                sage_forward(h, &ops.neighbors, store.value(*w_self), store.value(*w_neigh))?,
                LayerCache::None,
            )),
            GnnLayer::Gat { heads, slope } => {
                let hs: Vec<_> = heads.iter().map(|(w, a)| (store.value(*w), store.value(*a))).collect();
                let (out, cache) = gat_forward(h, &ops.neighbors, &hs, *slope)?;
                Ok((out, LayerCache::Gat(cache)))
            }
            GnnLayer::Tagcn { ws } => {
                let w: Vec<_> = ws.iter().map(|id| store.value(*id)).collect();
                let (out, powers) = tagcn_forward(h, &ops.plain, &w)?;
                Ok((out, LayerCache::Tagcn(powers)))
            }
        }
    }

    /// Accumulates parameter gradients into `store`, returns `dH`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        h: &Matrix,
        ops: &PageOperators,
        cache: &LayerCache,
        dout: &Matrix,
    ) -> Result<Matrix, NnError> {
        match (self, cache) {
            (GnnLayer::Gcn { w }, _) => {
                let (dh, dw) = gcn_backward(h, &ops.gcn, store.value(*w), dout)?;
                store.accumulate_grad(*w, &dw);
                Ok(dh)
            }
            (GnnLayer::Sage { w_self, w_neigh }, _) => {
                let (dh, ds, dn) = sage_backward(h, &ops.neighbors, store.value(*w_self), store.value(*w_neigh), dout)?;
                store.accumulate_grad(*w_self, &ds);
                store.accumulate_grad(*w_neigh, &dn);
                Ok(dh)
            }
            (GnnLayer::Gat { heads, slope }, LayerCache::Gat(c)) => {
                let hs: Vec<_> = heads.iter().map(|(w, a)| (store.value(*w), store.value(*a))).collect();
                let (dh, grads) = gat_backward(h, &hs, *slope, c, dout)?;
                for ((w, a), (dw, da)) in heads.iter().zip(grads) {
                    store.accumulate_grad(*w, &dw);
                    store.accumulate_grad(*a, &da);
                }
                Ok(dh)
            }
            (GnnLayer::Tagcn { ws }, LayerCache::Tagcn(powers)) => {
                let w: Vec<_> = ws.iter().map(|id| store.value(*id)).collect();
                let (dh, dws) = tagcn_backward(&ops.plain, &w, powers, dout)?;
                for (id, g) in ws.iter().zip(dws) {
                    store.accumulate_grad(*id, &g);
                }
                Ok(dh)
            }
            _ => Err(NnError::Shape("layer cache does not match layer kind".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Block
// ---------------------------------------------------------------------------

/// One message-passing layer followed by batch norm, ELU and dropout.
#[derive(Debug, Clone)]
pub struct GnnBlock {
    pub layer: GnnLayer,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Matrix,
    layer: LayerCache,
    bn: BatchNormCache,
    pre_activation: Matrix,
    mask: Option<Matrix>,
}

impl GnnBlock {
    pub fn register(store: &mut ParamStore, prefix: &str, spec: &GnnLayerSpec, rng: &mut seed::Rng) -> Self {
        let layer = GnnLayer::register(store, &format!("{prefix}.{}", spec.kind.name()), spec, rng);
        let bn = BatchNorm::register(store, &format!("{prefix}.bn"), spec.out_dim);
        Self { layer, bn }
    }

    pub fn forward(
        &self,
        store: &mut ParamStore,
        h: &Matrix,
        ops: &PageOperators,
        mode: Mode,
        dropout: f64,
        rng: &mut seed::Rng,
    ) -> Result<(Matrix, BlockCache), NnError> {
        let (z, layer) = self.layer.forward(store, h, ops)?;
        let (normed, bn) = self.bn.forward(store, &z, mode)?;
        let activated = elu_forward(&normed);
        let (out, mask) = dropout_forward(&activated, dropout, rng, mode);
        Ok((out, BlockCache { input: h.clone(), layer, bn, pre_activation: normed, mask }))
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        ops: &PageOperators,
        cache: &BlockCache,
        dout: &Matrix,
    ) -> Result<Matrix, NnError> {
        let d_act = dropout_backward(dout, cache.mask.as_ref());
        let d_norm = elu_backward(&cache.pre_activation, &d_act);
        let dz = self.bn.backward(store, &cache.bn, &d_norm);
        self.layer.backward(store, &cache.input, ops, &cache.layer, &dz)
    }
}
