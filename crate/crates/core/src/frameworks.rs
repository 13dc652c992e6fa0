//! The three classification frameworks.
//!
//! * `Single(m)`: one branch over modality `m`, then one affine layer.
//! * `Concat`: one branch over `x_T ‖ x_V`, then one affine layer.
//! * `Dual`: a text branch and a vision branch run independently; their
//!   outputs are concatenated and passed through affine → ELU → affine.
//!
//! Every node takes part in message passing. Logits are produced for all
//! nodes; which rows are supervised is the trainer's business.

use std::fmt;

use thiserror::Error;

use crate::corpus::NUM_CLASSES;
use crate::featstore::Modality;
use crate::gnn::{BlockCache, GnnBlock, GnnKind, GnnLayerSpec, DEFAULT_GAT_HEADS, DEFAULT_TAGCN_HOPS};
use crate::graphbuild::{GraphKind, PageOperators, DEFAULT_K};
use crate::nncore::{elu_backward, elu_forward, Linear, Matrix, Mode, NnError, ParamStore};
use crate::seed;

pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_HEAD_HIDDEN: usize = 128;
pub const DEFAULT_DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameworkKind {
    Single(Modality),
    Concat,
    Dual,
}

impl FrameworkKind {
    pub const ALL: [FrameworkKind; 4] = [
        FrameworkKind::Single(Modality::Text),
        FrameworkKind::Single(Modality::Vision),
        FrameworkKind::Concat,
        FrameworkKind::Dual,
    ];

    /// Machine label used in results files.
    pub fn label(self) -> &'static str {
        match self {
            FrameworkKind::Single(Modality::Text) => "single-text",
            FrameworkKind::Single(Modality::Vision) => "single-vision",
            FrameworkKind::Concat => "concat",
            FrameworkKind::Dual => "dual",
        }
    }

    pub fn parse_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FrameworkKind::Single(Modality::Text) => "Only-Text",
            FrameworkKind::Single(Modality::Vision) => "Only-Vision",
            FrameworkKind::Concat => "Concat",
            FrameworkKind::Dual => "Dual",
        }
    }

    pub fn uses(self, modality: Modality) -> bool {
        match self {
            FrameworkKind::Single(m) => m == modality,
            FrameworkKind::Concat | FrameworkKind::Dual => true,
        }
    }
}

impl fmt::Display for FrameworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameworkSpec {
    pub kind: FrameworkKind,
    pub backbone_text: GnnKind,
    /// Vision-branch backbone for `Dual`; `Single(Vision)` falls back to
    /// `backbone_text` when unset.
    pub backbone_vision: Option<GnnKind>,
    pub graph: GraphKind,
    pub depth: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub heads: usize,
    pub hops: usize,
}

impl FrameworkSpec {
    pub fn new(kind: FrameworkKind, backbone_text: GnnKind) -> Self {
        Self {
            kind,
            backbone_text,
            backbone_vision: match kind {
                FrameworkKind::Dual => Some(backbone_text),
                _ => None,
            },
            graph: GraphKind::KClosest { k: DEFAULT_K },
            depth: DEFAULT_DEPTH,
            hidden: DEFAULT_HIDDEN,
            head_hidden: DEFAULT_HEAD_HIDDEN,
            heads: DEFAULT_GAT_HEADS,
            hops: DEFAULT_TAGCN_HOPS,
        }
    }

    pub fn dual(text: GnnKind, vision: GnnKind) -> Self {
        Self { backbone_vision: Some(vision), ..Self::new(FrameworkKind::Dual, text) }
    }

    pub fn with_graph(mut self, graph: GraphKind) -> Self {
        self.graph = graph;
        self
    }

    pub fn with_widths(mut self, depth: usize, hidden: usize, head_hidden: usize) -> Self {
        self.depth = depth;
        self.hidden = hidden;
        self.head_hidden = head_hidden;
        self
    }

    /// Backbone label as it appears in tables: `"S"`-style letters for dual
    /// pairs (`"S+T"`), the full layer name otherwise.
    pub fn backbone_label(&self) -> String {
        match (self.kind, self.backbone_vision) {
            (FrameworkKind::Dual, Some(v)) => format!("{}+{}", self.backbone_text.letter(), v.letter()),
            (FrameworkKind::Single(Modality::Vision), Some(v)) => v.display_name().to_owned(),
            _ => self.backbone_text.display_name().to_owned(),
        }
    }

    fn vision_backbone(&self) -> Result<GnnKind, FrameworkError> {
        match (self.kind, self.backbone_vision) {
            (_, Some(v)) => Ok(v),
            (FrameworkKind::Dual, None) => Err(FrameworkError::Spec("dual framework needs backbone_vision".into())),
            _ => Ok(self.backbone_text),
        }
    }

    pub fn check(&self) -> Result<(), FrameworkError> {
        if self.depth == 0 || self.hidden == 0 || self.head_hidden == 0 {
            return Err(FrameworkError::Spec("depth, hidden and head_hidden must be positive".into()));
        }
        if let GraphKind::KClosest { k: 0 } = self.graph {
            return Err(FrameworkError::Spec("k-closest graphs need k >= 1".into()));
        }
        let mut kinds = vec![self.backbone_text];
        if self.kind == FrameworkKind::Dual || self.kind == FrameworkKind::Single(Modality::Vision) {
            kinds.push(self.vision_backbone()?);
        }
        for kind in kinds {
            let layer = GnnLayerSpec { heads: self.heads, hops: self.hops, ..GnnLayerSpec::new(kind, self.hidden, self.hidden) };
            if let Some(reason) = layer.check() {
                return Err(FrameworkError::Spec(reason));
            }
        }
        Ok(())
    }
}

/// Per-modality input widths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InputDims {
    pub text: Option<usize>,
    pub vision: Option<usize>,
}

impl InputDims {
    pub fn both(text: usize, vision: usize) -> Self {
        Self { text: Some(text), vision: Some(vision) }
    }

    fn get(&self, m: Modality) -> Option<usize> {
        match m {
            Modality::Text => self.text,
            Modality::Vision => self.vision,
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("invalid framework spec: {0}")]
    Spec(String),
    #[error("missing {0} features")]
    MissingFeatures(Modality),
    #[error("{modality} features have {found} columns, model expects {expected}")]
    FeatureWidth { modality: Modality, expected: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// What a branch reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BranchInput {
    Only(Modality),
    Concat,
}

#[derive(Debug, Clone)]
struct Branch {
    input: BranchInput,
    blocks: Vec<GnnBlock>,
}

#[derive(Debug, Clone)]
enum Head {
    Affine(Linear),
    TwoLayer(Linear, Linear),
}

/// A model: the spec plus every named tensor and the block structure that
/// indexes into them.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub spec: FrameworkSpec,
    pub dims: InputDims,
    pub store: ParamStore,
    pub dropout: f64,
    branches: Vec<Branch>,
    head: Head,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PageTrace {
    branch_inputs: Vec<Matrix>,
    block_caches: Vec<Vec<BlockCache>>,
    head_input: Matrix,
    head_hidden: Option<Matrix>,
}

/// Gradients with respect to the page features.
#[derive(Debug, Clone, Default)]
pub struct InputGrads {
    pub text: Option<Matrix>,
    pub vision: Option<Matrix>,
}

fn register_branch(
    store: &mut ParamStore,
    prefix: &str,
    input: BranchInput,
    in_dim: usize,
    kind: GnnKind,
    spec: &FrameworkSpec,
    rng: &mut seed::Rng,
) -> Branch {
    let blocks = (0..spec.depth)
        .map(|i| {
            let d = if i == 0 { in_dim } else { spec.hidden };
            let layer = GnnLayerSpec { heads: spec.heads, hops: spec.hops, ..GnnLayerSpec::new(kind, d, spec.hidden) };
            GnnBlock::register(store, &format!("{prefix}.block{i}"), &layer, rng)
        })
        .collect();
    Branch { input, blocks }
}

pub fn init_model(spec: &FrameworkSpec, dims: InputDims, init_seed: u64) -> Result<ModelState, FrameworkError> {
    spec.check()?;
    let need = |m: Modality| dims.get(m).filter(|&d| d > 0).ok_or(FrameworkError::MissingFeatures(m));
    let mut rng = seed::rng(init_seed);
    let mut store = ParamStore::new();
    let (branches, head) = match spec.kind {
        FrameworkKind::Single(m) => {
            let kind = if m == Modality::Vision { spec.vision_backbone()? } else { spec.backbone_text };
            let b = register_branch(&mut store, m.name(), BranchInput::Only(m), need(m)?, kind, spec, &mut rng);
            (vec![b], Head::Affine(Linear::register(&mut store, "head.fc", spec.hidden, NUM_CLASSES, &mut rng)))
        }
        FrameworkKind::Concat => {
            let d = need(Modality::Text)? + need(Modality::Vision)?;
            let b = register_branch(&mut store, "concat", BranchInput::Concat, d, spec.backbone_text, spec, &mut rng);
            (vec![b], Head::Affine(Linear::register(&mut store, "head.fc", spec.hidden, NUM_CLASSES, &mut rng)))
        }
        FrameworkKind::Dual => {
            let (dt, dv) = (need(Modality::Text)?, need(Modality::Vision)?);
            let vision_kind = spec.vision_backbone()?;
            let t = register_branch(&mut store, "text", BranchInput::Only(Modality::Text), dt, spec.backbone_text, spec, &mut rng);
            let v = register_branch(&mut store, "vision", BranchInput::Only(Modality::Vision), dv, vision_kind, spec, &mut rng);
            let fc1 = Linear::register(&mut store, "head.fc1", 2 * spec.hidden, spec.head_hidden, &mut rng);
            let fc2 = Linear::register(&mut store, "head.fc2", spec.head_hidden, NUM_CLASSES, &mut rng);
            (vec![t, v], Head::TwoLayer(fc1, fc2))
        }
    };
    Ok(ModelState { spec: *spec, dims, store, dropout: DEFAULT_DROPOUT, branches, head })
}

impl ModelState {
    fn features<'a>(&self, m: Modality, x_t: Option<&'a Matrix>, x_v: Option<&'a Matrix>, n: usize) -> Result<&'a Matrix, FrameworkError> {
        let x = match m {
            Modality::Text => x_t,
            Modality::Vision => x_v,
        }
        .ok_or(FrameworkError::MissingFeatures(m))?;
        let expected = self.dims.get(m).unwrap_or(0);
        if x.cols() != expected {
            return Err(FrameworkError::FeatureWidth { modality: m, expected, found: x.cols() });
        }
        if x.rows() != n {
            return Err(NnError::Shape(format!("{m} features have {} rows for {n} nodes", x.rows())).into());
        }
        Ok(x)
    }

    /// Logits (`n × 4`) for every node of one page.
    pub fn forward_page(
        &mut self,
        ops: &PageOperators,
        x_t: Option<&Matrix>,
        x_v: Option<&Matrix>,
        mode: Mode,
        rng: &mut seed::Rng,
    ) -> Result<(Matrix, PageTrace), FrameworkError> {
        let n = ops.n;
        let mut branch_inputs = Vec::with_capacity(self.branches.len());
        let mut block_caches = Vec::with_capacity(self.branches.len());
        let mut outputs = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let x = match branch.input {
                BranchInput::Only(m) => self.features(m, x_t, x_v, n)?.clone(),
                BranchInput::Concat => {
                    let t = self.features(Modality::Text, x_t, x_v, n)?;
                    t.hcat(self.features(Modality::Vision, x_t, x_v, n)?)?
                }
            };
            let mut h = x.clone();
            let mut caches = Vec::with_capacity(branch.blocks.len());
            for block in &branch.blocks {
                let (out, cache) = block.forward(&mut self.store, &h, ops, mode, self.dropout, rng)?;
                caches.push(cache);
                h = out;
            }
            branch_inputs.push(x);
            block_caches.push(caches);
            outputs.push(h);
        }
        let head_input = match outputs.len() {
            1 => outputs.pop().unwrap(),
            _ => outputs[0].hcat(&outputs[1])?,
        };
        let (logits, head_hidden) = match &self.head {
            Head::Affine(fc) => (fc.forward(&self.store, &head_input)?, None),
            Head::TwoLayer(fc1, fc2) => {
                let z = fc1.forward(&self.store, &head_input)?;
                (fc2.forward(&self.store, &elu_forward(&z))?, Some(z))
            }
        };
        Ok((logits, PageTrace { branch_inputs, block_caches, head_input, head_hidden }))
    }

    /// Accumulate parameter gradients for upstream `dlogits`; returns the
    /// gradients with respect to the page features.
    pub fn backward_page(&mut self, ops: &PageOperators, trace: &PageTrace, dlogits: &Matrix) -> Result<InputGrads, FrameworkError> {
        let d_head_input = match (&self.head, &trace.head_hidden) {
            (Head::Affine(fc), _) => fc.backward(&mut self.store, &trace.head_input, dlogits)?,
            (Head::TwoLayer(fc1, fc2), Some(z)) => {
                let dact = fc2.backward(&mut self.store, &elu_forward(z), dlogits)?;
                fc1.backward(&mut self.store, &trace.head_input, &elu_backward(z, &dact))?
            }
            (Head::TwoLayer(..), None) => return Err(NnError::Shape("trace lacks head activations".into()).into()),
        };
        let upstream = match self.branches.len() {
            1 => vec![d_head_input],
            _ => {
                let (a, b) = d_head_input.split_cols(self.spec.hidden);
                vec![a, b]
            }
        };
        let mut grads = InputGrads::default();
        for (bi, (branch, mut g)) in self.branches.iter().zip(upstream).enumerate() {
            for (block, cache) in branch.blocks.iter().zip(&trace.block_caches[bi]).rev() {
                g = block.backward(&mut self.store, ops, cache, &g)?;
            }
            match branch.input {
                BranchInput::Only(Modality::Text) => grads.text = Some(g),
                BranchInput::Only(Modality::Vision) => grads.vision = Some(g),
                BranchInput::Concat => {
                    let (t, v) = g.split_cols(trace.branch_inputs[bi].cols() - self.dims.vision.unwrap_or(0));
                    grads.text = Some(t);
                    grads.vision = Some(v);
                }
            }
        }
        Ok(grads)
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        self.store.to_checkpoint()
    }

    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), NnError> {
        self.store.load_checkpoint(bytes)
    }
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphbuild::{complete_graph, GraphKind, PageGraph};
    use crate::nncore::gradcheck::random_matrix;

    fn small(kind: FrameworkKind, backbone: GnnKind) -> FrameworkSpec {
        FrameworkSpec::new(kind, backbone).with_widths(2, 8, 6)
    }

    #[test]
    fn same_seed_same_state() {
        let spec = small(FrameworkKind::Dual, GnnKind::Sage);
        let a = init_model(&spec, InputDims::both(5, 3), 7).unwrap();
        let b = init_model(&spec, InputDims::both(5, 3), 7).unwrap();
        assert_eq!(a.store, b.store);
        let c = init_model(&spec, InputDims::both(5, 3), 8).unwrap();
        assert_ne!(a.store, c.store);
    }

    #[test]
    fn dual_without_vision_dim_is_rejected() {
        let spec = small(FrameworkKind::Dual, GnnKind::Gcn);
        let dims = InputDims { text: Some(5), vision: None };
        assert!(matches!(init_model(&spec, dims, 1), Err(FrameworkError::MissingFeatures(Modality::Vision))));
    }

    #[test]
    fn dual_without_vision_backbone_is_rejected() {
        let spec = FrameworkSpec { backbone_vision: None, ..small(FrameworkKind::Dual, GnnKind::Gcn) };
        assert!(matches!(init_model(&spec, InputDims::both(2, 2), 1), Err(FrameworkError::Spec(_))));
    }

    #[test]
    fn init_conventions() {
        let m = init_model(&small(FrameworkKind::Concat, GnnKind::Gcn), InputDims::both(4, 4), 3).unwrap();
        for (_, name, t) in m.store.iter() {
            if name.ends_with(".beta") || name.ends_with(".b") || name.ends_with("running_mean") {
                assert!(t.value.data().iter().all(|&v| v == 0.0), "{name}");
            } else if name.ends_with(".gamma") || name.ends_with("running_var") {
                assert!(t.value.data().iter().all(|&v| v == 1.0), "{name}");
            } else {
                let bound = (6.0 / (t.value.rows() + t.value.cols()) as f64).sqrt();
                assert!(t.value.max_abs() <= bound, "{name}");
            }
        }
    }

    #[test]
    fn single_node_eval_shape() {
        let ops = PageOperators::new(&complete_graph(1));
        let mut rng = seed::rng(1);
        let xt = random_matrix(&mut rng, 1, 5, 1.0);
        let xv = random_matrix(&mut rng, 1, 3, 1.0);
        for kind in FrameworkKind::ALL {
            for backbone in GnnKind::ALL {
                let mut m = init_model(&small(kind, backbone), InputDims::both(5, 3), 2).unwrap();
                let (logits, _) = m.forward_page(&ops, Some(&xt), Some(&xv), Mode::Eval, &mut rng).unwrap();
                assert_eq!(logits.shape(), (1, 4));
                assert!(logits.is_finite());
            }
        }
    }

    #[test]
    fn missing_or_misshaped_features() {
        let ops = PageOperators::new(&complete_graph(3));
        let mut m = init_model(&small(FrameworkKind::Dual, GnnKind::Gcn), InputDims::both(5, 3), 2).unwrap();
        let mut rng = seed::rng(1);
        let xt = Matrix::zeros(3, 5);
        assert!(matches!(
            m.forward_page(&ops, Some(&xt), None, Mode::Eval, &mut rng),
            Err(FrameworkError::MissingFeatures(Modality::Vision))
        ));
        let bad = Matrix::zeros(3, 4);
        assert!(matches!(
            m.forward_page(&ops, Some(&xt), Some(&bad), Mode::Eval, &mut rng),
            Err(FrameworkError::FeatureWidth { .. })
        ));
    }

    #[test]
    fn concat_with_zero_vision_matches_text_only_model() {
        let (dt, dv) = (5, 3);
        let mut rng = seed::rng(11);
        let g = PageGraph::from_pairs(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)], GraphKind::Complete);
        let ops = PageOperators::new(&g);
        let xt = random_matrix(&mut rng, 6, dt, 1.0);
        let xv = Matrix::zeros(6, dv);
        for backbone in GnnKind::ALL {
            let mut concat = init_model(&small(FrameworkKind::Concat, backbone), InputDims::both(dt, dv), 4).unwrap();
            let mut single =
                init_model(&small(FrameworkKind::Single(Modality::Text), backbone), InputDims::both(dt, dv), 9).unwrap();
            // copy tensors in topology order; first-layer weights keep only the text rows
            let ids: Vec<_> = concat.store.iter().map(|(id, _, _)| id).collect();
            for (src, (dst, _, _)) in ids.into_iter().zip(single.store.clone().iter()) {
                let mut v = concat.store.value(src).clone();
                let want = single.store.value(dst).shape();
                if v.shape() != want {
                    for r in dt..v.rows() {
                        v.row_mut(r).fill(0.0);
                    }
                    *concat.store.value_mut(src) = v.clone();
                    v = Matrix::from_vec(want.0, want.1, v.data()[..want.0 * want.1].to_vec());
                }
                *single.store.value_mut(dst) = v;
            }
            for mode in [Mode::Eval, Mode::Train] {
                let (a, _) = concat.forward_page(&ops, Some(&xt), Some(&xv), mode, &mut seed::rng(5)).unwrap();
                let (b, _) = single.forward_page(&ops, Some(&xt), None, mode, &mut seed::rng(5)).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-12, "{backbone:?} {mode:?}: {}", a.max_abs_diff(&b));
            }
        }
    }

    #[test]
    fn image_features_reach_title_logits() {
        // node 0: Title, node 1: Image, linked; only the image features change
        let g = PageGraph::from_pairs(3, [(0, 1), (1, 2)], GraphKind::Complete);
        let ops = PageOperators::new(&g);
        let mut rng = seed::rng(3);
        let xt = random_matrix(&mut rng, 3, 4, 1.0);
        let xv = random_matrix(&mut rng, 3, 4, 1.0);
        let mut xv2 = xv.clone();
        xv2.row_mut(1).iter_mut().for_each(|v| *v += 1.5);
        let mut xt2 = xt.clone();
        xt2.row_mut(1).iter_mut().for_each(|v| *v -= 1.5);
        for backbone in GnnKind::ALL {
            let mut m = init_model(&small(FrameworkKind::Dual, backbone), InputDims::both(4, 4), 6).unwrap();
            let (a, _) = m.forward_page(&ops, Some(&xt), Some(&xv), Mode::Eval, &mut rng).unwrap();
            let (b, _) = m.forward_page(&ops, Some(&xt2), Some(&xv2), Mode::Eval, &mut rng).unwrap();
            let diff: f64 = a.row(0).iter().zip(b.row(0)).map(|(x, y)| (x - y).abs()).sum();
            assert!(diff > 1e-6, "{backbone:?}");
        }
    }

    #[test]
    fn dual_gradients_match_finite_differences() {
        use crate::nncore::gradcheck::{check_input_grad, check_param_grads};
        let mut rng = seed::rng(21);
        let g = PageGraph::from_pairs(12, (0..12).flat_map(|i| [(i, (i + 1) % 12), (i, (i + 5) % 12)]), GraphKind::Complete);
        let ops = PageOperators::new(&g);
        let xt = random_matrix(&mut rng, 12, 4, 1.0);
        let xv = random_matrix(&mut rng, 12, 3, 1.0);
        let proj = random_matrix(&mut rng, 12, 4, 1.0);
        let spec = FrameworkSpec::dual(GnnKind::Sage, GnnKind::Gat).with_widths(2, 8, 5);
        let model = init_model(&spec, InputDims::both(4, 3), 2).unwrap();
        let run = |store: &mut ParamStore| {
            let mut m = ModelState { store: store.clone(), ..model.clone() };
            let out = m.forward_page(&ops, Some(&xt), Some(&xv), Mode::Train, &mut seed::rng(99)).unwrap();
            *store = m.store;
            out
        };
        let mut store = model.store.clone();
        let err = check_param_grads(
            &mut store,
            |s| run(s).0,
            |s, p| {
                let (_, trace) = run(s);
                let mut m = ModelState { store: s.clone(), ..model.clone() };
                m.backward_page(&ops, &trace, p).unwrap();
                *s = m.store;
            },
            &proj,
        );
        assert!(err < 1e-4, "params {err}");
        let fwd = |x: &Matrix| {
            let mut m = model.clone();
            m.forward_page(&ops, Some(x), Some(&xv), Mode::Train, &mut seed::rng(99)).unwrap().0
        };
        let err = check_input_grad(&xt, fwd, |x, p| {
            let mut m = model.clone();
            let (_, trace) = m.forward_page(&ops, Some(x), Some(&xv), Mode::Train, &mut seed::rng(99)).unwrap();
            m.backward_page(&ops, &trace, p).unwrap().text.unwrap()
        }, &proj);
        assert!(err < 1e-4, "text input {err}");
    }

    #[test]
    fn argmax_ties_pick_lowest_class() {
        let logits = Matrix::from_rows(&[[0.0; 4], [1.0, 3.0, 3.0, 0.0], [0.0, 0.0, 0.0, 0.5]]);
        assert_eq!(predict(&logits), vec![0, 1, 3]);
    }

    #[test]
    fn labels_round_trip() {
        for k in FrameworkKind::ALL {
            assert_eq!(FrameworkKind::parse_label(k.label()), Some(k));
        }
        assert_eq!(FrameworkSpec::dual(GnnKind::Sage, GnnKind::Tagcn).backbone_label(), "S+T");
    }
}
