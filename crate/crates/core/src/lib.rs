//! Graph neural network benchmark engine for fine-grained layout analysis of
//! digital-born PDF pages.
//!
//! Each page is turned into a graph over its layout objects (k-closest or
//! complete), node features come from per-modality embedding tables, and one
//! of three classification frameworks (single modality, concatenated
//! features, dual branch) built from GCN / GAT / GraphSAGE / TAGCN blocks
//! labels every text block as Identifier, Title, Summary or Body.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`]: documents, pages, layout objects and the JSON manifest.
//! * [`featstore`]: EMB1 embedding tables (load, write, synthesize).
//! * [`graphbuild`]: page graphs and their normalized operators.
//! * [`nncore`]: dense matrices, layers with hand-written backward passes.
//! * [`gnn`]: the four message-passing layers and the layer block.
//! * [`frameworks`]: model assembly, forward/backward over one page.
//! * [`trainer`]: splits, class weights, training and evaluation.
//! * [`metrics`]: fold metrics, aggregation and report rendering.
//! * [`cli`]: command implementations behind the `layoutgnn` binary.

pub mod cli;
pub mod corpus;
pub mod featstore;
pub mod frameworks;
pub mod gnn;
pub mod graphbuild;
pub mod metrics;
pub mod nncore;
pub mod seed;
pub mod trainer;

pub use corpus::{BBox, Category, Document, LayoutObject, Page};
pub use featstore::{EmbeddingTable, Modality};
pub use frameworks::{FrameworkKind, FrameworkSpec, ModelState};
pub use gnn::{GnnKind, GnnLayerSpec};
pub use graphbuild::{GraphKind, PageGraph};
pub use metrics::{AggregateMetrics, FoldMetrics};
pub use nncore::{Matrix, Mode};
pub use trainer::{SplitPlan, TrainConfig};
