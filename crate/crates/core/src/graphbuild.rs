//! Per-page graphs over layout objects and their normalized operators.
//!
//! Node `i` is `page.objects[i]`. Edges are undirected pairs `(i, j)` with
//! `i < j`, stored sorted; self-loops are never stored.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::corpus::{BBox, Page};
use crate::nncore::Matrix;

/// The k used for k-closest graphs throughout the experiments.
pub const DEFAULT_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    KClosest { k: usize },
    Complete,
}

impl GraphKind {
    pub fn label(&self) -> String {
        match self {
            GraphKind::KClosest { k } => format!("k-closest:{k}"),
            GraphKind::Complete => "complete".into(),
        }
    }

    pub fn parse_label(s: &str) -> Option<Self> {
        if s == "complete" {
            return Some(GraphKind::Complete);
        }
        let k = s.strip_prefix("k-closest:")?.parse().ok()?;
        Some(GraphKind::KClosest { k })
    }

    pub fn build(&self, page: &Page) -> PageGraph {
        match *self {
            GraphKind::KClosest { k } => build_k_closest(page, k),
            GraphKind::Complete => build_complete(page),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageGraph {
    pub n: usize,
    /// Sorted undirected pairs with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub kind: GraphKind,
}

impl PageGraph {
    /// Build from arbitrary pairs; orientation and duplicates are normalized,
    /// self-pairs dropped.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>, kind: GraphKind) -> Self {
        let set: BTreeSet<(usize, usize)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| {
                assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
                (a.min(b), a.max(b))
            })
            .collect();
        Self { n, edges: set.into_iter().collect(), kind }
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            lists[i].push(j);
            lists[j].push(i);
        }
        lists.iter_mut().for_each(|l| l.sort_unstable());
        lists
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Relabel node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> PageGraph {
        PageGraph::from_pairs(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])), self.kind)
    }

    pub fn dense_adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }
}

pub fn centroid(bbox: &BBox) -> (f64, f64) {
    ((bbox.x0 + bbox.x1) / 2.0, (bbox.y0 + bbox.y1) / 2.0)
}

pub fn squared_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Candidate ordered by (squared distance, node index).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `min(k, n−1)` nearest other nodes of each node by centroid distance,
/// ties going to the smaller index.
pub fn k_closest_selection(points: &[(f64, f64)], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let take = k.min(n.saturating_sub(1));
    (0..n)
        .map(|i| {
            // bounded max-heap keeps the `take` best candidates seen so far
            let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(take + 1);
            for j in (0..n).filter(|&j| j != i) {
                let c = Candidate { d2: squared_distance(points[i], points[j]), index: j };
                if heap.len() < take {
                    heap.push(c);
                } else if heap.peek().is_some_and(|worst| c < *worst) {
                    heap.pop();
                    heap.push(c);
                }
            }
            heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
        })
        .collect()
}

/// k-closest graph: each node selects its `min(k, n−1)` nearest nodes and
/// the stored edge set is the undirected union of all selections.
///
/// # Panics
/// If `k == 0`.
pub fn build_k_closest(page: &Page, k: usize) -> PageGraph {
    assert!(k >= 1, "k must be at least 1");
    let points: Vec<_> = page.objects.iter().map(|o| centroid(&o.bbox)).collect();
    let selection = k_closest_selection(&points, k);
    let pairs = selection
        .iter()
        .enumerate()
        .flat_map(|(i, sel)| sel.iter().map(move |&j| (i, j)));
    PageGraph::from_pairs(points.len(), pairs, GraphKind::KClosest { k })
}

pub fn build_complete(page: &Page) -> PageGraph {
    complete_graph(page.objects.len())
}

pub fn complete_graph(n: usize) -> PageGraph {
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    PageGraph { n, edges, kind: GraphKind::Complete }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyVariant {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}`
    GcnSym,
    /// `D^{-1/2} A D^{-1/2}`, zero rows for isolated nodes.
    PlainSym,
    /// Sorted neighbor indices per node.
    NeighborLists,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedAdjacency {
    GcnSym(Matrix),
    PlainSym(Matrix),
    NeighborLists(Vec<Vec<usize>>),
}

pub fn normalize(graph: &PageGraph, variant: AdjacencyVariant) -> NormalizedAdjacency {
    match variant {
        AdjacencyVariant::GcnSym => NormalizedAdjacency::GcnSym(gcn_operator(graph)),
        AdjacencyVariant::PlainSym => NormalizedAdjacency::PlainSym(plain_operator(graph)),
        AdjacencyVariant::NeighborLists => NormalizedAdjacency::NeighborLists(graph.neighbor_lists()),
    }
}

fn gcn_operator(graph: &PageGraph) -> Matrix {
    let inv_sqrt: Vec<f64> = graph.degrees().iter().map(|&d| 1.0 / ((d + 1) as f64).sqrt()).collect();
    let mut m = Matrix::zeros(graph.n, graph.n);
    for i in 0..graph.n {
        m.set(i, i, inv_sqrt[i] * inv_sqrt[i]);
    }
    for &(i, j) in &graph.edges {
        let v = inv_sqrt[i] * inv_sqrt[j];
        m.set(i, j, v);
        m.set(j, i, v);
    }
    m
}

fn plain_operator(graph: &PageGraph) -> Matrix {
    let inv_sqrt: Vec<f64> = graph
        .degrees()
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut m = Matrix::zeros(graph.n, graph.n);
    for &(i, j) in &graph.edges {
        let v = inv_sqrt[i] * inv_sqrt[j];
        m.set(i, j, v);
        m.set(j, i, v);
    }
    m
}

/// All operator variants of one page, as consumed by the GNN layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PageOperators {
    pub n: usize,
    pub gcn: Matrix,
    pub plain: Matrix,
    pub neighbors: Vec<Vec<usize>>,
}

impl PageOperators {
    pub fn new(graph: &PageGraph) -> Self {
        Self {
            n: graph.n,
            gcn: gcn_operator(graph),
            plain: plain_operator(graph),
            neighbors: graph.neighbor_lists(),
        }
    }
}

/// Inspection dump of one page graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub doc_id: String,
    pub page_index: usize,
    pub kind: String,
    pub k: Option<usize>,
    pub edges: Vec<[usize; 2]>,
}

impl GraphDump {
    pub fn new(doc_id: &str, page_index: usize, graph: &PageGraph) -> Self {
        let (kind, k) = match graph.kind {
            GraphKind::KClosest { k } => ("k_closest", Some(k)),
            GraphKind::Complete => ("complete", None),
        };
        Self {
            doc_id: doc_id.to_owned(),
            page_index,
            kind: kind.to_owned(),
            k,
            edges: graph.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, LayoutObject};

    fn page_of(boxes: &[BBox]) -> Page {
        Page {
            page_index: 0,
            width: 1000.0,
            height: 1000.0,
            objects: boxes
                .iter()
                .enumerate()
                .map(|(i, b)| LayoutObject {
                    object_id: format!("o{i}"),
                    bbox: *b,
                    category: Category::Image,
                    text: None,
                    cells: None,
                })
                .collect(),
        }
    }

    #[test]
    fn centroids() {
        assert_eq!(centroid(&BBox::new(0.0, 0.0, 2.0, 2.0)), (1.0, 1.0));
        assert_eq!(centroid(&BBox::new(1.0, 3.0, 5.0, 7.0)), (3.0, 5.0));
        let (dx, dy) = (2.5, -1.0);
        let b = BBox::new(1.0, 3.0, 5.0, 7.0);
        let moved = BBox::new(b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy);
        assert_eq!(centroid(&moved), (3.0 + dx, 5.0 + dy));
    }

    #[test]
    fn collinear_five_with_k4_is_complete() {
        let boxes: Vec<_> = (0..5).map(|i| BBox::new(i as f64 * 2.0, 0.0, i as f64 * 2.0 + 1.0, 1.0)).collect();
        let g = build_k_closest(&page_of(&boxes), 4);
        assert_eq!(g.edges.len(), 10);
    }

    #[test]
    fn two_nodes_clamped() {
        let boxes = [BBox::new(0.0, 0.0, 1.0, 1.0), BBox::new(5.0, 5.0, 6.0, 6.0)];
        assert_eq!(build_k_closest(&page_of(&boxes), 4).edges, vec![(0, 1)]);
    }

    #[test]
    fn single_node_graphs() {
        let p = page_of(&[BBox::new(0.0, 0.0, 1.0, 1.0)]);
        assert!(build_k_closest(&p, 4).edges.is_empty());
        assert!(build_complete(&p).edges.is_empty());
        match normalize(&build_complete(&p), AdjacencyVariant::GcnSym) {
            NormalizedAdjacency::GcnSym(m) => assert_eq!(m, Matrix::identity(1)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn complete_edge_counts() {
        for (n, e) in [(1, 0), (4, 6), (17, 136)] {
            assert_eq!(complete_graph(n).edges.len(), e);
        }
    }

    #[test]
    fn tie_goes_to_smaller_index() {
        // node 0 at origin, nodes 1..=4 all at distance 1, k = 2
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        assert_eq!(k_closest_selection(&pts, 2)[0], vec![1, 2]);
    }

    #[test]
    fn two_node_gcn_operator_is_half() {
        let g = PageGraph::from_pairs(2, [(0, 1)], GraphKind::Complete);
        let NormalizedAdjacency::GcnSym(m) = normalize(&g, AdjacencyVariant::GcnSym) else { unreachable!() };
        assert!(m.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn path_plain_operator() {
        let g = PageGraph::from_pairs(3, [(0, 1), (1, 2)], GraphKind::Complete);
        let NormalizedAdjacency::PlainSym(m) = normalize(&g, AdjacencyVariant::PlainSym) else { unreachable!() };
        assert!((m.get(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn isolated_node_plain_row_is_zero() {
        let g = PageGraph::from_pairs(3, [(0, 1)], GraphKind::Complete);
        let NormalizedAdjacency::PlainSym(m) = normalize(&g, AdjacencyVariant::PlainSym) else { unreachable!() };
        assert!(m.row(2).iter().all(|&v| v == 0.0));
        let NormalizedAdjacency::NeighborLists(l) = normalize(&g, AdjacencyVariant::NeighborLists) else {
            unreachable!()
        };
        assert_eq!(l, vec![vec![1], vec![0], vec![]]);
    }

    #[test]
    fn graph_kind_labels_round_trip() {
        for k in [GraphKind::Complete, GraphKind::KClosest { k: 4 }] {
            assert_eq!(GraphKind::parse_label(&k.label()), Some(k));
        }
    }

    #[test]
    fn dump_json_shape() {
        let g = PageGraph::from_pairs(3, [(2, 0), (1, 0)], GraphKind::KClosest { k: 4 });
        let json = serde_json::to_string(&GraphDump::new("d", 1, &g)).unwrap();
        assert_eq!(json, r#"{"doc_id":"d","page_index":1,"kind":"k_closest","k":4,"edges":[[0,1],[0,2]]}"#);
    }
}
