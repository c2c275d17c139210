//! The simple undirected product network.
//!
//! Nodes are kept sorted by product id, so node index order is id order and
//! "smaller id" tie-breaks reduce to "smaller index".

mod components;
pub mod io;

pub use components::{
    component_stats, components, prune_staples, remove_small_components, NetworkStats, Staple,
    StaplePruning,
};

use crate::cooccur::CoOccurrenceCounts;
use crate::error::{Error, Result};
use crate::ingest::{ProductCatalog, SaleLog};

pub type NodeIdx = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub id: String,
    pub description: String,
    pub sales_volume: u64,
}

impl NodeInfo {
    pub fn new(id: impl Into<String>, sales_volume: u64) -> Self {
        NodeInfo {
            id: id.into(),
            description: String::new(),
            sales_volume,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProductGraph {
    nodes: Vec<NodeInfo>,
    adj: Vec<Vec<NodeIdx>>,
}

impl ProductGraph {
    /// Builds a graph from node records and id-pair edges. Repeated edges
    /// collapse; loops, unknown endpoints and duplicate node ids are errors.
    pub fn from_parts<S: AsRef<str>>(
        mut nodes: Vec<NodeInfo>,
        edges: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Self> {
        nodes.sort_unstable_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::GraphFormat(format!("duplicate node {:?}", w[0].id)));
        }
        let index = |id: &str| {
            nodes
                .binary_search_by(|n| n.id.as_str().cmp(id))
                .map(|i| i as NodeIdx)
                .map_err(|_| Error::GraphFormat(format!("edge endpoint {id:?} is not a node")))
        };
        let mut pairs = Vec::new();
        for (a, b) in edges {
            let (a, b) = (index(a.as_ref())?, index(b.as_ref())?);
            if a == b {
                return Err(Error::GraphFormat(format!(
                    "loop on node {:?}",
                    nodes[a as usize].id
                )));
            }
            pairs.push((a, b));
        }
        Ok(Self::from_index_edges(nodes, pairs))
    }

    /// `nodes` must already be sorted by id and `edges` loop-free.
    fn from_index_edges(nodes: Vec<NodeInfo>, edges: Vec<(NodeIdx, NodeIdx)>) -> Self {
        let mut adj = vec![Vec::new(); nodes.len()];
        for (a, b) in edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let g = ProductGraph { nodes, adj };
        debug_assert!(g.is_simple());
        g
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: NodeIdx) -> &NodeInfo {
        &self.nodes[v as usize]
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn id(&self, v: NodeIdx) -> &str {
        &self.nodes[v as usize].id
    }

    pub fn sales_volume(&self, v: NodeIdx) -> u64 {
        self.nodes[v as usize].sales_volume
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIdx> {
        self.nodes
            .binary_search_by(|n| n.id.as_str().cmp(id))
            .ok()
            .map(|i| i as NodeIdx)
    }

    pub fn degree(&self, v: NodeIdx) -> usize {
        self.adj[v as usize].len()
    }

    /// Sorted neighbor indices.
    pub fn neighbors(&self, v: NodeIdx) -> &[NodeIdx] {
        &self.adj[v as usize]
    }

    pub fn has_edge(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.adj[a as usize].binary_search(&b).is_ok()
    }

    pub fn indices(&self) -> impl Iterator<Item = NodeIdx> {
        0..self.nodes.len() as NodeIdx
    }

    /// Each edge once as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, list)| {
            let a = a as NodeIdx;
            list.iter().filter(move |&&b| b > a).map(move |&b| (a, b))
        })
    }

    /// No loops, strictly sorted neighbor lists, symmetric adjacency.
    pub fn is_simple(&self) -> bool {
        self.adj.len() == self.nodes.len()
            && self.adj.iter().enumerate().all(|(a, list)| {
                list.windows(2).all(|w| w[0] < w[1])
                    && list.iter().all(|&b| {
                        b as usize != a
                            && (b as usize) < self.nodes.len()
                            && self.adj[b as usize].binary_search(&(a as NodeIdx)).is_ok()
                    })
            })
    }

    /// Subgraph induced by the nodes for which `keep` returns true.
    pub fn induced(&self, keep: impl Fn(NodeIdx) -> bool) -> ProductGraph {
        let mut remap = vec![NodeIdx::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for v in self.indices() {
            if keep(v) {
                remap[v as usize] = nodes.len() as NodeIdx;
                nodes.push(self.nodes[v as usize].clone());
            }
        }
        let adj = self
            .adj
            .iter()
            .enumerate()
            .filter(|(v, _)| remap[*v] != NodeIdx::MAX)
            .map(|(_, list)| {
                list.iter()
                    .map(|&b| remap[b as usize])
                    .filter(|&b| b != NodeIdx::MAX)
                    .collect()
            })
            .collect();
        let g = ProductGraph { nodes, adj };
        debug_assert!(g.is_simple());
        g
    }
}

/// Nodes are the catalog products with at least one sale in `log`, each
/// weighted by its number of sale events; `A`–`B` is an edge iff the pair was
/// purchased together at least `threshold` times.
pub fn build_graph(
    counts: &CoOccurrenceCounts,
    catalog: &ProductCatalog,
    log: &SaleLog,
    threshold: u32,
) -> Result<ProductGraph> {
    if threshold == 0 {
        return Err(Error::param("threshold", "must be at least 1"));
    }
    let mut sold: Vec<&str> = log.events.iter().map(|e| e.product_id.as_str()).collect();
    sold.sort_unstable();
    let mut nodes: Vec<NodeInfo> = Vec::new();
    for run in sold.chunk_by(|a, b| a == b) {
        if let Some(record) = catalog.get(run[0]) {
            nodes.push(NodeInfo {
                id: run[0].to_string(),
                description: record.description.clone(),
                sales_volume: run.len() as u64,
            });
        }
    }

    // Map count-product indices to node indices once.
    let to_node: Vec<Option<NodeIdx>> = counts
        .products()
        .iter()
        .map(|id| {
            nodes
                .binary_search_by(|n| n.id.as_str().cmp(id))
                .ok()
                .map(|i| i as NodeIdx)
        })
        .collect();
    let edges = counts
        .pairs()
        .iter()
        .filter(|p| p.count >= threshold)
        .filter_map(|p| Some((to_node[p.a as usize]?, to_node[p.b as usize]?)))
        .collect();
    Ok(ProductGraph::from_index_edges(nodes, edges))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::{ProductKind, ProductRecord, SaleEvent};

    /// Graph on ids "n00".."nNN" with unit sales.
    pub(crate) fn numbered(n: usize, edges: &[(usize, usize)]) -> ProductGraph {
        let nodes = (0..n)
            .map(|i| NodeInfo::new(format!("n{i:02}"), 1))
            .collect();
        ProductGraph::from_parts(
            nodes,
            edges
                .iter()
                .map(|&(a, b)| (format!("n{a:02}"), format!("n{b:02}"))),
        )
        .unwrap()
    }

    fn fixture(
        sold: &[&str],
        counts: &[(&str, &str, u32)],
    ) -> (CoOccurrenceCounts, ProductCatalog, SaleLog) {
        let catalog =
            ProductCatalog::from_records(["A", "B", "C", "D", "E"].map(|id| ProductRecord {
                product_id: id.into(),
                description: format!("item {id}"),
                subcategory_id: "s".into(),
                class_id: "c".into(),
                group_id: "g".into(),
                kind: ProductKind::Material,
            }));
        let events = sold
            .iter()
            .map(|&p| SaleEvent {
                customer_id: "c".into(),
                product_id: p.into(),
                timestamp: chrono::NaiveDate::from_ymd_opt(2013, 1, 1)
                    .unwrap()
                    .and_hms_opt(0, 0, 0)
                    .unwrap(),
                register_id: "r".into(),
                store_id: "s".into(),
                quantity: 1,
            })
            .collect();
        let counts = CoOccurrenceCounts::from_triples(counts.iter().copied(), 7).unwrap();
        (counts, catalog, SaleLog::from_events(events))
    }

    #[test]
    fn threshold_is_inclusive() {
        let (c, cat, log) = fixture(&["A", "B"], &[("A", "B", 5)]);
        let g = build_graph(&c, &cat, &log, 5).unwrap();
        assert_eq!(g.edge_count(), 1);
        let (c, cat, log) = fixture(&["A", "B"], &[("A", "B", 4)]);
        let g = build_graph(&c, &cat, &log, 5).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 0));
    }

    #[test]
    fn nodes_are_sold_products() {
        let (c, cat, log) = fixture(&["A", "B", "C", "D"], &[("A", "B", 7), ("B", "C", 2)]);
        let g = build_graph(&c, &cat, &log, 5).unwrap();
        let ids: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["A", "B", "C", "D"]);
        let edges: Vec<_> = g.edges().map(|(a, b)| (g.id(a), g.id(b))).collect();
        assert_eq!(edges, [("A", "B")]);
        assert_eq!(g.degree(g.index_of("D").unwrap()), 0);
        assert_eq!(g.node(0).description, "item A");
    }

    #[test]
    fn sales_volume_counts_events() {
        let (c, cat, log) = fixture(&["A", "A", "B"], &[]);
        // the two A rows share all identity fields and collapse to one sale
        let g = build_graph(&c, &cat, &log, 1).unwrap();
        assert_eq!(g.sales_volume(0), 1);
    }

    #[test]
    fn zero_threshold_rejected() {
        let (c, cat, log) = fixture(&["A"], &[]);
        assert!(build_graph(&c, &cat, &log, 0).is_err());
    }

    #[test]
    fn from_parts_validates() {
        let nodes = vec![NodeInfo::new("a", 1), NodeInfo::new("b", 1)];
        assert!(ProductGraph::from_parts(nodes.clone(), [("a", "a")]).is_err());
        assert!(ProductGraph::from_parts(nodes.clone(), [("a", "z")]).is_err());
        let g = ProductGraph::from_parts(nodes, [("a", "b"), ("b", "a")]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.is_simple());
    }

    #[test]
    fn induced_subgraph() {
        let g = numbered(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let h = g.induced(|v| v != 1);
        assert_eq!(h.node_count(), 3);
        assert_eq!(h.edge_count(), 2);
        assert!(h.is_simple());
    }
}
