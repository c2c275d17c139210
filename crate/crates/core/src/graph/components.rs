use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{NodeIdx, ProductGraph};
use crate::error::{Error, Result};
use crate::numfmt::sig6;

/// Connected components, each sorted, ordered by smallest member.
pub fn components(graph: &ProductGraph) -> Vec<Vec<NodeIdx>> {
    let mut seen = vec![false; graph.node_count()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in graph.indices() {
        if seen[start as usize] {
            continue;
        }
        seen[start as usize] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &w in graph.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Position of the largest component; the earliest (smallest member) wins ties.
fn giant(comps: &[Vec<NodeIdx>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in comps.iter().enumerate() {
        if best.is_none_or(|b| c.len() > comps[b].len()) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub edges: usize,
    pub nodes: usize,
    pub isolated_nodes: usize,
    pub isolated_pairs: usize,
    pub components: usize,
    pub gcc_size_abs: usize,
    #[serde(serialize_with = "sig6")]
    pub gcc_size_rel: f64,
    #[serde(serialize_with = "sig6")]
    pub gcc_sales_share: f64,
}

pub fn component_stats(graph: &ProductGraph) -> NetworkStats {
    let comps = components(graph);
    let gcc: &[NodeIdx] = giant(&comps).map_or(&[], |i| &comps[i]);
    let total_sales: u64 = graph.nodes().iter().map(|n| n.sales_volume).sum();
    let gcc_sales: u64 = gcc.iter().map(|&v| graph.sales_volume(v)).sum();
    let nodes = graph.node_count();
    NetworkStats {
        edges: graph.edge_count(),
        nodes,
        isolated_nodes: comps.iter().filter(|c| c.len() == 1).count(),
        isolated_pairs: comps.iter().filter(|c| c.len() == 2).count(),
        components: comps.len(),
        gcc_size_abs: gcc.len(),
        gcc_size_rel: ratio(gcc.len() as f64, nodes as f64),
        gcc_sales_share: ratio(gcc_sales as f64, total_sales as f64),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Staple {
    pub product_id: String,
    pub description: String,
    pub degree: usize,
    pub sales_volume: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaplePruning {
    pub graph: ProductGraph,
    /// Removed nodes, highest degree first.
    pub staples: Vec<Staple>,
}

impl StaplePruning {
    /// Smallest degree among the removed staples.
    pub fn degree_cutoff(&self) -> Option<usize> {
        self.staples.last().map(|s| s.degree)
    }
}

/// Number of staples for a GCC of `gcc_size` nodes: `percent * gcc_size`
/// rounded half up.
pub fn staple_count(percent: f64, gcc_size: usize) -> usize {
    let exact = percent * gcc_size as f64;
    // absorb representation error such as 0.05 * 10 = 0.5000000000000001
    let rounded = (exact * 1e9).round() / 1e9;
    ((rounded + 0.5).floor() as usize).min(gcc_size)
}

/// Removes the `round(percent * |GCC|)` highest-degree GCC nodes. Ties go to
/// higher sales volume, then smaller product id.
pub fn prune_staples(graph: &ProductGraph, percent: f64) -> Result<StaplePruning> {
    if !(0.0..=1.0).contains(&percent) {
        return Err(Error::param(
            "staple_percent",
            format!("{percent} is outside [0, 1]"),
        ));
    }
    let comps = components(graph);
    let mut gcc: Vec<NodeIdx> = giant(&comps).map_or_else(Vec::new, |i| comps[i].clone());
    let m = staple_count(percent, gcc.len());
    gcc.sort_by(|&a, &b| {
        graph
            .degree(b)
            .cmp(&graph.degree(a))
            .then(graph.sales_volume(b).cmp(&graph.sales_volume(a)))
            .then(a.cmp(&b))
    });
    gcc.truncate(m);
    let mut removed = vec![false; graph.node_count()];
    for &v in &gcc {
        removed[v as usize] = true;
    }
    let staples = gcc
        .iter()
        .map(|&v| Staple {
            product_id: graph.id(v).to_string(),
            description: graph.node(v).description.clone(),
            degree: graph.degree(v),
            sales_volume: graph.sales_volume(v),
        })
        .collect();
    Ok(StaplePruning {
        graph: graph.induced(|v| !removed[v as usize]),
        staples,
    })
}

/// Drops every component with fewer than `min_component` nodes.
pub fn remove_small_components(graph: &ProductGraph, min_component: usize) -> Result<ProductGraph> {
    if min_component == 0 {
        return Err(Error::param("min_component", "must be at least 1"));
    }
    let mut keep = vec![false; graph.node_count()];
    for comp in components(graph) {
        if comp.len() >= min_component {
            for v in comp {
                keep[v as usize] = true;
            }
        }
    }
    Ok(graph.induced(|v| keep[v as usize]))
}
