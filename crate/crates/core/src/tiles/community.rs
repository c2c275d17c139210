//! k-clique percolation.
//!
//! A k-clique community is the union of k-cliques reachable from one another
//! through pairs that share k-1 nodes. Enumerating k-cliques directly blows
//! up on dense regions, so the communities are built from maximal cliques of
//! at least k nodes instead: two such cliques belong to the same community
//! exactly when they are linked by a chain of cliques overlapping in at
//! least k-1 nodes.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use super::{finalize, Tile};
use crate::error::{Error, Result};
use crate::graph::{NodeIdx, ProductGraph};

fn intersect(a: &[NodeIdx], b: &[NodeIdx]) -> Vec<NodeIdx> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Vertices in degeneracy order (repeatedly remove a minimum-degree vertex).
fn degeneracy_order(graph: &ProductGraph) -> Vec<NodeIdx> {
    let n = graph.node_count();
    let mut degree: Vec<usize> = graph.indices().map(|v| graph.degree(v)).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<NodeIdx>> = vec![Vec::new(); max_deg + 1];
    for v in graph.indices() {
        buckets[degree[v as usize]].push(v);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut d = 0;
    while order.len() < n {
        d = d.min(max_deg);
        while buckets[d].is_empty() {
            d += 1;
        }
        let v = buckets[d].pop().unwrap();
        // stale bucket entries are skipped
        if removed[v as usize] || degree[v as usize] != d {
            continue;
        }
        removed[v as usize] = true;
        order.push(v);
        for &w in graph.neighbors(v) {
            if !removed[w as usize] {
                degree[w as usize] -= 1;
                buckets[degree[w as usize]].push(w);
                d = d.min(degree[w as usize]);
            }
        }
    }
    order
}

struct Search<'g> {
    graph: &'g ProductGraph,
    min_size: usize,
    out: Vec<Vec<NodeIdx>>,
}

impl Search<'_> {
    /// Bron-Kerbosch with Tomita pivoting; `p` and `x` are sorted.
    fn expand(&mut self, r: &mut Vec<NodeIdx>, p: Vec<NodeIdx>, mut x: Vec<NodeIdx>) {
        if p.is_empty() {
            if x.is_empty() && r.len() >= self.min_size {
                let mut clique = r.clone();
                clique.sort_unstable();
                self.out.push(clique);
            }
            return;
        }
        if r.len() + p.len() < self.min_size {
            return;
        }
        let g = self.graph;
        let pivot = p
            .iter()
            .chain(&x)
            .copied()
            .max_by_key(|&u| intersect(&p, g.neighbors(u)).len())
            .unwrap();
        let candidates: Vec<NodeIdx> = p
            .iter()
            .copied()
            .filter(|&v| !g.has_edge(pivot, v))
            .collect();
        let mut p = p;
        for v in candidates {
            let nv = g.neighbors(v);
            r.push(v);
            self.expand(r, intersect(&p, nv), intersect(&x, nv));
            r.pop();
            p.retain(|&u| u != v);
            let pos = x.binary_search(&v).unwrap_err();
            x.insert(pos, v);
        }
    }
}

/// Maximal cliques with at least `min_size` nodes, each sorted, in
/// lexicographic order.
pub fn maximal_cliques(graph: &ProductGraph, min_size: usize) -> Vec<Vec<NodeIdx>> {
    let order = degeneracy_order(graph);
    let mut rank = vec![0usize; graph.node_count()];
    for (i, &v) in order.iter().enumerate() {
        rank[v as usize] = i;
    }
    let mut cliques: Vec<Vec<NodeIdx>> = order
        .par_iter()
        .flat_map_iter(|&v| {
            let (later, earlier): (Vec<NodeIdx>, Vec<NodeIdx>) = graph
                .neighbors(v)
                .iter()
                .partition(|&&w| rank[w as usize] > rank[v as usize]);
            let mut search = Search {
                graph,
                min_size: min_size.max(1),
                out: Vec::new(),
            };
            search.expand(&mut vec![v], later, earlier);
            search.out
        })
        .collect();
    cliques.sort_unstable();
    cliques
}

/// k-clique communities as sorted node lists, in lexicographic order, with
/// no size filter applied.
pub fn clique_percolation(graph: &ProductGraph, k: usize) -> Result<Vec<Vec<NodeIdx>>> {
    if k < 3 {
        return Err(Error::param("cpm_k", format!("k = {k} must be at least 3")));
    }
    let cliques = maximal_cliques(graph, k);
    let mut by_node: HashMap<NodeIdx, Vec<usize>> = HashMap::new();
    for (i, c) in cliques.iter().enumerate() {
        for &v in c {
            by_node.entry(v).or_default().push(i);
        }
    }
    let mut uf = UnionFind::<usize>::new(cliques.len());
    let mut shared: HashMap<usize, usize> = HashMap::new();
    for (i, c) in cliques.iter().enumerate() {
        shared.clear();
        for v in c {
            for &j in &by_node[v] {
                if j > i {
                    *shared.entry(j).or_default() += 1;
                }
            }
        }
        for (&j, &count) in &shared {
            if count >= k - 1 {
                uf.union(i, j);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<NodeIdx>> = HashMap::new();
    for (i, c) in cliques.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().extend_from_slice(c);
    }
    let mut communities: Vec<Vec<NodeIdx>> = groups
        .into_values()
        .map(|mut m| {
            m.sort_unstable();
            m.dedup();
            m
        })
        .collect();
    communities.sort_unstable();
    Ok(communities)
}

/// Clique-percolation communities with at least `min_tile` members.
pub fn extract_communities(graph: &ProductGraph, k: usize, min_tile: usize) -> Result<Vec<Tile>> {
    let tiles = clique_percolation(graph, k)?
        .into_iter()
        .filter(|c| c.len() >= min_tile)
        .map(|c| Tile::community(graph, &c, k))
        .collect();
    Ok(finalize(tiles))
}
