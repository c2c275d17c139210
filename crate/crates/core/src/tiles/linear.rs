use std::collections::HashMap;

use super::{finalize, Tile};
use crate::graph::{NodeIdx, ProductGraph};

struct RawTile {
    /// Sorted; includes the anchors.
    nodes: Vec<NodeIdx>,
    anchors: Vec<NodeIdx>,
}

fn is_linear_node(graph: &ProductGraph, v: NodeIdx) -> bool {
    (1..=3).contains(&graph.degree(v))
}

/// Connected runs of degree 1-3 nodes, each with the higher-degree nodes it
/// touches attached as anchors, ordered by node list.
fn raw_tiles(graph: &ProductGraph) -> Vec<RawTile> {
    let mut seen = vec![false; graph.node_count()];
    let mut raw = Vec::new();
    let mut stack = Vec::new();
    for start in graph.indices() {
        if seen[start as usize] || !is_linear_node(graph, start) {
            continue;
        }
        seen[start as usize] = true;
        stack.push(start);
        let mut nodes = Vec::new();
        let mut anchors = Vec::new();
        while let Some(v) = stack.pop() {
            nodes.push(v);
            for &w in graph.neighbors(v) {
                if is_linear_node(graph, w) {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        stack.push(w);
                    }
                } else {
                    // any neighbor outside the run has degree >= 4
                    anchors.push(w);
                }
            }
        }
        anchors.sort_unstable();
        anchors.dedup();
        nodes.extend_from_slice(&anchors);
        nodes.sort_unstable();
        raw.push(RawTile { nodes, anchors });
    }
    raw.sort_by(|a, b| a.nodes.cmp(&b.nodes));
    raw
}

/// Linear tiles (chains and pendants).
///
/// Tiles with fewer than `min_tile` nodes are merged into the largest tile of
/// at least `min_tile` nodes that shares one of their anchors (ties to the
/// earlier tile); small tiles with no such neighbor are dropped. Sizes used
/// for choosing partners are the pre-merge sizes, so the result does not
/// depend on merge order.
pub fn extract_linear(graph: &ProductGraph, min_tile: usize) -> Vec<Tile> {
    let raw = raw_tiles(graph);
    let is_large = |t: &RawTile| t.nodes.len() >= min_tile;

    let mut large_by_anchor: HashMap<NodeIdx, Vec<usize>> = HashMap::new();
    for (i, t) in raw.iter().enumerate().filter(|(_, t)| is_large(t)) {
        for &a in &t.anchors {
            large_by_anchor.entry(a).or_default().push(i);
        }
    }

    let mut absorbed: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, t) in raw.iter().enumerate().filter(|(_, t)| !is_large(t)) {
        let partner = t
            .anchors
            .iter()
            .filter_map(|a| large_by_anchor.get(a))
            .flatten()
            .copied()
            .max_by(|&x, &y| raw[x].nodes.len().cmp(&raw[y].nodes.len()).then(y.cmp(&x)));
        if let Some(p) = partner {
            absorbed.entry(p).or_default().push(i);
        }
    }

    let tiles = raw
        .iter()
        .enumerate()
        .filter(|(_, t)| is_large(t))
        .map(|(i, t)| {
            let mut nodes = t.nodes.clone();
            let mut anchors = t.anchors.clone();
            for &s in absorbed.get(&i).into_iter().flatten() {
                nodes.extend_from_slice(&raw[s].nodes);
                anchors.extend_from_slice(&raw[s].anchors);
            }
            Tile::linear(graph, &nodes, &anchors)
        })
        .collect();
    finalize(tiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::numbered;
    use proptest::prelude::*;

    fn names(t: &Tile) -> Vec<&str> {
        t.members.iter().map(String::as_str).collect()
    }

    /// Adds a K4 joined to every hub, lifting the hubs and the K4 itself
    /// to degree at least 4 without creating any new low-degree node.
    fn core(edges: &mut Vec<(usize, usize)>, hubs: &[usize], next: &mut usize) {
        let base = *next;
        *next += 4;
        for a in base..base + 4 {
            edges.extend((a + 1..base + 4).map(|b| (a, b)));
            edges.extend(hubs.iter().map(|&h| (h, a)));
        }
    }

    #[test]
    fn chain_between_two_hubs() {
        // a=0 b=1 c=2 d=3 path between hubs h1=4 and h2=5
        let mut edges = vec![(4, 0), (0, 1), (1, 2), (2, 3), (3, 5)];
        let mut next = 6;
        core(&mut edges, &[4, 5], &mut next);
        let g = numbered(next, &edges);
        let tiles = extract_linear(&g, 5);
        let chain = tiles.iter().find(|t| t.contains("n00")).unwrap();
        assert_eq!(names(chain), ["n00", "n01", "n02", "n03", "n04", "n05"]);
        assert_eq!(chain.anchors, ["n04", "n05"]);
        chain.check(&g, 5).unwrap();
    }

    /// Induced-subgraph oracle for the fixture above: the degree 1-3 nodes
    /// and their components, computed by repeated relaxation.
    #[test]
    fn chain_matches_induced_subgraph_oracle() {
        let mut edges = vec![(4, 0), (0, 1), (1, 2), (2, 3), (3, 5)];
        let mut next = 6;
        core(&mut edges, &[4, 5], &mut next);
        let g = numbered(next, &edges);
        let low: Vec<bool> = g
            .indices()
            .map(|v| (1..=3).contains(&g.degree(v)))
            .collect();
        let mut label: Vec<usize> = (0..g.node_count()).collect();
        loop {
            let mut changed = false;
            for (a, b) in g.edges() {
                let (a, b) = (a as usize, b as usize);
                if low[a] && low[b] && label[a] != label[b] {
                    let m = label[a].min(label[b]);
                    label[a] = m;
                    label[b] = m;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let run: Vec<usize> = (0..g.node_count())
            .filter(|&v| low[v] && label[v] == label[0])
            .collect();
        assert_eq!(run, [0, 1, 2, 3]);
    }

    #[test]
    fn isolated_path_has_no_anchors() {
        let g = numbered(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let tiles = extract_linear(&g, 5);
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].members.len(), 5);
        assert!(tiles[0].anchors.is_empty());
    }

    #[test]
    fn pendant_merges_into_larger_neighbor() {
        // hub 0; 7-node chain 1..=7 hangs off it (8 members with the hub);
        // 2-node pendant 8-9 also hangs off it (3 members)
        let mut edges: Vec<(usize, usize)> = (1..7).map(|i| (i, i + 1)).collect();
        edges.extend([(0, 1), (0, 8), (8, 9)]);
        let mut next = 10;
        core(&mut edges, &[0], &mut next);
        let g = numbered(next, &edges);
        let tiles = extract_linear(&g, 5);
        let big = tiles.iter().find(|t| t.contains("n01")).unwrap();
        assert!(big.contains("n08") && big.contains("n09"));
        assert_eq!(big.members.len(), 10);
        assert_eq!(big.anchors, ["n00"]);
        big.check(&g, 5).unwrap();
        assert_eq!(tiles.iter().filter(|t| t.contains("n08")).count(), 1);
    }

    #[test]
    fn merge_partner_is_the_largest() {
        // hub 0 anchors a 6-member chain (1..=5) and an 8-member chain
        // (6..=12); pendant 13 joins the 8-member one
        let mut edges: Vec<(usize, usize)> = (1..5).map(|i| (i, i + 1)).collect();
        edges.extend((6..12).map(|i| (i, i + 1)));
        edges.extend([(0, 1), (0, 6), (0, 13)]);
        let mut next = 14;
        core(&mut edges, &[0], &mut next);
        let g = numbered(next, &edges);
        let tiles = extract_linear(&g, 5);
        assert_eq!(tiles.len(), 2);
        let with_pendant: Vec<_> = tiles.iter().filter(|t| t.contains("n13")).collect();
        assert_eq!(with_pendant.len(), 1);
        assert!(with_pendant[0].contains("n06"));
    }

    #[test]
    fn lone_small_tiles_are_dropped() {
        // star leaves around hub 0: every run is small and has no large
        // neighbor, so nothing survives
        let g = numbered(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        assert!(extract_linear(&g, 5).is_empty());
    }

    proptest! {
        #[test]
        fn linear_tiles_satisfy_invariants(
            n in 5usize..40,
            raw in proptest::collection::vec((0usize..40, 0usize..40), 0..80),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(a, b)| a < n && b < n && a != b).collect();
            let g = numbered(n, &edges);
            let tiles = extract_linear(&g, 5);
            for t in &tiles {
                prop_assert!(t.check(&g, 5).is_ok(), "{:?}", t.check(&g, 5));
            }
            // every degree 1-3 node lies in at most one linear tile
            for v in g.indices().filter(|&v| (1..=3).contains(&g.degree(v))) {
                prop_assert!(tiles.iter().filter(|t| t.contains(g.id(v))).count() <= 1);
            }
        }
    }
}
