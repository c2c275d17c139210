use super::{finalize, Tile};
use crate::graph::{NodeIdx, ProductGraph};

/// Fewest low-degree leaves a hub needs to count as a star.
pub const MIN_STAR_LEAVES: usize = 4;

/// One candidate star per hub: the hub plus every neighbor of degree at most
/// two. Kept when there are at least four such leaves and the edges among the
/// leaves (chords) number at most half the star's node count, rounded down.
pub fn extract_stars(graph: &ProductGraph, min_tile: usize) -> Vec<Tile> {
    let mut out = Vec::new();
    let mut leaves: Vec<NodeIdx> = Vec::new();
    for c in graph.indices() {
        if graph.degree(c) < MIN_STAR_LEAVES {
            continue;
        }
        leaves.clear();
        leaves.extend(
            graph
                .neighbors(c)
                .iter()
                .copied()
                .filter(|&l| graph.degree(l) <= 2),
        );
        if leaves.len() < MIN_STAR_LEAVES || leaves.len() + 1 < min_tile {
            continue;
        }
        // each leaf has at most one neighbor besides the hub
        let chords = leaves
            .iter()
            .map(|&l| {
                graph
                    .neighbors(l)
                    .iter()
                    .filter(|&&w| w != c && leaves.binary_search(&w).is_ok())
                    .count()
            })
            .sum::<usize>()
            / 2;
        if within_chord_budget(leaves.len() + 1, chords) {
            out.push(Tile::star(graph, c, &leaves, chords));
        }
    }
    finalize(out)
}

/// An `n`-node star tolerates `floor(n / 2)` chords.
pub fn within_chord_budget(n: usize, chords: usize) -> bool {
    chords <= n / 2
}
