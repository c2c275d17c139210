//! Structural tiles of the pruned product network.
//!
//! Three kinds of tile are extracted independently and may overlap:
//! imperfect stars (a hub with low-degree leaves), linear tiles (runs of
//! degree 1-3 nodes plus the hubs they hang from) and clique-percolation
//! communities. Each kind carries a fixed mini-category label.

mod community;
mod linear;
mod star;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use community::{clique_percolation, extract_communities, maximal_cliques};
pub use linear::extract_linear;
pub use star::extract_stars;

use crate::error::{Error, Result};
use crate::graph::{NodeIdx, ProductGraph};

pub const DEFAULT_MIN_TILE: usize = 5;
pub const DEFAULT_CPM_K: usize = 3;

/// Declaration order is the output order of tile lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Star,
    Community,
    Linear,
}

impl TileKind {
    pub const ALL: [TileKind; 3] = [TileKind::Star, TileKind::Community, TileKind::Linear];

    pub fn label(self) -> TileLabel {
        match self {
            TileKind::Community => TileLabel::Complements,
            TileKind::Star => TileLabel::SubstitutesByChoice,
            TileKind::Linear => TileLabel::SubstitutesByIgnorance,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TileKind::Star => "star",
            TileKind::Community => "community",
            TileKind::Linear => "linear",
        }
    }
}

/// How the products of a tile relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileLabel {
    Complements,
    SubstitutesByChoice,
    SubstitutesByIgnorance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub tile_id: u32,
    pub kind: TileKind,
    pub label: TileLabel,
    /// Sorted product ids.
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    #[serde(default)]
    pub anchors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

fn ids(graph: &ProductGraph, nodes: &[NodeIdx]) -> Vec<String> {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.iter().map(|&v| graph.id(v).to_string()).collect()
}

impl Tile {
    fn new(kind: TileKind, members: Vec<String>) -> Self {
        Tile {
            tile_id: 0,
            kind,
            label: kind.label(),
            members,
            center: None,
            anchors: Vec::new(),
            chord_count: None,
            k: None,
        }
    }

    pub fn star(graph: &ProductGraph, center: NodeIdx, leaves: &[NodeIdx], chords: usize) -> Self {
        let mut members = leaves.to_vec();
        members.push(center);
        Tile {
            center: Some(graph.id(center).to_string()),
            chord_count: Some(chords),
            ..Tile::new(TileKind::Star, ids(graph, &members))
        }
    }

    pub fn linear(graph: &ProductGraph, members: &[NodeIdx], anchors: &[NodeIdx]) -> Self {
        Tile {
            anchors: ids(graph, anchors),
            ..Tile::new(TileKind::Linear, ids(graph, members))
        }
    }

    pub fn community(graph: &ProductGraph, members: &[NodeIdx], k: usize) -> Self {
        Tile {
            k: Some(k),
            ..Tile::new(TileKind::Community, ids(graph, members))
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members
            .binary_search_by(|m| m.as_str().cmp(id))
            .is_ok()
    }

    /// Checks the structural invariants of this tile's kind against `graph`.
    pub fn check(&self, graph: &ProductGraph, min_tile: usize) -> Result<(), String> {
        if self.label != self.kind.label() {
            return Err(format!(
                "label {:?} does not match kind {:?}",
                self.label, self.kind
            ));
        }
        if self.members.len() < min_tile {
            return Err(format!("{} members < {min_tile}", self.members.len()));
        }
        if !self.members.windows(2).all(|w| w[0] < w[1]) {
            return Err("members not sorted and unique".into());
        }
        let idx: Vec<NodeIdx> = self
            .members
            .iter()
            .map(|m| {
                graph
                    .index_of(m)
                    .ok_or_else(|| format!("unknown member {m:?}"))
            })
            .collect::<Result<_, _>>()?;
        let inside = |v: NodeIdx| idx.binary_search(&v).is_ok();
        match self.kind {
            TileKind::Star => {
                let center = self.center.as_deref().ok_or("star without center")?;
                let c = graph.index_of(center).ok_or("unknown center")?;
                if !inside(c) {
                    return Err("center not a member".into());
                }
                let leaves: Vec<NodeIdx> = idx.iter().copied().filter(|&v| v != c).collect();
                if leaves.len() < 4 {
                    return Err("fewer than four leaves".into());
                }
                for &l in &leaves {
                    if !graph.has_edge(c, l) {
                        return Err(format!("leaf {:?} not adjacent to center", graph.id(l)));
                    }
                    if graph.degree(l) > 2 {
                        return Err(format!("leaf {:?} has degree > 2", graph.id(l)));
                    }
                }
                let chords = leaves
                    .iter()
                    .map(|&l| {
                        graph
                            .neighbors(l)
                            .iter()
                            .filter(|&&w| w != c && inside(w))
                            .count()
                    })
                    .sum::<usize>()
                    / 2;
                if Some(chords) != self.chord_count {
                    return Err(format!("chord count {chords} != {:?}", self.chord_count));
                }
                if chords > self.members.len() / 2 {
                    return Err("chord budget exceeded".into());
                }
            }
            TileKind::Linear => {
                let anchors: Vec<NodeIdx> = self
                    .anchors
                    .iter()
                    .map(|a| {
                        graph
                            .index_of(a)
                            .ok_or_else(|| format!("unknown anchor {a:?}"))
                    })
                    .collect::<Result<_, _>>()?;
                for &a in &anchors {
                    if !inside(a) {
                        return Err("anchor not a member".into());
                    }
                }
                for &v in &idx {
                    if !anchors.contains(&v) && !(1..=3).contains(&graph.degree(v)) {
                        return Err(format!("{:?} has degree {}", graph.id(v), graph.degree(v)));
                    }
                }
                if !connected(graph, &idx) {
                    return Err("linear tile not connected".into());
                }
            }
            TileKind::Community => {
                let k = self.k.ok_or("community without k")?;
                if !connected(graph, &idx) {
                    return Err("community not connected".into());
                }
                // every member sits in a k-clique inside the community
                let sub = graph.induced(inside);
                let covered: std::collections::BTreeSet<NodeIdx> =
                    maximal_cliques(&sub, k).into_iter().flatten().collect();
                if covered.len() != idx.len() {
                    return Err("member outside every k-clique".into());
                }
            }
        }
        Ok(())
    }
}

fn connected(graph: &ProductGraph, nodes: &[NodeIdx]) -> bool {
    let Some(&start) = nodes.first() else {
        return true;
    };
    let mut seen = vec![start];
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in graph.neighbors(v) {
            if nodes.binary_search(&w).is_ok() && !seen.contains(&w) {
                seen.push(w);
                stack.push(w);
            }
        }
    }
    seen.len() == nodes.len()
}

/// Sorts tiles by (kind, member list) and numbers them in that order.
pub fn finalize(mut tiles: Vec<Tile>) -> Vec<Tile> {
    tiles.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.members.cmp(&b.members)));
    for (i, t) in tiles.iter_mut().enumerate() {
        t.tile_id = i as u32;
    }
    tiles
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileParams {
    pub min_tile: usize,
    pub cpm_k: usize,
}

impl Default for TileParams {
    fn default() -> Self {
        TileParams {
            min_tile: DEFAULT_MIN_TILE,
            cpm_k: DEFAULT_CPM_K,
        }
    }
}

/// All three tile kinds, numbered together.
pub fn extract_all(graph: &ProductGraph, params: TileParams) -> Result<Vec<Tile>> {
    let (stars, (linear, communities)) = rayon::join(
        || extract_stars(graph, params.min_tile),
        || {
            rayon::join(
                || extract_linear(graph, params.min_tile),
                || extract_communities(graph, params.cpm_k, params.min_tile),
            )
        },
    );
    let mut all = stars;
    all.extend(linear);
    all.extend(communities?);
    Ok(finalize(all))
}

pub fn write_tiles_json(tiles: &[Tile], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, tiles)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tiles_json(path: impl AsRef<Path>) -> Result<Vec<Tile>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let tiles: Vec<Tile> = serde_json::from_reader(BufReader::new(file))?;
    for t in &tiles {
        if t.label != t.kind.label() {
            return Err(Error::param(
                "tiles",
                format!(
                    "tile {} has label {:?} for kind {:?}",
                    t.tile_id, t.label, t.kind
                ),
            ));
        }
    }
    Ok(tiles)
}
