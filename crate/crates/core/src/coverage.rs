//! Greedy maximum coverage over tiles.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::sig6;
use crate::tiles::{Tile, TileKind};

pub const DEFAULT_MIN_GAIN: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub tile_id: u32,
    pub gain: usize,
}

/// Count, union coverage and mean size of a set of tiles of one kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub count: usize,
    pub node_coverage: usize,
    #[serde(serialize_with = "sig6")]
    pub mean_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSolution {
    /// In selection order.
    pub selected: Vec<Selection>,
    pub covered: BTreeSet<String>,
    pub uncovered_count: usize,
    pub per_type: BTreeMap<TileKind, KindSummary>,
}

impl CoverageSolution {
    pub fn selected_tiles<'t>(&self, tiles: &'t [Tile]) -> Vec<&'t Tile> {
        let by_id: HashMap<u32, &Tile> = tiles.iter().map(|t| (t.tile_id, t)).collect();
        self.selected
            .iter()
            .filter_map(|s| by_id.get(&s.tile_id).copied())
            .collect()
    }

    pub fn per_type_counts(&self) -> BTreeMap<TileKind, usize> {
        self.per_type.iter().map(|(k, s)| (*k, s.count)).collect()
    }

    pub fn mean_size_per_type(&self) -> BTreeMap<TileKind, f64> {
        self.per_type
            .iter()
            .map(|(k, s)| (*k, s.mean_size))
            .collect()
    }
}

/// Per-kind count, union of members, and mean tile size.
pub fn summarize<'t>(tiles: impl IntoIterator<Item = &'t Tile>) -> BTreeMap<TileKind, KindSummary> {
    let mut members: BTreeMap<TileKind, (usize, usize, BTreeSet<&str>)> = TileKind::ALL
        .iter()
        .map(|&k| (k, (0, 0, BTreeSet::new())))
        .collect();
    for t in tiles {
        let e = members.get_mut(&t.kind).unwrap();
        e.0 += 1;
        e.1 += t.members.len();
        e.2.extend(t.members.iter().map(String::as_str));
    }
    members
        .into_iter()
        .map(|(kind, (count, total, union))| {
            let mean_size = if count > 0 {
                total as f64 / count as f64
            } else {
                0.0
            };
            (
                kind,
                KindSummary {
                    count,
                    node_coverage: union.len(),
                    mean_size,
                },
            )
        })
        .collect()
}

/// Dense communities first, then stars, then linear tiles.
fn kind_priority(kind: TileKind) -> u8 {
    match kind {
        TileKind::Community => 2,
        TileKind::Star => 1,
        TileKind::Linear => 0,
    }
}

/// Heap key: larger is better.
#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    gain: usize,
    size: usize,
    priority: u8,
    tile_id: Reverse<u32>,
    pos: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.gain, self.size, self.priority, self.tile_id).cmp(&(
            other.gain,
            other.size,
            other.priority,
            other.tile_id,
        ))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Repeatedly picks the tile covering the most not-yet-covered universe
/// nodes, until the best gain drops below `min_gain`. Ties go to the larger
/// tile, then community over star over linear, then the smaller tile id.
/// Members outside `universe` are ignored.
pub fn greedy_cover(
    tiles: &[Tile],
    universe: &BTreeSet<String>,
    min_gain: usize,
) -> Result<CoverageSolution> {
    if min_gain == 0 {
        return Err(Error::param("min_gain", "must be at least 1"));
    }
    let index: HashMap<&str, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let members: Vec<Vec<usize>> = tiles
        .iter()
        .map(|t| {
            t.members
                .iter()
                .filter_map(|m| index.get(m.as_str()).copied())
                .collect()
        })
        .collect();
    let mut covered = vec![false; universe.len()];

    // Gains only shrink as coverage grows, so a stale heap entry is an upper
    // bound: re-score the top and select it once it still beats the runner-up.
    let mut heap: BinaryHeap<Candidate> = tiles
        .iter()
        .enumerate()
        .map(|(pos, t)| Candidate {
            gain: members[pos].len(),
            size: t.members.len(),
            priority: kind_priority(t.kind),
            tile_id: Reverse(t.tile_id),
            pos,
        })
        .collect();
    let mut selected = Vec::new();
    while let Some(mut top) = heap.pop() {
        if top.gain < min_gain {
            break;
        }
        let fresh = members[top.pos].iter().filter(|&&v| !covered[v]).count();
        if fresh != top.gain {
            top.gain = fresh;
            heap.push(top);
            continue;
        }
        for &v in &members[top.pos] {
            covered[v] = true;
        }
        selected.push(Selection {
            tile_id: top.tile_id.0,
            gain: fresh,
        });
    }

    let covered: BTreeSet<String> = universe
        .iter()
        .zip(&covered)
        .filter(|(_, &c)| c)
        .map(|(s, _)| s.clone())
        .collect();
    let by_id: HashMap<u32, &Tile> = tiles.iter().map(|t| (t.tile_id, t)).collect();
    let per_type = summarize(selected.iter().map(|s| by_id[&s.tile_id]));
    Ok(CoverageSolution {
        uncovered_count: universe.len() - covered.len(),
        selected,
        covered,
        per_type,
    })
}

/// Histogram: number of tiles a node belongs to -> number of universe nodes.
/// Bin 0 holds uncovered nodes.
pub fn overcoverage<'t>(
    tiles: impl IntoIterator<Item = &'t Tile>,
    universe: &BTreeSet<String>,
) -> BTreeMap<usize, usize> {
    let mut per_node: HashMap<&str, usize> = universe.iter().map(|s| (s.as_str(), 0)).collect();
    for t in tiles {
        for m in &t.members {
            if let Some(c) = per_node.get_mut(m.as_str()) {
                *c += 1;
            }
        }
    }
    let mut hist = BTreeMap::new();
    for c in per_node.into_values() {
        *hist.entry(c).or_default() += 1;
    }
    hist
}

/// Mean tiles per node over a histogram from [`overcoverage`].
pub fn mean_overcoverage(hist: &BTreeMap<usize, usize>) -> f64 {
    let nodes: usize = hist.values().sum();
    if nodes == 0 {
        return 0.0;
    }
    hist.iter().map(|(b, n)| b * n).sum::<usize>() as f64 / nodes as f64
}

#[derive(Serialize)]
struct CoverageFile<'a> {
    selected: &'a [Selection],
    covered_count: usize,
    uncovered_count: usize,
    per_type: BTreeMap<&'static str, KindSummary>,
}

pub fn coverage_json(solution: &CoverageSolution) -> serde_json::Value {
    serde_json::to_value(CoverageFile {
        selected: &solution.selected,
        covered_count: solution.covered.len(),
        uncovered_count: solution.uncovered_count,
        per_type: solution
            .per_type
            .iter()
            .map(|(k, s)| (k.as_str(), *s))
            .collect(),
    })
    .expect("coverage serializes")
}

pub fn write_coverage_json(solution: &CoverageSolution, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &coverage_json(solution))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
