//! Deterministic synthetic data with known structure.
//!
//! Every generator draws from ChaCha8 seeded with the caller's seed, using a
//! separate ChaCha stream per purpose (layout, noise, sales, ...), so adding
//! draws to one purpose never shifts another's output.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{NodeIdx, NodeInfo, ProductGraph};
use crate::ingest::{ProductKind, ProductRecord, SaleEvent, SaleLog};
use crate::tiles::{finalize, Tile, DEFAULT_CPM_K, DEFAULT_MIN_TILE};

const STREAM_LAYOUT: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SALES: u64 = 3;
const STREAM_CATALOG: u64 = 4;
const STREAM_VISITS: u64 = 5;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// First day of the synthetic observation period.
pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 5, 3).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarSpec {
    pub leaves: usize,
    pub chords: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlantSpec {
    pub stars: Vec<StarSpec>,
    pub cliques: Vec<usize>,
    pub paths: Vec<usize>,
    pub filler_nodes: usize,
    pub noise_edges: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: ProductGraph,
    /// The tiles an extractor should recover, numbered like extractor output.
    pub truth: Vec<Tile>,
    /// Product ids of every planted (non-filler) node, sorted.
    pub planted_nodes: BTreeSet<String>,
}

impl PlantSpec {
    fn validate(&self) -> Result<()> {
        for s in &self.stars {
            if s.leaves < 4 {
                return Err(Error::param(
                    "stars",
                    format!("{} leaves; a star needs 4", s.leaves),
                ));
            }
            // chords between degree-2 leaves form a matching, which also
            // keeps them within the floor((leaves + 1) / 2) chord budget
            if s.chords > s.leaves / 2 {
                return Err(Error::param(
                    "stars",
                    format!("{} chords do not fit {} leaves", s.chords, s.leaves),
                ));
            }
        }
        if let Some(c) = self.cliques.iter().find(|&&c| c < DEFAULT_MIN_TILE) {
            return Err(Error::param(
                "cliques",
                format!("clique of {c} is below tile size"),
            ));
        }
        if let Some(p) = self.paths.iter().find(|&&p| p < DEFAULT_MIN_TILE) {
            return Err(Error::param(
                "paths",
                format!("path of {p} is below tile size"),
            ));
        }
        let f = self.filler_nodes;
        if self.noise_edges > f * f.saturating_sub(1) / 2 {
            return Err(Error::param(
                "noise_edges",
                "more noise edges than filler pairs",
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.stars.iter().map(|s| s.leaves + 1).sum::<usize>()
            + self.cliques.iter().sum::<usize>()
            + self.paths.iter().sum::<usize>()
            + self.filler_nodes
    }
}

/// Vertex-disjoint stars, cliques and paths, plus filler nodes that carry
/// the only noise edges. Node ids are shuffled so structure does not follow
/// id order.
pub fn generate_planted_graph(spec: &PlantSpec) -> Result<PlantedGraph> {
    spec.validate()?;
    let n = spec.node_count();
    let mut layout = rng(spec.seed, STREAM_LAYOUT);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut layout);
    let width = n.to_string().len().max(4);
    let id = |slot: usize| format!("p{:0width$}", labels[slot]);

    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut shapes: Vec<(crate::tiles::TileKind, Vec<usize>, Option<usize>)> = Vec::new();
    let mut next = 0usize;
    fn take(next: &mut usize, k: usize) -> Vec<usize> {
        let r: Vec<usize> = (*next..*next + k).collect();
        *next += k;
        r
    }
    for s in &spec.stars {
        let nodes = take(&mut next, s.leaves + 1);
        let (center, leaves) = (nodes[0], &nodes[1..]);
        edges.extend(leaves.iter().map(|&l| (center, l)));
        edges.extend((0..s.chords).map(|i| (leaves[2 * i], leaves[2 * i + 1])));
        shapes.push((crate::tiles::TileKind::Star, nodes, Some(s.chords)));
    }
    for &c in &spec.cliques {
        let nodes = take(&mut next, c);
        for (i, &a) in nodes.iter().enumerate() {
            edges.extend(nodes[i + 1..].iter().map(|&b| (a, b)));
        }
        shapes.push((crate::tiles::TileKind::Community, nodes, None));
    }
    for &p in &spec.paths {
        let nodes = take(&mut next, p);
        edges.extend(nodes.windows(2).map(|w| (w[0], w[1])));
        shapes.push((crate::tiles::TileKind::Linear, nodes, None));
    }
    let planted_end = next;
    let filler = take(&mut next, spec.filler_nodes);

    let mut noise = rng(spec.seed, STREAM_NOISE);
    let mut noise_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    while noise_set.len() < spec.noise_edges {
        let a = filler[noise.gen_range(0..filler.len())];
        let b = filler[noise.gen_range(0..filler.len())];
        if a != b {
            noise_set.insert((a.min(b), a.max(b)));
        }
    }
    edges.extend(noise_set);

    let mut sales = rng(spec.seed, STREAM_SALES);
    let nodes: Vec<NodeInfo> = (0..n)
        .map(|slot| NodeInfo::new(id(slot), sales.gen_range(1..=50)))
        .collect();
    let graph = ProductGraph::from_parts(nodes, edges.iter().map(|&(a, b)| (id(a), id(b))))?;

    let idx = |slot: usize| graph.index_of(&id(slot)).unwrap();
    let truth = shapes
        .iter()
        .map(|(kind, slots, chords)| {
            let members: Vec<NodeIdx> = slots.iter().map(|&s| idx(s)).collect();
            match kind {
                crate::tiles::TileKind::Star => {
                    Tile::star(&graph, members[0], &members[1..], chords.unwrap())
                }
                crate::tiles::TileKind::Community => {
                    Tile::community(&graph, &members, DEFAULT_CPM_K)
                }
                crate::tiles::TileKind::Linear => Tile::linear(&graph, &members, &[]),
            }
        })
        .collect();
    let planted_nodes = (0..planted_end).map(id).collect();
    Ok(PlantedGraph {
        graph,
        truth: finalize(truth),
        planted_nodes,
    })
}

fn sale(
    customer: &str,
    product: &str,
    day: i64,
    hour: u32,
    register: u32,
    quantity: u64,
) -> SaleEvent {
    SaleEvent {
        customer_id: customer.to_string(),
        product_id: product.to_string(),
        timestamp: (epoch() + Duration::days(day))
            .and_hms_opt(hour, 0, 0)
            .unwrap(),
        register_id: format!("r{register}"),
        store_id: format!("s{}", register / 8),
        quantity,
    }
}

/// Each planted `(a, b, repetitions)` becomes that many purchase episodes,
/// each one customer buying `a` and then `b` within `window_days`. A
/// customer's episodes are spaced more than `window_days` apart, so counting
/// co-purchases on the result gives exactly the planted counts (summed over
/// repeated pairs).
pub fn generate_transactions(
    n_customers: usize,
    planted_pairs: &[(String, String, u32)],
    window_days: u32,
    seed: u64,
) -> Result<SaleLog> {
    if window_days == 0 {
        return Err(Error::param("window_days", "must be at least 1"));
    }
    for (a, b, reps) in planted_pairs {
        if *reps == 0 {
            return Err(Error::param(
                "planted_pairs",
                format!("({a}, {b}) has zero repetitions"),
            ));
        }
        if a == b {
            return Err(Error::param(
                "planted_pairs",
                format!("({a}, {b}) is a self pair"),
            ));
        }
    }
    if n_customers == 0 {
        return Ok(SaleLog::default());
    }
    let mut r = rng(seed, STREAM_VISITS);
    let mut episodes: Vec<(usize, &str, &str)> = Vec::new();
    for (a, b, reps) in planted_pairs {
        for _ in 0..*reps {
            episodes.push((r.gen_range(0..n_customers), a.as_str(), b.as_str()));
        }
    }
    episodes.sort_by_key(|e| e.0);
    let window = i64::from(window_days);
    let mut events = Vec::with_capacity(episodes.len() * 2);
    for group in episodes.chunk_by(|x, y| x.0 == y.0) {
        let customer = format!("c{:06}", group[0].0);
        let mut day: i64 = r.gen_range(0..=window);
        for &(_, a, b) in group {
            let gap = r.gen_range(0..=window);
            let register = r.gen_range(0..32);
            let hour = r.gen_range(8..20);
            events.push(sale(&customer, a, day, hour, register, r.gen_range(1..=3)));
            events.push(sale(
                &customer,
                b,
                day + gap,
                hour,
                register,
                r.gen_range(1..=3),
            ));
            day += gap + window + 1 + r.gen_range(0..3);
        }
    }
    Ok(SaleLog::from_events(events))
}

/// Material catalog records for the given ids with a random three-level
/// hierarchy.
pub fn catalog_for(ids: impl IntoIterator<Item = String>, seed: u64) -> Vec<ProductRecord> {
    let mut r = rng(seed, STREAM_CATALOG);
    ids.into_iter()
        .map(|id| {
            let sub = r.gen_range(0..40);
            ProductRecord {
                description: format!("item {id}"),
                product_id: id,
                subcategory_id: format!("sub{sub:03}"),
                class_id: format!("cls{:02}", sub / 4),
                group_id: format!("grp{}", sub / 16),
                kind: ProductKind::Material,
            }
        })
        .collect()
}

/// A retail-like log: themed product groups shaped as cliques, stars and
/// chains, a few very popular staples, and a long tail of random items.
#[derive(Debug, Clone, PartialEq)]
pub struct RetailSpec {
    pub products: usize,
    /// Expected number of customers; more are added if needed to reach
    /// `events`.
    pub customers: usize,
    /// Exact number of sale events generated.
    pub events: usize,
    pub days: u32,
    pub seed: u64,
}

impl RetailSpec {
    pub fn new(products: usize, events: usize, seed: u64) -> Self {
        RetailSpec {
            products,
            customers: (events / 100).max(1),
            events,
            days: 730,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetailData {
    pub products: Vec<ProductRecord>,
    pub log: SaleLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Theme {
    Clique,
    Star,
    Chain,
}

pub fn generate_retail(spec: &RetailSpec) -> Result<RetailData> {
    if spec.products < 100 {
        return Err(Error::param("products", "need at least 100 products"));
    }
    if spec.customers == 0 || spec.days == 0 {
        return Err(Error::param("customers", "need customers and days"));
    }
    let mut r = rng(spec.seed, STREAM_LAYOUT);
    let width = spec.products.to_string().len();
    let ids: Vec<String> = (0..spec.products)
        .map(|i| format!("P{i:0width$}"))
        .collect();

    // 1% non-material and mixed items, never sold
    let service = (spec.products / 100).max(1);
    let staples = (spec.products / 50).max(1);
    let material = spec.products - service;
    let themed_end = staples + material * 6 / 10;

    let mut themes: Vec<(Theme, Vec<usize>)> = Vec::new();
    let mut next = staples;
    while next < themed_end {
        let kind = [Theme::Clique, Theme::Star, Theme::Chain][r.gen_range(0..3)];
        let size = match kind {
            Theme::Clique => r.gen_range(5..=9),
            Theme::Star => r.gen_range(6..=9),
            Theme::Chain => r.gen_range(6..=12),
        };
        let end = (next + size).min(themed_end);
        themes.push((kind, (next..end).collect()));
        next = end;
    }
    let tail: Vec<usize> = (themed_end..material).collect();
    let staple_pick = WeightedIndex::new((0..staples).map(|i| 1.0 / (i as f64 + 1.0))).unwrap();

    let mut catalog_rng = rng(spec.seed, STREAM_CATALOG);
    let n_sub = (spec.products / 6).max(8);
    let n_class = n_sub.div_ceil(8);
    let sub_pick =
        WeightedIndex::new((0..n_sub).map(|i| 1.0 / (i as f64 + 1.0).powf(0.8))).unwrap();
    let products: Vec<ProductRecord> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let sub = sub_pick.sample(&mut catalog_rng);
            let kind = match i {
                i if i < material => ProductKind::Material,
                i if i % 5 == 0 => ProductKind::Mixed,
                _ => ProductKind::NonMaterial,
            };
            ProductRecord {
                product_id: id.clone(),
                description: format!("product {i}"),
                subcategory_id: format!("S{sub:05}"),
                class_id: format!("C{:04}", sub / 8),
                group_id: format!("G{:02}", (sub / 8) * 15 / n_class),
                kind,
            }
        })
        .collect();

    let mut visits = rng(spec.seed, STREAM_VISITS);
    let quota = spec.events.div_ceil(spec.customers);
    let mut events: Vec<SaleEvent> = Vec::with_capacity(spec.events);
    let mut basket: Vec<usize> = Vec::new();
    if spec.events == 0 {
        return Ok(RetailData {
            products,
            log: SaleLog::default(),
        });
    }
    // customers whose visits run past `days` before reaching the quota
    // leave a shortfall, which extra customers beyond `spec.customers` fill
    'customers: for c in 0.. {
        let customer = format!("c{c:07}");
        let favorites: Vec<usize> = (0..visits.gen_range(2..=4))
            .map(|_| visits.gen_range(0..themes.len()))
            .collect();
        let register_base = visits.gen_range(0..64u32);
        let mut day = i64::from(visits.gen_range(0..30u32));
        let mut bought = 0;
        while bought < quota && day < i64::from(spec.days) {
            basket.clear();
            let theme = if visits.gen_bool(0.8) {
                favorites[visits.gen_range(0..favorites.len())]
            } else {
                visits.gen_range(0..themes.len())
            };
            let (kind, members) = &themes[theme];
            match kind {
                Theme::Clique => {
                    let k = visits.gen_range(2..=4).min(members.len());
                    basket.extend(members.choose_multiple(&mut visits, k).copied());
                }
                Theme::Star if members.len() > 1 => {
                    basket.push(members[0]);
                    basket.push(members[visits.gen_range(1..members.len())]);
                }
                Theme::Chain if members.len() > 1 => {
                    let i = visits.gen_range(0..members.len() - 1);
                    basket.extend([members[i], members[i + 1]]);
                }
                _ => basket.push(members[0]),
            }
            if visits.gen_bool(0.35) {
                basket.push(staple_pick.sample(&mut visits));
            }
            if !tail.is_empty() && visits.gen_bool(0.3) {
                basket.push(tail[visits.gen_range(0..tail.len())]);
            }
            basket.sort_unstable();
            basket.dedup();
            let hour = visits.gen_range(8..21);
            let register = register_base + visits.gen_range(0..4);
            for &p in &basket {
                events.push(sale(
                    &customer,
                    &ids[p],
                    day,
                    hour,
                    register,
                    visits.gen_range(1..=4),
                ));
                bought += 1;
                if events.len() == spec.events {
                    break 'customers;
                }
            }
            // weekly rhythm, 2-4 weeks give or take a day, with occasional
            // short hops and long breaks
            day += match visits.gen_range(0..10) {
                0 => visits.gen_range(1..=6),
                1 => visits.gen_range(8..=60),
                _ => 7 * visits.gen_range(2..=4) + visits.gen_range(-1..=1),
            };
        }
    }
    Ok(RetailData {
        products,
        log: SaleLog::from_events(events),
    })
}
