//! End-to-end run: ingest, count, build, prune, tile, cover, measure.
//!
//! Each stage also has a standalone writer here so the command-line
//! subcommands produce the same files as a full run.
//!
//! Files written to the output directory:
//!
//! | file | content |
//! |------|---------|
//! | `ingest.json` | catalog and sales row accounting |
//! | `pairs.tsv` | co-purchase counts, `a\tb\tcount` |
//! | `edges.tsv`, `graph.graphml`, `graph.dot`, `stats.json` | G at the configured threshold |
//! | `staples.json` | removed staples, highest degree first |
//! | `gstar_edges.tsv`, `gstar.graphml`, `gstar.dot`, `gstar_stats.json` | the tiled network (G* without small components) |
//! | `tiles.json`, `coverage.json` | all tiles and the greedy selection |
//! | `hist_*.csv` | `value,count` histograms |
//! | `report.json` | [`PipelineReport`] |

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::BuildConfig;
use crate::cooccur::{count_copurchases_with, CoOccurrenceCounts, CountOptions};
use crate::coverage::{
    greedy_cover, mean_overcoverage, overcoverage, summarize, write_coverage_json,
    CoverageSolution, KindSummary,
};
use crate::error::{Error, Result, StageContext};
use crate::graph::io::{write_dot, write_edges_tsv, write_graphml};
use crate::graph::{
    build_graph, component_stats, prune_staples, remove_small_components, NetworkStats,
    ProductGraph, Staple,
};
use crate::ingest::{load_products, load_sales, CatalogMeta, ProductCatalog, SaleLog, SaleLogMeta};
use crate::metrics::{
    fit_power_law, interpurchase_histogram, rank_correlation, size_entropy, EntropyReport,
    PowerLawFit,
};
use crate::numfmt::{sig6, sig6_opt};
use crate::tiles::{extract_all, write_tiles_json, Tile, TileKind, TileParams};

/// Number of staples listed in the report (the full list is in
/// `staples.json`).
pub const REPORT_STAPLES: usize = 20;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Two-column `value,count` CSV.
pub fn write_histogram<K: std::fmt::Display>(
    hist: &BTreeMap<K, usize>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from("value,count\n");
    for (k, v) in hist {
        body.push_str(&format!("{k},{v}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub catalog: CatalogMeta,
    pub material_products: usize,
    pub sales: SaleLogMeta,
    pub events: usize,
    pub customers: usize,
    pub products_sold: usize,
}

pub fn ingest(products: &Path, sales: &Path) -> Result<(ProductCatalog, SaleLog, IngestSummary)> {
    let catalog = load_products(products)?;
    let log = load_sales(sales, &catalog)?;
    let sold: BTreeSet<&str> = log.events.iter().map(|e| e.product_id.as_str()).collect();
    let summary = IngestSummary {
        catalog: catalog.meta,
        material_products: catalog.len(),
        sales: log.meta,
        events: log.len(),
        customers: log.by_customer().count(),
        products_sold: sold.len(),
    };
    Ok((catalog, log, summary))
}

pub fn write_ingest(
    summary: &IngestSummary,
    log: &SaleLog,
    dir: &Path,
) -> Result<BTreeMap<i64, usize>> {
    write_json(summary, dir.join("ingest.json"))?;
    let hist = interpurchase_histogram(log)?;
    write_histogram(&hist, dir.join("hist_interpurchase.csv"))?;
    Ok(hist)
}

pub fn count_pairs(log: &SaleLog, config: &BuildConfig) -> Result<CoOccurrenceCounts> {
    count_copurchases_with(
        log,
        CountOptions {
            window_days: config.window_days,
            dedup_per_customer: config.dedup_per_customer,
        },
    )
}

/// Which of the two exported networks a file set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFiles {
    Full,
    Tiled,
}

impl GraphFiles {
    fn names(self) -> [&'static str; 4] {
        match self {
            GraphFiles::Full => ["edges.tsv", "graph.graphml", "graph.dot", "stats.json"],
            GraphFiles::Tiled => [
                "gstar_edges.tsv",
                "gstar.graphml",
                "gstar.dot",
                "gstar_stats.json",
            ],
        }
    }

    pub fn graphml(self, dir: &Path) -> PathBuf {
        dir.join(self.names()[1])
    }
}

/// Edge list, GraphML, DOT and stats for one network.
pub fn write_graph_files(
    graph: &ProductGraph,
    files: GraphFiles,
    dir: &Path,
) -> Result<NetworkStats> {
    let [edges, graphml, dot, stats] = files.names();
    write_edges_tsv(graph, dir.join(edges))?;
    write_graphml(graph, dir.join(graphml))?;
    write_dot(graph, dir.join(dot))?;
    let s = component_stats(graph);
    write_json(&s, dir.join(stats))?;
    Ok(s)
}

pub fn write_degree_histograms(graph: &ProductGraph, dir: &Path) -> Result<()> {
    let (degree, sales) = degree_and_sales_histograms(graph);
    write_histogram(&degree, dir.join("hist_degree.csv"))?;
    write_histogram(&sales, dir.join("hist_sales.csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StapleFile {
    pub count: usize,
    pub degree_cutoff: Option<usize>,
    pub staples: Vec<Staple>,
}

#[derive(Debug, Clone)]
pub struct Pruned {
    pub staples: StapleFile,
    /// G* right after staple removal.
    pub pruned_stats: NetworkStats,
    /// G* without small components: the network that gets tiled.
    pub tiled: ProductGraph,
}

pub fn prune(graph: &ProductGraph, config: &BuildConfig) -> Result<Pruned> {
    let pruning = prune_staples(graph, config.staple_percent)?;
    let staples = StapleFile {
        count: pruning.staples.len(),
        degree_cutoff: pruning.degree_cutoff(),
        staples: pruning.staples.clone(),
    };
    let pruned_stats = component_stats(&pruning.graph);
    let tiled = remove_small_components(&pruning.graph, config.min_component)?;
    Ok(Pruned {
        staples,
        pruned_stats,
        tiled,
    })
}

pub fn write_prune(pruned: &Pruned, dir: &Path) -> Result<()> {
    write_json(&pruned.staples, dir.join("staples.json"))?;
    write_graph_files(&pruned.tiled, GraphFiles::Tiled, dir)?;
    Ok(())
}

pub fn tiles(graph: &ProductGraph, config: &BuildConfig) -> Result<Vec<Tile>> {
    extract_all(
        graph,
        TileParams {
            min_tile: config.min_tile,
            cpm_k: config.cpm_k,
        },
    )
}

#[derive(Debug, Clone)]
pub struct Cover {
    pub solution: CoverageSolution,
    pub overcoverage_before: BTreeMap<usize, usize>,
    pub overcoverage_after: BTreeMap<usize, usize>,
}

/// Greedy cover of the tiled network's nodes.
pub fn cover(tiles: &[Tile], graph: &ProductGraph, config: &BuildConfig) -> Result<Cover> {
    let universe: BTreeSet<String> = graph.nodes().iter().map(|n| n.id.clone()).collect();
    let solution = greedy_cover(tiles, &universe, config.min_gain)?;
    let overcoverage_before = overcoverage(tiles, &universe);
    let overcoverage_after = overcoverage(solution.selected_tiles(tiles), &universe);
    Ok(Cover {
        solution,
        overcoverage_before,
        overcoverage_after,
    })
}

pub fn write_cover(cover: &Cover, dir: &Path) -> Result<()> {
    write_coverage_json(&cover.solution, dir.join("coverage.json"))?;
    write_histogram(
        &cover.overcoverage_before,
        dir.join("hist_overcoverage_before.csv"),
    )?;
    write_histogram(
        &cover.overcoverage_after,
        dir.join("hist_overcoverage_after.csv"),
    )
}

fn degree_and_sales_histograms(
    graph: &ProductGraph,
) -> (BTreeMap<usize, usize>, BTreeMap<u64, usize>) {
    let mut degree = BTreeMap::new();
    let mut sales = BTreeMap::new();
    for v in graph.indices() {
        *degree.entry(graph.degree(v)).or_default() += 1;
        *sales.entry(graph.sales_volume(v)).or_default() += 1;
    }
    (degree, sales)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub n: u32,
    #[serde(flatten)]
    pub stats: NetworkStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkSummary {
    /// G at the configured threshold.
    pub full: NetworkStats,
    /// After staple removal.
    pub pruned: NetworkStats,
    /// After small-component removal; the network that gets tiled.
    pub tiled: NetworkStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StapleSummary {
    pub count: usize,
    pub degree_cutoff: Option<usize>,
    pub top: Vec<Staple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TileRow {
    pub count_original: usize,
    pub count_optimized: usize,
    pub node_coverage_original: usize,
    pub node_coverage_optimized: usize,
    #[serde(serialize_with = "sig6")]
    pub mean_size_original: f64,
    #[serde(serialize_with = "sig6")]
    pub mean_size_optimized: f64,
}

/// Before and after the greedy cover, per tile kind. In `total`, counts are
/// sums over kinds, node coverage is the union over kinds, and mean size is
/// over all tiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TileTable {
    pub kinds: BTreeMap<&'static str, TileRow>,
    pub total: TileRow,
    pub uncovered_original: usize,
    pub uncovered_optimized: usize,
}

fn tile_row(before: KindSummary, after: KindSummary) -> TileRow {
    TileRow {
        count_original: before.count,
        count_optimized: after.count,
        node_coverage_original: before.node_coverage,
        node_coverage_optimized: after.node_coverage,
        mean_size_original: before.mean_size,
        mean_size_optimized: after.mean_size,
    }
}

fn union_summary<'t>(tiles: impl IntoIterator<Item = &'t Tile>) -> KindSummary {
    let mut count = 0;
    let mut total = 0;
    let mut union: BTreeSet<&str> = BTreeSet::new();
    for t in tiles {
        count += 1;
        total += t.len();
        union.extend(t.members.iter().map(String::as_str));
    }
    KindSummary {
        count,
        node_coverage: union.len(),
        mean_size: if count > 0 {
            total as f64 / count as f64
        } else {
            0.0
        },
    }
}

pub fn tile_table(tiles: &[Tile], cover: &Cover, universe_size: usize) -> TileTable {
    let selected = cover.solution.selected_tiles(tiles);
    let before = summarize(tiles);
    let after = summarize(selected.iter().copied());
    let kinds = TileKind::ALL
        .iter()
        .map(|k| (k.as_str(), tile_row(before[k], after[k])))
        .collect();
    let all_before = union_summary(tiles);
    let all_after = union_summary(selected.iter().copied());
    TileTable {
        kinds,
        total: tile_row(all_before, all_after),
        uncovered_original: universe_size - all_before.node_coverage.min(universe_size),
        uncovered_optimized: cover.solution.uncovered_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySummary {
    pub group: Option<EntropyReport>,
    pub class: Option<EntropyReport>,
    pub subcategory: Option<EntropyReport>,
    /// Sizes of the selected tiles.
    pub tiles: Option<EntropyReport>,
}

fn level_entropy<'a>(ids: impl Iterator<Item = &'a str>) -> Option<EntropyReport> {
    let mut sizes: BTreeMap<&str, u64> = BTreeMap::new();
    for id in ids {
        *sizes.entry(id).or_default() += 1;
    }
    let sizes: Vec<u64> = sizes.into_values().collect();
    size_entropy(&sizes).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawSummary {
    pub degree: Option<PowerLawFit>,
    pub sales: Option<PowerLawFit>,
    /// Spearman correlation of degree and sales volume over G's nodes.
    #[serde(serialize_with = "sig6_opt")]
    pub degree_sales_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub selected: usize,
    pub covered: usize,
    pub uncovered: usize,
    #[serde(serialize_with = "sig6")]
    pub mean_overcoverage_before: f64,
    #[serde(serialize_with = "sig6")]
    pub mean_overcoverage_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub config: BuildConfig,
    pub ingest: IngestSummary,
    pub copurchase_pairs: usize,
    pub network_stats_per_n: Vec<ThresholdRow>,
    pub network: NetworkSummary,
    pub staples: StapleSummary,
    pub tile_table: TileTable,
    pub coverage: CoverageSummary,
    pub entropy: EntropySummary,
    pub powerlaw: PowerLawSummary,
    pub overcoverage_before: BTreeMap<usize, usize>,
    pub overcoverage_after: BTreeMap<usize, usize>,
    pub interpurchase: BTreeMap<i64, usize>,
}

/// Everything a run produces, for callers that want more than the report.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub graph: ProductGraph,
    pub tiled: ProductGraph,
    pub tiles: Vec<Tile>,
    pub solution: CoverageSolution,
}

/// Runs the whole pipeline on `workers` threads (0 = all cores), writing
/// every file to `out_dir` when given. Errors name the failing stage.
pub fn run_pipeline(
    config: &BuildConfig,
    products: &Path,
    sales: &Path,
    out_dir: Option<&Path>,
    workers: usize,
) -> Result<PipelineRun> {
    config.validate().stage("config")?;
    if let Some(dir) = out_dir {
        create_dir(dir).stage("config")?;
    }
    with_workers(workers, || run_stages(config, products, sales, out_dir))
}

/// Runs `f` on a pool of `workers` threads (0 = all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    pool.install(f)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run_stages(
    config: &BuildConfig,
    products: &Path,
    sales: &Path,
    out: Option<&Path>,
) -> Result<PipelineRun> {
    let (catalog, log, ingest_summary) = ingest(products, sales).stage("ingest")?;
    let interpurchase = match out {
        Some(dir) => write_ingest(&ingest_summary, &log, dir),
        None => interpurchase_histogram(&log),
    }
    .stage("ingest")?;

    let counts = count_pairs(&log, config).stage("pairs")?;
    if let Some(dir) = out {
        counts.write_tsv(dir.join("pairs.tsv")).stage("pairs")?;
    }

    let mut per_n = Vec::new();
    let mut graph = None;
    for n in config.thresholds() {
        let g = build_graph(&counts, &catalog, &log, n).stage("graph")?;
        per_n.push(ThresholdRow {
            n,
            stats: component_stats(&g),
        });
        if n == config.threshold_n {
            graph = Some(g);
        }
    }
    let graph = graph.expect("configured threshold is in the sweep");
    per_n.retain(|r| r.n == config.threshold_n || config.n_sweep.contains(&r.n));
    let copurchase_pairs = counts.len();
    drop(counts);
    let full_stats = component_stats(&graph);
    if let Some(dir) = out {
        write_graph_files(&graph, GraphFiles::Full, dir).stage("graph")?;
        write_degree_histograms(&graph, dir).stage("graph")?;
    }

    let pruned = prune(&graph, config).stage("prune")?;
    if let Some(dir) = out {
        write_prune(&pruned, dir).stage("prune")?;
    }

    let tiles = tiles(&pruned.tiled, config).stage("tiles")?;
    if let Some(dir) = out {
        write_tiles_json(&tiles, dir.join("tiles.json")).stage("tiles")?;
    }

    let cover = cover(&tiles, &pruned.tiled, config).stage("cover")?;
    if let Some(dir) = out {
        write_cover(&cover, dir).stage("cover")?;
    }

    let mut report = assemble(
        config,
        ingest_summary,
        &catalog,
        per_n,
        &graph,
        full_stats,
        &pruned,
        &tiles,
        &cover,
        interpurchase,
    );
    report.copurchase_pairs = copurchase_pairs;
    if let Some(dir) = out {
        write_json(&report, dir.join("report.json")).stage("report")?;
    }
    Ok(PipelineRun {
        report,
        graph,
        tiled: pruned.tiled,
        tiles,
        solution: cover.solution,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: &BuildConfig,
    ingest: IngestSummary,
    catalog: &ProductCatalog,
    network_stats_per_n: Vec<ThresholdRow>,
    graph: &ProductGraph,
    full: NetworkStats,
    pruned: &Pruned,
    tiles: &[Tile],
    cover: &Cover,
    interpurchase: BTreeMap<i64, usize>,
) -> PipelineReport {
    let products = catalog.products();
    let selected = cover.solution.selected_tiles(tiles);
    let tile_sizes: Vec<u64> = selected.iter().map(|t| t.len() as u64).collect();
    let entropy = EntropySummary {
        group: level_entropy(products.iter().map(|p| p.group_id.as_str())),
        class: level_entropy(products.iter().map(|p| p.class_id.as_str())),
        subcategory: level_entropy(products.iter().map(|p| p.subcategory_id.as_str())),
        tiles: size_entropy(&tile_sizes).ok(),
    };

    let (degree_hist, sales_hist) = degree_and_sales_histograms(graph);
    let degrees: Vec<f64> = graph.indices().map(|v| graph.degree(v) as f64).collect();
    let sales: Vec<f64> = graph
        .indices()
        .map(|v| graph.sales_volume(v) as f64)
        .collect();
    let powerlaw = PowerLawSummary {
        degree: fit_power_law(degree_hist.iter().map(|(&d, &c)| (d as f64, c as f64))).ok(),
        sales: fit_power_law(sales_hist.iter().map(|(&s, &c)| (s as f64, c as f64))).ok(),
        degree_sales_rho: rank_correlation(&degrees, &sales).ok(),
    };

    let universe = pruned.tiled.node_count();
    PipelineReport {
        config: config.clone(),
        ingest,
        copurchase_pairs: 0,
        network_stats_per_n,
        network: NetworkSummary {
            full,
            pruned: pruned.pruned_stats,
            tiled: component_stats(&pruned.tiled),
        },
        staples: StapleSummary {
            count: pruned.staples.count,
            degree_cutoff: pruned.staples.degree_cutoff,
            top: pruned
                .staples
                .staples
                .iter()
                .take(REPORT_STAPLES)
                .cloned()
                .collect(),
        },
        tile_table: tile_table(tiles, cover, universe),
        coverage: CoverageSummary {
            selected: cover.solution.selected.len(),
            covered: cover.solution.covered.len(),
            uncovered: cover.solution.uncovered_count,
            mean_overcoverage_before: mean_overcoverage(&cover.overcoverage_before),
            mean_overcoverage_after: mean_overcoverage(&cover.overcoverage_after),
        },
        entropy,
        powerlaw,
        overcoverage_before: cover.overcoverage_before.clone(),
        overcoverage_after: cover.overcoverage_after.clone(),
        interpurchase,
    }
}
