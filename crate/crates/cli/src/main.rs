use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use minicat_core::config::{parse_sweep, BuildConfig};
use minicat_core::cooccur::CoOccurrenceCounts;
use minicat_core::graph::io::read_graphml;
use minicat_core::graph::{build_graph, component_stats};
use minicat_core::ingest::{write_products_csv, write_sales_csv};
use minicat_core::pipeline::{self, GraphFiles};
use minicat_core::synth::{generate_retail, RetailSpec};
use minicat_core::tiles::{read_tiles_json, write_tiles_json};
use minicat_core::StageContext;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "minicat",
    version,
    about = "Co-purchase product networks and their mini-categories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    window_days: Option<u32>,
    /// Comma-separated thresholds for the statistics sweep.
    #[arg(long, value_parser = parse_sweep)]
    n_sweep: Option<Vec<u32>>,
    #[arg(long)]
    staple_percent: Option<f64>,
    #[arg(long)]
    min_component: Option<usize>,
    #[arg(long)]
    min_tile: Option<usize>,
    #[arg(long)]
    cpm_k: Option<usize>,
    #[arg(long)]
    min_gain: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dedup_per_customer: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<BuildConfig> {
        let mut cfg = match &self.config {
            Some(path) => BuildConfig::from_file(path).stage("config")?,
            None => BuildConfig::default(),
        };
        macro_rules! flag {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        flag!(
            threshold => threshold_n,
            window_days => window_days,
            n_sweep => n_sweep,
            staple_percent => staple_percent,
            min_component => min_component,
            min_tile => min_tile,
            cpm_k => cpm_k,
            min_gain => min_gain,
            dedup_per_customer => dedup_per_customer,
            seed => seed
        );
        cfg.validate().stage("config")?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct Inputs {
    #[arg(long)]
    products: PathBuf,
    #[arg(long)]
    sales: PathBuf,
}

#[derive(Args, Clone)]
struct OutDir {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the catalog and sales log; write ingest.json and the
    /// inter-purchase histogram.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Count co-purchases into pairs.tsv.
    Pairs {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Threshold pairs.tsv into the product network G.
    Graph {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print component statistics of a GraphML network as JSON.
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Remove staples and small components; write staples.json and gstar.*.
    Prune {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Extract star, linear and community tiles into tiles.json.
    Tiles {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Greedy tile cover of a network; write coverage.json.
    Cover {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tiles: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the tables of a report.json.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic products.csv and sales.csv.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        n_products: usize,
        #[arg(long, default_value_t = 1_000_000)]
        n_events: usize,
        #[arg(long)]
        n_customers: Option<usize>,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run every stage and write all files plus report.json.
    Pipeline {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn out_dir(out: &OutDir) -> Result<&Path> {
    pipeline::create_dir(&out.out_dir).stage("output")?;
    Ok(&out.out_dir)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { inputs, out, cfg } => {
            cfg.resolve()?;
            let dir = out_dir(&out)?;
            pipeline::with_workers(cfg.workers, || {
                let (_, log, summary) = pipeline::ingest(&inputs.products, &inputs.sales)?;
                pipeline::write_ingest(&summary, &log, dir)?;
                Ok(())
            })
            .stage("ingest")?;
        }
        Command::Pairs { inputs, out, cfg } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let (_, log, _) = pipeline::ingest(&inputs.products, &inputs.sales).stage("ingest")?;
            pipeline::with_workers(cfg.workers, || {
                pipeline::count_pairs(&log, &config)?.write_tsv(dir.join("pairs.tsv"))
            })
            .stage("pairs")?;
        }
        Command::Graph {
            inputs,
            pairs,
            out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let (catalog, log, _) =
                pipeline::ingest(&inputs.products, &inputs.sales).stage("ingest")?;
            let counts = CoOccurrenceCounts::read_tsv(&pairs, config.window_days).stage("pairs")?;
            let graph = build_graph(&counts, &catalog, &log, config.threshold_n).stage("graph")?;
            pipeline::write_graph_files(&graph, GraphFiles::Full, dir).stage("graph")?;
            pipeline::write_degree_histograms(&graph, dir).stage("graph")?;
        }
        Command::Stats { graph } => {
            let g = read_graphml(&graph).stage("stats")?;
            println!("{}", serde_json::to_string_pretty(&component_stats(&g))?);
        }
        Command::Prune { graph, out, cfg } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let g = read_graphml(&graph).stage("prune")?;
            let pruned = pipeline::prune(&g, &config).stage("prune")?;
            pipeline::write_prune(&pruned, dir).stage("prune")?;
        }
        Command::Tiles { graph, out, cfg } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let g = read_graphml(&graph).stage("tiles")?;
            let tiles = pipeline::with_workers(cfg.workers, || pipeline::tiles(&g, &config))
                .stage("tiles")?;
            write_tiles_json(&tiles, dir.join("tiles.json")).stage("tiles")?;
        }
        Command::Cover {
            graph,
            tiles,
            out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let g = read_graphml(&graph).stage("cover")?;
            let tiles = read_tiles_json(&tiles).stage("cover")?;
            let cover = pipeline::cover(&tiles, &g, &config).stage("cover")?;
            pipeline::write_cover(&cover, dir).stage("cover")?;
        }
        Command::Report { report } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("report stage: {}", report.display()))?;
            let value: Value = serde_json::from_str(&text).context("report stage: report.json")?;
            print_report(&value);
        }
        Command::Synth {
            n_products,
            n_events,
            n_customers,
            out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let dir = out_dir(&out)?;
            let mut spec = RetailSpec::new(n_products, n_events, config.seed);
            if let Some(c) = n_customers {
                spec.customers = c;
            }
            let data = generate_retail(&spec).stage("synth")?;
            write_products_csv(dir.join("products.csv"), &data.products).stage("synth")?;
            write_sales_csv(dir.join("sales.csv"), &data.log.events).stage("synth")?;
        }
        Command::Pipeline { inputs, out, cfg } => {
            let config = cfg.resolve()?;
            pipeline::run_pipeline(
                &config,
                &inputs.products,
                &inputs.sales,
                Some(&out.out_dir),
                cfg.workers,
            )?;
        }
    }
    Ok(())
}

fn field(v: &Value, key: &str) -> String {
    match &v[key] {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn print_table(title: &str, header: &[&str], rows: &[Vec<String>]) {
    println!("{title}");
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        println!("  {}", padded.join("  "));
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    println!();
}

fn print_report(report: &Value) {
    const STATS: [&str; 8] = [
        "edges",
        "nodes",
        "isolated_nodes",
        "isolated_pairs",
        "components",
        "gcc_size_abs",
        "gcc_size_rel",
        "gcc_sales_share",
    ];
    let mut header = vec!["N"];
    header.extend(STATS);
    let rows: Vec<Vec<String>> = report["network_stats_per_n"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| {
            std::iter::once(field(r, "n"))
                .chain(STATS.iter().map(|k| field(r, k)))
                .collect()
        })
        .collect();
    print_table("Network statistics", &header, &rows);

    let staples: Vec<Vec<String>> = report["staples"]["top"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|s| {
            ["product_id", "description", "degree", "sales_volume"]
                .iter()
                .map(|k| field(s, k))
                .collect()
        })
        .collect();
    print_table(
        &format!(
            "Staples ({} removed, degree >= {})",
            field(&report["staples"], "count"),
            field(&report["staples"], "degree_cutoff")
        ),
        &["product", "description", "degree", "sales"],
        &staples,
    );

    const TILE: [&str; 6] = [
        "count_original",
        "count_optimized",
        "node_coverage_original",
        "node_coverage_optimized",
        "mean_size_original",
        "mean_size_optimized",
    ];
    let table = &report["tile_table"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    if let Some(kinds) = table["kinds"].as_object() {
        for (kind, row) in kinds {
            rows.push(
                std::iter::once(kind.clone())
                    .chain(TILE.iter().map(|k| field(row, k)))
                    .collect(),
            );
        }
    }
    rows.push(
        std::iter::once("total".to_string())
            .chain(TILE.iter().map(|k| field(&table["total"], k)))
            .collect(),
    );
    print_table(
        &format!(
            "Tiles (uncovered {} before, {} after)",
            field(table, "uncovered_original"),
            field(table, "uncovered_optimized")
        ),
        &[
            "kind",
            "count",
            "count*",
            "coverage",
            "coverage*",
            "mean",
            "mean*",
        ],
        &rows,
    );

    let entropy = &report["entropy"];
    let rows: Vec<Vec<String>> = ["group", "class", "subcategory", "tiles"]
        .iter()
        .map(|level| {
            let e = &entropy[*level];
            vec![
                level.to_string(),
                field(e, "members"),
                field(e, "h1"),
                field(e, "h0"),
            ]
        })
        .collect();
    print_table("Entropy (bits)", &["level", "members", "H1", "H0"], &rows);

    let pl = &report["powerlaw"];
    let rows: Vec<Vec<String>> = ["degree", "sales"]
        .iter()
        .map(|k| {
            let f = &pl[*k];
            vec![
                k.to_string(),
                field(f, "alpha"),
                field(f, "r_squared"),
                field(f, "bins"),
            ]
        })
        .collect();
    print_table(
        &format!(
            "Power-law fits (degree/sales rho = {})",
            field(pl, "degree_sales_rho")
        ),
        &["distribution", "alpha", "r^2", "bins"],
        &rows,
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("minicat: {e:#}");
            ExitCode::FAILURE
        }
    }
}
