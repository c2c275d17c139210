//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.
//!
//! Every check compares the library against an independent route (brute
//! force, exhaustive search, closed form or a second run) rather than
//! against its own output.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use minicat_core::config::BuildConfig;
use minicat_core::cooccur::{count_copurchases, count_copurchases_with, CountOptions};
use minicat_core::coverage::greedy_cover;
use minicat_core::graph::{build_graph, component_stats, NodeIdx, NodeInfo, ProductGraph};
use minicat_core::ingest::{
    write_products_csv, write_sales_csv, ProductCatalog, SaleEvent, SaleLog,
};
use minicat_core::metrics::{fit_power_law, size_entropy};
use minicat_core::pipeline::run_pipeline;
use minicat_core::synth::{
    generate_planted_graph, generate_retail, PlantSpec, RetailSpec, StarSpec,
};
use minicat_core::tiles::{clique_percolation, extract_all, Tile, TileKind, TileParams};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> ProductGraph {
    let nodes: Vec<NodeInfo> = (0..n)
        .map(|i| NodeInfo::new(format!("v{i:02}"), 1))
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((format!("v{a:02}"), format!("v{b:02}")));
            }
        }
    }
    ProductGraph::from_parts(nodes, edges).unwrap()
}

fn entropy_anchors() -> Outcome {
    let mut shown = Vec::new();
    let mut misses = Vec::new();
    for (n, expected) in [
        (15usize, "3.91"),
        (235, "7.88"),
        (1778, "10.79"),
        (818, "9.68"),
    ] {
        let r = size_entropy(&vec![1; n]).map_err(|e| e.to_string())?;
        let h0 = format!("{:.2}", r.uniform);
        ensure(r.observed == r.uniform, || {
            format!("n={n}: H1 {} != H0", r.observed)
        })?;
        if h0 == expected {
            shown.push(format!("{n}->{h0}"));
        } else {
            misses.push(format!(
                "n={n}: H0 = log2({n}) = {:.5} rounds to {h0}, anchor is {expected}",
                r.uniform
            ));
        }
    }
    if misses.is_empty() {
        Ok(shown.join(" "))
    } else {
        Err(format!(
            "{} (matched {})",
            misses.join("; "),
            shown.join(" ")
        ))
    }
}

/// All k-cliques by subset enumeration, joined when they share k-1 nodes.
fn brute_force_cpm(g: &ProductGraph, k: usize) -> BTreeSet<Vec<NodeIdx>> {
    let n = g.node_count() as u32;
    let mut cliques: Vec<Vec<NodeIdx>> = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let members: Vec<NodeIdx> = (0..n).filter(|v| mask & (1 << v) != 0).collect();
        let complete = members
            .iter()
            .enumerate()
            .all(|(i, &a)| members[i + 1..].iter().all(|&b| g.has_edge(a, b)));
        if complete {
            cliques.push(members);
        }
    }
    let adjacent =
        |a: &[NodeIdx], b: &[NodeIdx]| a.iter().filter(|v| b.contains(v)).count() == k - 1;
    let mut component = vec![usize::MAX; cliques.len()];
    let mut out = BTreeSet::new();
    for start in 0..cliques.len() {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = start;
        let mut members: BTreeSet<NodeIdx> = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            members.extend(&cliques[c]);
            for d in 0..cliques.len() {
                if component[d] == usize::MAX && adjacent(&cliques[c], &cliques[d]) {
                    component[d] = start;
                    queue.push_back(d);
                }
            }
        }
        out.insert(members.into_iter().collect());
    }
    out
}

fn cpm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut communities = 0;
    for case in 0..100 {
        let n = rng.gen_range(4..=12);
        let p = rng.gen_range(0.3..0.85);
        let g = random_graph(&mut rng, n, p);
        for k in [3, 4] {
            let got: BTreeSet<Vec<NodeIdx>> = clique_percolation(&g, k)
                .map_err(|e| e.to_string())?
                .into_iter()
                .collect();
            let want = brute_force_cpm(&g, k);
            ensure(got == want, || {
                format!("case {case}, k={k}: {got:?} != {want:?}")
            })?;
            communities += want.len();
        }
    }
    Ok(format!("200 graph/k pairs, {communities} communities"))
}

fn tile_of(id: u32, members: &BTreeSet<usize>) -> Tile {
    Tile {
        tile_id: id,
        kind: TileKind::Community,
        label: TileKind::Community.label(),
        members: members.iter().map(|m| format!("n{m:02}")).collect(),
        center: None,
        anchors: Vec::new(),
        chord_count: None,
        k: Some(3),
    }
}

fn coverage_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n_nodes = rng.gen_range(5..=25);
        let n_tiles = rng.gen_range(1..=15);
        let sets: Vec<BTreeSet<usize>> = (0..n_tiles)
            .map(|_| {
                let size = rng.gen_range(1..=n_nodes.min(10));
                (0..size).map(|_| rng.gen_range(0..n_nodes)).collect()
            })
            .collect();
        let tiles: Vec<Tile> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| tile_of(i as u32, s))
            .collect();
        let universe: BTreeSet<String> = (0..n_nodes).map(|m| format!("n{m:02}")).collect();
        let solution = greedy_cover(&tiles, &universe, 1).map_err(|e| e.to_string())?;

        let union: BTreeSet<String> = tiles
            .iter()
            .flat_map(|t| t.members.iter().cloned())
            .collect();
        ensure(solution.covered == union, || {
            format!("case {case}: covered set is not the union")
        })?;

        let full: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        let optimum = (0u32..(1 << n_tiles))
            .filter(|mask| {
                let covered: BTreeSet<usize> = (0..n_tiles)
                    .filter(|i| mask & (1 << i) != 0)
                    .flat_map(|i| sets[i].iter().copied())
                    .collect();
                covered == full
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap();
        let max_size = sets.iter().map(BTreeSet::len).max().unwrap() as f64;
        let bound = (1.0 + max_size.ln()) * optimum as f64;
        let selected = solution.selected.len();
        ensure(selected as f64 <= bound, || {
            format!("case {case}: {selected} selected, optimum {optimum}, bound {bound:.3}")
        })?;
        worst = worst.max(selected as f64 / optimum as f64);
    }
    Ok(format!(
        "50 instances, worst greedy/optimum ratio {worst:.3}"
    ))
}

fn random_plant(rng: &mut ChaCha8Rng, seed: u64) -> PlantSpec {
    let stars = (0..rng.gen_range(3..=5))
        .map(|_| {
            let leaves = rng.gen_range(4..=10);
            StarSpec {
                leaves,
                chords: rng.gen_range(0..=leaves / 2),
            }
        })
        .collect();
    PlantSpec {
        stars,
        cliques: (0..rng.gen_range(2..=4))
            .map(|_| rng.gen_range(5..=9))
            .collect(),
        paths: (0..rng.gen_range(2..=4))
            .map(|_| rng.gen_range(5..=12))
            .collect(),
        filler_nodes: rng.gen_range(0..=20),
        noise_edges: 0,
        seed,
    }
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

fn planted_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut recovered = 0;
    for case in 0..10 {
        let spec = random_plant(&mut rng, 100 + case);
        let planted = generate_planted_graph(&spec).map_err(|e| e.to_string())?;
        let found =
            extract_all(&planted.graph, TileParams::default()).map_err(|e| e.to_string())?;
        for truth in &planted.truth {
            let best = found
                .iter()
                .filter(|t| t.kind == truth.kind)
                .map(|t| jaccard(&t.members, &truth.members))
                .fold(0.0, f64::max);
            ensure(best == 1.0, || {
                format!(
                    "case {case}: {:?} {:?} best Jaccard {best}",
                    truth.kind, truth.members
                )
            })?;
            recovered += 1;
        }
        for t in &found {
            let touches_planted = t.members.iter().any(|m| planted.planted_nodes.contains(m));
            let matches = planted
                .truth
                .iter()
                .any(|p| p.kind == t.kind && p.members == t.members);
            ensure(!touches_planted || matches, || {
                format!("case {case}: spurious {:?} {:?}", t.kind, t.members)
            })?;
        }
    }
    Ok(format!(
        "10 specs, {recovered} planted tiles recovered exactly"
    ))
}

fn power_law_recovery() -> Outcome {
    let exact: Vec<(f64, f64)> = (1..=100)
        .map(|d| (d as f64, 1000.0 * (d as f64).powf(-1.25)))
        .collect();
    let fit = fit_power_law(exact.iter().copied()).map_err(|e| e.to_string())?;
    ensure((fit.alpha + 1.25).abs() <= 1e-6, || {
        format!("exact alpha {}", fit.alpha)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let noisy = exact
            .iter()
            .map(|&(d, c)| (d, c * (1.0 + rng.gen_range(-0.1..=0.1))));
        let fit = fit_power_law(noisy).map_err(|e| e.to_string())?;
        let err = (fit.alpha + 1.25).abs();
        ensure(err <= 0.1, || {
            format!("trial {trial}: perturbed alpha {}", fit.alpha)
        })?;
        worst = worst.max(err);
    }
    Ok(format!(
        "exact error {:.1e}, worst perturbed error {worst:.4} over 20 trials",
        (fit.alpha + 1.25).abs()
    ))
}

fn threshold_monotonicity() -> Outcome {
    let data = generate_retail(&RetailSpec::new(3_000, 150_000, 6)).map_err(|e| e.to_string())?;
    let catalog = ProductCatalog::from_records(data.products);
    let counts = count_copurchases(&data.log, 7).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for n in [1, 5, 10, 20] {
        let g = build_graph(&counts, &catalog, &data.log, n).map_err(|e| e.to_string())?;
        rows.push((n, component_stats(&g)));
    }
    for w in rows.windows(2) {
        let ((n0, a), (n1, b)) = (&w[0], &w[1]);
        ensure(b.edges <= a.edges, || {
            format!("edges rise from N={n0} to N={n1}")
        })?;
        ensure(b.gcc_size_abs <= a.gcc_size_abs, || {
            format!("GCC grows from N={n0} to N={n1}")
        })?;
        ensure(b.gcc_sales_share <= a.gcc_sales_share, || {
            format!("GCC sales share rises from N={n0} to N={n1}")
        })?;
    }
    let shown: Vec<String> = rows
        .iter()
        .map(|(n, s)| {
            format!(
                "N={n}: {}e/{}gcc/{:.3}",
                s.edges, s.gcc_size_abs, s.gcc_sales_share
            )
        })
        .collect();
    Ok(format!("{} events; {}", data.log.len(), shown.join(", ")))
}

fn random_log(rng: &mut ChaCha8Rng, size: usize) -> SaleLog {
    let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    let events = (0..size)
        .map(|_| SaleEvent {
            customer_id: format!("c{}", rng.gen_range(0..8)),
            product_id: format!("p{}", rng.gen_range(0..15)),
            timestamp: (start + chrono::Duration::days(rng.gen_range(0..40)))
                .and_hms_opt(rng.gen_range(0..24), rng.gen_range(0..60), 0)
                .unwrap(),
            register_id: format!("r{}", rng.gen_range(0..3)),
            store_id: "s0".into(),
            quantity: 1,
        })
        .collect();
    SaleLog::from_events(events)
}

/// Every unordered pair of events, no sorting or windowing tricks.
fn brute_force_counts(log: &SaleLog, window: i64, dedup: bool) -> BTreeMap<(String, String), u32> {
    let mut counts = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let ev = &log.events;
    for i in 0..ev.len() {
        for j in 0..ev.len() {
            let (a, b) = (&ev[i], &ev[j]);
            if i >= j || a.customer_id != b.customer_id || a.product_id == b.product_id {
                continue;
            }
            if (a.date() - b.date()).num_days().abs() > window {
                continue;
            }
            let key = if a.product_id < b.product_id {
                (a.product_id.clone(), b.product_id.clone())
            } else {
                (b.product_id.clone(), a.product_id.clone())
            };
            if dedup && !seen.insert((a.customer_id.clone(), key.clone())) {
                continue;
            }
            *counts.entry(key).or_default() += 1;
        }
    }
    counts
}

fn cooccur_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = 0;
    for case in 0..100 {
        let size = rng.gen_range(0..=200);
        let log = random_log(&mut rng, size);
        for dedup in [false, true] {
            let opts = CountOptions {
                window_days: 7,
                dedup_per_customer: dedup,
            };
            let got: BTreeMap<(String, String), u32> = count_copurchases_with(&log, opts)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|(a, b, c)| ((a.to_string(), b.to_string()), c))
                .collect();
            let want = brute_force_counts(&log, 7, dedup);
            ensure(got == want, || {
                format!("case {case} (dedup {dedup}): counts differ")
            })?;
            pairs += want.len();
        }
    }
    Ok(format!("100 logs, {pairs} pair counts compared"))
}

fn peak_rss_reset() -> bool {
    std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn peak_rss_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib / 1024.0)
}

struct BigRun {
    dir: tempfile::TempDir,
    elapsed: Duration,
    peak_mib: Option<f64>,
    hwm_reset: bool,
}

/// Writes a 10^6-event, 10^4-product synthetic log to disk and times one
/// single-worker pipeline run over it.
fn big_run() -> Result<BigRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    {
        let data =
            generate_retail(&RetailSpec::new(10_000, 1_000_000, 8)).map_err(|e| e.to_string())?;
        ensure(data.log.len() == 1_000_000, || {
            format!("generated {} events", data.log.len())
        })?;
        write_products_csv(dir.path().join("products.csv"), &data.products)
            .map_err(|e| e.to_string())?;
        write_sales_csv(dir.path().join("sales.csv"), &data.log.events)
            .map_err(|e| e.to_string())?;
    }
    let hwm_reset = peak_rss_reset();
    let start = Instant::now();
    run(dir.path(), "w1", 1)?;
    Ok(BigRun {
        elapsed: start.elapsed(),
        peak_mib: peak_rss_mib(),
        hwm_reset,
        dir,
    })
}

fn run(dir: &Path, out: &str, workers: usize) -> Result<Vec<u8>, String> {
    let out = dir.join(out);
    run_pipeline(
        &BuildConfig {
            seed: 8,
            ..BuildConfig::default()
        },
        &dir.join("products.csv"),
        &dir.join("sales.csv"),
        Some(&out),
        workers,
    )
    .map_err(|e| e.to_string())?;
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn determinism(big: &BigRun) -> Outcome {
    let dir = big.dir.path();
    let first = std::fs::read(dir.join("w1/report.json")).map_err(|e| e.to_string())?;
    let again = run(dir, "w1b", 1)?;
    let wide = run(dir, "w8", 8)?;
    ensure(first == again, || "two single-worker runs differ".into())?;
    ensure(first == wide, || {
        "1-worker and 8-worker reports differ".into()
    })?;
    for file in ["tiles.json", "coverage.json", "pairs.tsv", "graph.graphml"] {
        let a = std::fs::read(dir.join("w1").join(file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.join("w8").join(file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between worker counts"))?;
    }
    Ok(format!(
        "report.json identical across 3 runs ({} bytes)",
        first.len()
    ))
}

fn performance(big: &BigRun) -> Outcome {
    let secs = big.elapsed.as_secs_f64();
    ensure(secs < 60.0, || format!("pipeline took {secs:.1}s"))?;
    let peak = big.peak_mib.ok_or("VmHWM unavailable")?;
    ensure(peak < 1024.0, || format!("peak RSS {peak:.0} MiB"))?;
    let scope = if big.hwm_reset { "pipeline" } else { "process" };
    Ok(format!("{secs:.2}s, peak RSS {peak:.0} MiB ({scope})"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
}

fn check(c: &Criterion, f: impl FnOnce() -> Outcome, failures: &mut u32) {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|detail| {
        if elapsed <= c.limit {
            Ok(detail)
        } else {
            Err(format!("{detail}; over the {:?} budget", c.limit))
        }
    });
    let (tag, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => {
            *failures += 1;
            ("FAIL", d)
        }
    };
    println!(
        "{tag} [{}] {} ({:.2}s): {detail}",
        c.id,
        c.name,
        elapsed.as_secs_f64()
    );
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut failures = 0;
    let criteria: Vec<(Criterion, fn() -> Outcome)> = vec![
        (
            Criterion {
                id: 1,
                name: "entropy anchors",
                limit: secs(1),
            },
            entropy_anchors,
        ),
        (
            Criterion {
                id: 2,
                name: "clique percolation vs brute force",
                limit: secs(60),
            },
            cpm_oracle,
        ),
        (
            Criterion {
                id: 3,
                name: "greedy cover union and ln bound",
                limit: secs(60),
            },
            coverage_bound,
        ),
        (
            Criterion {
                id: 4,
                name: "planted tile recovery",
                limit: secs(30),
            },
            planted_recovery,
        ),
        (
            Criterion {
                id: 5,
                name: "power-law exponent recovery",
                limit: secs(1),
            },
            power_law_recovery,
        ),
        (
            Criterion {
                id: 6,
                name: "threshold monotonicity",
                limit: secs(30),
            },
            threshold_monotonicity,
        ),
        (
            Criterion {
                id: 7,
                name: "co-occurrence vs brute force",
                limit: secs(10),
            },
            cooccur_oracle,
        ),
    ];
    for (c, f) in &criteria {
        check(c, f, &mut failures);
    }

    // 8 and 9 share one generated log; 9 times the first run
    let start = Instant::now();
    let big = big_run();
    let setup = start.elapsed();
    let det = Criterion {
        id: 8,
        name: "end-to-end determinism",
        limit: secs(60),
    };
    let perf = Criterion {
        id: 9,
        name: "1e6 events in < 60 s and < 1 GB",
        limit: secs(60) + setup,
    };
    match &big {
        Ok(big) => {
            check(&perf, || performance(big), &mut failures);
            check(&det, || determinism(big), &mut failures);
        }
        Err(e) => {
            for c in [&perf, &det] {
                check(c, || Err(format!("setup failed: {e}")), &mut failures);
            }
        }
    }

    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
