//! Togetherness counts for unordered product pairs.
//!
//! Two sale events of the same customer are "together" when their calendar
//! dates are at most `window_days` apart. The window is pairwise: days 0 and
//! 7 co-occur, days 0 and 14 do not, even with a purchase on day 7 between
//! them.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{SaleEvent, SaleLog};

pub const DEFAULT_WINDOW_DAYS: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOptions {
    pub window_days: u32,
    /// Count each pair at most once per customer instead of once per
    /// qualifying event pair.
    pub dedup_per_customer: bool,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            window_days: DEFAULT_WINDOW_DAYS,
            dedup_per_customer: false,
        }
    }
}

/// Index pair into [`CoOccurrenceCounts::products`], `a < b`, and its count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairCount {
    pub a: u32,
    pub b: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoOccurrenceCounts {
    products: Vec<String>,
    pairs: Vec<PairCount>,
    pub window_days: u32,
}

impl CoOccurrenceCounts {
    /// Builds counts from `(product, product, count)` triples. Pairs are
    /// canonicalized; repeated pairs are summed and zero counts dropped.
    pub fn from_triples<S: AsRef<str>>(
        triples: impl IntoIterator<Item = (S, S, u32)>,
        window_days: u32,
    ) -> Result<Self> {
        let triples: Vec<(S, S, u32)> = triples.into_iter().collect();
        let mut products: Vec<String> = triples
            .iter()
            .flat_map(|(a, b, _)| [a.as_ref().to_string(), b.as_ref().to_string()])
            .collect();
        products.sort_unstable();
        products.dedup();
        let index = |id: &str| products.binary_search_by(|p| p.as_str().cmp(id)).unwrap() as u32;
        let mut acc: HashMap<(u32, u32), u32> = HashMap::new();
        for (a, b, count) in &triples {
            let (a, b) = (index(a.as_ref()), index(b.as_ref()));
            if a == b {
                return Err(Error::param(
                    "pairs",
                    format!("self pair for product {:?}", products[a as usize]),
                ));
            }
            *acc.entry((a.min(b), a.max(b))).or_default() += count;
        }
        Ok(Self::from_map(products, acc, window_days))
    }

    fn from_map(products: Vec<String>, acc: HashMap<(u32, u32), u32>, window_days: u32) -> Self {
        let mut pairs: Vec<PairCount> = acc
            .into_iter()
            .filter(|&(_, count)| count > 0)
            .map(|((a, b), count)| PairCount { a, b, count })
            .collect();
        pairs.sort_unstable();
        CoOccurrenceCounts {
            products,
            pairs,
            window_days,
        }
    }

    /// Product ids referenced by `pairs`, sorted.
    pub fn products(&self) -> &[String] {
        &self.products
    }

    /// Pairs sorted lexicographically by (first id, second id).
    pub fn pairs(&self) -> &[PairCount] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> + '_ {
        self.pairs.iter().map(|p| {
            (
                self.products[p.a as usize].as_str(),
                self.products[p.b as usize].as_str(),
                p.count,
            )
        })
    }

    pub fn get(&self, x: &str, y: &str) -> u32 {
        let find = |id: &str| self.products.binary_search_by(|p| p.as_str().cmp(id)).ok();
        let (Some(a), Some(b)) = (find(x), find(y)) else {
            return 0;
        };
        let (a, b) = (a.min(b) as u32, a.max(b) as u32);
        self.pairs
            .binary_search_by(|p| (p.a, p.b).cmp(&(a, b)))
            .map_or(0, |i| self.pairs[i].count)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (a, b, count) in self.iter() {
            writeln!(w, "{a}\t{b}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: impl AsRef<Path>, window_days: u32) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut triples = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: &str| Error::MalformedRow {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(a), Some(b), Some(c), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(malformed("expected three tab-separated fields"));
            };
            let count: u32 = c.parse().map_err(|_| malformed("bad count"))?;
            if a == b {
                return Err(malformed("self pair"));
            }
            triples.push((a.to_string(), b.to_string(), count));
        }
        Self::from_triples(triples, window_days)
    }
}

/// Event-pair counting with the default (non-deduplicating) mode.
pub fn count_copurchases(log: &SaleLog, window_days: u32) -> Result<CoOccurrenceCounts> {
    count_copurchases_with(
        log,
        CountOptions {
            window_days,
            dedup_per_customer: false,
        },
    )
}

/// For each customer and each unordered pair of their sale events with
/// distinct products and dates at most `window_days` apart, adds one to the
/// pair's count. Quantities are ignored.
pub fn count_copurchases_with(log: &SaleLog, opts: CountOptions) -> Result<CoOccurrenceCounts> {
    if opts.window_days == 0 {
        return Err(Error::param("window_days", "must be at least 1"));
    }
    if let Some(index) = log.first_unsorted() {
        return Err(Error::UnsortedLog { index });
    }

    let mut products: Vec<&str> = log.events.iter().map(|e| e.product_id.as_str()).collect();
    products.sort_unstable();
    products.dedup();
    let lookup: HashMap<&str, u32> = products
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i as u32))
        .collect();

    let customers: Vec<&[SaleEvent]> = log.by_customer().collect();
    let window = i64::from(opts.window_days);
    let acc = customers
        .par_chunks(256)
        .map(|chunk| {
            let mut acc: HashMap<(u32, u32), u32> = HashMap::new();
            let mut buf: Vec<(i64, u32)> = Vec::new();
            let mut seen: HashSet<(u32, u32)> = HashSet::new();
            for events in chunk {
                buf.clear();
                buf.extend(
                    events
                        .iter()
                        .map(|e| (day_number(e), lookup[e.product_id.as_str()])),
                );
                seen.clear();
                for (i, &(day_i, p_i)) in buf.iter().enumerate() {
                    for &(day_j, p_j) in &buf[i + 1..] {
                        if day_j - day_i > window {
                            break;
                        }
                        if p_i == p_j {
                            continue;
                        }
                        let key = (p_i.min(p_j), p_i.max(p_j));
                        if opts.dedup_per_customer && !seen.insert(key) {
                            continue;
                        }
                        *acc.entry(key).or_default() += 1;
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (k, v) in small {
                *big.entry(k).or_default() += v;
            }
            big
        });

    let products = products.into_iter().map(str::to_string).collect();
    Ok(CoOccurrenceCounts::from_map(
        products,
        acc,
        opts.window_days,
    ))
}

fn day_number(e: &SaleEvent) -> i64 {
    use chrono::Datelike;
    i64::from(e.date().num_days_from_ce())
}
