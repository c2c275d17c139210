//! Loading the product catalog and the sales log.
//!
//! Both inputs are RFC 4180 CSV files with a header line. Columns are
//! located by name, so extra columns (prices, discounts) are accepted and
//! ignored. Only material items enter the catalog; sales of anything else,
//! and all return rows, are dropped and counted.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRODUCT_COLUMNS: [&str; 6] = [
    "product_id",
    "description",
    "subcategory_id",
    "class_id",
    "group_id",
    "kind",
];

pub const SALE_COLUMNS: [&str; 7] = [
    "customer_id",
    "product_id",
    "timestamp",
    "register_id",
    "store_id",
    "quantity",
    "kind",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    Material,
    NonMaterial,
    Mixed,
}

impl ProductKind {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "material" => Some(ProductKind::Material),
            "non_material" => Some(ProductKind::NonMaterial),
            "mixed" => Some(ProductKind::Mixed),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::Material => "material",
            ProductKind::NonMaterial => "non_material",
            ProductKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub product_id: String,
    pub description: String,
    pub subcategory_id: String,
    pub class_id: String,
    pub group_id: String,
    pub kind: ProductKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogMeta {
    pub rows: usize,
    pub excluded_non_material: usize,
    pub excluded_mixed: usize,
}

impl CatalogMeta {
    pub fn excluded(&self) -> usize {
        self.excluded_non_material + self.excluded_mixed
    }
}

/// Material products, sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProductCatalog {
    products: Vec<ProductRecord>,
    excluded_ids: HashSet<String>,
    pub meta: CatalogMeta,
}

impl ProductCatalog {
    /// Builds a catalog from records, keeping only material items.
    /// Panics on duplicate ids; use [`load_products`] for untrusted input.
    pub fn from_records(records: impl IntoIterator<Item = ProductRecord>) -> Self {
        let mut catalog = ProductCatalog::default();
        for record in records {
            catalog.meta.rows += 1;
            catalog.push(record);
        }
        catalog.finish();
        catalog
    }

    fn push(&mut self, record: ProductRecord) {
        match record.kind {
            ProductKind::Material => self.products.push(record),
            ProductKind::NonMaterial => {
                self.meta.excluded_non_material += 1;
                self.excluded_ids.insert(record.product_id);
            }
            ProductKind::Mixed => {
                self.meta.excluded_mixed += 1;
                self.excluded_ids.insert(record.product_id);
            }
        }
    }

    fn finish(&mut self) {
        self.products
            .sort_unstable_by(|a, b| a.product_id.cmp(&b.product_id));
        assert!(
            self.products
                .windows(2)
                .all(|w| w[0].product_id != w[1].product_id),
            "duplicate product id in catalog"
        );
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn products(&self) -> &[ProductRecord] {
        &self.products
    }

    pub fn get(&self, product_id: &str) -> Option<&ProductRecord> {
        self.products
            .binary_search_by(|p| p.product_id.as_str().cmp(product_id))
            .ok()
            .map(|i| &self.products[i])
    }

    pub fn contains(&self, product_id: &str) -> bool {
        self.get(product_id).is_some()
    }

    /// True for ids that were in the file but excluded as non-material.
    pub fn is_excluded(&self, product_id: &str) -> bool {
        self.excluded_ids.contains(product_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaleKind {
    Sale,
    Return,
}

/// One sale after deduplication.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SaleEvent {
    pub customer_id: String,
    pub product_id: String,
    pub timestamp: NaiveDateTime,
    pub register_id: String,
    pub store_id: String,
    pub quantity: u64,
}

impl SaleEvent {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    fn sort_key(&self) -> (&str, NaiveDateTime, &str, &str) {
        (
            &self.customer_id,
            self.timestamp,
            &self.product_id,
            &self.register_id,
        )
    }

    fn same_sale(&self, other: &SaleEvent) -> bool {
        self.customer_id == other.customer_id
            && self.product_id == other.product_id
            && self.register_id == other.register_id
            && self.timestamp == other.timestamp
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaleLogMeta {
    pub rows: usize,
    pub returns_dropped: usize,
    pub unknown_dropped: usize,
    pub non_material_dropped: usize,
    pub duplicates_collapsed: usize,
}

/// Sales sorted by (customer, timestamp, product, register), one event per
/// (customer, product, register, timestamp).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaleLog {
    pub events: Vec<SaleEvent>,
    pub meta: SaleLogMeta,
}

impl SaleLog {
    /// Sorts the events and collapses repeated (customer, product, register,
    /// timestamp) rows into one sale with the summed quantity.
    pub fn from_events(mut events: Vec<SaleEvent>) -> Self {
        let rows = events.len();
        events.sort_unstable_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut collapsed: Vec<SaleEvent> = Vec::with_capacity(events.len());
        for event in events {
            match collapsed.last_mut() {
                Some(last) if last.same_sale(&event) => last.quantity += event.quantity,
                _ => collapsed.push(event),
            }
        }
        let meta = SaleLogMeta {
            rows,
            duplicates_collapsed: rows - collapsed.len(),
            ..SaleLogMeta::default()
        };
        SaleLog {
            events: collapsed,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Index of the first event that breaks (customer, timestamp) order.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.events
            .windows(2)
            .position(|w| {
                (w[0].customer_id.as_str(), w[0].timestamp)
                    > (w[1].customer_id.as_str(), w[1].timestamp)
            })
            .map(|i| i + 1)
    }

    /// Contiguous per-customer slices. Requires the log to be sorted.
    pub fn by_customer(&self) -> impl Iterator<Item = &[SaleEvent]> {
        self.events.chunk_by(|a, b| a.customer_id == b.customer_id)
    }
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS[.f]]` (space also allowed as
/// separator) and RFC 3339 with offset. Offsets are dropped: the local
/// wall-clock time is kept.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.naive_local())
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

struct CsvInput {
    path: std::path::PathBuf,
    reader: csv::Reader<BufReader<File>>,
    columns: Vec<usize>,
}

impl CsvInput {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(BufReader::with_capacity(1 << 20, file));
        let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let idx = header
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MalformedRow {
                    path: path.to_path_buf(),
                    line: 1,
                    reason: format!("header lacks column {name:?}"),
                })?;
            columns.push(idx);
        }
        Ok(CsvInput {
            path: path.to_path_buf(),
            reader,
            columns,
        })
    }

    /// Reads the next record, returning it with its 1-based line number.
    fn next(&mut self, record: &mut csv::StringRecord) -> Result<Option<u64>> {
        match self.reader.read_record(record) {
            Ok(false) => Ok(None),
            Ok(true) => Ok(Some(record.position().map_or(0, |p| p.line()))),
            Err(e) => Err(csv_error(&self.path, e)),
        }
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, col: usize) -> &'r str {
        record.get(self.columns[col]).unwrap_or("")
    }

    fn malformed(&self, line: u64, reason: impl Into<String>) -> Error {
        Error::MalformedRow {
            path: self.path.clone(),
            line,
            reason: reason.into(),
        }
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let reason = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} columns, found {len}"),
        csv::ErrorKind::Io(e) => e.to_string(),
        _ => err.to_string(),
    };
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

/// Loads `products.csv`. Non-material and mixed rows are excluded and
/// counted in the catalog metadata.
pub fn load_products(path: impl AsRef<Path>) -> Result<ProductCatalog> {
    let path = path.as_ref();
    let mut input = CsvInput::open(path, &PRODUCT_COLUMNS)?;
    let mut catalog = ProductCatalog::default();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut record = csv::StringRecord::new();
    while let Some(line) = input.next(&mut record)? {
        let product_id = input.field(&record, 0).trim();
        if product_id.is_empty() {
            return Err(input.malformed(line, "empty product_id"));
        }
        if let Some(&first_line) = seen.get(product_id) {
            return Err(Error::DuplicateProduct {
                path: path.to_path_buf(),
                id: product_id.to_string(),
                first_line,
                second_line: line,
            });
        }
        seen.insert(product_id.to_string(), line);
        let raw_kind = input.field(&record, 5);
        let kind = ProductKind::parse(raw_kind)
            .ok_or_else(|| input.malformed(line, format!("unknown product kind {raw_kind:?}")))?;
        catalog.meta.rows += 1;
        catalog.push(ProductRecord {
            product_id: product_id.to_string(),
            description: input.field(&record, 1).to_string(),
            subcategory_id: input.field(&record, 2).trim().to_string(),
            class_id: input.field(&record, 3).trim().to_string(),
            group_id: input.field(&record, 4).trim().to_string(),
            kind,
        });
    }
    catalog.finish();
    Ok(catalog)
}

/// Loads `sales.csv` against a catalog. Returns are dropped, as are rows for
/// products missing from the catalog; duplicates collapse into one sale.
pub fn load_sales(path: impl AsRef<Path>, catalog: &ProductCatalog) -> Result<SaleLog> {
    let path = path.as_ref();
    let mut input = CsvInput::open(path, &SALE_COLUMNS)?;
    let mut meta = SaleLogMeta::default();
    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    while let Some(line) = input.next(&mut record)? {
        meta.rows += 1;
        let customer_id = input.field(&record, 0).trim();
        let product_id = input.field(&record, 1).trim();
        let raw_time = input.field(&record, 2);
        let timestamp = parse_timestamp(raw_time).ok_or_else(|| Error::BadTimestamp {
            path: path.to_path_buf(),
            line,
            value: raw_time.to_string(),
        })?;
        let kind = match input.field(&record, 6).trim() {
            "sale" => SaleKind::Sale,
            "return" => SaleKind::Return,
            other => return Err(input.malformed(line, format!("unknown sale kind {other:?}"))),
        };
        if kind == SaleKind::Return {
            meta.returns_dropped += 1;
            continue;
        }
        let raw_quantity = input.field(&record, 5).trim();
        let quantity: i64 = raw_quantity
            .parse()
            .map_err(|_| input.malformed(line, format!("bad quantity {raw_quantity:?}")))?;
        if quantity <= 0 {
            return Err(Error::BadQuantity {
                path: path.to_path_buf(),
                line,
                quantity,
            });
        }
        if customer_id.is_empty() || product_id.is_empty() {
            return Err(input.malformed(line, "empty customer_id or product_id"));
        }
        if !catalog.contains(product_id) {
            if catalog.is_excluded(product_id) {
                meta.non_material_dropped += 1;
            } else {
                meta.unknown_dropped += 1;
            }
            continue;
        }
        events.push(SaleEvent {
            customer_id: customer_id.to_string(),
            product_id: product_id.to_string(),
            timestamp,
            register_id: input.field(&record, 3).trim().to_string(),
            store_id: input.field(&record, 4).trim().to_string(),
            quantity: quantity as u64,
        });
    }
    let mut log = SaleLog::from_events(events);
    log.meta = SaleLogMeta {
        duplicates_collapsed: log.meta.duplicates_collapsed,
        ..meta
    };
    Ok(log)
}

pub fn write_products_csv(path: impl AsRef<Path>, products: &[ProductRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(PRODUCT_COLUMNS).map_err(io)?;
    for p in products {
        w.write_record([
            p.product_id.as_str(),
            &p.description,
            &p.subcategory_id,
            &p.class_id,
            &p.group_id,
            p.kind.as_str(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes sale events in `sales.csv` format (all rows of kind `sale`).
pub fn write_sales_csv(path: impl AsRef<Path>, events: &[SaleEvent]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let mut w = csv::Writer::from_writer(&mut out);
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(SALE_COLUMNS).map_err(io)?;
    let mut qty = String::new();
    for e in events {
        qty.clear();
        qty.push_str(&e.quantity.to_string());
        w.write_record([
            e.customer_id.as_str(),
            &e.product_id,
            &format_timestamp(&e.timestamp),
            &e.register_id,
            &e.store_id,
            &qty,
            "sale",
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    const HEADER: &str = "product_id,description,subcategory_id,class_id,group_id,kind\n";
    const SALES_HEADER: &str =
        "customer_id,product_id,timestamp,register_id,store_id,quantity,kind\n";

    fn catalog_abc() -> ProductCatalog {
        ProductCatalog::from_records(["A", "B", "C"].map(|id| ProductRecord {
            product_id: id.into(),
            description: String::new(),
            subcategory_id: "s".into(),
            class_id: "c".into(),
            group_id: "g".into(),
            kind: ProductKind::Material,
        }))
    }

    #[test]
    fn material_filter() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}p1,nails,s1,c1,g1,material\np2,gift card,s2,c2,g2,non_material\n\
             p3,screws,s1,c1,g1,material\np4,warranty,s2,c2,g2,non_material\np5,\"saw, hand\",s3,c3,g3,material\n"
        );
        let cat = load_products(write(&dir, "p.csv", &body)).unwrap();
        assert_eq!(cat.len(), 3);
        assert_eq!(cat.meta.excluded(), 2);
        assert_eq!(cat.get("p5").unwrap().description, "saw, hand");
    }

    #[test]
    fn header_only_catalog() {
        let dir = tempfile::tempdir().unwrap();
        let cat = load_products(write(&dir, "p.csv", HEADER)).unwrap();
        assert!(cat.is_empty());
        assert_eq!(cat.meta.excluded(), 0);
    }

    #[test]
    fn duplicate_product_cites_both_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = HEADER.to_string();
        for i in 2..=10 {
            let id = if i == 4 || i == 9 {
                "dup".to_string()
            } else {
                format!("p{i}")
            };
            body.push_str(&format!("{id},d,s,c,g,material\n"));
        }
        match load_products(write(&dir, "p.csv", &body)) {
            Err(Error::DuplicateProduct {
                first_line,
                second_line,
                ..
            }) => assert_eq!((first_line, second_line), (4, 9)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}p1,d,s,c,g,material\np2,d,s,c,material\n");
        let err = load_products(write(&dir, "p.csv", &body)).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let body = format!("{HEADER}p1,d,s,c,g,material\n ,d,s,c,g,material\n");
        let err = load_products(write(&dir, "p.csv", &body)).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_file() {
        let err = load_products("/nonexistent/products.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn duplicate_sales_collapse_with_summed_quantity() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{SALES_HEADER}c1,A,2013-01-05T10:00:00,r1,s1,1,sale\nc1,A,2013-01-05T10:00:00,r1,s1,2,sale\n"
        );
        let log = load_sales(write(&dir, "s.csv", &body), &catalog_abc()).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.events[0].quantity, 3);
        assert_eq!(log.meta.duplicates_collapsed, 1);
    }

    #[test]
    fn returns_and_unknown_products_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{SALES_HEADER}c1,A,2013-01-05,r1,s1,1,sale\nc1,B,2013-01-06,r1,s1,-1,return\nc2,Z,2013-01-06,r1,s1,1,sale\n"
        );
        let log = load_sales(write(&dir, "s.csv", &body), &catalog_abc()).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.meta.returns_dropped, 1);
        assert_eq!(log.meta.unknown_dropped, 1);
    }

    #[test]
    fn bad_dates_and_quantities() {
        let dir = tempfile::tempdir().unwrap();
        let body =
            format!("{SALES_HEADER}c1,A,2013-01-05,r1,s1,1,sale\nc1,A,05/01/2013,r1,s1,1,sale\n");
        let err = load_sales(write(&dir, "s.csv", &body), &catalog_abc()).unwrap_err();
        assert!(matches!(err, Error::BadTimestamp { line: 3, .. }), "{err}");
        let body = format!("{SALES_HEADER}c1,A,2013-01-05,r1,s1,-2,sale\n");
        let err = load_sales(write(&dir, "s.csv", &body), &catalog_abc()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::BadQuantity {
                    line: 2,
                    quantity: -2,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn extra_columns_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let body =
            "customer_id,product_id,timestamp,register_id,store_id,quantity,kind,price,discount\n\
                    c1,A,2013-01-05 09:30,r1,s1,1,sale,3.99,0\n";
        let log = load_sales(write(&dir, "s.csv", body), &catalog_abc()).unwrap();
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn timestamps() {
        assert!(parse_timestamp("2013-01-05").is_some());
        assert!(parse_timestamp("2013-01-05T10:11:12").is_some());
        assert!(parse_timestamp("2013-01-05T10:11:12.250").is_some());
        assert!(parse_timestamp("2013-01-05T10:11:12+02:00").is_some());
        assert!(parse_timestamp("2013-01-05T10:11:12Z").is_some());
        assert!(parse_timestamp("2013-13-05").is_none());
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn log_order_ignores_input_order() {
        let t = |d: u32| {
            NaiveDate::from_ymd_opt(2013, 1, d)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap()
        };
        let ev = |c: &str, p: &str, d: u32| SaleEvent {
            customer_id: c.into(),
            product_id: p.into(),
            timestamp: t(d),
            register_id: "r".into(),
            store_id: "s".into(),
            quantity: 1,
        };
        let a = vec![
            ev("c2", "A", 3),
            ev("c1", "B", 2),
            ev("c1", "A", 2),
            ev("c1", "C", 1),
        ];
        let mut b = a.clone();
        b.reverse();
        let la = SaleLog::from_events(a);
        assert_eq!(la, SaleLog::from_events(b));
        assert_eq!(la.first_unsorted(), None);
        let order: Vec<_> = la.events.iter().map(|e| e.product_id.as_str()).collect();
        assert_eq!(order, ["C", "A", "B", "A"]);
    }
}
