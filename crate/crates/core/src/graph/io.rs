//! Edge-list TSV, GraphML and DOT exports, plus a GraphML reader for the
//! files this module writes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use quick_xml::escape::escape;
use quick_xml::events::Event;

use super::{NodeInfo, ProductGraph};
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// One `a\tb` line per edge, `a < b`, sorted.
pub fn write_edges_tsv(graph: &ProductGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for (a, b) in graph.edges() {
        writeln!(w, "{}\t{}", graph.id(a), graph.id(b)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_graphml(graph: &ProductGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_graphml_to(graph, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_graphml_to(graph: &ProductGraph, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#
    )?;
    writeln!(
        w,
        r#"  <key id="description" for="node" attr.name="description" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="sales_volume" for="node" attr.name="sales_volume" attr.type="long"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="degree" for="node" attr.name="degree" attr.type="int"/>"#
    )?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for v in graph.indices() {
        let node = graph.node(v);
        writeln!(
            w,
            r#"    <node id="{}"><data key="description">{}</data><data key="sales_volume">{}</data><data key="degree">{}</data></node>"#,
            escape(node.id.as_str()),
            escape(node.description.as_str()),
            node.sales_volume,
            graph.degree(v)
        )?;
    }
    for (a, b) in graph.edges() {
        writeln!(
            w,
            r#"    <edge source="{}" target="{}"/>"#,
            escape(graph.id(a)),
            escape(graph.id(b))
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")
}

pub fn read_graphml(path: impl AsRef<Path>) -> Result<ProductGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = quick_xml::Reader::from_reader(BufReader::new(file));
    let bad = |e: &dyn std::fmt::Display| Error::GraphFormat(format!("{}: {e}", path.display()));

    let mut nodes: Vec<NodeInfo> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut current: Option<NodeInfo> = None;
    let mut data_key: Option<String> = None;
    let mut text = String::new();
    let mut buf = Vec::new();

    let attr = |e: &quick_xml::events::BytesStart, name: &str| -> Result<Option<String>> {
        match e.try_get_attribute(name).map_err(|err| bad(&err))? {
            Some(a) => Ok(Some(
                a.unescape_value().map_err(|err| bad(&err))?.into_owned(),
            )),
            None => Ok(None),
        }
    };

    loop {
        match reader.read_event_into(&mut buf).map_err(|e| bad(&e))? {
            Event::Eof => break,
            Event::Start(e) if e.name().as_ref() == b"node" => {
                let id = attr(&e, "id")?.ok_or_else(|| bad(&"node without id"))?;
                current = Some(NodeInfo::new(id, 0));
            }
            Event::Empty(e) if e.name().as_ref() == b"node" => {
                let id = attr(&e, "id")?.ok_or_else(|| bad(&"node without id"))?;
                nodes.push(NodeInfo::new(id, 0));
            }
            Event::Start(e) if e.name().as_ref() == b"data" => {
                data_key = attr(&e, "key")?;
                text.clear();
            }
            Event::Text(t) if data_key.is_some() => {
                text.push_str(&t.unescape().map_err(|e| bad(&e))?);
            }
            Event::CData(t) if data_key.is_some() => {
                text.push_str(&String::from_utf8_lossy(&t));
            }
            Event::End(e) if e.name().as_ref() == b"data" => {
                if let (Some(key), Some(node)) = (data_key.take(), current.as_mut()) {
                    match key.as_str() {
                        "description" => node.description = std::mem::take(&mut text),
                        "sales_volume" => {
                            node.sales_volume = text
                                .trim()
                                .parse()
                                .map_err(|_| bad(&format!("bad sales_volume {text:?}")))?
                        }
                        _ => {}
                    }
                }
                text.clear();
            }
            Event::End(e) if e.name().as_ref() == b"node" => {
                nodes.extend(current.take());
            }
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"edge" => {
                let source = attr(&e, "source")?.ok_or_else(|| bad(&"edge without source"))?;
                let target = attr(&e, "target")?.ok_or_else(|| bad(&"edge without target"))?;
                edges.push((source, target));
            }
            _ => {}
        }
        buf.clear();
    }
    ProductGraph::from_parts(nodes, edges)
}

pub fn write_dot(graph: &ProductGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "graph G {{").map_err(io)?;
    for v in graph.indices() {
        writeln!(
            w,
            "  \"{}\" [sales_volume={}, degree={}];",
            dot_escape(graph.id(v)),
            graph.sales_volume(v),
            graph.degree(v)
        )
        .map_err(io)?;
    }
    for (a, b) in graph.edges() {
        writeln!(
            w,
            "  \"{}\" -- \"{}\";",
            dot_escape(graph.id(a)),
            dot_escape(graph.id(b))
        )
        .map_err(io)?;
    }
    writeln!(w, "}}").map_err(io)?;
    w.flush().map_err(io)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
