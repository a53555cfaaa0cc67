//! Text formats for graphs, features, labels and partitions.
//!
//! - Edge lists: one edge per line, `i<TAB>j<TAB>w` with 0-based ids; a missing
//!   weight means 1. Lines starting with `#` are comments, except that
//!   `# nodes: N` fixes the node count so trailing isolated nodes survive.
//! - Features: CSV without header, one row of numbers per node.
//! - Labels and partitions: CSV with header `node,community`; a community of
//!   `unassigned` marks a node without a label.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::knn::FeatureMatrix;
use crate::error::{Error, Result};
use crate::functional::Partition;
use crate::graph::Graph;

const NODES_PREFIX: &str = "# nodes:";
const UNASSIGNED: &str = "unassigned";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_weight(path: &Path, line: usize, s: &str) -> Result<f64> {
    let w: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number {s:?}")))?;
    if !w.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {s:?}")));
    }
    Ok(w)
}

fn parse_index(path: &Path, line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("invalid node id {s:?}")))
}

/// Parses edge-list text; `path` is only used in error messages.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix(NODES_PREFIX) {
            declared = Some(parse_index(path, line, rest.trim())?);
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let (i, j, w) = match fields.as_slice() {
            [i, j] => (parse_index(path, line, i)?, parse_index(path, line, j)?, 1.0),
            [i, j, w] => (
                parse_index(path, line, i)?,
                parse_index(path, line, j)?,
                parse_weight(path, line, w)?,
            ),
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected 2 or 3 fields, found {}", fields.len()),
                ))
            }
        };
        if w < 0.0 {
            return Err(parse_err(path, line, format!("negative weight {w}")));
        }
        edges.push((line, i, j, w));
    }
    let max_id = edges.iter().map(|&(_, i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    let n_nodes = match declared {
        Some(d) if d < max_id => {
            let &(line, ..) = edges.iter().find(|e| e.1.max(e.2) >= d).expect("some edge exceeds");
            return Err(parse_err(path, line, format!("node id beyond declared count {d}")));
        }
        Some(d) => d,
        None => max_id,
    };
    Graph::from_edges(n_nodes, edges.into_iter().map(|(_, i, j, w)| (i, j, w)))
}

pub fn read_edge_list(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

/// Edge-list text for `g`, with a `# nodes:` header line.
pub fn format_edge_list(g: &Graph) -> String {
    let mut out = format!("{NODES_PREFIX} {}\n", g.n_nodes());
    for &(i, j, w) in g.edges() {
        out.push_str(&format!("{i}\t{j}\t{w}\n"));
    }
    out
}

pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    write_text(path, &format_edge_list(g))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(path, line, e.to_string())
}

/// Reads a header-less CSV of node features.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 0, format!("{other:?}")),
        })?;
    let mut values = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {d} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            values.push(parse_weight(path, line, field)?);
        }
    }
    let dim = dim.ok_or_else(|| parse_err(path, 0, "no feature rows"))?;
    FeatureMatrix::new(dim, values)
}

/// Writes features as header-less CSV.
pub fn write_features(x: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..x.n_rows() {
        let row: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Parses `node,community` rows. Unassigned rows map to `None`.
fn read_label_rows(path: &Path) -> Result<Vec<(usize, Option<usize>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 0, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "node" || &headers[1] != "community" {
        return Err(parse_err(path, 1, "expected header `node,community`"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let node = parse_index(path, line, &record[0])?;
        let label = match &record[1] {
            UNASSIGNED => None,
            s => Some(
                s.parse()
                    .map_err(|_| parse_err(path, line, format!("invalid community {s:?}")))?,
            ),
        };
        rows.push((node, label));
    }
    Ok(rows)
}

/// Reads a full labelling. Nodes absent from the file are unassigned; with
/// `n_nodes = None` the node count is one past the largest id.
pub fn read_labels(path: &Path, n_nodes: Option<usize>) -> Result<Partition> {
    let rows = read_label_rows(path)?;
    let max_id = rows.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
    let n = n_nodes.unwrap_or(max_id);
    if max_id > n {
        return Err(Error::NodeOutOfRange {
            index: max_id - 1,
            n_nodes: n,
        });
    }
    let mut labels = vec![Partition::UNASSIGNED; n];
    for (i, l) in rows {
        labels[i] = l.unwrap_or(Partition::UNASSIGNED);
    }
    Ok(Partition::new(labels))
}

/// Reads a partial labelling as a node → community map.
pub fn read_known_labels(path: &Path) -> Result<BTreeMap<usize, usize>> {
    Ok(read_label_rows(path)?
        .into_iter()
        .filter_map(|(i, l)| l.map(|l| (i, l)))
        .collect())
}

/// `node,community` CSV text for `p`.
pub fn format_partition(p: &Partition) -> String {
    let mut out = String::from("node,community\n");
    for (i, &l) in p.labels().iter().enumerate() {
        if l == Partition::UNASSIGNED {
            out.push_str(&format!("{i},{UNASSIGNED}\n"));
        } else {
            out.push_str(&format!("{i},{l}\n"));
        }
    }
    out
}

pub fn write_partition(p: &Partition, path: &Path) -> Result<()> {
    write_text(path, &format_partition(p))
}
