//! Binary transaction data, graph transactions and the pattern types mined
//! from them.
//!
//! A [`BinaryDataset`] stores each transaction as a sorted list of dense column
//! indices. Item-list files carry arbitrary non-negative integer item ids; on
//! load they are mapped to `0..cols` in ascending id order and the original
//! ids are kept as column labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    rows: Vec<Vec<u32>>,
    cols: usize,
    row_margins: Vec<usize>,
    col_margins: Vec<usize>,
    labels: Vec<String>,
}

impl BinaryDataset {
    /// Builds a dataset from per-row item lists. Items are sorted and checked
    /// for duplicates and bounds.
    pub fn from_rows(rows: Vec<Vec<u32>>, cols: usize) -> Result<Self> {
        let labels = (0..cols).map(|c| c.to_string()).collect();
        Self::with_labels(rows, labels)
    }

    pub fn with_labels(mut rows: Vec<Vec<u32>>, labels: Vec<String>) -> Result<Self> {
        let cols = labels.len();
        let mut col_margins = vec![0usize; cols];
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::invalid(format!(
                        "duplicate cell ({r}, {}) in dataset",
                        w[0]
                    )));
                }
            }
            for &c in row.iter() {
                let c = c as usize;
                if c >= cols {
                    return Err(Error::invalid(format!(
                        "cell ({r}, {c}) out of bounds for {cols} columns"
                    )));
                }
                col_margins[c] += 1;
            }
        }
        let row_margins = rows.iter().map(Vec::len).collect();
        Ok(Self {
            rows,
            cols,
            row_margins,
            col_margins,
            labels,
        })
    }

    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_rows(vec![Vec::new(); rows], cols).expect("empty rows are valid")
    }

    /// Same shape and labels, different cells. Used by the randomizers, which
    /// construct rows that are already sorted and in bounds.
    pub(crate) fn replace_rows(&self, rows: Vec<Vec<u32>>) -> Self {
        let mut col_margins = vec![0usize; self.cols];
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            for &c in row {
                col_margins[c as usize] += 1;
            }
        }
        Self {
            row_margins: rows.iter().map(Vec::len).collect(),
            rows,
            cols: self.cols,
            col_margins,
            labels: self.labels.clone(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.rows[r]
    }

    pub fn row_margins(&self) -> &[usize] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[usize] {
        &self.col_margins
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_cells(&self) -> usize {
        self.row_margins.iter().sum()
    }

    pub fn density(&self) -> f64 {
        if self.rows.is_empty() || self.cols == 0 {
            return 0.0;
        }
        self.n_cells() as f64 / (self.rows.len() * self.cols) as f64
    }

    pub fn contains(&self, r: usize, c: u32) -> bool {
        self.rows[r].binary_search(&c).is_ok()
    }

    /// Iterates all `(row, col)` cells holding a 1, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&c| (r, c)))
    }

    /// Rows containing each column, ascending.
    pub fn column_rows(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self
            .col_margins
            .iter()
            .map(|&m| Vec::with_capacity(m))
            .collect();
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                out[c as usize].push(r as u32);
            }
        }
        out
    }

    /// Number of transactions containing every item of `items`.
    pub fn support(&self, items: &[u32]) -> usize {
        self.rows
            .iter()
            .filter(|row| items.iter().all(|i| row.binary_search(i).is_ok()))
            .count()
    }

    pub fn write_item_list(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for row in &self.rows {
            let line: Vec<&str> = row
                .iter()
                .map(|&c| self.labels[c as usize].as_str())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_dense_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut line = vec!["0"; self.cols];
        for row in &self.rows {
            line.iter_mut().for_each(|v| *v = "0");
            for &c in row {
                line[c as usize] = "1";
            }
            writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write(&self, path: &Path, format: TransactionFormat) -> Result<()> {
        match format {
            TransactionFormat::ItemList => self.write_item_list(path),
            TransactionFormat::DenseCsv => self.write_dense_csv(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransactionFormat {
    ItemList,
    DenseCsv,
}

impl FromStr for TransactionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "item-list" => Ok(Self::ItemList),
            "dense-csv" => Ok(Self::DenseCsv),
            other => Err(Error::invalid(format!(
                "unknown transaction format {other:?}"
            ))),
        }
    }
}

pub fn load_transactions(path: &Path, format: TransactionFormat) -> Result<BinaryDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        TransactionFormat::ItemList => parse_item_list(&text),
        TransactionFormat::DenseCsv => parse_dense_csv(&text),
    }
}

fn lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

/// Parses FIMI-style transactions. A blank line is an empty transaction, but a
/// file without a single item is rejected.
pub fn parse_item_list(text: &str) -> Result<BinaryDataset> {
    let lines = lines(text);
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(Error::EmptyFile);
    }
    let mut raw: Vec<Vec<u64>> = Vec::with_capacity(lines.len());
    let mut ids = BTreeSet::new();
    for (i, line) in lines.iter().enumerate() {
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let id: u64 = tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid item id {tok:?}"),
            })?;
            ids.insert(id);
            row.push(id);
        }
        raw.push(row);
    }
    let index: HashMap<u64, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32))
        .collect();
    let rows = raw
        .into_iter()
        .map(|row| {
            let mut r: Vec<u32> = row.iter().map(|id| index[id]).collect();
            r.sort_unstable();
            r.dedup();
            r
        })
        .collect();
    BinaryDataset::with_labels(rows, ids.iter().map(u64::to_string).collect())
}

pub fn parse_dense_csv(text: &str) -> Result<BinaryDataset> {
    let lines: Vec<(usize, &str)> = lines(text)
        .into_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut cols = None;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {c} fields, found {}", fields.len()),
                })
            }
            _ => {}
        }
        let mut row = Vec::new();
        for (c, f) in fields.iter().enumerate() {
            match *f {
                "0" => {}
                "1" => row.push(c as u32),
                other => {
                    return Err(Error::NonBinary {
                        line: i + 1,
                        column: c + 1,
                        value: other.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    BinaryDataset::from_rows(rows, cols.unwrap_or(0))
}

/// A nonempty, strictly increasing set of column indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Itemset(Vec<u32>);

impl Itemset {
    pub fn new(mut items: Vec<u32>) -> Result<Self> {
        items.sort_unstable();
        if items.is_empty() {
            return Err(Error::invalid("itemset must be nonempty"));
        }
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("itemset has repeated items"));
        }
        Ok(Self(items))
    }

    pub(crate) fn from_sorted(items: Vec<u32>) -> Self {
        debug_assert!(!items.is_empty() && items.windows(2).all(|w| w[0] < w[1]));
        Self(items)
    }

    pub fn items(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn union(&self, other: &Itemset) -> Itemset {
        let mut v: Vec<u32> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        Itemset(v)
    }
}

impl TryFrom<Vec<u32>> for Itemset {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Itemset::new(v)
    }
}

impl From<Itemset> for Vec<u32> {
    fn from(s: Itemset) -> Self {
        s.0
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Itemset,
    pub consequent: Itemset,
}

impl AssociationRule {
    pub fn new(antecedent: Itemset, consequent: Itemset) -> Result<Self> {
        if antecedent
            .items()
            .iter()
            .any(|i| consequent.items().binary_search(i).is_ok())
        {
            return Err(Error::invalid("antecedent and consequent overlap"));
        }
        Ok(Self {
            antecedent,
            consequent,
        })
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.antecedent, self.consequent)
    }
}

/// Simple undirected labeled graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub id: String,
    node_ids: Vec<i64>,
    node_labels: Vec<String>,
    /// Normalized so that `u < v`.
    edges: Vec<(u32, u32)>,
    edge_labels: Vec<String>,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_labels(&self) -> &[String] {
        &self.edge_labels
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_ids.len()];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// True when there are no self-loops and no parallel edges.
    pub fn is_simple(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.edges.iter().all(|&(u, v)| {
            let (a, b) = (u.min(v), u.max(v));
            a != b && (b as usize) < self.node_ids.len() && seen.insert((a, b))
        })
    }

    pub(crate) fn with_edges(&self, edges: Vec<(u32, u32)>, edge_labels: Vec<String>) -> Graph {
        Graph {
            id: self.id.clone(),
            node_ids: self.node_ids.clone(),
            node_labels: self.node_labels.clone(),
            edges,
            edge_labels,
        }
    }

    /// Builds a graph from dense node indices, validating simplicity.
    pub fn new(
        id: impl Into<String>,
        node_labels: Vec<String>,
        edges: Vec<(u32, u32, String)>,
    ) -> Result<Self> {
        let id = id.into();
        let n = node_labels.len();
        let mut seen = BTreeSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        let mut labels = Vec::with_capacity(edges.len());
        for (k, (u, v, l)) in edges.into_iter().enumerate() {
            for x in [u, v] {
                if x as usize >= n {
                    return Err(Error::DanglingNode {
                        line: k + 1,
                        graph: id,
                        node: x as i64,
                    });
                }
            }
            if u == v {
                return Err(Error::SelfLoop {
                    line: k + 1,
                    graph: id,
                    node: u as i64,
                });
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::DuplicateEdge {
                    line: k + 1,
                    graph: id,
                    u: u as i64,
                    v: v as i64,
                });
            }
            norm.push(e);
            labels.push(l);
        }
        Ok(Graph {
            id,
            node_ids: (0..n as i64).collect(),
            node_labels,
            edges: norm,
            edge_labels: labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphTransactionSet {
    pub graphs: Vec<Graph>,
}

impl GraphTransactionSet {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn degree_sequences(&self) -> Vec<Vec<usize>> {
        self.graphs.iter().map(Graph::degree_sequence).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.graphs {
            out.push_str(&format!("t {}\n", g.id));
            for (id, label) in g.node_ids.iter().zip(&g.node_labels) {
                out.push_str(&format!("v {id} {label}\n"));
            }
            for (&(u, v), label) in g.edges.iter().zip(&g.edge_labels) {
                let (u, v) = (g.node_ids[u as usize], g.node_ids[v as usize]);
                out.push_str(&format!("e {u} {v} {label}\n"));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_graphs(path: &Path) -> Result<GraphTransactionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graphs(&text)
}

struct GraphBuilder {
    id: String,
    nodes: BTreeMap<i64, u32>,
    node_ids: Vec<i64>,
    node_labels: Vec<String>,
    edges: Vec<(u32, u32)>,
    edge_labels: Vec<String>,
    seen: BTreeSet<(u32, u32)>,
}

impl GraphBuilder {
    fn finish(self) -> Graph {
        Graph {
            id: self.id,
            node_ids: self.node_ids,
            node_labels: self.node_labels,
            edges: self.edges,
            edge_labels: self.edge_labels,
        }
    }
}

/// Parses `t <id>` / `v <node> <label>` / `e <u> <v> <label>` blocks.
/// `t # <id>` headers are accepted as well.
pub fn parse_graphs(text: &str) -> Result<GraphTransactionSet> {
    let mut graphs = Vec::new();
    let mut cur: Option<GraphBuilder> = None;
    for (i, line) in lines(text).into_iter().enumerate() {
        let line_no = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let int = |s: &str| -> Result<i64> {
            s.parse()
                .map_err(|_| parse_err(format!("invalid node id {s:?}")))
        };
        match toks.first().copied() {
            None => continue,
            Some("t") => {
                if let Some(g) = cur.take() {
                    graphs.push(g.finish());
                }
                let rest: Vec<&str> = toks[1..].iter().copied().filter(|t| *t != "#").collect();
                let id = if rest.is_empty() {
                    graphs.len().to_string()
                } else {
                    rest.join(" ")
                };
                cur = Some(GraphBuilder {
                    id,
                    nodes: BTreeMap::new(),
                    node_ids: Vec::new(),
                    node_labels: Vec::new(),
                    edges: Vec::new(),
                    edge_labels: Vec::new(),
                    seen: BTreeSet::new(),
                });
            }
            Some("v") => {
                let g = cur
                    .as_mut()
                    .ok_or_else(|| parse_err("node before any `t` header".into()))?;
                if toks.len() < 2 {
                    return Err(parse_err("expected `v <node-id> <label>`".into()));
                }
                let id = int(toks[1])?;
                if g.nodes.contains_key(&id) {
                    return Err(parse_err(format!("node {id} declared twice")));
                }
                g.nodes.insert(id, g.node_ids.len() as u32);
                g.node_ids.push(id);
                g.node_labels.push(toks[2..].join(" "));
            }
            Some("e") => {
                let g = cur
                    .as_mut()
                    .ok_or_else(|| parse_err("edge before any `t` header".into()))?;
                if toks.len() < 3 {
                    return Err(parse_err("expected `e <u> <v> <label>`".into()));
                }
                let (u, v) = (int(toks[1])?, int(toks[2])?);
                if u == v {
                    return Err(Error::SelfLoop {
                        line: line_no,
                        graph: g.id.clone(),
                        node: u,
                    });
                }
                let lookup = |x: i64| {
                    g.nodes.get(&x).copied().ok_or_else(|| Error::DanglingNode {
                        line: line_no,
                        graph: g.id.clone(),
                        node: x,
                    })
                };
                let (a, b) = (lookup(u)?, lookup(v)?);
                let e = (a.min(b), a.max(b));
                if !g.seen.insert(e) {
                    return Err(Error::DuplicateEdge {
                        line: line_no,
                        graph: g.id.clone(),
                        u,
                        v,
                    });
                }
                g.edges.push(e);
                g.edge_labels.push(toks[3..].join(" "));
            }
            Some(other) => return Err(parse_err(format!("unknown record type {other:?}"))),
        }
    }
    if let Some(g) = cur.take() {
        graphs.push(g.finish());
    }
    if graphs.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(GraphTransactionSet { graphs })
}
