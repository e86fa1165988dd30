//! Immutable population graph with string labels, plus the per-node
//! attribute table.
//!
//! Links are stored as ordered pairs in a compressed adjacency layout with
//! ascending targets per node. An undirected relationship is simply both
//! ordered pairs, so one-way links (as produced by the spatial adapter) need
//! no special casing anywhere downstream.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node index, `0 <= id < node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    /// For induced subgraphs: id of each node in the parent network.
    parent: Option<Vec<NodeId>>,
}

impl Network {
    /// Builds a network from node labels and ordered links. Duplicate links
    /// are collapsed; self-loops and duplicate labels are rejected.
    pub fn from_links<I>(labels: Vec<String>, links: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let n = labels.len();
        let mut index = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), NodeId::from(i)).is_some() {
                return Err(Error::config(format!("duplicate node label `{label}`")));
            }
        }
        let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (src, dst) in links {
            for id in [src, dst] {
                if id.index() >= n {
                    return Err(Error::InvalidNode {
                        id: id.index(),
                        node_count: n,
                    });
                }
            }
            if src == dst {
                return Err(Error::SelfLoop {
                    line: 0,
                    label: labels[src.index()].clone(),
                });
            }
            adjacency[src.index()].push(dst);
        }
        Ok(Self::assemble(labels, index, adjacency, None))
    }

    fn assemble(
        labels: Vec<String>,
        index: HashMap<String, NodeId>,
        mut adjacency: Vec<Vec<NodeId>>,
        parent: Option<Vec<NodeId>>,
    ) -> Self {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Network {
            offsets,
            targets,
            labels,
            index,
            parent,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of ordered pairs.
    pub fn link_count(&self) -> usize {
        self.targets.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId::from)
    }

    fn check(&self, i: NodeId) -> Result<()> {
        if i.index() < self.node_count() {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                id: i.index(),
                node_count: self.node_count(),
            })
        }
    }

    /// Out-degree of `i`.
    pub fn degree(&self, i: NodeId) -> Result<usize> {
        self.check(i)?;
        Ok(self.out_degree(i))
    }

    /// Distinct out-neighbors of `i` in ascending order.
    pub fn out_neighbors(&self, i: NodeId) -> Result<&[NodeId]> {
        self.check(i)?;
        Ok(self.adj(i))
    }

    #[inline]
    pub(crate) fn adj(&self, i: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[i.index()]..self.offsets[i.index() + 1]]
    }

    #[inline]
    pub(crate) fn out_degree(&self, i: NodeId) -> usize {
        self.offsets[i.index() + 1] - self.offsets[i.index()]
    }

    pub fn has_link(&self, src: NodeId, dst: NodeId) -> bool {
        src.index() < self.node_count() && self.adj(src).binary_search(&dst).is_ok()
    }

    /// All ordered pairs, grouped by source in ascending order.
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |i| self.adj(i).iter().map(move |&j| (i, j)))
    }

    pub fn label(&self, i: NodeId) -> &str {
        &self.labels[i.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    /// Parent-network ids when this network is an induced subgraph.
    pub fn parent_ids(&self) -> Option<&[NodeId]> {
        self.parent.as_deref()
    }

    /// True when every ordered pair has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.links().all(|(i, j)| self.has_link(j, i))
    }

    /// Subgraph on `nodes` holding every link of `self` with both endpoints
    /// inside. New ids follow ascending parent id; labels are kept.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<Network> {
        let n = self.node_count();
        let mut keep: Vec<NodeId> = Vec::with_capacity(nodes.len());
        for &id in nodes {
            self.check(id)?;
            keep.push(id);
        }
        keep.sort_unstable();
        keep.dedup();

        let mut remap = vec![u32::MAX; n];
        for (new, old) in keep.iter().enumerate() {
            remap[old.index()] = new as u32;
        }
        let labels: Vec<String> = keep.iter().map(|&i| self.labels[i.index()].clone()).collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), NodeId::from(i)))
            .collect();
        let adjacency = keep
            .iter()
            .map(|&old| {
                self.adj(old)
                    .iter()
                    .filter_map(|j| match remap[j.index()] {
                        u32::MAX => None,
                        k => Some(NodeId(k)),
                    })
                    .collect()
            })
            .collect();
        Ok(Self::assemble(labels, index, adjacency, Some(keep)))
    }
}

/// Reads an edge list.
///
/// One link per line as two whitespace-separated labels; `#` starts a
/// comment line. With `directed` set, a trailing `->` marks a one-way link.
/// A line holding a single label declares a node without links.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<Network> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file), directed).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<Network> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    let mut links: Vec<(NodeId, NodeId)> = Vec::new();

    let mut intern = |label: &str, labels: &mut Vec<String>| -> NodeId {
        *index.entry(label.to_owned()).or_insert_with(|| {
            labels.push(label.to_owned());
            NodeId::from(labels.len() - 1)
        })
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<edge list>", e))?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match fields.as_slice() {
            [node] => {
                intern(node, &mut labels);
            }
            [a, b] | [a, b, "->"] => {
                let one_way = fields.len() == 3;
                if one_way && !directed {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "one-way marker `->` in an undirected edge list".into(),
                    });
                }
                if a == b {
                    return Err(Error::SelfLoop {
                        line: lineno,
                        label: (*a).to_owned(),
                    });
                }
                let src = intern(a, &mut labels);
                let dst = intern(b, &mut labels);
                links.push((src, dst));
                if !one_way {
                    links.push((dst, src));
                }
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `a b` or `a b ->`, got `{trimmed}`"),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    Network::from_links(labels, links)
}

/// Writes the edge list format read by [`parse_edge_list`]. Symmetric pairs
/// are written once, one-way links carry `->`, and nodes with no links at
/// all are written as single-label lines.
pub fn write_edge_list<W: Write>(net: &Network, mut out: W) -> io::Result<()> {
    let mut touched = vec![false; net.node_count()];
    for (i, j) in net.links() {
        touched[i.index()] = true;
        touched[j.index()] = true;
    }
    for i in net.nodes() {
        if !touched[i.index()] {
            writeln!(out, "{}", net.label(i))?;
        }
        for &j in net.adj(i) {
            if net.has_link(j, i) {
                if i < j {
                    writeln!(out, "{} {}", net.label(i), net.label(j))?;
                }
            } else {
                writeln!(out, "{} {} ->", net.label(i), net.label(j))?;
            }
        }
    }
    Ok(())
}

pub fn save_edge_list(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = io::BufWriter::new(file);
    write_edge_list(net, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Binary,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
    /// Set where the source cell was empty and a default was substituted.
    pub missing: Vec<bool>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>, missing: Vec<bool>) -> Self {
        let kind = if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            ColumnKind::Binary
        } else {
            ColumnKind::Numeric
        };
        Column {
            name: name.into(),
            kind,
            values,
            missing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Empty cells become 0 with the missing bit set.
    #[default]
    Zero,
    Error,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(MissingPolicy::Zero),
            "error" => Ok(MissingPolicy::Error),
            other => Err(Error::config(format!("unknown missing-value policy `{other}`"))),
        }
    }
}

/// Named per-node columns; every column has exactly `node_count` entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    node_count: usize,
    columns: Vec<Column>,
}

impl AttributeTable {
    pub fn new(node_count: usize) -> Self {
        AttributeTable {
            node_count,
            columns: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn push(&mut self, column: Column) -> Result<()> {
        if column.values.len() != self.node_count || column.missing.len() != self.node_count {
            return Err(Error::config(format!(
                "column `{}` has {} values, expected {}",
                column.name,
                column.values.len(),
                self.node_count
            )));
        }
        if self.column(&column.name).is_some() {
            return Err(Error::config(format!("duplicate column `{}`", column.name)));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn with_values(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; values.len()];
        self.push(Column::new(name, values, missing))?;
        Ok(self)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Rows for `nodes`, in the given order.
    pub fn select_rows(&self, nodes: &[NodeId]) -> AttributeTable {
        AttributeTable {
            node_count: nodes.len(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: nodes.iter().map(|i| c.values[i.index()]).collect(),
                    missing: nodes.iter().map(|i| c.missing[i.index()]).collect(),
                })
                .collect(),
        }
    }
}

pub fn load_attributes(
    path: impl AsRef<Path>,
    net: &Network,
    policy: MissingPolicy,
) -> Result<AttributeTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(file, net, policy)
}

/// Parses a comma-separated attribute file. The first column holds node
/// labels; nodes without a row are treated as missing in every column.
pub fn parse_attributes<R: Read>(
    reader: R,
    net: &Network,
    policy: MissingPolicy,
) -> Result<AttributeTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::config("attribute file has no header"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let n = net.node_count();
    let mut values = vec![vec![0.0; n]; names.len()];
    let mut missing = vec![vec![true; n]; names.len()];
    let mut seen = vec![false; n];

    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let label = &record[0];
        let id = net
            .id_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_owned()))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(Error::Cell {
                row,
                column: headers[0].to_owned(),
                message: format!("duplicate row for `{label}`"),
            });
        }
        for (c, name) in names.iter().enumerate() {
            let cell = record.get(c + 1).unwrap_or("");
            if cell.is_empty() {
                if policy == MissingPolicy::Error {
                    return Err(Error::Cell {
                        row,
                        column: name.clone(),
                        message: "missing value".into(),
                    });
                }
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                row,
                column: name.clone(),
                message: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    row,
                    column: name.clone(),
                    message: format!("not finite: `{cell}`"),
                });
            }
            values[c][id.index()] = v;
            missing[c][id.index()] = false;
        }
    }
    if policy == MissingPolicy::Error && !names.is_empty() {
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::UnitMismatch(format!(
                "no attribute row for node `{}`",
                net.labels()[i]
            )));
        }
    }

    let mut table = AttributeTable::new(n);
    for ((name, vals), miss) in names.into_iter().zip(values).zip(missing) {
        table.push(Column::new(name, vals, miss))?;
    }
    Ok(table)
}

/// Writes the attribute file format; missing cells are left empty.
pub fn write_attributes<W: Write>(
    table: &AttributeTable,
    labels: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_owned()];
    header.extend(table.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        for c in table.columns() {
            row.push(if c.missing[i] {
                String::new()
            } else {
                c.values[i].to_string()
            });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<attributes>", e))?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn net(text: &str) -> Network {
        parse_edge_list(text.as_bytes(), true).unwrap()
    }

    pub(crate) fn id(net: &Network, label: &str) -> NodeId {
        net.id_of(label).unwrap()
    }

    #[test]
    fn undirected_lines_store_both_pairs() {
        let g = parse_edge_list("a b\nb c\n".as_bytes(), false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.link_count(), 4);
        assert!(g.is_symmetric());
    }

    #[test]
    fn duplicate_lines_collapse() {
        let g = parse_edge_list("a b\na b\nb a\n".as_bytes(), false).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.link_count(), 2);
    }

    #[test]
    fn self_loop_reports_line() {
        let err = parse_edge_list("# header\na a\n".as_bytes(), false).unwrap_err();
        match err {
            Error::SelfLoop { line, label } => {
                assert_eq!(line, 2);
                assert_eq!(label, "a");
            }
            e => panic!("unexpected {e}"),
        }
        let err = parse_edge_list("a a\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { line: 1, .. }));
    }

    #[test]
    fn malformed_and_empty() {
        let err = parse_edge_list("a b\na b c d\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_edge_list("a b ->\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            parse_edge_list("# nothing\n\n".as_bytes(), false),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn degrees_and_neighbors() {
        let tri = net("a b\nb c\nc a\n");
        for i in tri.nodes() {
            assert_eq!(tri.degree(i).unwrap(), 2);
        }
        let star = net("c x\nc y\nc z\nlonely\n");
        assert_eq!(star.degree(id(&star, "c")).unwrap(), 3);
        assert_eq!(star.degree(id(&star, "lonely")).unwrap(), 0);
        assert!(star.out_neighbors(id(&star, "lonely")).unwrap().is_empty());
        assert!(matches!(
            star.degree(NodeId(99)),
            Err(Error::InvalidNode { id: 99, .. })
        ));

        let path = net("a b\nb c\n");
        let b = path.out_neighbors(id(&path, "b")).unwrap();
        assert_eq!(b, &[id(&path, "a"), id(&path, "c")]);

        let one_way = net("a b ->\n");
        assert!(one_way.out_neighbors(id(&one_way, "b")).unwrap().is_empty());
        assert_eq!(one_way.degree(id(&one_way, "a")).unwrap(), 1);
    }

    #[test]
    fn induced_subgraphs() {
        let tri = net("a b\nb c\nc a\n");
        let sub = tri
            .induced_subgraph(&[id(&tri, "a"), id(&tri, "b")])
            .unwrap();
        assert_eq!(sub.node_count(), 2);
        assert_eq!(sub.link_count(), 2);
        assert_eq!(sub.labels(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(sub.parent_ids().unwrap(), &[NodeId(0), NodeId(1)]);

        let empty = tri.induced_subgraph(&[]).unwrap();
        assert_eq!(empty.node_count(), 0);
        assert_eq!(empty.link_count(), 0);

        let all: Vec<NodeId> = tri.nodes().collect();
        let full = tri.induced_subgraph(&all).unwrap();
        assert_eq!(full.link_count(), tri.link_count());
        assert!(full.links().eq(tri.links()));

        assert!(tri.induced_subgraph(&[NodeId(7)]).is_err());
    }

    #[test]
    fn edge_list_round_trip_is_stable() {
        let text = "# mixed\nx y\ny z ->\nq\nz x\n";
        let g = net(text);
        let mut first = Vec::new();
        write_edge_list(&g, &mut first).unwrap();
        let again = parse_edge_list(first.as_slice(), true).unwrap();
        let mut second = Vec::new();
        write_edge_list(&again, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(again, g);
        assert_eq!(
            String::from_utf8(first).unwrap(),
            "x y\nx z\ny z ->\nq\n"
        );
    }

    #[test]
    fn attributes_binary_column() {
        let g = net("a b\nb c\n");
        let t = parse_attributes(
            "id,female\na,1\nb,0\nc,1\n".as_bytes(),
            &g,
            MissingPolicy::Zero,
        )
        .unwrap();
        let col = t.column("female").unwrap();
        assert_eq!(col.kind, ColumnKind::Binary);
        assert_eq!(col.values, vec![1.0, 0.0, 1.0]);
        assert!(col.missing.iter().all(|m| !m));
    }

    #[test]
    fn attributes_missing_policies() {
        let g = net("a b\n");
        let text = "id,age\na,31.5\nb,\n";
        let t = parse_attributes(text.as_bytes(), &g, MissingPolicy::Zero).unwrap();
        let col = t.column("age").unwrap();
        assert_eq!(col.values, vec![31.5, 0.0]);
        assert_eq!(col.missing, vec![false, true]);
        assert_eq!(col.kind, ColumnKind::Numeric);

        match parse_attributes(text.as_bytes(), &g, MissingPolicy::Error).unwrap_err() {
            Error::Cell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "age");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn attributes_errors() {
        let g = net("a b\n");
        assert!(matches!(
            parse_attributes("id,x\nzz,1\n".as_bytes(), &g, MissingPolicy::Zero),
            Err(Error::UnknownLabel(l)) if l == "zz"
        ));
        assert!(matches!(
            parse_attributes("id,x\na,yes\n".as_bytes(), &g, MissingPolicy::Zero),
            Err(Error::Cell { .. })
        ));
        // row for b absent
        assert!(parse_attributes("id,x\na,1\n".as_bytes(), &g, MissingPolicy::Error).is_err());
        let t = parse_attributes("id,x\na,1\n".as_bytes(), &g, MissingPolicy::Zero).unwrap();
        assert_eq!(t.column("x").unwrap().missing, vec![false, true]);
    }

    #[test]
    fn attribute_write_round_trip() {
        let g = net("a b\nb c\n");
        let text = "id,x,y\na,1,2.5\nb,,3\nc,0,\n";
        let t = parse_attributes(text.as_bytes(), &g, MissingPolicy::Zero).unwrap();
        let mut out = Vec::new();
        write_attributes(&t, g.labels(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        let back = parse_attributes(out.as_slice(), &g, MissingPolicy::Zero).unwrap();
        assert_eq!(back, t);
    }
}
