//! Spatial grids of plot counts as partially directed networks.
//!
//! Each plot becomes a node. An occupied plot (count at or above the
//! threshold) leads to every adjacent plot, so it gets an out-link to each
//! neighbor; an empty plot leads nowhere. Two adjacent occupied plots end up
//! linked both ways, an occupied/empty pair one way only.

use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};
use crate::graph::{AttributeTable, Column, Network, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    counts: Vec<f64>,
}

impl Grid {
    /// Row-major counts.
    pub fn new(rows: usize, cols: usize, counts: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Grid("rows and cols must be positive".into()));
        }
        if counts.len() != rows * cols {
            return Err(Error::Grid(format!(
                "{} counts for a {rows}x{cols} grid",
                counts.len()
            )));
        }
        if let Some(i) = counts.iter().position(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::Grid(format!(
                "cell {} (row {}) has invalid count {}",
                i,
                i / cols,
                counts[i]
            )));
        }
        Ok(Grid { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.cols + col]
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn cell_label(row: usize, col: usize) -> String {
        format!("r{row}c{col}")
    }
}

/// Grid file: a `rows cols` header, then one line of whitespace-separated
/// counts per row. Blank lines and `#` comments are skipped.
pub fn parse_grid<R: Read>(reader: R) -> Result<Grid> {
    let mut lines = BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
    let (line, header) = lines.next().ok_or_else(|| Error::Grid("empty grid file".into()))?;
    let header = header.map_err(|e| Error::io("<grid>", e))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line,
            message: format!("bad grid header `{header}`"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line,
            message: "grid header must be `rows cols`".into(),
        });
    };

    let mut counts = Vec::with_capacity(rows * cols);
    let mut row = 0;
    for (line, text) in lines {
        let text = text.map_err(|e| Error::io("<grid>", e))?;
        if row == rows {
            return Err(Error::Grid(format!("line {line}: more than {rows} rows")));
        }
        let before = counts.len();
        for tok in text.split_whitespace() {
            counts.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("row {row}: bad count `{tok}`"),
            })?);
        }
        let got = counts.len() - before;
        if got != cols {
            return Err(Error::Grid(format!(
                "row {row} (line {line}) has {got} cells, expected {cols}"
            )));
        }
        row += 1;
    }
    if row != rows {
        return Err(Error::Grid(format!("expected {rows} rows, found {row}")));
    }
    Grid::new(rows, cols, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adjacency {
    /// Shared edges only.
    #[default]
    Rook,
    /// Shared edges and corners.
    Queen,
}

impl std::str::FromStr for Adjacency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rook" => Ok(Adjacency::Rook),
            "queen" => Ok(Adjacency::Queen),
            other => Err(Error::config(format!("unknown adjacency `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialRule {
    pub adjacency: Adjacency,
    /// A plot is occupied when its count is at least this.
    pub occupancy_threshold: f64,
}

impl Default for SpatialRule {
    fn default() -> Self {
        SpatialRule {
            adjacency: Adjacency::Rook,
            occupancy_threshold: 1.0,
        }
    }
}

/// Name of the attribute column carrying plot counts.
pub const COUNT_COLUMN: &str = "count";

pub fn grid_to_network(grid: &Grid, rule: &SpatialRule) -> Result<(Network, AttributeTable)> {
    if !(rule.occupancy_threshold > 0.0) {
        return Err(Error::config("occupancy threshold must be positive"));
    }
    let (rows, cols) = (grid.rows, grid.cols);
    let offsets: &[(isize, isize)] = match rule.adjacency {
        Adjacency::Rook => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        Adjacency::Queen => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let labels: Vec<String> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Grid::cell_label(r, c)))
        .collect();
    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if grid.count(r, c) < rule.occupancy_threshold {
                continue;
            }
            for &(dr, dc) in offsets {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                links.push((
                    NodeId::from(r * cols + c),
                    NodeId::from(nr as usize * cols + nc as usize),
                ));
            }
        }
    }
    let net = Network::from_links(labels, links)?;
    let mut attrs = AttributeTable::new(net.node_count());
    attrs.push(Column::new(
        COUNT_COLUMN,
        grid.counts.clone(),
        vec![false; grid.counts.len()],
    ))?;
    Ok((net, attrs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{draw_sample, DesignConfig, DesignKind, Recruiter};
    use crate::rng::stream;

    fn convert(rows: usize, cols: usize, counts: &[f64]) -> Network {
        grid_to_network(
            &Grid::new(rows, cols, counts.to_vec()).unwrap(),
            &SpatialRule::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn one_way_two_way_none() {
        let g = convert(1, 2, &[3.0, 0.0]);
        assert_eq!(g.links().collect::<Vec<_>>(), vec![(NodeId(0), NodeId(1))]);
        let g = convert(1, 2, &[2.0, 5.0]);
        assert_eq!(g.link_count(), 2);
        assert!(g.is_symmetric());
        let g = convert(2, 2, &[0.0; 4]);
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.link_count(), 0);
    }

    #[test]
    fn interior_degrees() {
        let g = convert(3, 3, &[1.0; 9]);
        assert_eq!(g.degree(NodeId(4)).unwrap(), 4);
        assert_eq!(g.degree(NodeId(0)).unwrap(), 2);
        let (q, _) = grid_to_network(
            &Grid::new(3, 3, vec![1.0; 9]).unwrap(),
            &SpatialRule {
                adjacency: Adjacency::Queen,
                occupancy_threshold: 1.0,
            },
        )
        .unwrap();
        assert_eq!(q.degree(NodeId(4)).unwrap(), 8);
        assert_eq!(q.degree(NodeId(0)).unwrap(), 3);
    }

    #[test]
    fn threshold_applies() {
        let (g, attrs) = grid_to_network(
            &Grid::new(1, 2, vec![2.0, 3.0]).unwrap(),
            &SpatialRule {
                adjacency: Adjacency::Rook,
                occupancy_threshold: 3.0,
            },
        )
        .unwrap();
        assert_eq!(g.links().collect::<Vec<_>>(), vec![(NodeId(1), NodeId(0))]);
        assert_eq!(attrs.column(COUNT_COLUMN).unwrap().values, vec![2.0, 3.0]);
    }

    #[test]
    fn snowball_never_leaves_empty_cells() {
        let counts = [
            0.0, 2.0, 0.0, 0.0, //
            1.0, 4.0, 0.0, 3.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 5.0, 0.0, 0.0,
        ];
        let g = convert(4, 4, &counts);
        let cfg = DesignConfig {
            kind: DesignKind::Regular,
            seed_count: 2,
            link_follow_prob: 1.0,
            target_size: 16,
            max_waves: None,
            reseed_on_exhaustion: true,
        };
        for s in 0..200 {
            let rec = draw_sample(&g, &cfg, &mut stream(s, 0)).unwrap();
            for e in &rec.events {
                if let Recruiter::Unit(r) = e.recruiter {
                    assert!(counts[r.index()] >= 1.0);
                }
            }
        }
    }

    #[test]
    fn parse_grid_file() {
        let g = parse_grid("2 3\n0 1 2\n3 4 5\n".as_bytes()).unwrap();
        assert_eq!(g.count(1, 2), 5.0);
        let err = parse_grid("2 3\n0 1 2\n3 4\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(parse_grid("2 2\n0 1\n".as_bytes()).is_err());
        assert!(parse_grid("2\n0 1\n".as_bytes()).is_err());
        assert!(parse_grid("1 1\n-3\n".as_bytes()).is_err());
    }
}
