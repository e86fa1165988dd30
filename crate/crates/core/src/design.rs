//! Snowball sampling designs and the observed data they yield.
//!
//! Two designs are supported. Under [`DesignKind::Regular`] a person can
//! enter the sample only once, so recruitment forms a forest. Under
//! [`DesignKind::ReRecruit`] a sampled person may be recruited again by a
//! different recruiter, but nobody traces back to the person who first
//! recruited them.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{self, AttributeTable, MissingPolicy, Network, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignKind {
    Regular,
    ReRecruit,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Regular => "regular",
            DesignKind::ReRecruit => "re-recruit",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "regular" => Ok(DesignKind::Regular),
            "re-recruit" | "rerecruit" => Ok(DesignKind::ReRecruit),
            other => Err(Error::config(format!("unknown design `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub kind: DesignKind,
    pub seed_count: usize,
    /// Independent probability of following each eligible out-link.
    pub link_follow_prob: f64,
    pub target_size: usize,
    /// `None` means waves continue until the target size or exhaustion.
    pub max_waves: Option<usize>,
    pub reseed_on_exhaustion: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            kind: DesignKind::Regular,
            seed_count: 10,
            link_follow_prob: 0.5,
            target_size: 200,
            max_waves: None,
            reseed_on_exhaustion: true,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        if self.seed_count == 0 {
            return Err(Error::config("seed_count must be positive"));
        }
        if self.seed_count > self.target_size {
            return Err(Error::config(format!(
                "seed_count {} exceeds target size {}",
                self.seed_count, self.target_size
            )));
        }
        if self.target_size > node_count {
            return Err(Error::config(format!(
                "target size {} exceeds node count {}",
                self.target_size, node_count
            )));
        }
        if !(0.0..=1.0).contains(&self.link_follow_prob) {
            return Err(Error::config(format!(
                "link-follow probability {} outside [0, 1]",
                self.link_follow_prob
            )));
        }
        if self.max_waves == Some(0) {
            return Err(Error::config("max_waves must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recruiter {
    Seed,
    Unit(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub recruiter: Recruiter,
    pub recruitee: NodeId,
    pub wave: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub seeds: Vec<NodeId>,
    pub events: Vec<Event>,
    /// Distinct sampled units in order of first entry.
    pub distinct_units: Vec<NodeId>,
    /// Indices into `events` of seeds added after the frontier died out.
    pub reseed_points: Vec<usize>,
    /// Set when the design stopped before reaching the target size.
    pub short: bool,
}

impl SampleRecord {
    pub fn sorted_units(&self) -> Vec<NodeId> {
        let mut units = self.distinct_units.clone();
        units.sort_unstable();
        units
    }
}

/// Draws one snowball sample from `net`.
///
/// Seeds are chosen uniformly without replacement. Each unit newly added at
/// wave `w - 1` follows each of its eligible out-links with probability
/// `link_follow_prob`; the successful traces of a wave are admitted in
/// uniformly random order, and new units stop entering once the target size
/// is reached.
pub fn draw_sample<R: Rng + ?Sized>(
    net: &Network,
    cfg: &DesignConfig,
    rng: &mut R,
) -> Result<SampleRecord> {
    cfg.validate(net.node_count())?;
    let n_nodes = net.node_count();
    let target = cfg.target_size;
    let q = cfg.link_follow_prob;

    let mut in_sample = vec![false; n_nodes];
    let mut first_recruiter: Vec<Option<NodeId>> = vec![None; n_nodes];
    let mut events = Vec::with_capacity(target * 2);
    let mut distinct = Vec::with_capacity(target);
    let mut reseed_points = Vec::new();

    let seeds: Vec<NodeId> = index::sample(rng, n_nodes, cfg.seed_count)
        .into_iter()
        .map(NodeId::from)
        .collect();
    for &s in &seeds {
        in_sample[s.index()] = true;
        distinct.push(s);
        events.push(Event {
            recruiter: Recruiter::Seed,
            recruitee: s,
            wave: 0,
        });
    }

    let mut frontier = seeds.clone();
    let mut traces: Vec<(NodeId, NodeId)> = Vec::new();
    let mut wave = 0usize;

    while distinct.len() < target {
        if frontier.is_empty() {
            if !cfg.reseed_on_exhaustion || distinct.len() == n_nodes {
                break;
            }
            let unsampled: Vec<NodeId> = net.nodes().filter(|i| !in_sample[i.index()]).collect();
            let s = unsampled[rng.random_range(0..unsampled.len())];
            in_sample[s.index()] = true;
            distinct.push(s);
            reseed_points.push(events.len());
            events.push(Event {
                recruiter: Recruiter::Seed,
                recruitee: s,
                wave,
            });
            frontier.push(s);
            continue;
        }
        if cfg.max_waves.is_some_and(|m| wave >= m) {
            break;
        }
        wave += 1;

        traces.clear();
        for &u in &frontier {
            for &v in net.adj(u) {
                let eligible = match cfg.kind {
                    DesignKind::Regular => !in_sample[v.index()],
                    DesignKind::ReRecruit => first_recruiter[u.index()] != Some(v),
                };
                if eligible && rng.random::<f64>() < q {
                    traces.push((u, v));
                }
            }
        }
        traces.shuffle(rng);

        let mut next = Vec::new();
        for &(u, v) in &traces {
            if in_sample[v.index()] {
                // already admitted, possibly earlier in this same wave
                if cfg.kind == DesignKind::ReRecruit {
                    events.push(Event {
                        recruiter: Recruiter::Unit(u),
                        recruitee: v,
                        wave,
                    });
                }
                continue;
            }
            if distinct.len() >= target {
                continue;
            }
            in_sample[v.index()] = true;
            first_recruiter[v.index()] = Some(u);
            distinct.push(v);
            next.push(v);
            events.push(Event {
                recruiter: Recruiter::Unit(u),
                recruitee: v,
                wave,
            });
        }
        frontier = next;
    }

    let short = distinct.len() < target;
    Ok(SampleRecord {
        seeds,
        events,
        distinct_units: distinct,
        reseed_points,
        short,
    })
}

/// What a survey actually sees: the network among sampled units, their
/// reported degrees and their attribute values.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    /// Population ids of the sampled units, ascending. Position `k` here is
    /// node `k` of `sample_net`.
    pub units: Vec<NodeId>,
    pub sample_net: Network,
    pub reported_degree: Vec<usize>,
    pub values: AttributeTable,
    /// Present when the data came from a simulated draw.
    pub record: Option<SampleRecord>,
}

impl ObservedData {
    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Assembles observed data from already-loaded parts, checking that all
    /// of them describe the same units.
    pub fn from_parts(
        sample_net: Network,
        reported_degree: Vec<usize>,
        values: AttributeTable,
    ) -> Result<Self> {
        let n = sample_net.node_count();
        if reported_degree.len() != n || values.node_count() != n {
            return Err(Error::UnitMismatch(format!(
                "{n} units in the network, {} degrees, {} attribute rows",
                reported_degree.len(),
                values.node_count()
            )));
        }
        for i in sample_net.nodes() {
            let inside = sample_net.out_degree(i);
            if reported_degree[i.index()] < inside {
                return Err(Error::UnitMismatch(format!(
                    "unit `{}` reports degree {} but has {} links inside the sample",
                    sample_net.label(i),
                    reported_degree[i.index()],
                    inside
                )));
            }
        }
        Ok(ObservedData {
            units: sample_net.nodes().collect(),
            sample_net,
            reported_degree,
            values,
            record: None,
        })
    }
}

/// Builds the observed data for a record drawn from `net`.
pub fn observe(net: &Network, attrs: &AttributeTable, rec: &SampleRecord) -> Result<ObservedData> {
    if attrs.node_count() != net.node_count() {
        return Err(Error::RecordMismatch(format!(
            "attribute table has {} rows for {} nodes",
            attrs.node_count(),
            net.node_count()
        )));
    }
    let n = net.node_count();
    let mut seen = vec![false; n];
    for &u in &rec.distinct_units {
        if u.index() >= n {
            return Err(Error::RecordMismatch(format!("unit {u} outside network")));
        }
        if std::mem::replace(&mut seen[u.index()], true) {
            return Err(Error::RecordMismatch(format!("unit {u} listed twice")));
        }
    }
    for e in &rec.events {
        if e.recruitee.index() >= n || !seen[e.recruitee.index()] {
            return Err(Error::RecordMismatch(format!(
                "recruitee {} not among distinct units",
                e.recruitee
            )));
        }
        if let Recruiter::Unit(r) = e.recruiter {
            if !net.has_link(r, e.recruitee) {
                return Err(Error::RecordMismatch(format!(
                    "no link {} -> {} in network",
                    r, e.recruitee
                )));
            }
        }
    }

    let units = rec.sorted_units();
    let sample_net = net.induced_subgraph(&units)?;
    let reported_degree = units.iter().map(|&u| net.out_degree(u)).collect();
    let values = attrs.select_rows(&units);
    Ok(ObservedData {
        units,
        sample_net,
        reported_degree,
        values,
        record: Some(rec.clone()),
    })
}

/// Events CSV: `recruiter_label,recruitee_label,wave`, seeds as `SEED`.
pub fn write_events<W: Write>(net: &Network, rec: &SampleRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["recruiter_label", "recruitee_label", "wave"])?;
    for e in &rec.events {
        let recruiter = match e.recruiter {
            Recruiter::Seed => "SEED",
            Recruiter::Unit(r) => net.label(r),
        };
        w.write_record([recruiter, net.label(e.recruitee), &e.wave.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<events>", e))?;
    Ok(())
}

/// Degree CSV: `unit_label,degree`.
pub fn write_degrees<W: Write>(obs: &ObservedData, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_label", "degree"])?;
    for (i, d) in obs.reported_degree.iter().enumerate() {
        w.write_record([obs.sample_net.labels()[i].as_str(), &d.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<degrees>", e))?;
    Ok(())
}

pub fn read_degrees<R: std::io::Read>(net: &Network, reader: R) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut degrees: Vec<Option<usize>> = vec![None; net.node_count()];
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse {
                line: row,
                message: "expected `unit_label,degree`".into(),
            });
        }
        let label = &record[0];
        let id = net.id_of(label).ok_or_else(|| {
            Error::UnitMismatch(format!("degree file lists unit `{label}` absent from the sample network"))
        })?;
        let d: usize = record[1].parse().map_err(|_| Error::Cell {
            row,
            column: "degree".into(),
            message: format!("not a non-negative integer: `{}`", &record[1]),
        })?;
        if degrees[id.index()].replace(d).is_some() {
            return Err(Error::UnitMismatch(format!("unit `{label}` listed twice in degree file")));
        }
    }
    degrees
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            d.ok_or_else(|| {
                Error::UnitMismatch(format!("unit `{}` has no reported degree", net.labels()[i]))
            })
        })
        .collect()
}

/// File names used when observed data is written to or read from a directory.
pub mod files {
    pub const EVENTS: &str = "events.csv";
    pub const SAMPLE_EDGES: &str = "sample_edges.txt";
    pub const DEGREES: &str = "degrees.csv";
    pub const ATTRIBUTES: &str = "attributes.csv";
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes events, sample edge list, degrees and attribute slice into `dir`.
pub fn save_observed(net: &Network, obs: &ObservedData, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let Some(rec) = &obs.record {
        write_events(net, rec, create(&dir.join(files::EVENTS))?)?;
    }
    graph::save_edge_list(&obs.sample_net, dir.join(files::SAMPLE_EDGES))?;
    write_degrees(obs, create(&dir.join(files::DEGREES))?)?;
    graph::write_attributes(
        &obs.values,
        obs.sample_net.labels(),
        create(&dir.join(files::ATTRIBUTES))?,
    )?;
    Ok(())
}

/// Reads observed field data: sample edge list (one-way markers allowed),
/// degree CSV and optional attribute CSV. All files must describe exactly
/// the same set of units.
pub fn load_observed(edges: &Path, degrees: &Path, attributes: Option<&Path>) -> Result<ObservedData> {
    let sample_net = graph::load_edge_list(edges, true)?;
    let file = File::open(degrees).map_err(|e| Error::io(degrees, e))?;
    let reported = read_degrees(&sample_net, file)?;
    let values = match attributes {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            check_attribute_units(&sample_net, &text)?;
            graph::parse_attributes(text.as_bytes(), &sample_net, MissingPolicy::Zero)
                .map_err(|e| match e {
                    Error::UnknownLabel(l) => Error::UnitMismatch(format!(
                        "attribute file lists unit `{l}` absent from the sample network"
                    )),
                    other => other,
                })?
        }
        None => AttributeTable::new(sample_net.node_count()),
    };
    ObservedData::from_parts(sample_net, reported, values)
}

fn check_attribute_units(net: &Network, text: &str) -> Result<()> {
    let mut labels = HashSet::new();
    for line in BufReader::new(text.as_bytes()).lines().skip(1) {
        let line = line.map_err(|e| Error::io("<attributes>", e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let label = line.split(',').next().unwrap_or("").trim().to_owned();
        if net.id_of(&label).is_none() {
            return Err(Error::UnitMismatch(format!(
                "attribute file lists unit `{label}` absent from the sample network"
            )));
        }
        labels.insert(label);
    }
    if let Some(l) = net.labels().iter().find(|l| !labels.contains(*l)) {
        return Err(Error::UnitMismatch(format!("unit `{l}` has no attribute row")));
    }
    Ok(())
}

/// Recruiter of each unit's first event; `None` for seeds.
pub fn first_recruiters(rec: &SampleRecord) -> HashMap<NodeId, Option<NodeId>> {
    let mut out = HashMap::new();
    for e in &rec.events {
        out.entry(e.recruitee).or_insert(match e.recruiter {
            Recruiter::Seed => None,
            Recruiter::Unit(r) => Some(r),
        });
    }
    out
}
