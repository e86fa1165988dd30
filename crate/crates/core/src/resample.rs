//! Inclusion-frequency estimation by resampling the observed sample network.
//!
//! A sampling design resembling the field design is run on the sample
//! network itself, many times over, and each unit's inclusion frequency
//! `f_i = (1/T) * sum_t Z_it` stands in for its unknown inclusion
//! probability. Two schemes produce the sequence of resamples:
//!
//! * [`ResampleMode::Repeated`]: independent snowball draws on the sample
//!   network, each with its own random stream.
//! * [`ResampleMode::Process`]: a Markov chain over resamples of fixed size
//!   `m`; every step traces a few links out of the current resample, removes
//!   a few members and occasionally reseeds.

use std::io::{Read, Write};

use rand::Rng;

use crate::design::{draw_sample, DesignConfig, DesignKind, ObservedData};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResampleMode {
    Process,
    Repeated,
}

impl ResampleMode {
    pub fn name(self) -> &'static str {
        match self {
            ResampleMode::Process => "process",
            ResampleMode::Repeated => "repeated",
        }
    }
}

impl std::str::FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "process" => Ok(ResampleMode::Process),
            "repeated" => Ok(ResampleMode::Repeated),
            other => Err(Error::config(format!("unknown resample mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleConfig {
    pub mode: ResampleMode,
    /// Number of resamples `T` that enter the frequencies.
    pub resamples: usize,
    /// Process steps discarded after ramp-up; `None` means `10 * m`.
    pub burn_in: Option<usize>,
    /// Target resample size `m`.
    pub target_size: usize,
    pub step_trace_count: usize,
    pub step_remove_count: usize,
    /// Per-addition probability of a uniform reseed instead of a trace.
    pub reseed_rate: f64,
    /// Design run on the sample network in repeated mode. `None` uses a
    /// single-seed regular design with full tracing and target size `m`.
    pub inner_design: Option<DesignConfig>,
    /// Lower bound applied to every frequency; `None` means `1 / (2T)`.
    pub frequency_floor: Option<f64>,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            mode: ResampleMode::Process,
            resamples: 5_000,
            burn_in: None,
            target_size: 70,
            step_trace_count: 1,
            step_remove_count: 1,
            reseed_rate: 0.05,
            inner_design: None,
            frequency_floor: None,
        }
    }
}

impl ResampleConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(10 * self.target_size)
    }

    pub fn floor(&self) -> f64 {
        self.frequency_floor
            .unwrap_or(1.0 / (2.0 * self.resamples.max(1) as f64))
    }

    /// Inner design used in repeated mode.
    pub fn inner_design(&self) -> DesignConfig {
        self.inner_design.clone().unwrap_or(DesignConfig {
            kind: DesignKind::Regular,
            seed_count: 1,
            link_follow_prob: 1.0,
            target_size: self.target_size,
            max_waves: None,
            reseed_on_exhaustion: true,
        })
    }

    /// Mirrors a field design on the sample network: same design kind and
    /// link-follow probability, seeds scaled by `m / n`, target size `m`.
    pub fn inner_design_like(field: &DesignConfig, target_size: usize) -> DesignConfig {
        let scaled = field.seed_count as f64 * target_size as f64 / field.target_size as f64;
        DesignConfig {
            kind: field.kind,
            seed_count: (scaled.round() as usize).clamp(1, target_size),
            link_follow_prob: field.link_follow_prob,
            target_size,
            max_waves: field.max_waves,
            reseed_on_exhaustion: true,
        }
    }

    pub fn validate(&self, unit_count: usize) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::config("number of resamples T must be positive"));
        }
        if self.target_size == 0 {
            return Err(Error::config("resample size must be positive"));
        }
        if self.target_size > unit_count {
            return Err(Error::config(format!(
                "resample size {} exceeds the {} sampled units",
                self.target_size, unit_count
            )));
        }
        let floor = self.floor();
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::config(format!("frequency floor {floor} outside (0, 1)")));
        }
        match self.mode {
            ResampleMode::Process => {
                if self.step_trace_count == 0 || self.step_remove_count == 0 {
                    return Err(Error::config("step trace/remove counts must be positive"));
                }
                if self.step_trace_count != self.step_remove_count {
                    return Err(Error::config(
                        "step trace count must equal step remove count",
                    ));
                }
                if !(0.0..1.0).contains(&self.reseed_rate) {
                    return Err(Error::config(format!(
                        "reseed rate {} outside [0, 1)",
                        self.reseed_rate
                    )));
                }
            }
            ResampleMode::Repeated => self.inner_design().validate(unit_count)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    /// Floored frequency per sampled unit, indexed like the sample network.
    pub f: Vec<f64>,
    /// Number of resamples containing each unit.
    pub counts: Vec<u64>,
    pub resamples_used: usize,
    /// Units whose raw frequency fell below the floor.
    pub floored: Vec<NodeId>,
    pub floor: f64,
    pub mode: ResampleMode,
}

impl FrequencyTable {
    fn from_counts(counts: Vec<u64>, resamples: usize, floor: f64, mode: ResampleMode) -> Self {
        let t = resamples as f64;
        let mut floored = Vec::new();
        let f = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let raw = c as f64 / t;
                if raw < floor {
                    floored.push(NodeId::from(i));
                    floor
                } else {
                    raw
                }
            })
            .collect();
        FrequencyTable {
            f,
            counts,
            resamples_used: resamples,
            floored,
            floor,
            mode,
        }
    }

    pub fn raw(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.resamples_used as f64
    }

    /// CSV with columns `unit_label,f,floored`.
    pub fn write_csv<W: Write>(&self, net: &Network, out: W) -> Result<()> {
        let mut is_floored = vec![false; self.f.len()];
        for u in &self.floored {
            is_floored[u.index()] = true;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["unit_label", "f", "floored"])?;
        for (i, f) in self.f.iter().enumerate() {
            w.write_record([
                net.labels()[i].as_str(),
                &f.to_string(),
                if is_floored[i] { "1" } else { "0" },
            ])?;
        }
        w.flush().map_err(|e| Error::io("<frequencies>", e))?;
        Ok(())
    }
}

/// Reads frequencies written by [`FrequencyTable::write_csv`] (or supplied
/// by the user) aligned to the units of `net`.
pub fn read_frequencies<R: Read>(net: &Network, reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut f: Vec<Option<f64>> = vec![None; net.node_count()];
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let label = record.get(0).unwrap_or("");
        let id = net.id_of(label).ok_or_else(|| {
            Error::UnitMismatch(format!(
                "frequency file lists unit `{label}` absent from the sample network"
            ))
        })?;
        let cell = record.get(1).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| Error::Cell {
            row,
            column: "f".into(),
            message: format!("not a number: `{cell}`"),
        })?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Cell {
                row,
                column: "f".into(),
                message: format!("frequency {v} outside (0, 1]"),
            });
        }
        f[id.index()] = Some(v);
    }
    f.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::UnitMismatch(format!("unit `{}` has no frequency", net.labels()[i]))
            })
        })
        .collect()
}

/// Estimates inclusion frequencies for every sampled unit.
pub fn estimate_frequencies<R: Rng + ?Sized>(
    obs: &ObservedData,
    cfg: &ResampleConfig,
    rng: &mut R,
) -> Result<FrequencyTable> {
    let units = obs.unit_count();
    if units == 0 {
        return Err(Error::Empty);
    }
    cfg.validate(units)?;
    let counts = match cfg.mode {
        ResampleMode::Repeated => repeated_counts(&obs.sample_net, cfg, rng.random())?,
        ResampleMode::Process => {
            let mut state = ResampleState::start(&obs.sample_net, cfg, rng);
            let total = cfg.burn_in() + cfg.resamples;
            while state.step < total {
                process_step(&mut state, obs, cfg, rng);
            }
            state.counts
        }
    };
    Ok(FrequencyTable::from_counts(
        counts,
        cfg.resamples,
        cfg.floor(),
        cfg.mode,
    ))
}

const DRAWS_PER_BATCH: usize = 256;

/// Draw `t` uses stream `(base_seed, t)`, so the summed counts do not depend
/// on how draws are batched or scheduled.
fn repeated_counts(net: &Network, cfg: &ResampleConfig, base_seed: u64) -> Result<Vec<u64>> {
    let inner = cfg.inner_design();
    let n = net.node_count();
    let batches = cfg.resamples.div_ceil(DRAWS_PER_BATCH);
    let batch = |b: usize| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; n];
        let end = ((b + 1) * DRAWS_PER_BATCH).min(cfg.resamples);
        for t in b * DRAWS_PER_BATCH..end {
            let mut r = rng::stream(base_seed, t as u64);
            let rec = draw_sample(net, &inner, &mut r)?;
            for u in rec.distinct_units {
                counts[u.index()] += 1;
            }
        }
        Ok(counts)
    };
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..batches)
            .into_par_iter()
            .map(batch)
            .try_reduce(|| vec![0u64; n], |a, b| Ok(add(a, b)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..batches).map(batch).try_fold(vec![0u64; n], |a, b| Ok(add(a, b?)))
    }
}

/// State of the resampling process.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleState {
    members: Vec<NodeId>,
    /// Index into `members`, or `usize::MAX` when absent.
    position: Vec<usize>,
    /// Total out-degree of the members, within the sample network.
    member_links: usize,
    pub counts: Vec<u64>,
    /// Steps taken since the resample first reached size `m`.
    pub step: usize,
    burn_in: usize,
    target: usize,
}

impl ResampleState {
    /// Starts from one uniformly chosen unit; the first steps grow the
    /// resample to size `m` without counting.
    pub fn start<R: Rng + ?Sized>(net: &Network, cfg: &ResampleConfig, rng: &mut R) -> Self {
        let n = net.node_count();
        let mut state = ResampleState {
            members: Vec::with_capacity(cfg.target_size + cfg.step_trace_count),
            position: vec![usize::MAX; n],
            member_links: 0,
            counts: vec![0; n],
            step: 0,
            burn_in: cfg.burn_in(),
            target: cfg.target_size,
        };
        let first = NodeId::from(rng.random_range(0..n));
        state.insert(net, first);
        state
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.position[u.index()] != usize::MAX
    }

    fn insert(&mut self, net: &Network, u: NodeId) {
        debug_assert!(!self.contains(u));
        self.position[u.index()] = self.members.len();
        self.members.push(u);
        self.member_links += net.out_degree(u);
    }

    fn remove_at(&mut self, net: &Network, k: usize) {
        let u = self.members.swap_remove(k);
        self.position[u.index()] = usize::MAX;
        if let Some(&moved) = self.members.get(k) {
            self.position[moved.index()] = k;
        }
        self.member_links -= net.out_degree(u);
    }

    fn ramping(&self) -> bool {
        self.members.len() < self.target
    }

    /// Uniform unit outside the resample; the caller guarantees one exists.
    fn outside_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        let n = self.position.len();
        loop {
            let u = NodeId::from(rng.random_range(0..n));
            if !self.contains(u) {
                return u;
            }
        }
    }

    /// Uniformly random link from a member to a non-member, if any exists.
    /// Rejection from all member out-links first, exact enumeration after.
    fn outward_link<R: Rng + ?Sized>(&self, net: &Network, rng: &mut R) -> Option<NodeId> {
        const TRIES: usize = 16;
        if self.member_links == 0 {
            return None;
        }
        for _ in 0..TRIES {
            let mut r = rng.random_range(0..self.member_links);
            for &u in &self.members {
                let adj = net.adj(u);
                if r < adj.len() {
                    let v = adj[r];
                    if !self.contains(v) {
                        return Some(v);
                    }
                    break;
                }
                r -= adj.len();
            }
        }
        let outward: Vec<NodeId> = self
            .members
            .iter()
            .flat_map(|&u| net.adj(u).iter().copied())
            .filter(|&v| !self.contains(v))
            .collect();
        if outward.is_empty() {
            None
        } else {
            Some(outward[rng.random_range(0..outward.len())])
        }
    }
}

/// One transition of the resampling process.
///
/// Additions come first: `step_trace_count` times, follow a uniformly random
/// link leading out of the resample, or reseed uniformly among outside units
/// when no such link exists or with probability `reseed_rate`. Removals then
/// take uniformly random members back down to size `m`, at most
/// `step_remove_count` of them; while the resample is still growing toward
/// `m` nothing is removed. Once past burn-in, every unit in the resulting
/// resample has its counter incremented.
pub fn process_step<R: Rng + ?Sized>(
    state: &mut ResampleState,
    obs: &ObservedData,
    cfg: &ResampleConfig,
    rng: &mut R,
) {
    let net = &obs.sample_net;
    let units = net.node_count();
    let ramping = state.ramping();

    for _ in 0..cfg.step_trace_count {
        if state.members.len() == units || (ramping && !state.ramping()) {
            break;
        }
        let reseed = rng.random::<f64>() < cfg.reseed_rate;
        let next = if reseed {
            None
        } else {
            state.outward_link(net, rng)
        };
        let u = next.unwrap_or_else(|| state.outside_unit(rng));
        state.insert(net, u);
    }

    if !ramping {
        let excess = state.members.len().saturating_sub(state.target);
        for _ in 0..excess.min(cfg.step_remove_count) {
            let k = rng.random_range(0..state.members.len());
            state.remove_at(net, k);
        }
        state.step += 1;
        if state.step > state.burn_in {
            for &u in &state.members {
                state.counts[u.index()] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::ObservedData;
    use crate::graph::tests::net;
    use crate::graph::AttributeTable;
    use crate::rng::stream;

    fn observed(text: &str) -> ObservedData {
        let g = net(text);
        let n = g.node_count();
        let d = g.nodes().map(|i| g.degree(i).unwrap()).collect();
        ObservedData::from_parts(g, d, AttributeTable::new(n)).unwrap()
    }

    fn repeated(m: usize, t: usize) -> ResampleConfig {
        ResampleConfig {
            mode: ResampleMode::Repeated,
            resamples: t,
            target_size: m,
            inner_design: Some(DesignConfig {
                kind: DesignKind::Regular,
                seed_count: 1,
                link_follow_prob: 1.0,
                target_size: m,
                max_waves: Some(1),
                reseed_on_exhaustion: false,
            }),
            ..ResampleConfig::default()
        }
    }

    #[test]
    fn membership_arithmetic() {
        // sequence (1, 0, 1, 1)
        let t = FrequencyTable::from_counts(vec![3], 4, 1.0 / 8.0, ResampleMode::Repeated);
        assert_eq!(t.f, vec![0.75]);
        assert!(t.floored.is_empty());
        let t = FrequencyTable::from_counts(vec![0, 4], 4, 1.0 / 8.0, ResampleMode::Repeated);
        assert_eq!(t.f, vec![0.125, 1.0]);
        assert_eq!(t.floored, vec![NodeId(0)]);
    }

    #[test]
    fn triangle_always_fully_covered() {
        let obs = observed("a b\nb c\nc a\n");
        let t = estimate_frequencies(&obs, &repeated(3, 500), &mut stream(1, 0)).unwrap();
        assert_eq!(t.f, vec![1.0; 3]);
    }

    #[test]
    fn path_converges_to_enumerated_probabilities() {
        let obs = observed("a b\nb c\n");
        let t = 60_000;
        let tab = estimate_frequencies(&obs, &repeated(3, t), &mut stream(2, 0)).unwrap();
        for (i, pi) in [2.0 / 3.0, 1.0, 2.0 / 3.0].into_iter().enumerate() {
            let tol = 3.0 * (pi * (1.0 - pi) / t as f64).sqrt();
            assert!((tab.raw(i) - pi).abs() <= tol, "unit {i}: {} vs {pi}", tab.raw(i));
        }
    }

    #[test]
    fn repeated_is_deterministic() {
        let obs = observed("a b\nb c\nc d\nd e\ne a\na c\n");
        let mut cfg = repeated(4, 3000);
        cfg.inner_design.as_mut().unwrap().link_follow_prob = 0.5;
        cfg.inner_design.as_mut().unwrap().max_waves = None;
        let a = estimate_frequencies(&obs, &cfg, &mut stream(8, 0)).unwrap();
        let b = estimate_frequencies(&obs, &cfg, &mut stream(8, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_process_keeps_full_size() {
        let obs = observed("a b\nb c\nc d\n");
        let cfg = ResampleConfig {
            resamples: 200,
            target_size: 4,
            ..ResampleConfig::default()
        };
        let mut rng = stream(3, 0);
        let mut state = ResampleState::start(&obs.sample_net, &cfg, &mut rng);
        while state.ramping() {
            process_step(&mut state, &obs, &cfg, &mut rng);
        }
        for _ in 0..100 {
            process_step(&mut state, &obs, &cfg, &mut rng);
            assert_eq!(state.members().len(), 4);
        }
    }

    #[test]
    fn single_unit_sample() {
        let obs = observed("solo\n");
        let cfg = ResampleConfig {
            resamples: 50,
            target_size: 1,
            ..ResampleConfig::default()
        };
        let t = estimate_frequencies(&obs, &cfg, &mut stream(4, 0)).unwrap();
        assert_eq!(t.f, vec![1.0]);
        assert_eq!(t.counts, vec![50]);
    }

    #[test]
    fn process_counting_identity_and_size() {
        let obs = observed("a b\nb c\nc d\nd a\nd e\ne f\nf g\ng e\nh i\n");
        let cfg = ResampleConfig {
            resamples: 2000,
            target_size: 4,
            burn_in: Some(30),
            ..ResampleConfig::default()
        };
        let t = estimate_frequencies(&obs, &cfg, &mut stream(5, 0)).unwrap();
        // every counted resample has exactly m members
        assert_eq!(t.counts.iter().sum::<u64>(), 2000 * 4);
        assert!(t.counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn ramp_up_never_removes_and_never_overshoots() {
        let obs = observed("a b\na c\na d\na e\na f\n");
        let cfg = ResampleConfig {
            resamples: 10,
            target_size: 3,
            step_trace_count: 2,
            step_remove_count: 2,
            ..ResampleConfig::default()
        };
        let mut rng = stream(6, 0);
        let mut state = ResampleState::start(&obs.sample_net, &cfg, &mut rng);
        let mut last = 1;
        while state.ramping() {
            process_step(&mut state, &obs, &cfg, &mut rng);
            assert!(state.members().len() >= last);
            assert!(state.members().len() <= 3);
            last = state.members().len();
        }
        assert_eq!(state.step, 0);
        for _ in 0..50 {
            process_step(&mut state, &obs, &cfg, &mut rng);
            assert_eq!(state.members().len(), 3);
        }
    }

    #[test]
    fn config_errors() {
        let obs = observed("a b\n");
        let mut cfg = ResampleConfig {
            target_size: 3,
            ..ResampleConfig::default()
        };
        assert!(estimate_frequencies(&obs, &cfg, &mut stream(0, 0)).is_err());
        cfg.target_size = 2;
        cfg.resamples = 0;
        assert!(estimate_frequencies(&obs, &cfg, &mut stream(0, 0)).is_err());
        cfg.resamples = 10;
        cfg.step_remove_count = 2;
        assert!(estimate_frequencies(&obs, &cfg, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn frequency_csv_round_trip() {
        let obs = observed("a b\nb c\n");
        let t = FrequencyTable::from_counts(vec![1, 4, 0], 4, 0.125, ResampleMode::Process);
        let mut out = Vec::new();
        t.write_csv(&obs.sample_net, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "unit_label,f,floored\na,0.25,0\nb,1,0\nc,0.125,1\n"
        );
        assert_eq!(read_frequencies(&obs.sample_net, out.as_slice()).unwrap(), t.f);
    }
}
