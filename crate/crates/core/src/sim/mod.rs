//! Monte Carlo evaluation of the estimators on a known population.
//!
//! Each replicate draws a field sample, estimates inclusion frequencies by
//! resampling the observed sample network, and records the NEW, YBAR and VH
//! estimates for every variable. Replicate `r` uses random stream
//! `(master_seed, r)`, and replicate results are merged in index order, so
//! the report is the same whether replicates run on one worker or many.

mod report;
pub mod stats;
pub mod synthetic;

use std::path::PathBuf;

pub use report::{MetricRow, ParabolaRow, SimulationReport, FREQ_BINS};
pub use stats::{coverage, fit_parabola, mse_decomposition, relative_efficiency, MseDecomposition, ParabolaFit};
pub use synthetic::{generate_synthetic_population, AttributeRule, DegreeModel, GeneratorSpec};

use crate::design::{draw_sample, observe, DesignConfig};
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_observed, extract_population, extract_sample, sample_mean, EstimateResult,
    EstimatorKind, VariableSpec,
};
use crate::graph::{self, AttributeTable, MissingPolicy, Network};
use crate::resample::{estimate_frequencies, ResampleConfig, ResampleMode};
use crate::rng;

/// Stream index reserved for generating a synthetic population.
const POPULATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSource {
    Files {
        edges: PathBuf,
        attributes: Option<PathBuf>,
        directed: bool,
        missing: MissingPolicy,
    },
    Synthetic(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub population: PopulationSource,
    pub design: DesignConfig,
    pub resample: ResampleConfig,
    pub variables: Vec<VariableSpec>,
    pub estimators: Vec<EstimatorKind>,
    pub n_reps: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl SimConfig {
    /// Desk-scale benchmark: 1000-node heavy-tailed population, field
    /// samples of 200 from 40 seeds at `q = 0.5`, and 5000 repeated
    /// resamples of size 70 per replicate.
    pub fn benchmark() -> Self {
        SimConfig {
            population: PopulationSource::Synthetic(GeneratorSpec::benchmark(1000)),
            design: DesignConfig {
                kind: crate::design::DesignKind::Regular,
                seed_count: 40,
                link_follow_prob: 0.5,
                target_size: 200,
                max_waves: None,
                reseed_on_exhaustion: true,
            },
            resample: ResampleConfig {
                mode: ResampleMode::Repeated,
                resamples: 5_000,
                target_size: 70,
                ..ResampleConfig::default()
            },
            variables: vec![
                VariableSpec::Degree,
                VariableSpec::KConcurrency(3),
                VariableSpec::Attribute("trait_a".into()),
                VariableSpec::Attribute("trait_b".into()),
                VariableSpec::Attribute("risk".into()),
            ],
            estimators: EstimatorKind::ALL.to_vec(),
            n_reps: 200,
            alpha: 0.05,
            master_seed: 2024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(Error::config("n_reps must be at least 2"));
        }
        if self.variables.is_empty() {
            return Err(Error::config("at least one variable is required"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("at least one estimator is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.resample.target_size > self.design.target_size {
            return Err(Error::config(format!(
                "resample size {} exceeds sample size {}",
                self.resample.target_size, self.design.target_size
            )));
        }
        Ok(())
    }

    /// Resampling configuration with the repeated-mode inner design filled
    /// in from the field design when unset.
    fn effective_resample(&self) -> ResampleConfig {
        let mut r = self.resample.clone();
        if r.mode == ResampleMode::Repeated && r.inner_design.is_none() {
            r.inner_design = Some(ResampleConfig::inner_design_like(&self.design, r.target_size));
        }
        r
    }
}

pub fn load_population(source: &PopulationSource, master_seed: u64) -> Result<(Network, AttributeTable)> {
    match source {
        PopulationSource::Files {
            edges,
            attributes,
            directed,
            missing,
        } => {
            let net = graph::load_edge_list(edges, *directed)?;
            let attrs = match attributes {
                Some(path) => graph::load_attributes(path, &net, *missing)?,
                None => AttributeTable::new(net.node_count()),
            };
            Ok((net, attrs))
        }
        PopulationSource::Synthetic(spec) => {
            generate_synthetic_population(spec, &mut rng::stream(master_seed, POPULATION_STREAM))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    /// Replicates spread over the current rayon pool.
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Everything one replicate contributes to the report.
#[derive(Debug, Clone)]
struct Replicate {
    /// `[variable][estimator]`, in configuration order.
    estimates: Vec<Vec<EstimateResult>>,
    freq_hist: [u64; FREQ_BINS],
    floored: usize,
}

pub fn run(cfg: &SimConfig) -> Result<SimulationReport> {
    run_with(cfg, Execution::default())
}

pub fn run_with(cfg: &SimConfig, exec: Execution) -> Result<SimulationReport> {
    cfg.validate()?;
    let (net, attrs) = load_population(&cfg.population, cfg.master_seed)?;
    run_on(&net, &attrs, cfg, exec)
}

/// Runs the study on an already-loaded population.
pub fn run_on(
    net: &Network,
    attrs: &AttributeTable,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<SimulationReport> {
    cfg.validate()?;
    cfg.design.validate(net.node_count())?;
    let truths = cfg
        .variables
        .iter()
        .map(|v| sample_mean(&extract_population(net, attrs, v)?))
        .collect::<Result<Vec<f64>>>()?;
    let resample = cfg.effective_resample();

    let one = |r: usize| {
        replicate(net, attrs, cfg, &resample, r).map_err(|e| Error::Replicate {
            index: r,
            source: Box::new(e),
        })
    };
    let reps: Vec<Replicate> = match exec {
        Execution::Sequential => (0..cfg.n_reps).map(one).collect::<Result<_>>()?,
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            // collect everything first so the reported failure is the lowest index
            let all: Vec<Result<Replicate>> = (0..cfg.n_reps).into_par_iter().map(one).collect();
            all.into_iter().collect::<Result<_>>()?
        }
    };

    SimulationReport::assemble(cfg, attrs, &truths, &reps)
}

fn replicate(
    net: &Network,
    attrs: &AttributeTable,
    cfg: &SimConfig,
    resample: &ResampleConfig,
    r: usize,
) -> Result<Replicate> {
    let mut rng = rng::stream(cfg.master_seed, r as u64);
    let rec = draw_sample(net, &cfg.design, &mut rng)?;
    let obs = observe(net, attrs, &rec)?;
    let needs_f = cfg.estimators.contains(&EstimatorKind::New);
    let freqs = if needs_f {
        Some(estimate_frequencies(&obs, resample, &mut rng)?)
    } else {
        None
    };

    let mut estimates = Vec::with_capacity(cfg.variables.len());
    for v in &cfg.variables {
        let y = extract_sample(&obs, v)?;
        let row = cfg
            .estimators
            .iter()
            .map(|&e| estimate_observed(&obs, &y, e, freqs.as_ref().map(|t| t.f.as_slice()), cfg.alpha))
            .collect::<Result<Vec<_>>>()?;
        estimates.push(row);
    }

    let mut freq_hist = [0u64; FREQ_BINS];
    let mut floored = 0;
    if let Some(t) = &freqs {
        for &f in &t.f {
            let bin = ((f * FREQ_BINS as f64).ceil() as usize).clamp(1, FREQ_BINS) - 1;
            freq_hist[bin] += 1;
        }
        floored = t.floored.len();
    }
    Ok(Replicate {
        estimates,
        freq_hist,
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignKind;
    use crate::graph::parse_edge_list;

    fn cycle(n: usize) -> (Network, AttributeTable) {
        let text: String = (0..n).map(|i| format!("{} {}\n", i, (i + 1) % n)).collect();
        let net = parse_edge_list(text.as_bytes(), false).unwrap();
        let y = (0..n).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let attrs = AttributeTable::new(n).with_values("y", y).unwrap();
        (net, attrs)
    }

    fn small_cfg(n: usize, reps: usize) -> SimConfig {
        SimConfig {
            population: PopulationSource::Synthetic(GeneratorSpec::benchmark(300)),
            design: DesignConfig {
                kind: DesignKind::Regular,
                seed_count: 3,
                link_follow_prob: 0.5,
                target_size: n,
                max_waves: None,
                reseed_on_exhaustion: true,
            },
            resample: ResampleConfig {
                resamples: 500,
                target_size: n / 3,
                ..ResampleConfig::default()
            },
            variables: vec![
                VariableSpec::Degree,
                VariableSpec::KConcurrency(3),
                VariableSpec::Attribute("trait_a".into()),
            ],
            estimators: EstimatorKind::ALL.to_vec(),
            n_reps: reps,
            alpha: 0.05,
            master_seed: 17,
        }
    }

    #[test]
    fn census_recovers_truth_exactly() {
        let (net, attrs) = cycle(12);
        let cfg = SimConfig {
            population: PopulationSource::Synthetic(GeneratorSpec::benchmark(12)),
            design: DesignConfig {
                kind: DesignKind::Regular,
                seed_count: 1,
                link_follow_prob: 1.0,
                target_size: 12,
                max_waves: None,
                reseed_on_exhaustion: false,
            },
            resample: ResampleConfig {
                resamples: 100,
                target_size: 12,
                ..ResampleConfig::default()
            },
            variables: vec![VariableSpec::Attribute("y".into()), VariableSpec::Degree],
            estimators: EstimatorKind::ALL.to_vec(),
            n_reps: 5,
            alpha: 0.05,
            master_seed: 1,
        };
        let report = run_on(&net, &attrs, &cfg, Execution::Sequential).unwrap();
        for row in &report.rows {
            assert_eq!(row.mean_estimate, row.truth, "{row:?}");
            assert_eq!(row.mse, 0.0);
            assert_eq!(row.coverage, 1.0);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let cfg = small_cfg(60, 6);
        let a = run_with(&cfg, Execution::Sequential).unwrap();
        let b = run_with(&cfg, Execution::default()).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_report_csv(&mut ca).unwrap();
        b.write_report_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_failure_names_index() {
        let mut cfg = small_cfg(60, 3);
        cfg.variables.push(VariableSpec::Attribute("missing".into()));
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, Error::UnknownAttribute(_)), "{err}");

        let mut cfg = small_cfg(60, 3);
        cfg.resample.target_size = 0;
        match run(&cfg).unwrap_err() {
            Error::Replicate { index, .. } => assert_eq!(index, 0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn single_replicate_rejected() {
        let cfg = small_cfg(60, 1);
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn report_invariants() {
        let cfg = small_cfg(60, 8);
        let r = run(&cfg).unwrap();
        assert_eq!(r.rows.len(), 9);
        for row in &r.rows {
            let rhs = row.variance + row.bias * row.bias;
            assert!((row.mse - rhs).abs() <= 1e-10 * row.mse.max(1e-300));
            assert!((0.0..=1.0).contains(&row.coverage));
            assert!((0.0..=1.0).contains(&row.bias_sq_share));
        }
        assert_eq!(r.parabolas.len(), 3);
        let hist_total: u64 = r.freq_hist.iter().sum();
        assert_eq!(hist_total, 8 * 60);
    }
}
