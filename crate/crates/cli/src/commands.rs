use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use snowball_core::design::{self, draw_sample, observe, DesignConfig, ObservedData};
use snowball_core::estimate::{
    estimate_observed, extract_sample, write_estimates, EstimatorKind, VariableSpec,
};
use snowball_core::graph::{self, AttributeTable, MissingPolicy};
use snowball_core::resample::{estimate_frequencies, read_frequencies, ResampleConfig};
use snowball_core::rng;
use snowball_core::sim::{self, DegreeModel, PopulationSource, SimConfig};
use snowball_core::spatial::{self, grid_to_network, SpatialRule};

use crate::config::{parse_list, ConfigFile};
use crate::{
    Command, Common, DesignArgs, PopulationArgs, ReportArgs, ResampleArgs, SampleInput,
    SyntheticArgs, GLOBAL_KEYS,
};

pub const DEFAULT_SEED: u64 = 2024;

const POPULATION_KEYS: &[&str] = &["edges", "attributes", "directed", "missing"];
const SYNTHETIC_KEYS: &[&str] = &["nodes", "mean-degree", "exponent"];
const DESIGN_KEYS: &[&str] = &["design", "n", "q", "seeds", "max-waves", "reseed"];
const RESAMPLE_KEYS: &[&str] = &[
    "mode",
    "T",
    "resample-size",
    "burn-in",
    "reseed-rate",
    "freq-floor",
    "step-trace",
    "step-remove",
];
const INPUT_KEYS: &[&str] = &["sample-dir"];
const REPORT_KEYS: &[&str] = &["variables", "estimators", "alpha"];

pub fn dispatch(command: Command, file: &ConfigFile, common: &Common) -> Result<()> {
    match command {
        Command::Sample { population, design } => {
            file.check_keys(&[GLOBAL_KEYS, POPULATION_KEYS, DESIGN_KEYS])?;
            sample(file, common, &population, &design)
        }
        Command::Resample { input, resample } => {
            file.check_keys(&[GLOBAL_KEYS, INPUT_KEYS, RESAMPLE_KEYS])?;
            resample_cmd(file, common, &input, &resample)
        }
        Command::Estimate {
            input,
            freqs,
            resample,
            report,
        } => {
            file.check_keys(&[GLOBAL_KEYS, INPUT_KEYS, &["freqs"], RESAMPLE_KEYS, REPORT_KEYS])?;
            estimate(file, common, &input, freqs, &resample, &report)
        }
        Command::Simulate {
            population,
            synthetic,
            design,
            resample,
            report,
            reps,
        } => {
            file.check_keys(&[
                GLOBAL_KEYS,
                POPULATION_KEYS,
                SYNTHETIC_KEYS,
                DESIGN_KEYS,
                RESAMPLE_KEYS,
                REPORT_KEYS,
                &["reps"],
            ])?;
            simulate(file, common, &population, &synthetic, &design, &resample, &report, reps)
        }
        Command::Spatial {
            grid,
            adjacency,
            threshold,
        } => {
            file.check_keys(&[GLOBAL_KEYS, &["grid", "adjacency", "threshold"]])?;
            let grid = file
                .pick(grid, "grid")?
                .ok_or_else(|| anyhow!("a grid file is required (--grid)"))?;
            let mut rule = SpatialRule::default();
            if let Some(a) = file.pick(adjacency, "adjacency")? {
                rule.adjacency = a;
            }
            if let Some(c) = file.pick(threshold, "threshold")? {
                rule.occupancy_threshold = c;
            }
            spatial_cmd(common, &grid, &rule)
        }
    }
}

impl DesignArgs {
    fn resolve(&self, file: &ConfigFile, mut cfg: DesignConfig) -> Result<DesignConfig> {
        if let Some(k) = file.pick(self.design, "design")? {
            cfg.kind = k;
        }
        if let Some(n) = file.pick(self.n, "n")? {
            cfg.target_size = n;
        }
        if let Some(q) = file.pick(self.q, "q")? {
            cfg.link_follow_prob = q;
        }
        if let Some(s) = file.pick(self.seeds, "seeds")? {
            cfg.seed_count = s;
        }
        if let Some(w) = file.pick(self.max_waves, "max-waves")? {
            cfg.max_waves = Some(w);
        }
        let reseed = if self.no_reseed { Some(false) } else { file.get("reseed")? };
        if let Some(r) = reseed {
            cfg.reseed_on_exhaustion = r;
        }
        Ok(cfg)
    }
}

impl ResampleArgs {
    fn resolve(&self, file: &ConfigFile, mut cfg: ResampleConfig) -> Result<ResampleConfig> {
        if let Some(m) = file.pick(self.mode, "mode")? {
            cfg.mode = m;
        }
        if let Some(t) = file.pick(self.resamples, "T")? {
            cfg.resamples = t;
        }
        if let Some(m) = file.pick(self.resample_size, "resample-size")? {
            cfg.target_size = m;
        }
        if let Some(b) = file.pick(self.burn_in, "burn-in")? {
            cfg.burn_in = Some(b);
        }
        if let Some(e) = file.pick(self.reseed_rate, "reseed-rate")? {
            cfg.reseed_rate = e;
        }
        if let Some(f) = file.pick(self.freq_floor, "freq-floor")? {
            cfg.frequency_floor = Some(f);
        }
        if let Some(k) = file.pick(self.step_trace, "step-trace")? {
            cfg.step_trace_count = k;
        }
        if let Some(k) = file.pick(self.step_remove, "step-remove")? {
            cfg.step_remove_count = k;
        }
        Ok(cfg)
    }
}

struct PopulationFiles {
    edges: PathBuf,
    attributes: Option<PathBuf>,
    directed: bool,
    missing: MissingPolicy,
}

impl PopulationArgs {
    fn resolve(&self, file: &ConfigFile) -> Result<Option<PopulationFiles>> {
        let edges = file.pick(self.edges.clone(), "edges")?;
        let attributes = file.pick(self.attributes.clone(), "attributes")?;
        let directed = file.switch(self.directed, "directed")?.unwrap_or(false);
        let missing = file.pick(self.missing, "missing")?.unwrap_or_default();
        Ok(edges.map(|edges| PopulationFiles {
            edges,
            attributes,
            directed,
            missing,
        }))
    }
}

impl ReportArgs {
    fn estimators(&self, file: &ConfigFile) -> Result<Option<Vec<EstimatorKind>>> {
        file.pick::<String>(self.estimators.clone(), "estimators")?
            .map(|s| parse_list(&s).context("--estimators"))
            .transpose()
    }

    fn variables(&self, file: &ConfigFile) -> Result<Option<Vec<VariableSpec>>> {
        file.pick::<String>(self.variables.clone(), "variables")?
            .map(|s| parse_list(&s).context("--variables"))
            .transpose()
    }

    fn alpha(&self, file: &ConfigFile) -> Result<Option<f64>> {
        file.pick(self.alpha, "alpha")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

fn sample(
    file: &ConfigFile,
    common: &Common,
    population: &PopulationArgs,
    design: &DesignArgs,
) -> Result<()> {
    let pop = population
        .resolve(file)?
        .ok_or_else(|| anyhow!("a population edge list is required (--edges)"))?;
    let net = graph::load_edge_list(&pop.edges, pop.directed)?;
    let attrs = match &pop.attributes {
        Some(path) => graph::load_attributes(path, &net, pop.missing)?,
        None => AttributeTable::new(net.node_count()),
    };
    let cfg = design.resolve(file, DesignConfig::default())?;
    let rec = draw_sample(&net, &cfg, &mut rng::stream(common.seed, 0))?;
    if rec.short {
        eprintln!(
            "warning: sample stopped at {} of {} units",
            rec.distinct_units.len(),
            cfg.target_size
        );
    }
    let obs = observe(&net, &attrs, &rec)?;
    design::save_observed(&net, &obs, &common.out_dir)?;
    println!(
        "sampled {} units in {} events -> {}",
        obs.unit_count(),
        rec.events.len(),
        common.out_dir.display()
    );
    Ok(())
}

fn load_sample(input: &SampleInput, file: &ConfigFile) -> Result<ObservedData> {
    let dir = file
        .pick(input.sample_dir.clone(), "sample-dir")?
        .unwrap_or_else(|| PathBuf::from("."));
    let attrs = dir.join(design::files::ATTRIBUTES);
    let obs = design::load_observed(
        &dir.join(design::files::SAMPLE_EDGES),
        &dir.join(design::files::DEGREES),
        attrs.exists().then_some(attrs.as_path()),
    )?;
    Ok(obs)
}

fn resample_cmd(
    file: &ConfigFile,
    common: &Common,
    input: &SampleInput,
    args: &ResampleArgs,
) -> Result<()> {
    let obs = load_sample(input, file)?;
    let cfg = args.resolve(file, ResampleConfig::default())?;
    let table = estimate_frequencies(&obs, &cfg, &mut rng::stream(common.seed, 0))?;
    std::fs::create_dir_all(&common.out_dir)
        .with_context(|| format!("creating {}", common.out_dir.display()))?;
    let path = common.out_dir.join("frequencies.csv");
    table.write_csv(&obs.sample_net, create(&path)?)?;
    if !table.floored.is_empty() {
        eprintln!(
            "warning: {} units below the floor {}; consider a larger T",
            table.floored.len(),
            table.floor
        );
    }
    println!("{} frequencies -> {}", table.f.len(), path.display());
    Ok(())
}

fn estimate(
    file: &ConfigFile,
    common: &Common,
    input: &SampleInput,
    freqs: Option<PathBuf>,
    resample: &ResampleArgs,
    report: &ReportArgs,
) -> Result<()> {
    let obs = load_sample(input, file)?;
    let estimators = report
        .estimators(file)?
        .unwrap_or_else(|| EstimatorKind::ALL.to_vec());
    let variables = match report.variables(file)? {
        Some(v) => v,
        None => std::iter::once(VariableSpec::Degree)
            .chain(
                obs.values
                    .columns()
                    .iter()
                    .map(|c| VariableSpec::Attribute(c.name.clone())),
            )
            .collect(),
    };
    let alpha = report.alpha(file)?.unwrap_or(0.05);

    let f = if !estimators.contains(&EstimatorKind::New) {
        None
    } else if let Some(path) = file.pick(freqs, "freqs")? {
        let reader = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        Some(read_frequencies(&obs.sample_net, reader)?)
    } else {
        let cfg = resample.resolve(file, ResampleConfig::default())?;
        Some(estimate_frequencies(&obs, &cfg, &mut rng::stream(common.seed, 0))?.f)
    };

    let mut rows = Vec::new();
    for v in &variables {
        let y = extract_sample(&obs, v)?;
        for &e in &estimators {
            let r = estimate_observed(&obs, &y, e, f.as_deref(), alpha)
                .with_context(|| format!("{} for `{}`", e.name(), v.name()))?;
            println!(
                "{:<5} {:<20} {:>12.6} (se {:.6}, ci {:.6} .. {:.6})",
                e.name(),
                v.name(),
                r.estimate,
                r.se,
                r.ci_low,
                r.ci_high
            );
            rows.push((v.name(), r));
        }
    }
    std::fs::create_dir_all(&common.out_dir)
        .with_context(|| format!("creating {}", common.out_dir.display()))?;
    write_estimates(&rows, create(&common.out_dir.join("estimates.csv"))?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    file: &ConfigFile,
    common: &Common,
    population: &PopulationArgs,
    synthetic: &SyntheticArgs,
    design: &DesignArgs,
    resample: &ResampleArgs,
    report: &ReportArgs,
    reps: Option<usize>,
) -> Result<()> {
    let mut cfg = SimConfig::benchmark();
    cfg.master_seed = common.seed;
    if let Some(pop) = population.resolve(file)? {
        cfg.population = PopulationSource::Files {
            edges: pop.edges,
            attributes: pop.attributes,
            directed: pop.directed,
            missing: pop.missing,
        };
        // the benchmark attribute names only exist in the synthetic population
        cfg.variables = vec![VariableSpec::Degree, VariableSpec::KConcurrency(3)];
    } else if let PopulationSource::Synthetic(spec) = &mut cfg.population {
        if let Some(n) = file.pick(synthetic.nodes, "nodes")? {
            spec.nodes = n;
        }
        if let DegreeModel::HeavyTailed {
            mean_degree,
            exponent,
        } = &mut spec.degree
        {
            if let Some(m) = file.pick(synthetic.mean_degree, "mean-degree")? {
                *mean_degree = m;
            }
            if let Some(e) = file.pick(synthetic.exponent, "exponent")? {
                *exponent = e;
            }
        }
    }
    cfg.design = design.resolve(file, cfg.design)?;
    cfg.resample = resample.resolve(file, cfg.resample)?;
    if let Some(v) = report.variables(file)? {
        cfg.variables = v;
    }
    if let Some(e) = report.estimators(file)? {
        cfg.estimators = e;
    }
    if let Some(a) = report.alpha(file)? {
        cfg.alpha = a;
    }
    if let Some(r) = file.pick(reps, "reps")? {
        cfg.n_reps = r;
    }

    let result = sim::run(&cfg)?;
    result.write_all(&common.out_dir)?;
    print!("{}", result.summary_table());
    Ok(())
}

fn spatial_cmd(common: &Common, grid_path: &Path, rule: &SpatialRule) -> Result<()> {
    let reader = File::open(grid_path).with_context(|| format!("opening {}", grid_path.display()))?;
    let grid = spatial::parse_grid(reader).with_context(|| format!("in {}", grid_path.display()))?;
    let (net, counts) = grid_to_network(&grid, rule)?;
    std::fs::create_dir_all(&common.out_dir)
        .with_context(|| format!("creating {}", common.out_dir.display()))?;
    graph::save_edge_list(&net, common.out_dir.join("edges.txt"))?;
    graph::write_attributes(&counts, net.labels(), create(&common.out_dir.join("counts.csv"))?)?;
    println!(
        "{} plots, {} links -> {}",
        net.node_count(),
        net.link_count(),
        common.out_dir.display()
    );
    Ok(())
}
