use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::stats::{coverage, fit_parabola, mse_decomposition, ParabolaFit};
use super::{Replicate, SimConfig};
use crate::error::{Error, Result};
use crate::estimate::EstimatorKind;
use crate::graph::AttributeTable;

/// Equal-width bins over (0, 1] for the inclusion-frequency histogram.
pub const FREQ_BINS: usize = 20;

/// Accuracy summary for one (variable, estimator) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub variable: String,
    pub estimator: EstimatorKind,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub bias_sq_share: f64,
    /// Average estimated standard error.
    pub expected_se: f64,
    pub mean_ci_width: f64,
    pub coverage: f64,
    /// `mse / mse(NEW)` for the same variable; `None` when NEW is absent or
    /// has zero MSE.
    pub relative_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaRow {
    pub estimator: EstimatorKind,
    pub fit: ParabolaFit,
    /// Variable name per fitted point, complements suffixed with `!`.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub rows: Vec<MetricRow>,
    pub parabolas: Vec<ParabolaRow>,
    pub freq_hist: [u64; FREQ_BINS],
    pub floored_total: usize,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl SimulationReport {
    pub(super) fn assemble(
        cfg: &SimConfig,
        attrs: &AttributeTable,
        truths: &[f64],
        reps: &[Replicate],
    ) -> Result<Self> {
        let mut rows = Vec::new();
        for (vi, var) in cfg.variables.iter().enumerate() {
            let truth = truths[vi];
            let mut var_rows = Vec::new();
            for (ei, &estimator) in cfg.estimators.iter().enumerate() {
                let results: Vec<_> = reps.iter().map(|r| &r.estimates[vi][ei]).collect();
                let estimates: Vec<f64> = results.iter().map(|r| r.estimate).collect();
                let intervals: Vec<(f64, f64)> =
                    results.iter().map(|r| (r.ci_low, r.ci_high)).collect();
                let d = mse_decomposition(&estimates, truth)?;
                let k = results.len() as f64;
                var_rows.push(MetricRow {
                    variable: var.name(),
                    estimator,
                    truth,
                    mean_estimate: estimates.iter().sum::<f64>() / k,
                    bias: d.bias,
                    variance: d.variance,
                    mse: d.mse,
                    bias_sq_share: d.bias_sq_share,
                    expected_se: results.iter().map(|r| r.se).sum::<f64>() / k,
                    mean_ci_width: results.iter().map(|r| r.ci_width()).sum::<f64>() / k,
                    coverage: coverage(&intervals, truth)?,
                    relative_efficiency: None,
                });
            }
            let new_mse = var_rows
                .iter()
                .find(|r| r.estimator == EstimatorKind::New)
                .map(|r| r.mse);
            if let Some(m) = new_mse.filter(|&m| m > 0.0) {
                for r in &mut var_rows {
                    r.relative_efficiency = Some(r.mse / m);
                }
            }
            rows.extend(var_rows);
        }

        let binary: Vec<usize> = cfg
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary_attribute(attrs))
            .map(|(i, _)| i)
            .collect();
        let mut parabolas = Vec::new();
        if !binary.is_empty() {
            for &estimator in &cfg.estimators {
                let selected: Vec<&MetricRow> = binary
                    .iter()
                    .map(|&vi| {
                        rows.iter()
                            .find(|r| r.estimator == estimator && r.variable == cfg.variables[vi].name())
                            .expect("row exists for every variable and estimator")
                    })
                    .collect();
                let points: Vec<(f64, f64)> = selected.iter().map(|r| (r.truth, r.mse)).collect();
                if let Ok(fit) = fit_parabola(&points, true) {
                    let mut labels: Vec<String> = selected.iter().map(|r| r.variable.clone()).collect();
                    labels.extend(selected.iter().map(|r| format!("{}!", r.variable)));
                    parabolas.push(ParabolaRow {
                        estimator,
                        fit,
                        labels,
                    });
                }
            }
        }

        let mut freq_hist = [0u64; FREQ_BINS];
        for r in reps {
            for (acc, c) in freq_hist.iter_mut().zip(r.freq_hist) {
                *acc += c;
            }
        }
        Ok(SimulationReport {
            rows,
            parabolas,
            freq_hist,
            floored_total: reps.iter().map(|r| r.floored).sum(),
            n_reps: cfg.n_reps,
            master_seed: cfg.master_seed,
        })
    }

    pub fn row(&self, variable: &str, estimator: EstimatorKind) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.variable == variable && r.estimator == estimator)
    }

    pub fn parabola(&self, estimator: EstimatorKind) -> Option<&ParabolaRow> {
        self.parabolas.iter().find(|p| p.estimator == estimator)
    }

    pub fn write_report_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variable",
            "estimator",
            "truth",
            "mean_estimate",
            "bias",
            "variance",
            "mse",
            "bias_sq_share",
            "expected_se",
            "mean_ci_width",
            "coverage",
            "relative_efficiency",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.variable.clone(),
                r.estimator.name().to_owned(),
                r.truth.to_string(),
                r.mean_estimate.to_string(),
                r.bias.to_string(),
                r.variance.to_string(),
                r.mse.to_string(),
                r.bias_sq_share.to_string(),
                r.expected_se.to_string(),
                r.mean_ci_width.to_string(),
                r.coverage.to_string(),
                r.relative_efficiency.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("report.csv", e))?;
        Ok(())
    }

    /// Coverage table (`name,actual,E.se,width,coverage`) for the NEW
    /// estimator, or the first configured estimator when NEW was not run.
    pub fn write_coverage_csv<W: Write>(&self, out: W) -> Result<()> {
        let which = if self.rows.iter().any(|r| r.estimator == EstimatorKind::New) {
            EstimatorKind::New
        } else {
            self.rows.first().map_or(EstimatorKind::New, |r| r.estimator)
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "actual", "E.se", "width", "coverage"])?;
        for r in self.rows.iter().filter(|r| r.estimator == which) {
            w.write_record([
                r.variable.clone(),
                r.truth.to_string(),
                r.expected_se.to_string(),
                r.mean_ci_width.to_string(),
                r.coverage.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("coverage.csv", e))?;
        Ok(())
    }

    /// `p,mse,estimator,variable,a`, one row per fitted point.
    pub fn write_parabola_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "mse", "estimator", "variable", "a"])?;
        for row in &self.parabolas {
            for ((p, mse), label) in row.fit.points.iter().zip(&row.labels) {
                w.write_record([
                    p.to_string(),
                    mse.to_string(),
                    row.estimator.name().to_owned(),
                    label.clone(),
                    row.fit.a.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("parabola.csv", e))?;
        Ok(())
    }

    /// `bin_low,bin_high,count` over all replicates and sampled units.
    pub fn write_freq_hist_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in self.freq_hist.iter().enumerate() {
            w.write_record([
                (i as f64 / FREQ_BINS as f64).to_string(),
                ((i + 1) as f64 / FREQ_BINS as f64).to_string(),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("freq_hist.csv", e))?;
        Ok(())
    }

    /// Writes `report.csv`, `coverage.csv`, `parabola.csv` and `freq_hist.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| Error::io(path, e))
        };
        self.write_report_csv(open("report.csv")?)?;
        self.write_coverage_csv(open("coverage.csv")?)?;
        self.write_parabola_csv(open("parabola.csv")?)?;
        self.write_freq_hist_csv(open("freq_hist.csv")?)?;
        Ok(())
    }

    /// Fixed-width summary for terminal output.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:<5} {:>10} {:>11} {:>11} {:>7} {:>8} {:>8}",
            "variable", "est", "truth", "bias", "mse", "bias^2", "coverage", "mse/NEW"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<20} {:<5} {:>10.4} {:>11.4e} {:>11.4e} {:>7.3} {:>8.3} {:>8}",
                r.variable,
                r.estimator.name(),
                r.truth,
                r.bias,
                r.mse,
                r.bias_sq_share,
                r.coverage,
                r.relative_efficiency
                    .map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
            );
        }
        for p in &self.parabolas {
            let _ = writeln!(s, "parabola a[{}] = {:.6}", p.estimator, p.fit.a);
        }
        let _ = writeln!(
            s,
            "replicates: {}, master seed: {}, floored frequencies: {}",
            self.n_reps, self.master_seed, self.floored_total
        );
        s
    }
}
