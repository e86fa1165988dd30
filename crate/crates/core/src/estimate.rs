//! Weighted mean estimators, their variance and normal-theory intervals.
//!
//! Everything here is the ratio form `sum(y/w) / sum(1/w)` with different
//! weights: estimated inclusion frequencies (the resampling estimator),
//! reported degrees (the VH baseline) or equal weights (the sample mean).

use std::fmt;
use std::io::Write;

use crate::design::ObservedData;
use crate::error::{Error, Result};
use crate::graph::{AttributeTable, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightSource {
    ResampledFrequency,
    TrueInclusion,
    Degree,
    Uniform,
}

/// Strictly positive, finite weight per sampled unit.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
    source: WeightSource,
}

impl WeightVector {
    pub fn new(w: Vec<f64>, source: WeightSource) -> Result<Self> {
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::BadWeight { index, value });
        }
        Ok(WeightVector { w, source })
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector {
            w: vec![1.0; n],
            source: WeightSource::Uniform,
        }
    }

    /// Reported degrees as weights; every degree must be at least 1.
    pub fn degrees(d: &[f64]) -> Result<Self> {
        if let Some((index, &degree)) = d.iter().enumerate().find(|(_, &v)| !(v >= 1.0)) {
            return Err(Error::DegreeBelowOne { index, degree });
        }
        WeightVector::new(d.to_vec(), WeightSource::Degree)
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn source(&self) -> WeightSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

fn check_aligned(y: &[f64], w: &WeightVector) -> Result<()> {
    if y.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: w.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// `sum(y_i / w_i) / sum(1 / w_i)`.
pub fn hajek(y: &[f64], w: &WeightVector) -> Result<f64> {
    check_aligned(y, w)?;
    let (num, den) = y
        .iter()
        .zip(w.values())
        .fold((0.0, 0.0), |(num, den), (&y, &w)| (num + y / w, den + 1.0 / w));
    Ok(num / den)
}

/// `1/(n(n-1)) * sum_i (n (y_i/w_i) / sum_j (1/w_j) - mu)^2`.
pub fn variance_hajek(y: &[f64], w: &WeightVector, mu: f64) -> Result<f64> {
    check_aligned(y, w)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let nf = n as f64;
    let den: f64 = w.values().iter().map(|&w| 1.0 / w).sum();
    let ss: f64 = y
        .iter()
        .zip(w.values())
        .map(|(&y, &w)| {
            let d = nf * (y / w) / den - mu;
            d * d
        })
        .sum();
    Ok(ss / (nf * (nf - 1.0)))
}

pub fn sample_mean(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty);
    }
    let mut sum = 0.0;
    let mut count = 0.0;
    for &v in y {
        sum += v;
        count += 1.0;
    }
    Ok(sum / count)
}

/// Degree-weighted baseline, `sum(y/d) / sum(1/d)`.
pub fn vh(y: &[f64], degrees: &[f64]) -> Result<f64> {
    hajek(y, &WeightVector::degrees(degrees)?)
}

/// Standard normal quantile, Acklam's rational approximation (relative
/// error below 1.2e-9 over the open unit interval).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// `mu +/- z_{1-alpha/2} * sqrt(variance)`.
pub fn confidence_interval(mu: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} outside (0, 1)")));
    }
    if !(variance >= 0.0) {
        return Err(Error::config(format!("negative variance {variance}")));
    }
    let half = normal_quantile(1.0 - alpha / 2.0) * variance.sqrt();
    Ok((mu - half, mu + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    /// Weighted by resampled inclusion frequencies.
    New,
    YBar,
    Vh,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::New, EstimatorKind::YBar, EstimatorKind::Vh];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::New => "NEW",
            EstimatorKind::YBar => "YBAR",
            EstimatorKind::Vh => "VH",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "new" => Ok(EstimatorKind::New),
            "ybar" | "mean" => Ok(EstimatorKind::YBar),
            "vh" => Ok(EstimatorKind::Vh),
            other => Err(Error::config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimate: f64,
    pub variance: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub n: usize,
    pub estimator: EstimatorKind,
}

impl EstimateResult {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

/// Point estimate, variance and interval for `y` under weights `w`.
pub fn estimate_with(
    y: &[f64],
    w: &WeightVector,
    alpha: f64,
    estimator: EstimatorKind,
) -> Result<EstimateResult> {
    let estimate = hajek(y, w)?;
    let variance = variance_hajek(y, w, estimate)?;
    let (ci_low, ci_high) = confidence_interval(estimate, variance, alpha)?;
    Ok(EstimateResult {
        estimate,
        variance,
        se: variance.sqrt(),
        ci_low,
        ci_high,
        alpha,
        n: y.len(),
        estimator,
    })
}

/// Runs one estimator over observed data. `frequencies` is required for
/// [`EstimatorKind::New`].
pub fn estimate_observed(
    obs: &ObservedData,
    y: &[f64],
    estimator: EstimatorKind,
    frequencies: Option<&[f64]>,
    alpha: f64,
) -> Result<EstimateResult> {
    let w = match estimator {
        EstimatorKind::New => {
            let f = frequencies
                .ok_or_else(|| Error::config("the NEW estimator needs inclusion frequencies"))?;
            WeightVector::new(f.to_vec(), WeightSource::ResampledFrequency)?
        }
        EstimatorKind::YBar => WeightVector::uniform(y.len()),
        EstimatorKind::Vh => {
            let d: Vec<f64> = obs.reported_degree.iter().map(|&d| d as f64).collect();
            WeightVector::degrees(&d)?
        }
    };
    estimate_with(y, &w, alpha, estimator)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VariableSpec {
    Attribute(String),
    Degree,
    /// Indicator of degree strictly greater than `k`.
    KConcurrency(usize),
}

impl VariableSpec {
    pub fn name(&self) -> String {
        match self {
            VariableSpec::Attribute(a) => a.clone(),
            VariableSpec::Degree => "degree".into(),
            VariableSpec::KConcurrency(k) => format!("concurrency_k{k}"),
        }
    }

    pub fn is_binary_attribute(&self, attrs: &AttributeTable) -> bool {
        match self {
            VariableSpec::Attribute(a) => attrs
                .column(a)
                .is_some_and(|c| c.kind == crate::graph::ColumnKind::Binary),
            _ => false,
        }
    }
}

impl fmt::Display for VariableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses `degree`, `kconc[:k]` (k defaults to 10) or `attr:NAME` / `NAME`.
impl std::str::FromStr for VariableSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::config("empty variable name"));
        }
        if s.eq_ignore_ascii_case("degree") {
            return Ok(VariableSpec::Degree);
        }
        if let Some(rest) = s.strip_prefix("kconc") {
            let k = match rest.strip_prefix(':') {
                Some(k) => k
                    .parse()
                    .map_err(|_| Error::config(format!("bad concurrency threshold in `{s}`")))?,
                None if rest.is_empty() => 10,
                None => return Ok(VariableSpec::Attribute(s.to_owned())),
            };
            return Ok(VariableSpec::KConcurrency(k));
        }
        Ok(VariableSpec::Attribute(
            s.strip_prefix("attr:").unwrap_or(s).to_owned(),
        ))
    }
}

fn from_degrees(degrees: impl Iterator<Item = usize>, spec: &VariableSpec) -> Vec<f64> {
    match spec {
        VariableSpec::KConcurrency(k) => degrees.map(|d| if d > *k { 1.0 } else { 0.0 }).collect(),
        _ => degrees.map(|d| d as f64).collect(),
    }
}

/// Variable values for the sampled units (degrees are the reported ones).
pub fn extract_sample(obs: &ObservedData, spec: &VariableSpec) -> Result<Vec<f64>> {
    match spec {
        VariableSpec::Attribute(name) => attribute(&obs.values, name),
        _ => Ok(from_degrees(obs.reported_degree.iter().copied(), spec)),
    }
}

/// Variable values for every node of a population.
pub fn extract_population(
    net: &Network,
    attrs: &AttributeTable,
    spec: &VariableSpec,
) -> Result<Vec<f64>> {
    match spec {
        VariableSpec::Attribute(name) => attribute(attrs, name),
        _ => Ok(from_degrees(
            net.nodes().map(|i| net.degree(i).unwrap_or(0)),
            spec,
        )),
    }
}

fn attribute(attrs: &AttributeTable, name: &str) -> Result<Vec<f64>> {
    attrs
        .column(name)
        .map(|c| c.values.clone())
        .ok_or_else(|| Error::UnknownAttribute(name.to_owned()))
}

/// CSV rows `estimator,variable,estimate,se,ci_low,ci_high,n,alpha`.
pub fn write_estimates<W: Write>(rows: &[(String, EstimateResult)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "variable", "estimate", "se", "ci_low", "ci_high", "n", "alpha"])?;
    for (variable, r) in rows {
        w.write_record([
            r.estimator.name().to_owned(),
            variable.clone(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.n.to_string(),
            r.alpha.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<estimates>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec(), WeightSource::TrueInclusion).unwrap()
    }

    #[test]
    fn hajek_examples() {
        assert!((hajek(&[1.0, 0.0, 1.0], &w(&[0.5, 0.5, 0.5])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hajek(&[2.0, 4.0], &w(&[0.2, 0.8])).unwrap(), 2.4);
        assert!((hajek(&[2.0, 4.0], &w(&[2.0, 8.0])).unwrap() - 2.4).abs() < 1e-14);
    }

    #[test]
    fn hajek_errors() {
        assert!(matches!(hajek(&[], &w(&[])), Err(Error::Empty)));
        assert!(matches!(
            WeightVector::new(vec![0.5, 0.0], WeightSource::TrueInclusion),
            Err(Error::BadWeight { index: 1, .. })
        ));
        assert!(WeightVector::new(vec![f64::NAN], WeightSource::TrueInclusion).is_err());
        assert!(matches!(
            hajek(&[1.0], &w(&[1.0, 2.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn variance_examples() {
        let v = variance_hajek(&[2.0, 4.0], &w(&[0.2, 0.8]), 2.4).unwrap();
        assert!((v - 0.64).abs() < 1e-12, "{v}");
        // y/w constant
        let y = [1.0, 2.0, 3.0];
        let ww = w(&[0.1, 0.2, 0.3]);
        let mu = hajek(&y, &ww).unwrap();
        assert!(variance_hajek(&y, &ww, mu).unwrap().abs() < 1e-24);
        // equal weights, (0, 1): ybar (1 - ybar) / (n - 1)
        let v = variance_hajek(&[0.0, 1.0], &WeightVector::uniform(2), 0.5).unwrap();
        assert_eq!(v, 0.25);
        assert!(matches!(
            variance_hajek(&[1.0], &w(&[1.0]), 1.0),
            Err(Error::TooFew { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn interval_examples() {
        let (lo, hi) = confidence_interval(2.4, 0.64, 0.05).unwrap();
        assert!((lo - 0.8320).abs() < 1e-4 && (hi - 3.9680).abs() < 1e-4, "{lo} {hi}");
        assert_eq!(confidence_interval(1.5, 0.0, 0.05).unwrap(), (1.5, 1.5));
        let z = normal_quantile(1.0 - 0.3173 / 2.0);
        assert!((z - 1.0).abs() < 1e-3, "{z}");
        assert!(confidence_interval(0.0, 1.0, 0.0).is_err());
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn quantile_matches_statrs_reference() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::standard();
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            let ours = normal_quantile(p);
            let theirs = n.inverse_cdf(p);
            assert!((ours - theirs).abs() < 1e-8, "p={p}: {ours} vs {theirs}");
        }
        for p in [1e-10, 1e-6, 0.001, 0.999, 1.0 - 1e-6] {
            let ours = normal_quantile(p);
            assert!((ours - n.inverse_cdf(p)).abs() < 1e-8 * ours.abs().max(1.0), "p={p}");
        }
    }

    #[test]
    fn baselines() {
        assert!((sample_mean(&[1.0, 0.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sample_mean(&[4.2; 7]).unwrap(), 4.2);
        assert!(sample_mean(&[]).is_err());

        let v = vh(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((v - 3.0 / 1.75).abs() < 1e-12);
        assert!((vh(&[1.0, 0.0], &[2.0, 1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(vh(&[3.0, 5.0], &[4.0, 4.0]).unwrap(), 4.0);
        assert!(matches!(
            vh(&[1.0, 1.0], &[2.0, 0.0]),
            Err(Error::DegreeBelowOne { index: 1, .. })
        ));
    }

    #[test]
    fn concurrency_is_strict() {
        let spec = VariableSpec::KConcurrency(10);
        assert_eq!(from_degrees([11, 10, 12].into_iter(), &spec), vec![1.0, 0.0, 1.0]);
        let spec = VariableSpec::KConcurrency(0);
        assert_eq!(from_degrees([1, 3, 9].into_iter(), &spec), vec![1.0; 3]);
    }

    #[test]
    fn variable_spec_parsing() {
        assert_eq!("degree".parse::<VariableSpec>().unwrap(), VariableSpec::Degree);
        assert_eq!("kconc".parse::<VariableSpec>().unwrap(), VariableSpec::KConcurrency(10));
        assert_eq!("kconc:3".parse::<VariableSpec>().unwrap(), VariableSpec::KConcurrency(3));
        assert_eq!(
            "attr:female".parse::<VariableSpec>().unwrap(),
            VariableSpec::Attribute("female".into())
        );
        assert_eq!(
            "female".parse::<VariableSpec>().unwrap(),
            VariableSpec::Attribute("female".into())
        );
    }

    #[test]
    fn unknown_attribute() {
        let attrs = AttributeTable::new(2);
        assert!(matches!(
            attribute(&attrs, "nope"),
            Err(Error::UnknownAttribute(_))
        ));
    }

    proptest! {
        #[test]
        fn variance_nonnegative_and_binary_estimates_bounded(
            cells in prop::collection::vec((0u8..2, 0.001f64..1.0), 2..40)
        ) {
            let y: Vec<f64> = cells.iter().map(|c| c.0 as f64).collect();
            let ww = w(&cells.iter().map(|c| c.1).collect::<Vec<_>>());
            let mu = hajek(&y, &ww).unwrap();
            prop_assert!((0.0..=1.0).contains(&mu));
            prop_assert!(variance_hajek(&y, &ww, mu).unwrap() >= 0.0);
        }

        #[test]
        fn interval_contains_estimate(
            cells in prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 2..30),
            alpha in 0.001f64..0.999,
        ) {
            let y: Vec<f64> = cells.iter().map(|c| c.0).collect();
            let ww = w(&cells.iter().map(|c| c.1).collect::<Vec<_>>());
            let r = estimate_with(&y, &ww, alpha, EstimatorKind::New).unwrap();
            prop_assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
            prop_assert!((r.se * r.se - r.variance).abs() <= 1e-9 * r.variance.max(1.0));
            let z = normal_quantile(1.0 - alpha / 2.0);
            prop_assert!((r.ci_width() - 2.0 * z * r.se).abs() <= 1e-9 * (1.0 + r.ci_width()));
        }
    }

    #[test]
    fn replicated_data_halves_se() {
        let y = [1.0, 0.0, 3.0, 2.5, 0.5];
        let wv = [0.3, 0.7, 0.2, 0.9, 0.5];
        let r1 = estimate_with(&y, &w(&wv), 0.05, EstimatorKind::New).unwrap();
        let y4: Vec<f64> = y.iter().cycle().take(20).copied().collect();
        let w4: Vec<f64> = wv.iter().cycle().take(20).copied().collect();
        let r4 = estimate_with(&y4, &w(&w4), 0.05, EstimatorKind::New).unwrap();
        // 1/(n(n-1)) scaling: exact halving up to (n-1) vs (4n-1)
        let expected = r1.se / 2.0 * ((5.0 - 1.0) / (20.0 - 1.0) * 4.0f64).sqrt();
        assert!((r4.se - expected).abs() < 1e-12, "{} vs {}", r4.se, expected);
        assert!((r4.se / r1.se - 0.5).abs() < 0.05);
    }
}
