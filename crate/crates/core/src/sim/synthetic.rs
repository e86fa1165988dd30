//! Synthetic populations for simulation studies.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{AttributeTable, Network, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeModel {
    /// `mean_degree * n / 2` distinct links placed uniformly at random.
    UniformRandom { mean_degree: f64 },
    /// Expected-degree (Chung-Lu) graph with Pareto degree weights of tail
    /// exponent `exponent`, capped at `sqrt(n * mean_degree)`.
    HeavyTailed { mean_degree: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeRule {
    Bernoulli { name: String, p: f64 },
    /// Binary column whose log-odds rise by `strength` per unit of
    /// `ln(1 + degree)` above its population average.
    DegreeCorrelated { name: String, base_p: f64, strength: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub nodes: usize,
    pub degree: DegreeModel,
    pub attributes: Vec<AttributeRule>,
}

impl GeneratorSpec {
    /// Heavy-tailed benchmark population with a mid-range independent
    /// attribute and a degree-correlated one.
    pub fn benchmark(nodes: usize) -> Self {
        GeneratorSpec {
            nodes,
            degree: DegreeModel::HeavyTailed {
                mean_degree: 8.0,
                exponent: 2.2,
            },
            attributes: vec![
                AttributeRule::Bernoulli {
                    name: "trait_a".into(),
                    p: 0.4,
                },
                AttributeRule::Bernoulli {
                    name: "trait_b".into(),
                    p: 0.15,
                },
                AttributeRule::DegreeCorrelated {
                    name: "risk".into(),
                    base_p: 0.25,
                    strength: 1.0,
                },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::config("synthetic population needs at least 2 nodes"));
        }
        let mean = match self.degree {
            DegreeModel::UniformRandom { mean_degree } => mean_degree,
            DegreeModel::HeavyTailed {
                mean_degree,
                exponent,
            } => {
                if !(exponent > 2.0) {
                    return Err(Error::config("degree tail exponent must exceed 2"));
                }
                mean_degree
            }
        };
        if !(mean > 0.0 && mean <= (self.nodes - 1) as f64 / 2.0) {
            return Err(Error::config(format!(
                "mean degree {mean} infeasible for {} nodes",
                self.nodes
            )));
        }
        for rule in &self.attributes {
            let p = match rule {
                AttributeRule::Bernoulli { p, .. } => *p,
                AttributeRule::DegreeCorrelated { base_p, .. } => *base_p,
            };
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!("attribute probability {p} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

pub fn generate_synthetic_population<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<(Network, AttributeTable)> {
    spec.validate()?;
    let n = spec.nodes;
    let mut edges = match spec.degree {
        DegreeModel::UniformRandom { mean_degree } => uniform_edges(n, mean_degree, rng),
        DegreeModel::HeavyTailed {
            mean_degree,
            exponent,
        } => expected_degree_edges(n, mean_degree, exponent, rng),
    };
    attach_isolated(n, &mut edges, rng);
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let links = edges.into_iter().flat_map(|(a, b)| {
        let (a, b) = (NodeId::from(a), NodeId::from(b));
        [(a, b), (b, a)]
    });
    let net = Network::from_links(labels, links)?;

    let degree: Vec<f64> = net.nodes().map(|i| net.adj(i).len() as f64).collect();
    let log_deg: Vec<f64> = degree.iter().map(|d| d.ln_1p()).collect();
    let mean_log = log_deg.iter().sum::<f64>() / n as f64;

    let mut attrs = AttributeTable::new(n);
    for rule in &spec.attributes {
        attrs = match rule {
            AttributeRule::Bernoulli { name, p } => {
                let v = (0..n).map(|_| bernoulli(rng, *p)).collect();
                attrs.with_values(name, v)?
            }
            AttributeRule::DegreeCorrelated {
                name,
                base_p,
                strength,
            } => {
                let base = (base_p / (1.0 - base_p)).ln();
                let v = log_deg
                    .iter()
                    .map(|l| {
                        let p = 1.0 / (1.0 + (-(base + strength * (l - mean_log))).exp());
                        bernoulli(rng, p)
                    })
                    .collect();
                attrs.with_values(name, v)?
            }
        };
    }
    Ok((net, attrs))
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Links every node left without a partner to one uniformly chosen other
/// node, so every unit has degree at least 1.
fn attach_isolated<R: Rng + ?Sized>(n: usize, edges: &mut Vec<(usize, usize)>, rng: &mut R) {
    let mut touched = vec![false; n];
    for &(a, b) in edges.iter() {
        touched[a] = true;
        touched[b] = true;
    }
    for i in 0..n {
        if touched[i] {
            continue;
        }
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        edges.push((i.min(j), i.max(j)));
        touched[i] = true;
        touched[j] = true;
    }
}

fn uniform_edges<R: Rng + ?Sized>(n: usize, mean: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let target = (mean * n as f64 / 2.0).round() as usize;
    let mut seen = HashSet::with_capacity(target);
    let mut edges = Vec::with_capacity(target);
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    edges
}

fn expected_degree_edges<R: Rng + ?Sized>(
    n: usize,
    mean: f64,
    exponent: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let cap = (n as f64 * mean).sqrt();
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            u.powf(-1.0 / (exponent - 1.0))
        })
        .collect();

    // Scale the weights until the expected mean degree, sum_i (w_i - w_i^2/S)
    // over n, hits the target with every weight under the cap.
    let mut scale = mean * n as f64 / raw.iter().sum::<f64>();
    let mut w = Vec::new();
    for _ in 0..100 {
        w = raw.iter().map(|&x| (x * scale).min(cap)).collect::<Vec<f64>>();
        let s: f64 = w.iter().sum();
        let expected = w.iter().map(|&x| x - x * x / s).sum::<f64>() / n as f64;
        let ratio = mean / expected;
        if (ratio - 1.0).abs() < 1e-6 {
            break;
        }
        scale *= ratio;
    }
    let s: f64 = w.iter().sum();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = (w[i] * w[j] / s).min(1.0);
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}
