//! Seeded instance generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (crate
//! `rand_chacha` 0.9). Uniform coordinates are `rng.random::<f64>()` (53-bit
//! mantissa in `[0, 1)`); cluster noise uses `rand_distr::Normal`. Draw order
//! is fixed per family and documented on [`Family`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::{MetricInstance, Norm};

/// Instance families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `n` agents uniform in `[0,1]^dim`, then `m − n` extra uniform candidates.
    EuclideanUniform,
    /// `clusters` uniform blob centers, then per agent a blob index and
    /// Gaussian noise of standard deviation `spread` per coordinate; extras
    /// are uniform.
    EuclideanClustered,
    /// Same draws as `EuclideanUniform`, stored as an explicit distance matrix.
    RandomMetric,
    /// `n/2 − 1` agents at 0 and `n/2 + 1` at 1 on a line; candidates {0, 1}.
    LinePaper,
    /// Three agents on the vertices of a unit equilateral triangle, which
    /// are also the candidates (matrix form, all distances exactly 1).
    Triangle,
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .or_else(|_| invalid(format!("unknown family {s:?}")))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = serde_json::to_value(self).expect("unit variant");
        f.write_str(text.as_str().expect("string"))
    }
}

fn default_dim() -> usize {
    2
}

fn default_norm() -> Norm {
    Norm::L2
}

fn default_clusters() -> usize {
    3
}

fn default_spread() -> f64 {
    0.05
}

/// Everything needed to reproduce an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    /// Number of candidates; defaults to `n` for the random families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_norm")]
    pub norm: Norm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
}

impl GenSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self {
            family,
            n,
            m: None,
            dim: default_dim(),
            norm: default_norm(),
            seed: 0,
            clusters: default_clusters(),
            spread: default_spread(),
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Number of candidates the generated instance will have.
    pub fn num_candidates(&self) -> usize {
        match self.family {
            Family::LinePaper => 2,
            Family::Triangle => 3,
            _ => self.m.unwrap_or(self.n),
        }
    }
}

/// Builds the instance described by `spec`. Identical specs give identical
/// instances.
pub fn generate(spec: &GenSpec) -> Result<MetricInstance> {
    let n = spec.n;
    match spec.family {
        Family::LinePaper => {
            if n < 4 || !n.is_multiple_of(2) {
                return invalid(format!("line_paper needs an even n >= 4 (got {n})"));
            }
            check_fixed_m(spec, 2)?;
            let at_zero = n / 2 - 1;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|i| vec![if i < at_zero { 0.0 } else { 1.0 }])
                .collect();
            MetricInstance::euclidean(Norm::L2, points, (0..n).collect(), vec![0, at_zero])
        }
        Family::Triangle => {
            if n != 3 {
                return invalid(format!("triangle has exactly 3 agents (got n = {n})"));
            }
            check_fixed_m(spec, 3)?;
            let matrix = (0..3)
                .map(|a| (0..3).map(|b| if a == b { 0.0 } else { 1.0 }).collect())
                .collect();
            MetricInstance::from_matrix(matrix, vec![0, 1, 2], vec![0, 1, 2])
        }
        Family::EuclideanUniform | Family::EuclideanClustered | Family::RandomMetric => {
            let m = spec.num_candidates();
            if n == 0 || m == 0 || spec.dim == 0 {
                return invalid("n, m, and dim must be positive");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut points = if spec.family == Family::EuclideanClustered {
                clustered_points(spec, &mut rng)?
            } else {
                uniform_points(n, spec.dim, &mut rng)
            };
            points.extend(uniform_points(m.saturating_sub(n), spec.dim, &mut rng));
            let agents: Vec<usize> = (0..n).collect();
            let candidates: Vec<usize> = (0..m).collect();
            let inst =
                MetricInstance::euclidean(spec.norm, points, agents.clone(), candidates.clone())?;
            if spec.family == Family::RandomMetric {
                MetricInstance::from_matrix(inst.to_matrix(), agents, candidates)
            } else {
                Ok(inst)
            }
        }
    }
}

fn check_fixed_m(spec: &GenSpec, m: usize) -> Result<()> {
    match spec.m {
        Some(given) if given != m => {
            invalid(format!("{} always has m = {m} (got {given})", spec.family))
        }
        _ => Ok(()),
    }
}

fn uniform_points(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn clustered_points(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if spec.clusters == 0 {
        return invalid("clusters must be positive");
    }
    let noise = Normal::new(0.0, spec.spread)
        .map_err(|e| crate::Error::InvalidInput(format!("spread {}: {e}", spec.spread)))?;
    let centers = uniform_points(spec.clusters, spec.dim, rng);
    Ok((0..spec.n)
        .map(|_| {
            let blob = &centers[rng.random_range(0..spec.clusters)];
            blob.iter().map(|&x| x + noise.sample(rng)).collect()
        })
        .collect())
}
