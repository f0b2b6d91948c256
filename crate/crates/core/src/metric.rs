//! Instances over finite metric spaces, metric validation, and quotas.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::EPS_METRIC;

/// Norm used to measure distances between Euclidean coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => invalid(format!("unknown norm {other:?} (expected l1, l2, linf)")),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

/// How the distances of an instance are obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Coordinates of fixed dimension, measured with `norm`.
    Euclidean { norm: Norm, points: Vec<Vec<f64>> },
    /// Explicit symmetric distance matrix over all points.
    Matrix(Vec<Vec<f64>>),
}

impl Geometry {
    pub fn num_points(&self) -> usize {
        match self {
            Geometry::Euclidean { points, .. } => points.len(),
            Geometry::Matrix(rows) => rows.len(),
        }
    }

    fn raw(&self, a: usize, b: usize) -> f64 {
        match self {
            Geometry::Euclidean { norm, points } => norm.eval(&points[a], &points[b]),
            Geometry::Matrix(rows) => rows[a][b],
        }
    }
}

/// Agents and candidates placed in a finite metric space.
///
/// Agents are a list of point ids (several agents may share a point);
/// candidates are a list of distinct point ids. Agent `i` and candidate `c`
/// below always mean positions in those lists. Agent-to-candidate distances
/// are cached at construction since every rule and audit reads them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct MetricInstance {
    geometry: Geometry,
    agents: Vec<usize>,
    candidates: Vec<usize>,
    agent_cand: Vec<f64>,
}

impl MetricInstance {
    pub fn euclidean(
        norm: Norm,
        points: Vec<Vec<f64>>,
        agents: Vec<usize>,
        candidates: Vec<usize>,
    ) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(bad) = points.iter().position(|p| p.len() != dim) {
            return invalid(format!(
                "point {bad} has dimension {}, expected {dim}",
                points[bad].len()
            ));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return invalid("coordinates must be finite");
        }
        Self::build(Geometry::Euclidean { norm, points }, agents, candidates)
    }

    /// Builds a matrix-form instance. The matrix must be square, symmetric,
    /// nonnegative, and zero on the diagonal; the triangle inequality is
    /// checked separately by [`MetricInstance::validate_metric`].
    pub fn from_matrix(
        matrix: Vec<Vec<f64>>,
        agents: Vec<usize>,
        candidates: Vec<usize>,
    ) -> Result<Self> {
        check_matrix_shape(&matrix)?;
        Self::build(Geometry::Matrix(matrix), agents, candidates)
    }

    fn build(geometry: Geometry, agents: Vec<usize>, candidates: Vec<usize>) -> Result<Self> {
        let p = geometry.num_points();
        if agents.is_empty() {
            return invalid("an instance needs at least one agent");
        }
        if candidates.is_empty() {
            return invalid("an instance needs at least one candidate");
        }
        if let Some(&bad) = agents.iter().chain(&candidates).find(|&&id| id >= p) {
            return Err(Error::UnknownPoint(bad));
        }
        let mut seen = vec![false; p];
        for &c in &candidates {
            if std::mem::replace(&mut seen[c], true) {
                return invalid(format!("point {c} listed twice as a candidate"));
            }
        }
        let agent_cand = agents
            .iter()
            .flat_map(|&a| {
                candidates
                    .iter()
                    .map(|&c| geometry.raw(a, c))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            geometry,
            agents,
            candidates,
            agent_cand,
        })
    }

    /// Number of agents `n`.
    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Number of candidates `m`.
    pub fn m(&self) -> usize {
        self.candidates.len()
    }

    pub fn num_points(&self) -> usize {
        self.geometry.num_points()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// True for coordinate instances measured with the L2 norm.
    pub fn is_l2(&self) -> bool {
        matches!(self.geometry, Geometry::Euclidean { norm: Norm::L2, .. })
    }

    /// Distance between two points of the space.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        let p = self.num_points();
        for id in [a, b] {
            if id >= p {
                return Err(Error::UnknownPoint(id));
            }
        }
        if a == b {
            return Ok(0.0);
        }
        Ok(self.geometry.raw(a, b))
    }

    /// Distance from agent `i` to candidate `c`. Panics on out-of-range ids.
    #[inline]
    pub fn agent_to_candidate(&self, i: usize, c: usize) -> f64 {
        assert!(c < self.m(), "candidate {c} out of range");
        self.agent_cand[i * self.m() + c]
    }

    /// Distances from agent `i` to every candidate, in candidate order.
    pub fn agent_row(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.agent_cand[i * m..(i + 1) * m]
    }

    pub fn agent_to_agent(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.agents[i], self.agents[j]);
        if a == b {
            0.0
        } else {
            self.geometry.raw(a, b)
        }
    }

    pub fn candidate_to_candidate(&self, c: usize, d: usize) -> f64 {
        let (a, b) = (self.candidates[c], self.candidates[d]);
        if a == b {
            0.0
        } else {
            self.geometry.raw(a, b)
        }
    }

    /// `d(i, W)`: distance from agent `i` to its closest member of `set`.
    pub fn distance_to_set(&self, i: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&c| self.agent_to_candidate(i, c))
            .fold(f64::INFINITY, f64::min)
    }

    /// `d^q(i, W)`: the q-th smallest distance from agent `i` to members of `set`.
    pub fn q_distance(&self, i: usize, set: &[usize], q: usize) -> Result<f64> {
        self.check_agent(i)?;
        self.check_candidates(set)?;
        if q == 0 || q > set.len() {
            return invalid(format!("q = {q} must lie in 1..={}", set.len()));
        }
        let mut ds: Vec<f64> = set.iter().map(|&c| self.agent_to_candidate(i, c)).collect();
        Ok(kth_smallest(&mut ds, q))
    }

    pub fn check_agent(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::UnknownAgent(i))
        }
    }

    pub fn check_candidate(&self, c: usize) -> Result<()> {
        if c < self.m() {
            Ok(())
        } else {
            Err(Error::UnknownCandidate(c))
        }
    }

    /// Checks ids are in range and pairwise distinct.
    pub fn check_candidates(&self, set: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.m()];
        for &c in set {
            self.check_candidate(c)?;
            if std::mem::replace(&mut seen[c], true) {
                return invalid(format!("candidate {c} appears twice"));
            }
        }
        Ok(())
    }

    /// Checks the metric axioms. Coordinate instances always pass.
    pub fn validate_metric(&self) -> Result<MetricCheck> {
        match &self.geometry {
            Geometry::Euclidean { .. } => Ok(MetricCheck::Ok),
            Geometry::Matrix(rows) => validate_matrix(rows),
        }
    }

    /// Full pairwise distance matrix over all points.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let p = self.num_points();
        (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| if a == b { 0.0 } else { self.geometry.raw(a, b) })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// q-th smallest (1-based) of `values`; reorders the slice.
pub(crate) fn kth_smallest(values: &mut [f64], q: usize) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values[q - 1]
}

/// Outcome of a metric-axiom check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricCheck {
    Ok,
    /// Worst triangle violation: `d(x, z) - d(x, y) - d(y, z) = slack > EPS_METRIC`.
    Violation {
        x: usize,
        y: usize,
        z: usize,
        slack: f64,
    },
}

impl MetricCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, MetricCheck::Ok)
    }
}

fn check_matrix_shape(rows: &[Vec<f64>]) -> Result<()> {
    let p = rows.len();
    if p == 0 {
        return invalid("distance matrix is empty");
    }
    for (a, row) in rows.iter().enumerate() {
        if row.len() != p {
            return invalid(format!(
                "distance matrix is not square: row {a} has {} entries, expected {p}",
                row.len()
            ));
        }
        for (b, &d) in row.iter().enumerate() {
            if !d.is_finite() || d < -EPS_METRIC {
                return invalid(format!("entry ({a},{b}) = {d} is not a nonnegative real"));
            }
        }
        if row[a].abs() > EPS_METRIC {
            return invalid(format!("diagonal entry ({a},{a}) = {} is not zero", row[a]));
        }
    }
    for (a, b) in (0..p).tuple_combinations() {
        if (rows[a][b] - rows[b][a]).abs() > EPS_METRIC {
            return invalid(format!(
                "distance matrix is asymmetric at ({a},{b}): {} vs {}",
                rows[a][b], rows[b][a]
            ));
        }
    }
    Ok(())
}

/// Validates a raw distance matrix, reporting the worst triangle violation.
///
/// Structural defects (non-square, asymmetric, negative, nonzero diagonal)
/// are input errors. Zero off-diagonal entries are accepted.
pub fn validate_matrix(rows: &[Vec<f64>]) -> Result<MetricCheck> {
    check_matrix_shape(rows)?;
    let p = rows.len();
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    for x in 0..p {
        for y in 0..p {
            for z in 0..p {
                let slack = rows[x][z] - rows[x][y] - rows[y][z];
                if slack > EPS_METRIC && worst.is_none_or(|w| slack > w.3) {
                    worst = Some((x, y, z, slack));
                }
            }
        }
    }
    Ok(match worst {
        None => MetricCheck::Ok,
        Some((x, y, z, slack)) => MetricCheck::Violation { x, y, z, slack },
    })
}

/// On-disk JSON form of an instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceFile {
    Euclidean {
        norm: Norm,
        points: Vec<Vec<f64>>,
        agents: Vec<usize>,
        candidates: Vec<usize>,
    },
    Matrix {
        matrix: Vec<Vec<f64>>,
        agents: Vec<usize>,
        candidates: Vec<usize>,
    },
}

impl TryFrom<InstanceFile> for MetricInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        match file {
            InstanceFile::Euclidean {
                norm,
                points,
                agents,
                candidates,
            } => MetricInstance::euclidean(norm, points, agents, candidates),
            InstanceFile::Matrix {
                matrix,
                agents,
                candidates,
            } => MetricInstance::from_matrix(matrix, agents, candidates),
        }
    }
}

impl From<MetricInstance> for InstanceFile {
    fn from(inst: MetricInstance) -> Self {
        match inst.geometry {
            Geometry::Euclidean { norm, points } => InstanceFile::Euclidean {
                norm,
                points,
                agents: inst.agents,
                candidates: inst.candidates,
            },
            Geometry::Matrix(matrix) => InstanceFile::Matrix {
                matrix,
                agents: inst.agents,
                candidates: inst.candidates,
            },
        }
    }
}

/// Where a quota value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuotaKind {
    Hare,
    Droop,
    Custom,
}

/// An integral group-size threshold `ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    ell: usize,
    kind: QuotaKind,
}

impl Quota {
    /// `⌈n/k⌉`.
    pub fn hare(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        Ok(Self {
            ell: n.div_ceil(k),
            kind: QuotaKind::Hare,
        })
    }

    /// `⌊n/(k+1)⌋ + 1`, the smallest integer such that removing `k` groups
    /// of that size leaves fewer than that many agents.
    pub fn droop(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        Ok(Self {
            ell: n / (k + 1) + 1,
            kind: QuotaKind::Droop,
        })
    }

    pub fn custom(ell: usize) -> Result<Self> {
        if ell == 0 {
            return invalid("quota must be at least 1");
        }
        Ok(Self {
            ell,
            kind: QuotaKind::Custom,
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn kind(&self) -> QuotaKind {
        self.kind
    }

    /// Whether `ℓ > n/(k+1)`, the condition under which at most `k` disjoint
    /// groups of size `ℓ` fit among `n` agents.
    pub fn exceeds_droop_bound(&self, n: usize, k: usize) -> bool {
        self.ell * (k + 1) > n
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 {
        return invalid(format!(
            "quota needs n >= 1 and k >= 1 (got n = {n}, k = {k})"
        ));
    }
    Ok(())
}

/// A quota rule resolved per instance: `hare`, `droop`, or a fixed integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuotaPolicy {
    Hare,
    Droop,
    Fixed(usize),
}

impl QuotaPolicy {
    pub fn resolve(self, n: usize, k: usize) -> Result<Quota> {
        match self {
            QuotaPolicy::Hare => Quota::hare(n, k),
            QuotaPolicy::Droop => Quota::droop(n, k),
            QuotaPolicy::Fixed(ell) => {
                check_nk(n, k)?;
                Quota::custom(ell)
            }
        }
    }
}

impl FromStr for QuotaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hare" => Ok(QuotaPolicy::Hare),
            "droop" => Ok(QuotaPolicy::Droop),
            other => match other.parse::<usize>() {
                Ok(ell) if ell >= 1 => Ok(QuotaPolicy::Fixed(ell)),
                _ => invalid(format!(
                    "quota must be hare, droop, or a positive integer (got {s:?})"
                )),
            },
        }
    }
}

impl fmt::Display for QuotaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuotaPolicy::Hare => f.write_str("hare"),
            QuotaPolicy::Droop => f.write_str("droop"),
            QuotaPolicy::Fixed(ell) => write!(f, "{ell}"),
        }
    }
}

impl Serialize for QuotaPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QuotaPolicy::Fixed(ell) => s.serialize_u64(*ell as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for QuotaPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(usize),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(ell) => Ok(QuotaPolicy::Fixed(ell)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
