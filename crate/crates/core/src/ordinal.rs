//! Rules and axioms that only see each agent's ranking of the candidates.

use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::subsets_in_range;
use crate::error::{invalid, Error, Result};
use crate::metric::{MetricInstance, Quota};
use crate::MAX_SUBSETS;

/// Strict rankings of `m` candidates by `n` agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProfileFile", into = "ProfileFile")]
pub struct OrdinalProfile {
    /// Candidate ids per agent, most preferred first.
    orders: Vec<Vec<usize>>,
    /// 1-based rank of each candidate per agent.
    ranks: Vec<Vec<usize>>,
}

/// JSON form: `{"ranks": [[most preferred, ..., least preferred], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileFile {
    pub ranks: Vec<Vec<usize>>,
}

impl TryFrom<ProfileFile> for OrdinalProfile {
    type Error = Error;

    fn try_from(file: ProfileFile) -> Result<Self> {
        OrdinalProfile::from_orders(file.ranks)
    }
}

impl From<OrdinalProfile> for ProfileFile {
    fn from(profile: OrdinalProfile) -> Self {
        ProfileFile {
            ranks: profile.orders,
        }
    }
}

impl OrdinalProfile {
    /// Builds a profile from per-agent preference orders (best first). Each
    /// order must be a permutation of `0..m`.
    pub fn from_orders(orders: Vec<Vec<usize>>) -> Result<Self> {
        let Some(first) = orders.first() else {
            return invalid("a profile needs at least one agent");
        };
        let m = first.len();
        if m == 0 {
            return invalid("a profile needs at least one candidate");
        }
        let mut ranks = Vec::with_capacity(orders.len());
        for (i, order) in orders.iter().enumerate() {
            if order.len() != m {
                return invalid(format!(
                    "agent {i} ranks {} candidates, expected {m}",
                    order.len()
                ));
            }
            let mut rank = vec![0; m];
            for (pos, &c) in order.iter().enumerate() {
                if c >= m || rank[c] != 0 {
                    return invalid(format!(
                        "agent {i}'s ranking is not a permutation of 0..{m}"
                    ));
                }
                rank[c] = pos + 1;
            }
            ranks.push(rank);
        }
        Ok(Self { orders, ranks })
    }

    pub fn n(&self) -> usize {
        self.orders.len()
    }

    pub fn m(&self) -> usize {
        self.ranks[0].len()
    }

    /// 1-based rank agent `i` gives candidate `c` (1 = most preferred).
    #[inline]
    pub fn rank(&self, i: usize, c: usize) -> usize {
        self.ranks[i][c]
    }

    /// Agent `i`'s candidates, most preferred first.
    pub fn order(&self, i: usize) -> &[usize] {
        &self.orders[i]
    }

    pub fn top(&self, i: usize) -> usize {
        self.orders[i][0]
    }

    fn check_outcome(&self, outcome: &[usize]) -> Result<()> {
        if outcome.is_empty() {
            return invalid("outcome must contain at least one candidate");
        }
        let mut seen = vec![false; self.m()];
        for &c in outcome {
            if c >= self.m() {
                return Err(Error::UnknownCandidate(c));
            }
            if std::mem::replace(&mut seen[c], true) {
                return invalid(format!("candidate {c} appears twice"));
            }
        }
        Ok(())
    }
}

/// Ranks candidates by distance for every agent; exact ties go to the
/// lower candidate id.
pub fn derive_profile(instance: &MetricInstance) -> OrdinalProfile {
    let orders = (0..instance.n())
        .map(|i| {
            let row = instance.agent_row(i);
            let mut order: Vec<usize> = (0..instance.m()).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            order
        })
        .collect();
    OrdinalProfile::from_orders(orders).expect("distance orders are permutations")
}

/// One veto: `agent` decremented `candidate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VetoEvent {
    pub agent: usize,
    pub candidate: usize,
}

/// Full record of a plurality veto run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VetoTranscript {
    pub initial_scores: Vec<usize>,
    pub vetoes: Vec<VetoEvent>,
    pub winner: usize,
}

/// Plurality veto.
///
/// Every candidate starts with its plurality score. Agents then take turns
/// in `agent_order`, each decrementing the score of the candidate they like
/// least among those whose score is still positive. The candidate hit by
/// the final veto wins.
pub fn plurality_veto(profile: &OrdinalProfile, agent_order: &[usize]) -> Result<VetoTranscript> {
    let n = profile.n();
    let mut seen = vec![false; n];
    if agent_order.len() != n
        || agent_order
            .iter()
            .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    {
        return invalid(format!("agent order must be a permutation of 0..{n}"));
    }

    let mut scores = vec![0usize; profile.m()];
    for i in 0..n {
        scores[profile.top(i)] += 1;
    }
    let initial_scores = scores.clone();

    let mut vetoes = Vec::with_capacity(n);
    for &agent in agent_order {
        // Scores sum to the number of remaining agents, so some candidate is positive.
        let candidate = *profile
            .order(agent)
            .iter()
            .rev()
            .find(|&&c| scores[c] > 0)
            .expect("a positive score remains");
        scores[candidate] -= 1;
        vetoes.push(VetoEvent { agent, candidate });
    }
    let winner = vetoes.last().expect("n >= 1").candidate;
    Ok(VetoTranscript {
        initial_scores,
        vetoes,
        winner,
    })
}

/// Which agent orders to try for plurality veto.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentOrder {
    /// Agents in id order.
    Index,
    /// `count` uniformly random permutations from a ChaCha8 stream seeded with `seed`.
    Seeded { seed: u64, count: usize },
    /// Every permutation; only allowed for `n <= 7`.
    All,
}

impl AgentOrder {
    pub const MAX_EXHAUSTIVE: usize = 7;

    pub fn orders(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        match *self {
            AgentOrder::Index => Ok(vec![(0..n).collect()]),
            AgentOrder::Seeded { seed, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count)
                    .map(|_| {
                        let mut order: Vec<usize> = (0..n).collect();
                        order.shuffle(&mut rng);
                        order
                    })
                    .collect())
            }
            AgentOrder::All => {
                if n > Self::MAX_EXHAUSTIVE {
                    return invalid(format!(
                        "exhausting all agent orders needs n <= {} (got {n})",
                        Self::MAX_EXHAUSTIVE
                    ));
                }
                Ok((0..n).permutations(n).collect())
            }
        }
    }
}

impl FromStr for AgentOrder {
    type Err = Error;

    /// `index`, `all`, `seed:S` (one permutation) or `seed:S:COUNT`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<u64> {
            t.parse()
                .map_err(|_| Error::InvalidInput(format!("bad number {t:?} in agent order {s:?}")))
        };
        match parts.as_slice() {
            ["index"] => Ok(AgentOrder::Index),
            ["all"] => Ok(AgentOrder::All),
            ["seed", seed] => Ok(AgentOrder::Seeded {
                seed: num(seed)?,
                count: 1,
            }),
            ["seed", seed, count] => Ok(AgentOrder::Seeded {
                seed: num(seed)?,
                count: num(count)? as usize,
            }),
            _ => invalid(format!(
                "agent order must be index, all, seed:S or seed:S:COUNT (got {s:?})"
            )),
        }
    }
}

/// Outcome of [`check_rank_jr`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JrOutcome {
    Satisfied,
    /// At least `ℓ` agents rank `candidate` within `rank` but rank no
    /// winner within `rank`.
    Violated {
        rank: usize,
        candidate: usize,
        group: Vec<usize>,
    },
}

impl JrOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, JrOutcome::Satisfied)
    }
}

/// Checks ℓ-rank-JR.
///
/// The axiom quantifies over every group of at least `ℓ` agents sharing a
/// candidate within rank `r`, so the relevant group for `(r, c)` is the set
/// of agents that rank `c` within `r` and no winner within `r`: it violates
/// the axiom iff it has `ℓ` or more members. Pairs are scanned by `r`, then
/// candidate id, and the first violation is returned.
pub fn check_rank_jr(profile: &OrdinalProfile, outcome: &[usize], ell: usize) -> Result<JrOutcome> {
    profile.check_outcome(outcome)?;
    if ell == 0 {
        return invalid("ell must be at least 1");
    }
    let best_winner: Vec<usize> = (0..profile.n())
        .map(|i| {
            outcome
                .iter()
                .map(|&w| profile.rank(i, w))
                .min()
                .expect("nonempty")
        })
        .collect();
    for r in 1..=profile.m() {
        for c in 0..profile.m() {
            let group: Vec<usize> = (0..profile.n())
                .filter(|&i| profile.rank(i, c) <= r && best_winner[i] > r)
                .collect();
            if group.len() >= ell {
                return Ok(JrOutcome::Violated {
                    rank: r,
                    candidate: c,
                    group,
                });
            }
        }
    }
    Ok(JrOutcome::Satisfied)
}

/// Outcome of [`check_rank_pjr`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PjrOutcome {
    Satisfied,
    /// `group` (at least `mu·ℓ` agents) ranks every member of `candidates`
    /// within `rank`, yet the winners any of them ranks within `rank` all
    /// lie in `covering`, which has fewer than `mu` members.
    Violated {
        rank: usize,
        mu: usize,
        candidates: Vec<usize>,
        covering: Vec<usize>,
        group: Vec<usize>,
    },
}

impl PjrOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, PjrOutcome::Satisfied)
    }
}

/// Checks ℓ-rank-PJR for `μ = 1..=max_mu` (default `⌊n/ℓ⌋`).
///
/// For each rank `r` and candidate set `C'` of size `μ`, let `S` be the
/// agents ranking all of `C'` within `r`. A subgroup of `S` with at least
/// `μ·ℓ` members that jointly rank fewer than `μ` winners within `r` exists
/// iff some set `T` of `min(μ−1, |W|)` winners contains the within-`r`
/// winners of at least `μ·ℓ` agents of `S`; those agents form the witness.
pub fn check_rank_pjr(
    profile: &OrdinalProfile,
    outcome: &[usize],
    ell: usize,
    max_mu: Option<usize>,
) -> Result<PjrOutcome> {
    profile.check_outcome(outcome)?;
    if ell == 0 {
        return invalid("ell must be at least 1");
    }
    let (n, m) = (profile.n(), profile.m());
    let mu_cap = n / ell;
    let max_mu = max_mu.unwrap_or(mu_cap);
    if max_mu > mu_cap {
        return invalid(format!("max_mu = {max_mu} exceeds floor(n/ell) = {mu_cap}"));
    }
    let max_mu = max_mu.min(m);
    if outcome.len() > 64 {
        return invalid("rank-PJR checks support at most 64 winners");
    }
    let count = if max_mu >= 1 {
        subsets_in_range(m, 1, max_mu)
    } else {
        0
    };
    if count > MAX_SUBSETS {
        return Err(Error::EnumerationTooLarge {
            subsets: count,
            limit: MAX_SUBSETS,
        });
    }

    for r in 1..=m {
        // Bit j set iff agent i ranks outcome[j] within r.
        let covered: Vec<u64> = (0..n)
            .map(|i| {
                outcome
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| profile.rank(i, w) <= r)
                    .fold(0u64, |acc, (j, _)| acc | (1 << j))
            })
            .collect();
        for mu in 1..=max_mu {
            let need = mu * ell;
            let cover_size = (mu - 1).min(outcome.len());
            let covers: Vec<Vec<usize>> = (0..outcome.len()).combinations(cover_size).collect();
            for subset in (0..m).combinations(mu) {
                let cohesive: Vec<usize> = (0..n)
                    .filter(|&i| subset.iter().all(|&c| profile.rank(i, c) <= r))
                    .collect();
                if cohesive.len() < need {
                    continue;
                }
                for cover in &covers {
                    let mask = cover.iter().fold(0u64, |acc, &j| acc | (1 << j));
                    let group: Vec<usize> = cohesive
                        .iter()
                        .copied()
                        .filter(|&i| covered[i] & !mask == 0)
                        .collect();
                    if group.len() >= need {
                        return Ok(PjrOutcome::Violated {
                            rank: r,
                            mu,
                            candidates: subset,
                            covering: cover.iter().map(|&j| outcome[j]).collect(),
                            group,
                        });
                    }
                }
            }
        }
    }
    Ok(PjrOutcome::Satisfied)
}

const EAR_WEIGHT_EPS: f64 = 1e-9;

/// Expanding Approvals Rule.
///
/// Agents start with weight 1. The rank threshold `r` grows from 1 to `m`;
/// at each threshold, while some unelected candidate is ranked within `r`
/// by agents of total weight at least `ℓ`, the lowest-id such candidate is
/// elected and its supporters lose `ℓ` weight in total, in proportion to
/// their current weights. At most `⌊n/ℓ⌋` candidates are elected; `k` does
/// not truncate the committee.
pub fn ear(profile: &OrdinalProfile, k: usize, quota: &Quota) -> Result<Vec<usize>> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let ell = quota.ell() as f64;
    let (n, m) = (profile.n(), profile.m());
    let mut weights = vec![1.0f64; n];
    let mut elected = vec![false; m];
    let mut winners = Vec::new();

    for r in 1..=m {
        loop {
            let pick = (0..m).filter(|&c| !elected[c]).find(|&c| {
                let support: f64 = (0..n)
                    .filter(|&i| profile.rank(i, c) <= r)
                    .map(|i| weights[i])
                    .sum();
                support >= ell - EAR_WEIGHT_EPS
            });
            let Some(c) = pick else { break };
            elected[c] = true;
            winners.push(c);
            let supporters: Vec<usize> = (0..n).filter(|&i| profile.rank(i, c) <= r).collect();
            let total: f64 = supporters.iter().map(|&i| weights[i]).sum();
            let keep = ((total - ell) / total).max(0.0);
            for i in supporters {
                weights[i] *= keep;
            }
        }
    }
    Ok(winners)
}
