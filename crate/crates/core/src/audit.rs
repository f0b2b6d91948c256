//! Exact brute-force audits: proportionality, β-plurality, and the q-core.
//!
//! Each audit returns the tight factor an outcome achieves, together with a
//! deviating group whenever the outcome is not perfectly stable.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::float;
use crate::metric::{kth_smallest, MetricInstance};
use crate::MAX_SUBSETS;

/// A deviating group and the candidates it deviates to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Agent ids of the group.
    pub agents: Vec<usize>,
    /// Candidate ids the group deviates to.
    pub targets: Vec<usize>,
    /// Each member's improvement ratio, aligned with `agents`.
    #[serde(with = "float::vec")]
    pub ratios: Vec<f64>,
}

/// Result of an audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// The tight factor: `α*` for proportionality and the core, `β*` for plurality.
    #[serde(with = "float")]
    pub factor: f64,
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// How much an agent gains by moving from distance `current` to `alternative`.
///
/// `x/0` is infinite for `x > 0`; `0/0` is zero, so an agent that is already
/// perfectly served never joins a deviation.
#[inline]
fn gain_ratio(current: f64, alternative: f64) -> f64 {
    if alternative == 0.0 {
        if current > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        current / alternative
    }
}

/// Agent ids sorted by ratio (descending), ties to the lower id.
fn order_desc(ratios: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]).then(a.cmp(&b)));
    order
}

fn check_outcome(instance: &MetricInstance, outcome: &[usize], ell: usize) -> Result<()> {
    if outcome.is_empty() {
        return invalid("outcome must contain at least one center");
    }
    instance.check_candidates(outcome)?;
    if ell == 0 || ell > instance.n() {
        return invalid(format!("ell = {ell} must lie in 1..={}", instance.n()));
    }
    Ok(())
}

/// Smallest `α` for which `outcome` satisfies `(α, ℓ)`-proportionality.
///
/// For each candidate `c` the agents' ratios `d(i, W) / d(i, c)` are sorted;
/// a group of `ℓ` agents can strictly improve by more than `α` exactly when
/// the `ℓ`-th largest ratio exceeds `α`. The factor is the largest such
/// value over all candidates, clamped below at 1. The witness lists the `ℓ`
/// agents with the largest ratios towards the worst candidate.
pub fn min_alpha_proportional(
    instance: &MetricInstance,
    outcome: &[usize],
    ell: usize,
) -> Result<AuditReport> {
    check_outcome(instance, outcome, ell)?;
    let n = instance.n();
    let served: Vec<f64> = (0..n)
        .map(|i| instance.distance_to_set(i, outcome))
        .collect();

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for c in 0..instance.m() {
        let ratios: Vec<f64> = (0..n)
            .map(|i| gain_ratio(served[i], instance.agent_to_candidate(i, c)))
            .collect();
        let mut sorted = ratios.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let value = sorted[ell - 1];
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, c, ratios));
        }
    }
    let (raw, target, ratios) = best.expect("instance has at least one candidate");
    let mut report = report_from(raw, ell, vec![target], &ratios);
    report.ell = Some(ell);
    Ok(report)
}

fn report_from(raw: f64, group: usize, targets: Vec<usize>, ratios: &[f64]) -> AuditReport {
    let factor = raw.max(1.0);
    let witness = (factor > 1.0).then(|| {
        let order = order_desc(ratios);
        let agents: Vec<usize> = order[..group].to_vec();
        Witness {
            ratios: agents.iter().map(|&i| ratios[i]).collect(),
            agents,
            targets,
        }
    });
    AuditReport {
        factor,
        witness,
        ell: None,
        q: None,
        k: None,
    }
}

/// Largest `β ≤ 1` for which candidate `p` is a β-plurality point.
///
/// Against each rival `q`, agent `i` accepts `p` at level `β` iff
/// `β·d(i,p) ≤ d(i,q)`, i.e. iff `β ≤ d(i,q)/d(i,p)` (infinite when
/// `d(i,p) = 0`). At least half the agents accept exactly when the
/// `⌈n/2⌉`-th largest ratio is at least `β`. The witness, present when the
/// factor is below 1, is the majority preferring the worst rival by more
/// than any larger `β`.
pub fn beta_plurality_value(instance: &MetricInstance, p: usize) -> Result<AuditReport> {
    instance.check_candidate(p)?;
    let n = instance.n();
    let t = n.div_ceil(2);

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for q in (0..instance.m()).filter(|&q| q != p) {
        let ratios: Vec<f64> = (0..n)
            .map(|i| {
                let dp = instance.agent_to_candidate(i, p);
                if dp == 0.0 {
                    f64::INFINITY
                } else {
                    instance.agent_to_candidate(i, q) / dp
                }
            })
            .collect();
        let mut sorted = ratios.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let value = sorted[t - 1];
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, q, ratios));
        }
    }

    let Some((raw, rival, ratios)) = best else {
        return Ok(AuditReport {
            factor: 1.0,
            witness: None,
            ell: None,
            q: None,
            k: None,
        });
    };
    let factor = raw.min(1.0);
    let witness = (factor < 1.0).then(|| {
        let agents: Vec<usize> = (0..n).filter(|&i| ratios[i] <= factor).collect();
        Witness {
            ratios: agents.iter().map(|&i| ratios[i]).collect(),
            agents,
            targets: vec![rival],
        }
    });
    Ok(AuditReport {
        factor,
        witness,
        ell: None,
        q: None,
        k: None,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return invalid(format!("beta = {beta} must lie in (0, 1]"));
    }
    Ok(())
}

/// Direct check of the β-plurality definition by exact counting.
pub fn is_beta_plurality(instance: &MetricInstance, p: usize, beta: f64) -> Result<bool> {
    instance.check_candidate(p)?;
    check_beta(beta)?;
    let n = instance.n();
    Ok((0..instance.m()).all(|q| {
        let accepting = (0..n)
            .filter(|&i| {
                beta * instance.agent_to_candidate(i, p) <= instance.agent_to_candidate(i, q)
            })
            .count();
        2 * accepting >= n
    }))
}

/// First candidate `c` toward which `ℓ` agents have `α·d(i,c) < d(i,p)`,
/// i.e. a deviation showing `{p}` violates `(α, ℓ)`-proportionality.
fn singleton_deviation(
    instance: &MetricInstance,
    p: usize,
    alpha: f64,
    ell: usize,
) -> Option<usize> {
    let n = instance.n();
    (0..instance.m()).find(|&c| {
        let deviating = (0..n)
            .filter(|&i| {
                alpha * instance.agent_to_candidate(i, c) < instance.agent_to_candidate(i, p)
            })
            .count();
        deviating >= ell
    })
}

/// Result of [`verify_equivalence`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EquivalenceCheck {
    Ok,
    Counterexample {
        beta: f64,
        plurality: bool,
        droop_proportional: bool,
        /// A candidate that a Droop-sized group prefers, if one exists.
        deviation_target: Option<usize>,
    },
}

/// Checks, for every `β` in the grid, that `p` is a β-plurality point iff
/// `{p}` satisfies `1/β`-Droop proportionality (`ℓ = ⌊n/2⌋ + 1`).
///
/// Both sides are evaluated from their definitions rather than from audit
/// factors, so the different boundary conventions (`≤` against `<`) are
/// compared as written.
pub fn verify_equivalence(
    instance: &MetricInstance,
    p: usize,
    beta_grid: &[f64],
) -> Result<EquivalenceCheck> {
    instance.check_candidate(p)?;
    let ell = instance.n() / 2 + 1;
    for &beta in beta_grid {
        check_beta(beta)?;
        let plurality = is_beta_plurality(instance, p, beta)?;
        let deviation_target = singleton_deviation(instance, p, 1.0 / beta, ell);
        let droop_proportional = deviation_target.is_none();
        if plurality != droop_proportional {
            return Ok(EquivalenceCheck::Counterexample {
                beta,
                plurality,
                droop_proportional,
                deviation_target,
            });
        }
    }
    Ok(EquivalenceCheck::Ok)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// Number of subsets of an `m`-set with size in `lo..=hi`.
pub(crate) fn subsets_in_range(m: usize, lo: usize, hi: usize) -> u128 {
    (lo..=hi).map(|s| binomial(m, s)).sum()
}

/// Smallest `α` placing `outcome` in the α-approximate ℓ-quota q-core.
///
/// Enumerates every candidate set `C'` with `q ≤ |C'| ≤ max_group_size`
/// (default `⌊n/ℓ⌋`). A group of `|C'|·ℓ` agents blocks at level `α` iff
/// each member has `α·d^q(i,C') < d^q(i,W)`, so the factor for `C'` is the
/// `(|C'|·ℓ)`-th largest ratio `d^q(i,W) / d^q(i,C')`.
pub fn min_alpha_q_core(
    instance: &MetricInstance,
    outcome: &[usize],
    ell: usize,
    q: usize,
    max_group_size: Option<usize>,
) -> Result<AuditReport> {
    check_outcome(instance, outcome, ell)?;
    if q == 0 || q > outcome.len() {
        return invalid(format!("q = {q} must lie in 1..={}", outcome.len()));
    }
    let (n, m) = (instance.n(), instance.m());
    let hi = max_group_size.unwrap_or(n / ell).min(m).min(n / ell);
    let count = if hi >= q {
        subsets_in_range(m, q, hi)
    } else {
        0
    };
    if count > MAX_SUBSETS {
        return Err(Error::EnumerationTooLarge {
            subsets: count,
            limit: MAX_SUBSETS,
        });
    }

    let served: Vec<f64> = (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = outcome
                .iter()
                .map(|&c| instance.agent_to_candidate(i, c))
                .collect();
            kth_smallest(&mut ds, q)
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut scratch = Vec::with_capacity(hi);
    for size in q..=hi {
        let group = size * ell;
        for subset in (0..m).combinations(size) {
            let ratios: Vec<f64> = (0..n)
                .map(|i| {
                    scratch.clear();
                    scratch.extend(subset.iter().map(|&c| instance.agent_to_candidate(i, c)));
                    gain_ratio(served[i], kth_smallest(&mut scratch, q))
                })
                .collect();
            let mut sorted = ratios.clone();
            sorted.sort_unstable_by(|a, b| b.total_cmp(a));
            let value = sorted[group - 1];
            if best.as_ref().is_none_or(|b| value > b.0) {
                best = Some((value, subset, ratios));
            }
        }
    }

    let mut report = match best {
        Some((raw, targets, ratios)) => {
            let group = targets.len() * ell;
            report_from(raw, group, targets, &ratios)
        }
        None => report_from(1.0, 0, Vec::new(), &[]),
    };
    report.ell = Some(ell);
    report.q = Some(q);
    Ok(report)
}

/// Re-checks a proportionality witness against the definition at level `alpha`.
pub fn replay_proportional(
    instance: &MetricInstance,
    outcome: &[usize],
    ell: usize,
    witness: &Witness,
    alpha: f64,
) -> bool {
    let [c] = witness.targets[..] else {
        return false;
    };
    witness.agents.len() >= ell
        && witness.agents.iter().all(|&i| {
            alpha * instance.agent_to_candidate(i, c) < instance.distance_to_set(i, outcome)
        })
}

/// Re-checks a q-core witness at level `alpha`.
pub fn replay_q_core(
    instance: &MetricInstance,
    outcome: &[usize],
    ell: usize,
    q: usize,
    witness: &Witness,
    alpha: f64,
) -> bool {
    let size = witness.targets.len();
    if size < q || witness.agents.len() < size * ell {
        return false;
    }
    witness.agents.iter().all(|&i| {
        let (Ok(to_targets), Ok(to_outcome)) = (
            instance.q_distance(i, &witness.targets, q),
            instance.q_distance(i, outcome, q),
        ) else {
            return false;
        };
        alpha * to_targets < to_outcome
    })
}

/// Re-checks a plurality witness: at level `beta`, the witness agents all
/// prefer the rival by more than `1/beta`, leaving fewer than half the
/// agents willing to keep `p`.
pub fn replay_plurality(instance: &MetricInstance, p: usize, witness: &Witness, beta: f64) -> bool {
    let [q] = witness.targets[..] else {
        return false;
    };
    let n = instance.n();
    let strictly_prefer =
        |i: usize| beta * instance.agent_to_candidate(i, p) > instance.agent_to_candidate(i, q);
    let accepting = (0..n).filter(|&i| !strictly_prefer(i)).count();
    witness.agents.iter().all(|&i| strictly_prefer(i)) && 2 * accepting < n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Norm;

    fn on_line(points: &[f64], agents: Vec<usize>, candidates: Vec<usize>) -> MetricInstance {
        MetricInstance::euclidean(
            Norm::L2,
            points.iter().map(|&x| vec![x]).collect(),
            agents,
            candidates,
        )
        .unwrap()
    }

    /// Four agents at 0 and six at 1; candidates at 0 and 1.
    fn split_line() -> MetricInstance {
        on_line(&[0.0, 1.0], vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1], vec![0, 1])
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(gain_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(gain_ratio(0.0, 0.0), 0.0);
        assert_eq!(gain_ratio(3.0, 2.0), 1.5);
    }

    #[test]
    fn proportional_leftover_example() {
        let inst = on_line(&[0.0, 10.0], vec![0, 0, 0, 1], vec![0, 1]);
        let r = min_alpha_proportional(&inst, &[0], 3).unwrap();
        assert_eq!(r.factor, 1.0);
        assert!(r.witness.is_none());
        assert_eq!(r.ell, Some(3));
    }

    #[test]
    fn proportional_coincident_is_one() {
        let inst = on_line(&[2.0], vec![0, 0, 0], vec![0]);
        for ell in 1..=3 {
            assert_eq!(
                min_alpha_proportional(&inst, &[0], ell).unwrap().factor,
                1.0
            );
        }
    }

    #[test]
    fn proportional_infinite_with_witness() {
        let inst = on_line(&[0.0, 1.0], vec![0, 0, 1, 1], vec![0, 1]);
        let r = min_alpha_proportional(&inst, &[0], 2).unwrap();
        assert_eq!(r.factor, f64::INFINITY);
        let w = r.witness.unwrap();
        assert_eq!(w.agents, vec![2, 3]);
        assert_eq!(w.targets, vec![1]);
        assert!(replay_proportional(&inst, &[0], 2, &w, f64::MAX));
    }

    #[test]
    fn proportional_errors() {
        let inst = split_line();
        assert!(min_alpha_proportional(&inst, &[], 2).is_err());
        assert!(min_alpha_proportional(&inst, &[0], 0).is_err());
        assert!(min_alpha_proportional(&inst, &[0], 11).is_err());
        assert!(matches!(
            min_alpha_proportional(&inst, &[5], 2),
            Err(Error::UnknownCandidate(5))
        ));
    }

    #[test]
    fn plurality_values_on_split_line() {
        let inst = split_line();
        let at_zero = beta_plurality_value(&inst, 0).unwrap();
        assert_eq!(at_zero.factor, 0.0);
        let w = at_zero.witness.unwrap();
        assert_eq!(w.agents, vec![4, 5, 6, 7, 8, 9]);
        assert_eq!(w.targets, vec![1]);
        assert!(replay_plurality(&inst, 0, &w, 1e-9));

        let at_one = beta_plurality_value(&inst, 1).unwrap();
        assert_eq!(at_one.factor, 1.0);
        assert!(at_one.witness.is_none());
    }

    #[test]
    fn plurality_single_candidate_is_one() {
        let inst = on_line(&[0.0, 4.0], vec![0, 1], vec![1]);
        assert_eq!(beta_plurality_value(&inst, 0).unwrap().factor, 1.0);
        assert!(beta_plurality_value(&inst, 1).is_err());
    }

    #[test]
    fn is_beta_plurality_examples() {
        let inst = split_line();
        assert!(is_beta_plurality(&inst, 1, 1.0).unwrap());
        for beta in [1e-6, 0.3, 1.0] {
            assert!(!is_beta_plurality(&inst, 0, beta).unwrap());
        }
        let single = on_line(&[1.0], vec![0], vec![0]);
        assert!(is_beta_plurality(&single, 0, 1.0).unwrap());
        assert!(is_beta_plurality(&inst, 1, 0.0).is_err());
        assert!(is_beta_plurality(&inst, 1, 1.5).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let inst = split_line();
        assert_eq!(
            verify_equivalence(&inst, 1, &[0.25, 0.5, 1.0]).unwrap(),
            EquivalenceCheck::Ok
        );
        assert_eq!(
            verify_equivalence(&inst, 0, &[0.01]).unwrap(),
            EquivalenceCheck::Ok
        );
        let single = on_line(&[1.0], vec![0], vec![0]);
        assert_eq!(
            verify_equivalence(&single, 0, &[1.0]).unwrap(),
            EquivalenceCheck::Ok
        );
        assert!(verify_equivalence(&inst, 0, &[0.0]).is_err());
    }

    #[test]
    fn core_with_singletons_matches_proportionality() {
        let inst = on_line(
            &[0.0, 0.4, 1.1, 2.5, 3.0, 7.0, 7.2],
            (0..7).collect(),
            vec![0, 2, 4, 5, 6],
        );
        for ell in 1..=7 {
            for w in [vec![0], vec![1, 3], vec![2, 4]] {
                let a = min_alpha_proportional(&inst, &w, ell).unwrap();
                let b = min_alpha_q_core(&inst, &w, ell, 1, Some(1)).unwrap();
                assert_eq!(a.factor.to_bits(), b.factor.to_bits());
            }
        }
    }

    #[test]
    fn core_all_coincident_is_one() {
        let inst = on_line(&[0.0, 0.0, 0.0, 5.0], vec![0, 0, 0, 0], vec![0, 1, 2, 3]);
        let r = min_alpha_q_core(&inst, &[0, 1, 2], 2, 3, None).unwrap();
        assert_eq!(r.factor, 1.0);
        assert!(r.witness.is_none());
    }

    #[test]
    fn core_errors_and_guard() {
        let inst = split_line();
        assert!(min_alpha_q_core(&inst, &[0], 2, 2, None).is_err());
        assert!(min_alpha_q_core(&inst, &[0], 2, 0, None).is_err());
        let m = 40;
        let big = on_line(
            &(0..m).map(|x| x as f64).collect::<Vec<_>>(),
            (0..m).collect(),
            (0..m).collect(),
        );
        assert!(matches!(
            min_alpha_q_core(&big, &[0], 1, 1, Some(10)),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn core_witness_replays() {
        // Two groups of three far from a single center.
        let inst = on_line(
            &[0.0, 10.0, 10.1, 10.2, 20.0, 20.1, 20.2],
            vec![1, 2, 3, 4, 5, 6],
            vec![0, 1, 4],
        );
        let r = min_alpha_q_core(&inst, &[0], 3, 1, None).unwrap();
        assert!(r.factor > 1.0);
        let w = r.witness.unwrap();
        assert!(replay_q_core(
            &inst,
            &[0],
            3,
            1,
            &w,
            r.factor * (1.0 - 1e-9)
        ));
        assert!(!replay_q_core(&inst, &[0], 3, 1, &w, r.factor));
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(40, 20), 137_846_528_820);
        assert_eq!(subsets_in_range(4, 1, 4), 15);
    }
}
