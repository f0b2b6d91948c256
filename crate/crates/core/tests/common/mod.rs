//! Brute-force oracles that evaluate the definitions literally, by
//! enumerating agent groups instead of sorting ratios. They share no code
//! with the library's audit paths beyond distance lookups.

#![allow(dead_code)]

use itertools::Itertools;
use propclust::{MetricInstance, OrdinalProfile};

pub const BOUND_TOL: f64 = 1e-9;

fn dist_to_set(inst: &MetricInstance, i: usize, set: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &c in set {
        let d = inst.agent_to_candidate(i, c);
        if d < best {
            best = d;
        }
    }
    best
}

fn qth(inst: &MetricInstance, i: usize, set: &[usize], q: usize) -> f64 {
    let mut ds: Vec<f64> = set.iter().map(|&c| inst.agent_to_candidate(i, c)).collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ds[q - 1]
}

/// sup α over (group, c) of min_i ratio, where the ratio is the largest α
/// with α·alt < cur (∞ when alt = 0 < cur, 0 when cur = 0).
fn sup_alpha(cur: f64, alt: f64) -> f64 {
    if cur == 0.0 {
        0.0
    } else if alt == 0.0 {
        f64::INFINITY
    } else {
        cur / alt
    }
}

/// α* for (α, ℓ)-proportionality by enumerating every group of exactly ℓ
/// agents (larger groups only lower the minimum).
pub fn proportional_by_groups(inst: &MetricInstance, w: &[usize], ell: usize) -> f64 {
    let mut best: f64 = 1.0;
    for c in 0..inst.m() {
        for group in (0..inst.n()).combinations(ell) {
            let worst = group
                .iter()
                .map(|&i| sup_alpha(dist_to_set(inst, i, w), inst.agent_to_candidate(i, c)))
                .fold(f64::INFINITY, f64::min);
            best = best.max(worst);
        }
    }
    best
}

/// α* for the ℓ-quota q-core by enumerating every C' (q ≤ |C'| ≤ cap) and
/// every group of |C'|·ℓ agents.
pub fn q_core_by_groups(
    inst: &MetricInstance,
    w: &[usize],
    ell: usize,
    q: usize,
    cap: usize,
) -> f64 {
    let mut best: f64 = 1.0;
    for size in q..=cap.min(inst.m()) {
        if size * ell > inst.n() {
            break;
        }
        for targets in (0..inst.m()).combinations(size) {
            for group in (0..inst.n()).combinations(size * ell) {
                let worst = group
                    .iter()
                    .map(|&i| sup_alpha(qth(inst, i, w, q), qth(inst, i, &targets, q)))
                    .fold(f64::INFINITY, f64::min);
                best = best.max(worst);
            }
        }
    }
    best
}

/// Literal β-plurality predicate.
pub fn plurality_holds(inst: &MetricInstance, p: usize, beta: f64) -> bool {
    (0..inst.m()).all(|q| {
        let ok = (0..inst.n())
            .filter(|&i| beta * inst.agent_to_candidate(i, p) <= inst.agent_to_candidate(i, q))
            .count();
        ok as f64 >= inst.n() as f64 / 2.0
    })
}

/// Acceptance in ratio form, `β ≤ d(i,q)/d(i,p)`: the same predicate as
/// [`plurality_holds`] without the rounding of `β·d(i,p)` at the threshold.
fn plurality_holds_ratio(inst: &MetricInstance, p: usize, beta: f64) -> bool {
    (0..inst.m()).all(|q| {
        let ok = (0..inst.n())
            .filter(|&i| {
                let dp = inst.agent_to_candidate(i, p);
                dp == 0.0 || beta <= inst.agent_to_candidate(i, q) / dp
            })
            .count();
        ok as f64 >= inst.n() as f64 / 2.0
    })
}

/// β*(p): the predicate is monotone in β and can only change at ratio
/// values, so the answer is the largest critical value in (0, 1] where it
/// holds, or 0 when it holds nowhere.
pub fn plurality_by_thresholds(inst: &MetricInstance, p: usize) -> f64 {
    let mut critical = vec![1.0];
    for q in 0..inst.m() {
        for i in 0..inst.n() {
            let dp = inst.agent_to_candidate(i, p);
            if dp > 0.0 {
                let r = inst.agent_to_candidate(i, q) / dp;
                if r > 0.0 && r <= 1.0 {
                    critical.push(r);
                }
            }
        }
    }
    critical
        .into_iter()
        .filter(|&b| plurality_holds_ratio(inst, p, b))
        .fold(0.0, f64::max)
}

#[allow(clippy::needless_range_loop)]
/// Greedy capture by stepping through the distinct radii and sweeping the
/// candidates in id order at each radius.
pub fn greedy_by_radius_steps(inst: &MetricInstance, ell: usize) -> Vec<usize> {
    let (n, m) = (inst.n(), inst.m());
    let mut radii: Vec<f64> = (0..n).flat_map(|i| inst.agent_row(i).to_vec()).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let mut assigned = vec![false; n];
    let mut open = vec![false; m];
    let mut centers = Vec::new();
    for r in radii {
        for c in 0..m {
            let inside: Vec<usize> = (0..n)
                .filter(|&i| !assigned[i] && inst.agent_to_candidate(i, c) <= r)
                .collect();
            if !open[c] && inside.len() >= ell {
                open[c] = true;
                centers.push(c);
            }
            if open[c] {
                for i in inside {
                    assigned[i] = true;
                }
            }
        }
    }
    centers
}

/// Literal ℓ-rank-JR: every group of ≥ ℓ agents sharing a candidate within
/// rank r has a member ranking some winner within r.
pub fn rank_jr_by_groups(p: &OrdinalProfile, w: &[usize], ell: usize) -> bool {
    for r in 1..=p.m() {
        for size in ell..=p.n() {
            for group in (0..p.n()).combinations(size) {
                let cohesive = (0..p.m()).any(|c| group.iter().all(|&i| p.rank(i, c) <= r));
                let covered = group.iter().any(|&i| w.iter().any(|&x| p.rank(i, x) <= r));
                if cohesive && !covered {
                    return false;
                }
            }
        }
    }
    true
}

/// Literal ℓ-rank-PJR over every r, μ ≥ 1, group N' with |N'| ≥ μℓ and at
/// least μ candidates ranked within r by all of N'.
pub fn rank_pjr_by_groups(p: &OrdinalProfile, w: &[usize], ell: usize) -> bool {
    for r in 1..=p.m() {
        for size in ell..=p.n() {
            for group in (0..p.n()).combinations(size) {
                let shared = (0..p.m())
                    .filter(|&c| group.iter().all(|&i| p.rank(i, c) <= r))
                    .count();
                let covered = w
                    .iter()
                    .filter(|&&x| group.iter().any(|&i| p.rank(i, x) <= r))
                    .count();
                let max_mu = (size / ell).min(shared);
                if max_mu >= 1 && covered < max_mu {
                    return false;
                }
            }
        }
    }
    true
}

/// Every committee of size k from m candidates.
pub fn committees(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..m).combinations(k).collect()
}
