//! Greedy capture: grow a ball around every candidate at the same rate and
//! open a center as soon as its ball holds `ℓ` unassigned agents.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::float;
use crate::metric::{MetricInstance, Quota};

/// Centers chosen by a clustering rule together with an agent assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Candidate ids in opening order.
    pub centers: Vec<usize>,
    /// Center (candidate id) serving each agent.
    pub assignment: Vec<usize>,
    /// Ball radius at which each center opened, aligned with `centers`.
    #[serde(with = "float::vec")]
    pub opening_radii: Vec<f64>,
    /// Set when no ball ever reached the quota and a single covering center
    /// was opened instead.
    #[serde(default)]
    pub covering_fallback: bool,
}

struct CaptureState {
    assignment: Vec<Option<usize>>,
    reached: Vec<Vec<usize>>,
    reached_by: Vec<Vec<usize>>,
    /// Unassigned agents inside each candidate's current ball.
    pending: Vec<usize>,
    unassigned: usize,
}

impl CaptureState {
    fn assign(&mut self, agent: usize, center: usize) {
        debug_assert!(self.assignment[agent].is_none());
        self.assignment[agent] = Some(center);
        self.unassigned -= 1;
        for &c in &self.reached_by[agent] {
            self.pending[c] -= 1;
        }
    }
}

/// Runs greedy capture with quota `ℓ = quota.ell()`.
///
/// Ball growth is simulated on the sorted agent–candidate distances. Events
/// at equal radius are taken in (radius, candidate, agent) order, so when
/// several candidates reach the quota at once the lower index opens first.
/// Agents still unassigned when all events are exhausted (fewer than `ℓ`
/// of them) join their nearest open center. At most `⌊n/ℓ⌋` centers open,
/// which is at most `k` whenever `ℓ > n/(k+1)`; `k` itself does not cap the
/// result.
pub fn greedy_capture(instance: &MetricInstance, k: usize, quota: &Quota) -> Result<Clustering> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let ell = quota.ell();
    if ell == 0 {
        return invalid("quota must be at least 1");
    }
    let (n, m) = (instance.n(), instance.m());

    let mut events: Vec<(f64, usize, usize)> = Vec::with_capacity(n * m);
    for i in 0..n {
        for (c, &d) in instance.agent_row(i).iter().enumerate() {
            events.push((d, c, i));
        }
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut state = CaptureState {
        assignment: vec![None; n],
        reached: vec![Vec::new(); m],
        reached_by: vec![Vec::new(); n],
        pending: vec![0; m],
        unassigned: n,
    };
    let mut open = vec![false; m];
    let mut centers = Vec::new();
    let mut opening_radii = Vec::new();

    for &(radius, c, i) in &events {
        if state.unassigned == 0 {
            break;
        }
        state.reached[c].push(i);
        state.reached_by[i].push(c);
        if state.assignment[i].is_none() {
            state.pending[c] += 1;
        }
        if open[c] {
            if state.assignment[i].is_none() {
                state.assign(i, c);
            }
        } else if state.pending[c] >= ell {
            open[c] = true;
            centers.push(c);
            opening_radii.push(radius);
            let inside = std::mem::take(&mut state.reached[c]);
            for &j in &inside {
                if state.assignment[j].is_none() {
                    state.assign(j, c);
                }
            }
            state.reached[c] = inside;
        }
    }

    let mut covering_fallback = false;
    if centers.is_empty() {
        // ℓ > n: nothing can open, so cover everyone from the candidate with
        // the smallest enclosing radius.
        let (best, radius) = (0..m)
            .map(|c| {
                let r = (0..n)
                    .map(|i| instance.agent_to_candidate(i, c))
                    .fold(0.0, f64::max);
                (c, r)
            })
            .fold(
                (0, f64::INFINITY),
                |acc, cur| if cur.1 < acc.1 { cur } else { acc },
            );
        centers.push(best);
        opening_radii.push(radius);
        covering_fallback = true;
    }

    let assignment = state
        .assignment
        .iter()
        .enumerate()
        .map(|(i, a)| a.unwrap_or_else(|| nearest(instance, i, &centers)))
        .collect();

    Ok(Clustering {
        centers,
        assignment,
        opening_radii,
        covering_fallback,
    })
}

/// Nearest member of `centers`, ties to the lower candidate id.
fn nearest(instance: &MetricInstance, i: usize, centers: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &c in centers {
        let d = instance.agent_to_candidate(i, c);
        if d < best.0 || (d == best.0 && c < best.1) {
            best = (d, c);
        }
    }
    best.1
}
