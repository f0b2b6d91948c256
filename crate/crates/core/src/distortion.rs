//! Social cost and metric distortion over the candidate set.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::float;
use crate::metric::MetricInstance;

/// Social cost of every candidate and the cheapest one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    pub costs: Vec<f64>,
    pub optimum: usize,
    pub optimum_cost: f64,
    /// Distortion of the queried point, when one was given.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "float::option"
    )]
    pub distortion: Option<f64>,
}

/// Total distance from all agents to candidate `p`, summed in agent order.
pub fn social_cost(instance: &MetricInstance, p: usize) -> Result<f64> {
    instance.check_candidate(p)?;
    Ok((0..instance.n())
        .map(|i| instance.agent_to_candidate(i, p))
        .sum())
}

/// Costs of all candidates; ties for the optimum go to the lower id.
pub fn cost_profile(instance: &MetricInstance) -> CostProfile {
    let costs: Vec<f64> = (0..instance.m())
        .map(|c| social_cost(instance, c).expect("candidate in range"))
        .collect();
    let (optimum, optimum_cost) =
        costs
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (c, v)| if v < acc.1 { (c, v) } else { acc },
            );
    CostProfile {
        costs,
        optimum,
        optimum_cost,
        distortion: None,
    }
}

/// `cost(p) / min_q cost(q)` over the candidate set; `0/0` is 1 and `x/0`
/// is infinite.
pub fn distortion(instance: &MetricInstance, p: usize) -> Result<f64> {
    let cost = social_cost(instance, p)?;
    let best = cost_profile(instance).optimum_cost;
    Ok(if best == 0.0 {
        if cost == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        cost / best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Norm;

    fn split_line() -> MetricInstance {
        MetricInstance::euclidean(
            Norm::L2,
            vec![vec![0.0], vec![1.0]],
            vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn split_line_costs() {
        let inst = split_line();
        assert_eq!(social_cost(&inst, 0).unwrap(), 6.0);
        assert_eq!(social_cost(&inst, 1).unwrap(), 4.0);
        assert_eq!(distortion(&inst, 0).unwrap(), 1.5);
        assert_eq!(distortion(&inst, 1).unwrap(), 1.0);
        let profile = cost_profile(&inst);
        assert_eq!(profile.optimum, 1);
        assert_eq!(profile.optimum_cost, 4.0);
    }

    #[test]
    fn degenerate_costs() {
        let inst =
            MetricInstance::euclidean(Norm::L2, vec![vec![0.0], vec![2.5]], vec![0, 0], vec![0, 1])
                .unwrap();
        assert_eq!(social_cost(&inst, 0).unwrap(), 0.0);
        assert_eq!(distortion(&inst, 0).unwrap(), 1.0);
        assert_eq!(distortion(&inst, 1).unwrap(), f64::INFINITY);

        let one = MetricInstance::euclidean(Norm::L2, vec![vec![0.0], vec![2.5]], vec![0], vec![1])
            .unwrap();
        assert_eq!(social_cost(&one, 0).unwrap(), 2.5);
        assert!(social_cost(&one, 1).is_err());
    }
}
