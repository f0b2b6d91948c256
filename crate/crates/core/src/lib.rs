//! Proportional clustering and plurality points over finite metric spaces.
//!
//! The crate bundles three kinds of functionality:
//!
//! - **Rules** that select centers or winners: [`greedy_capture`] (metric),
//!   [`plurality_veto`] and [`ear`] (ordinal only).
//! - **Audits** that compute the exact approximation factor an outcome
//!   achieves by brute force: [`min_alpha_proportional`],
//!   [`beta_plurality_value`], [`min_alpha_q_core`], [`distortion`], and the
//!   ordinal axioms [`check_rank_jr`] / [`check_rank_pjr`].
//! - **Harness** pieces: seeded instance [`generate`]ion and the batch
//!   [`run_experiment`] runner that certifies observed factors against the
//!   known theoretical bounds (see [`bounds`]).
//!
//! Agents and candidates are addressed by their position in the instance's
//! agent and candidate lists; both refer to points of the underlying space.

pub mod audit;
pub mod capture;
pub mod distortion;
mod error;
pub mod experiment;
pub mod float;
pub mod generate;
pub mod metric;
pub mod ordinal;

pub use audit::{
    beta_plurality_value, is_beta_plurality, min_alpha_proportional, min_alpha_q_core,
    verify_equivalence, AuditReport, EquivalenceCheck, Witness,
};
pub use capture::{greedy_capture, Clustering};
pub use distortion::{cost_profile, distortion, social_cost, CostProfile};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentRow, ExperimentTable};
pub use generate::{generate, Family, GenSpec};
pub use metric::{
    validate_matrix, MetricCheck, MetricInstance, Norm, Quota, QuotaKind, QuotaPolicy,
};
pub use ordinal::{
    check_rank_jr, check_rank_pjr, derive_profile, ear, plurality_veto, AgentOrder, JrOutcome,
    OrdinalProfile, PjrOutcome, VetoTranscript,
};

/// Absolute tolerance for triangle-inequality and symmetry checks.
pub const EPS_METRIC: f64 = 1e-9;

/// Slack added to a theoretical bound when deciding whether an audited factor passes.
pub const EPS_CMP: f64 = 1e-12;

/// Upper limit on the number of subsets any brute-force enumeration may visit.
pub const MAX_SUBSETS: u128 = 1 << 20;

/// Approximation bounds certified by the audits.
pub mod bounds {
    /// Greedy capture in general metrics: 1 + √2.
    pub fn greedy_general() -> f64 {
        1.0 + 2f64.sqrt()
    }

    /// Greedy capture under the Euclidean (L2) norm.
    pub const GREEDY_EUCLIDEAN: f64 = 2.0;

    /// Proportionality of any rank-JR outcome: 2 + √5.
    pub fn rank_jr() -> f64 {
        2.0 + 5f64.sqrt()
    }

    /// Plurality value guaranteed for the plurality veto winner: √5 − 2.
    pub fn plurality_veto() -> f64 {
        5f64.sqrt() - 2.0
    }

    /// Distortion of the plurality veto winner.
    pub const VETO_DISTORTION: f64 = 3.0;

    /// q-core factor of any rank-PJR committee: 4 + √13.
    pub fn rank_pjr_core() -> f64 {
        4.0 + 13f64.sqrt()
    }

    /// Distortion of a β-plurality point: 2/β + 1.
    pub fn plurality_distortion(beta: f64) -> f64 {
        2.0 / beta + 1.0
    }
}
