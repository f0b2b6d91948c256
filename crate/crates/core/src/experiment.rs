//! Batch experiments: generate instances, run rules, audit the outcomes, and
//! compare every audited factor with the bound that applies to it.
//!
//! Output rows have the fixed columns
//! `family,n,m,k,ell,seed,rule,audit,factor,bound,pass,witness_json`.
//! Rows appear in config order (instance, then rule, then k, then quota)
//! regardless of how many worker threads computed them. Summary rows, with
//! `family = "summary"`, close the table: one per (audit, bound) pair, holding
//! the worst factor observed against that bound.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::audit::{
    beta_plurality_value, min_alpha_proportional, min_alpha_q_core, verify_equivalence,
    EquivalenceCheck,
};
use crate::capture::greedy_capture;
use crate::distortion::distortion;
use crate::error::{invalid, Result};
use crate::float;
use crate::generate::{generate, Family, GenSpec};
use crate::metric::{MetricInstance, Norm, QuotaPolicy};
use crate::ordinal::{
    check_rank_jr, check_rank_pjr, derive_profile, ear, plurality_veto, AgentOrder,
};
use crate::{bounds, EPS_CMP};

/// Rules an experiment can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    GreedyCapture,
    Ear,
    PluralityVeto,
    /// Treats every candidate as a single-point outcome.
    AllCandidates,
}

impl Rule {
    fn name(self) -> &'static str {
        match self {
            Rule::GreedyCapture => "greedy_capture",
            Rule::Ear => "ear",
            Rule::PluralityVeto => "plurality_veto",
            Rule::AllCandidates => "all_candidates",
        }
    }
}

/// Audits an experiment can request. Audits that do not apply to a rule
/// are skipped for that rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// `α*` of a committee (greedy capture, EAR).
    Proportionality,
    /// Committee size against `k` (greedy capture, EAR).
    Size,
    /// ℓ-rank-JR of a committee: factor 0 when satisfied, 1 when violated.
    RankJr,
    /// ℓ-rank-PJR of a committee, encoded like `rank_jr`.
    RankPjr,
    /// q-core factor for every `q` in `core_q` (greedy capture, EAR).
    Core,
    /// `β*` of a single winner (plurality veto, all candidates).
    Plurality,
    /// Distortion of a single winner (plurality veto, all candidates).
    Distortion,
    /// Plurality/Droop equivalence on the β grid (all candidates): 0 ok, 1 counterexample.
    Equivalence,
}

/// Contiguous seed block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    #[serde(default)]
    pub start: u64,
    pub count: u64,
}

fn default_dim() -> usize {
    2
}

fn default_norm() -> Norm {
    Norm::L2
}

/// A grid of generator specs: every combination of `n`, `m` and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub family: Family,
    pub n: Vec<usize>,
    /// Candidate counts; omitted means `m = n`.
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_norm")]
    pub norm: Norm,
    pub seeds: SeedRange,
}

impl Sweep {
    fn expand(&self) -> Vec<GenSpec> {
        let ms: Vec<Option<usize>> = if self.m.is_empty() {
            vec![None]
        } else {
            self.m.iter().copied().map(Some).collect()
        };
        let mut specs = Vec::new();
        for &n in &self.n {
            for &m in &ms {
                for seed in self.seeds.start..self.seeds.start + self.seeds.count {
                    let mut spec = GenSpec::new(self.family, n)
                        .with_seed(seed)
                        .with_dim(self.dim)
                        .with_norm(self.norm);
                    spec.m = m;
                    specs.push(spec);
                }
            }
        }
        specs
    }
}

fn default_ks() -> Vec<usize> {
    vec![1]
}

fn default_quotas() -> Vec<QuotaPolicy> {
    vec![QuotaPolicy::Droop]
}

fn default_core_q() -> Vec<usize> {
    vec![1]
}

fn default_order() -> AgentOrder {
    AgentOrder::Index
}

/// A full experiment description; together with the crate version it
/// determines every output byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Explicit instances, run before the sweeps.
    #[serde(default)]
    pub instances: Vec<GenSpec>,
    #[serde(default)]
    pub sweeps: Vec<Sweep>,
    pub rules: Vec<Rule>,
    /// Committee sizes for greedy capture and EAR.
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    #[serde(default = "default_quotas")]
    pub quotas: Vec<QuotaPolicy>,
    /// Audits to run; empty means every audit applicable to each rule.
    #[serde(default)]
    pub audits: Vec<AuditKind>,
    #[serde(default = "default_core_q")]
    pub core_q: Vec<usize>,
    #[serde(default = "default_order")]
    pub veto_order: AgentOrder,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every instance spec, in run order.
    pub fn specs(&self) -> Vec<GenSpec> {
        let mut specs = self.instances.clone();
        for sweep in &self.sweeps {
            specs.extend(sweep.expand());
        }
        specs
    }

    fn wants(&self, audit: AuditKind) -> bool {
        self.audits.is_empty() || self.audits.contains(&audit)
    }
}

/// Which way a bound constrains the factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Pass iff `factor ≤ bound + ε`.
    Upper,
    /// Pass iff `factor ≥ bound − ε`.
    Lower,
}

/// One audited outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub family: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub ell: Option<usize>,
    pub seed: Option<u64>,
    pub rule: String,
    pub audit: String,
    #[serde(with = "float")]
    pub factor: f64,
    #[serde(with = "float::option")]
    pub bound: Option<f64>,
    /// Name of the bound (`1+sqrt2`, `sqrt5-2`, ...), used to group summaries.
    pub bound_name: Option<String>,
    pub bound_kind: BoundKind,
    pub pass: bool,
    pub witness_json: String,
}

/// Rows plus per-bound summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<ExperimentRow>,
}

pub const CSV_HEADER: [&str; 12] = [
    "family",
    "n",
    "m",
    "k",
    "ell",
    "seed",
    "rule",
    "audit",
    "factor",
    "bound",
    "pass",
    "witness_json",
];

impl ExperimentTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExperimentRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(CSV_HEADER)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for row in self.rows.iter().chain(&self.summary) {
            writer.write_record([
                row.family.clone(),
                opt(row.n.map(|v| v.to_string())),
                opt(row.m.map(|v| v.to_string())),
                opt(row.k.map(|v| v.to_string())),
                opt(row.ell.map(|v| v.to_string())),
                opt(row.seed.map(|v| v.to_string())),
                row.rule.clone(),
                row.audit.clone(),
                float::to_text(row.factor),
                opt(row.bound.map(float::to_text)),
                row.pass.to_string(),
                row.witness_json.clone(),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Context shared by the rows of one (instance, rule) job.
struct RowBase<'a> {
    spec: &'a GenSpec,
    instance: Option<&'a MetricInstance>,
    rule: String,
    k: Option<usize>,
    ell: Option<usize>,
}

impl RowBase<'_> {
    fn row(
        &self,
        audit: &str,
        factor: f64,
        bound: Option<(&str, f64, BoundKind)>,
        witness: serde_json::Value,
    ) -> ExperimentRow {
        let (bound_name, bound_value, kind) = match bound {
            Some((name, value, kind)) => (Some(name.to_string()), Some(value), kind),
            None => (None, None, BoundKind::Upper),
        };
        let pass = match (bound_value, kind) {
            (None, _) => true,
            (Some(b), BoundKind::Upper) => factor <= b + EPS_CMP,
            (Some(b), BoundKind::Lower) => factor >= b - EPS_CMP,
        };
        ExperimentRow {
            family: self.spec.family.to_string(),
            n: Some(self.instance.map_or(self.spec.n, MetricInstance::n)),
            m: Some(
                self.instance
                    .map_or(self.spec.num_candidates(), MetricInstance::m),
            ),
            k: self.k,
            ell: self.ell,
            seed: Some(self.spec.seed),
            rule: self.rule.clone(),
            audit: audit.to_string(),
            factor,
            bound: bound_value,
            bound_name,
            bound_kind: kind,
            pass,
            witness_json: if witness.is_null() {
                String::new()
            } else {
                witness.to_string()
            },
        }
    }

    fn error(&self, audit: &str, err: &crate::Error) -> ExperimentRow {
        let mut row = self.row(audit, f64::NAN, None, json!({ "error": err.to_string() }));
        row.pass = false;
        row
    }
}

/// Runs the experiment on `jobs` worker threads (0 picks the default).
/// Output is identical for every thread count.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentTable> {
    if config.k.contains(&0) {
        return invalid("k values must be positive");
    }
    if config.core_q.contains(&0) {
        return invalid("core_q values must be positive");
    }
    let specs = config.specs();
    let work: Vec<(usize, Rule)> = (0..specs.len())
        .flat_map(|s| config.rules.iter().map(move |&r| (s, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::InvalidInput(format!("thread pool: {e}")))?;
    let instances: Vec<Result<MetricInstance>> =
        pool.install(|| specs.par_iter().map(generate).collect());
    let chunks: Vec<Vec<ExperimentRow>> = pool.install(|| {
        work.par_iter()
            .map(|&(s, rule)| run_job(config, &specs[s], &instances[s], rule))
            .collect()
    });
    let rows: Vec<ExperimentRow> = chunks.into_iter().flatten().collect();
    let summary = summarize(&rows);
    Ok(ExperimentTable { rows, summary })
}

fn run_job(
    config: &ExperimentConfig,
    spec: &GenSpec,
    instance: &Result<MetricInstance>,
    rule: Rule,
) -> Vec<ExperimentRow> {
    let instance = match instance {
        Ok(inst) => inst,
        Err(err) => {
            let base = RowBase {
                spec,
                instance: None,
                rule: rule.name().to_string(),
                k: None,
                ell: None,
            };
            return vec![base.error("generate", err)];
        }
    };
    match rule {
        Rule::GreedyCapture | Rule::Ear => committee_rows(config, spec, instance, rule),
        Rule::PluralityVeto => veto_rows(config, spec, instance),
        Rule::AllCandidates => candidate_rows(config, spec, instance),
    }
}

fn committee_rows(
    config: &ExperimentConfig,
    spec: &GenSpec,
    instance: &MetricInstance,
    rule: Rule,
) -> Vec<ExperimentRow> {
    let n = instance.n();
    let profile = derive_profile(instance);
    let mut rows = Vec::new();
    for &k in &config.k {
        for &policy in &config.quotas {
            let mut base = RowBase {
                spec,
                instance: Some(instance),
                rule: rule.name().to_string(),
                k: Some(k),
                ell: None,
            };
            let quota = match policy.resolve(n, k) {
                Ok(q) => q,
                Err(err) => {
                    rows.push(base.error("quota", &err));
                    continue;
                }
            };
            let ell = quota.ell();
            base.ell = Some(ell);
            let outcome = match rule {
                Rule::GreedyCapture => greedy_capture(instance, k, &quota).map(|c| c.centers),
                _ => ear(&profile, k, &quota),
            };
            let centers = match outcome {
                Ok(c) if !c.is_empty() => c,
                Ok(_) => {
                    rows.push(base.error(
                        "rule",
                        &crate::Error::InvalidInput("rule elected nobody".into()),
                    ));
                    continue;
                }
                Err(err) => {
                    rows.push(base.error("rule", &err));
                    continue;
                }
            };
            let droop_regime = quota.exceeds_droop_bound(n, k);
            let needs_pjr = config.wants(AuditKind::RankPjr)
                || (rule == Rule::Ear && config.wants(AuditKind::Core));
            let pjr = if needs_pjr {
                Some(check_rank_pjr(&profile, &centers, ell, None))
            } else {
                None
            };

            if config.wants(AuditKind::Size) {
                let bound = droop_regime.then_some(("k", k as f64, BoundKind::Upper));
                rows.push(base.row(
                    "size",
                    centers.len() as f64,
                    bound,
                    json!({ "centers": centers }),
                ));
            }
            if config.wants(AuditKind::Proportionality) && ell <= n {
                match min_alpha_proportional(instance, &centers, ell) {
                    Ok(report) => {
                        let bound = match rule {
                            _ if !droop_regime => None,
                            Rule::GreedyCapture if instance.is_l2() => {
                                Some(("2", bounds::GREEDY_EUCLIDEAN, BoundKind::Upper))
                            }
                            Rule::GreedyCapture => {
                                Some(("1+sqrt2", bounds::greedy_general(), BoundKind::Upper))
                            }
                            _ => Some(("2+sqrt5", bounds::rank_jr(), BoundKind::Upper)),
                        };
                        rows.push(base.row(
                            "proportionality",
                            report.factor,
                            bound,
                            json!({ "centers": centers, "witness": report.witness }),
                        ));
                    }
                    Err(err) => rows.push(base.error("proportionality", &err)),
                }
            }
            if config.wants(AuditKind::RankJr) {
                match check_rank_jr(&profile, &centers, ell) {
                    Ok(outcome) => {
                        let bound =
                            (rule == Rule::Ear).then_some(("rank_jr", 0.0, BoundKind::Upper));
                        let factor = if outcome.is_satisfied() { 0.0 } else { 1.0 };
                        rows.push(base.row(
                            "rank_jr",
                            factor,
                            bound,
                            json!({ "centers": centers, "check": outcome }),
                        ));
                    }
                    Err(err) => rows.push(base.error("rank_jr", &err)),
                }
            }
            if config.wants(AuditKind::RankPjr) {
                match pjr.as_ref().expect("computed when requested") {
                    Ok(outcome) => {
                        let factor = if outcome.is_satisfied() { 0.0 } else { 1.0 };
                        rows.push(base.row(
                            "rank_pjr",
                            factor,
                            None,
                            json!({ "centers": centers, "check": outcome }),
                        ));
                    }
                    Err(err) => rows.push(base.error("rank_pjr", err)),
                }
            }
            if config.wants(AuditKind::Core) && ell <= n {
                let certified = rule == Rule::Ear
                    && droop_regime
                    && matches!(&pjr, Some(Ok(o)) if o.is_satisfied());
                for &q in config.core_q.iter().filter(|&&q| q <= centers.len()) {
                    let audit = format!("core_q{q}");
                    match min_alpha_q_core(instance, &centers, ell, q, None) {
                        Ok(report) => {
                            let bound = certified.then_some((
                                "4+sqrt13",
                                bounds::rank_pjr_core(),
                                BoundKind::Upper,
                            ));
                            rows.push(base.row(
                                &audit,
                                report.factor,
                                bound,
                                json!({ "centers": centers, "q": q, "witness": report.witness }),
                            ));
                        }
                        Err(err) => rows.push(base.error(&audit, &err)),
                    }
                }
            }
        }
    }
    rows
}

fn veto_rows(
    config: &ExperimentConfig,
    spec: &GenSpec,
    instance: &MetricInstance,
) -> Vec<ExperimentRow> {
    let base = RowBase {
        spec,
        instance: Some(instance),
        rule: "plurality_veto".to_string(),
        k: Some(1),
        ell: None,
    };
    let profile = derive_profile(instance);
    let orders = match config.veto_order.orders(instance.n()) {
        Ok(o) => o,
        Err(err) => return vec![base.error("veto_order", &err)],
    };
    // Worst case over orders: smallest β*, largest distortion.
    let mut worst_beta: Option<(f64, usize, Vec<usize>)> = None;
    let mut worst_dist: Option<(f64, usize, Vec<usize>)> = None;
    for order in orders {
        let winner = match plurality_veto(&profile, &order) {
            Ok(t) => t.winner,
            Err(err) => return vec![base.error("veto", &err)],
        };
        if config.wants(AuditKind::Plurality) {
            let beta = beta_plurality_value(instance, winner)
                .map(|r| r.factor)
                .unwrap_or(f64::NAN);
            if worst_beta
                .as_ref()
                .is_none_or(|w| beta < w.0 || beta.is_nan())
            {
                worst_beta = Some((beta, winner, order.clone()));
            }
        }
        if config.wants(AuditKind::Distortion) {
            let dist = distortion(instance, winner).unwrap_or(f64::NAN);
            if worst_dist
                .as_ref()
                .is_none_or(|w| dist > w.0 || dist.is_nan())
            {
                worst_dist = Some((dist, winner, order));
            }
        }
    }
    let mut rows = Vec::new();
    if let Some((beta, winner, order)) = worst_beta {
        rows.push(base.row(
            "plurality",
            beta,
            Some(("sqrt5-2", bounds::plurality_veto(), BoundKind::Lower)),
            json!({ "winner": winner, "order": order }),
        ));
    }
    if let Some((dist, winner, order)) = worst_dist {
        rows.push(base.row(
            "distortion",
            dist,
            Some(("3", bounds::VETO_DISTORTION, BoundKind::Upper)),
            json!({ "winner": winner, "order": order }),
        ));
    }
    rows
}

/// β grid `0.05, 0.10, ..., 1.00`.
pub fn beta_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

fn candidate_rows(
    config: &ExperimentConfig,
    spec: &GenSpec,
    instance: &MetricInstance,
) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    let grid = beta_grid();
    for p in 0..instance.m() {
        let base = RowBase {
            spec,
            instance: Some(instance),
            rule: format!("candidate:{p}"),
            k: Some(1),
            ell: None,
        };
        let plurality = match beta_plurality_value(instance, p) {
            Ok(r) => r,
            Err(err) => {
                rows.push(base.error("plurality", &err));
                continue;
            }
        };
        if config.wants(AuditKind::Plurality) {
            rows.push(base.row(
                "plurality",
                plurality.factor,
                None,
                json!({ "witness": plurality.witness }),
            ));
        }
        if config.wants(AuditKind::Distortion) {
            match distortion(instance, p) {
                Ok(dist) => {
                    let beta = plurality.factor;
                    let bound = (beta > 0.0).then(|| {
                        (
                            "2/beta+1",
                            bounds::plurality_distortion(beta),
                            BoundKind::Upper,
                        )
                    });
                    rows.push(base.row("distortion", dist, bound, json!({ "beta": beta })));
                }
                Err(err) => rows.push(base.error("distortion", &err)),
            }
        }
        if config.wants(AuditKind::Equivalence) {
            match verify_equivalence(instance, p, &grid) {
                Ok(check) => {
                    let factor = if check == EquivalenceCheck::Ok {
                        0.0
                    } else {
                        1.0
                    };
                    rows.push(base.row(
                        "equivalence",
                        factor,
                        Some(("equivalence", 0.0, BoundKind::Upper)),
                        serde_json::to_value(&check).unwrap_or_default(),
                    ));
                }
                Err(err) => rows.push(base.error("equivalence", &err)),
            }
        }
    }
    rows
}

fn summarize(rows: &[ExperimentRow]) -> Vec<ExperimentRow> {
    let mut groups: BTreeMap<(String, String), Vec<&ExperimentRow>> = BTreeMap::new();
    for row in rows {
        if let Some(name) = &row.bound_name {
            let audit = row.audit.clone();
            groups.entry((audit, name.clone())).or_default().push(row);
        }
    }
    groups
        .into_iter()
        .map(|((audit, name), members)| {
            let kind = members[0].bound_kind;
            let worst = members
                .iter()
                .map(|r| r.factor)
                .reduce(|a, b| match kind {
                    BoundKind::Upper => a.max(b),
                    BoundKind::Lower => a.min(b),
                })
                .expect("nonempty group");
            let bound = members[0]
                .bound
                .filter(|b| members.iter().all(|r| r.bound == Some(*b)));
            ExperimentRow {
                family: "summary".to_string(),
                n: None,
                m: None,
                k: None,
                ell: None,
                seed: None,
                rule: name.clone(),
                audit,
                factor: worst,
                bound,
                bound_name: Some(name),
                bound_kind: kind,
                pass: members.iter().all(|r| r.pass),
                witness_json: json!({ "rows": members.len() }).to_string(),
            }
        })
        .collect()
}
