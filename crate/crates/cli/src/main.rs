use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use propclust::experiment::beta_grid;
use propclust::*;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "propclust",
    version,
    about = "Proportional clustering, plurality points and ordinal committee rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded instance and write it as JSON
    Generate {
        #[command(flatten)]
        spec: GenArgs,
        /// Output file (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check symmetry, zero diagonal and the triangle inequality
    Validate {
        #[command(flatten)]
        source: InstanceSource,
    },
    /// Run greedy capture
    Capture {
        #[command(flatten)]
        source: InstanceSource,
        #[command(flatten)]
        quota: QuotaArgs,
        /// Tie-breaking between simultaneous events (only `index` is supported)
        #[arg(long, default_value = "index")]
        tiebreak: TieBreak,
    },
    /// Compute the proportionality factor (or q-core factor) of a set of centers
    Audit {
        #[command(flatten)]
        source: InstanceSource,
        /// Comma-separated candidate ids
        #[arg(long, value_delimiter = ',', required = true)]
        centers: Vec<usize>,
        #[command(flatten)]
        quota: QuotaArgs,
        /// Audit the q-core instead of proportionality
        #[arg(long)]
        core_q: Option<usize>,
        /// Largest deviating candidate set for the q-core audit
        #[arg(long, requires = "core_q")]
        max_group_size: Option<usize>,
    },
    /// Compute the plurality value of a candidate, or test a given beta
    Plurality {
        #[command(flatten)]
        source: InstanceSource,
        /// Candidate id
        #[arg(long)]
        point: usize,
        /// Test this beta instead of computing the largest one
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Check the plurality / Droop-proportionality equivalence on a beta grid
    Equivalence {
        #[command(flatten)]
        source: InstanceSource,
        /// Candidate id (all candidates when omitted)
        #[arg(long)]
        point: Option<usize>,
        /// Comma-separated beta values (default 0.05, 0.10, ..., 1.00)
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Run plurality veto
    Veto {
        #[command(flatten)]
        source: OrdinalSource,
        /// Agent order: index, all, seed:S or seed:S:COUNT
        #[arg(long, default_value = "index")]
        order: AgentOrder,
    },
    /// Run the expanding approvals rule
    Ear {
        #[command(flatten)]
        source: OrdinalSource,
        #[command(flatten)]
        quota: QuotaArgs,
    },
    /// Check l-rank-JR of a committee
    CheckJr {
        #[command(flatten)]
        source: OrdinalSource,
        /// Comma-separated candidate ids
        #[arg(long, value_delimiter = ',', required = true)]
        centers: Vec<usize>,
        #[command(flatten)]
        quota: QuotaArgs,
    },
    /// Check l-rank-PJR of a committee
    CheckPjr {
        #[command(flatten)]
        source: OrdinalSource,
        /// Comma-separated candidate ids
        #[arg(long, value_delimiter = ',', required = true)]
        centers: Vec<usize>,
        #[command(flatten)]
        quota: QuotaArgs,
        /// Only check groups asking for at most this many winners
        #[arg(long)]
        max_mu: Option<usize>,
    },
    /// Social costs, the optimum, and the distortion of a candidate
    Distortion {
        #[command(flatten)]
        source: InstanceSource,
        /// Candidate id
        #[arg(long)]
        point: Option<usize>,
    },
    /// Run a batch experiment and certify every row against its bound
    Experiment {
        /// Experiment configuration (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output file (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Worker threads (0 = one per core); output does not depend on it
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieBreak {
    Index,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// euclidean_uniform, euclidean_clustered, random_metric, line_paper or triangle
    #[arg(long)]
    family: Family,
    /// Number of agents
    #[arg(long)]
    n: usize,
    /// Number of candidates (defaults to n)
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// l1, l2 or linf
    #[arg(long, default_value = "l2")]
    norm: Norm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of blobs (euclidean_clustered)
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    /// Blob standard deviation (euclidean_clustered)
    #[arg(long, default_value_t = 0.05)]
    spread: f64,
}

impl GenArgs {
    fn spec(&self) -> GenSpec {
        let mut spec = GenSpec::new(self.family, self.n)
            .with_dim(self.dim)
            .with_norm(self.norm)
            .with_seed(self.seed);
        spec.m = self.m;
        spec.clusters = self.clusters;
        spec.spread = self.spread;
        spec
    }
}

/// An instance file, or generator flags to build one in place.
#[derive(Debug, Args)]
struct InstanceSource {
    /// Instance JSON file
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    /// Generate the instance instead of reading it
    #[arg(long, requires = "n")]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "l2")]
    norm: Norm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InstanceSource {
    fn load(&self) -> Result<MetricInstance> {
        if let Some(path) = &self.instance {
            return MetricInstance::from_json(&read(path)?)
                .with_context(|| format!("parsing {}", path.display()));
        }
        let (Some(family), Some(n)) = (self.family, self.n) else {
            bail!("no input: give --instance FILE or --family F --n N");
        };
        let mut spec = GenSpec::new(family, n)
            .with_dim(self.dim)
            .with_norm(self.norm)
            .with_seed(self.seed);
        spec.m = self.m;
        Ok(generate(&spec)?)
    }
}

/// Where ordinal commands get their rankings from.
#[derive(Debug, Args)]
struct OrdinalSource {
    #[command(flatten)]
    instance: InstanceSource,
    /// Profile JSON file: {"ranks": [[best, ..., worst], ...]}
    #[arg(long, conflicts_with_all = ["instance", "family"])]
    profile: Option<PathBuf>,
}

impl OrdinalSource {
    fn load(&self) -> Result<OrdinalProfile> {
        match &self.profile {
            Some(path) => serde_json::from_str(&read(path)?)
                .with_context(|| format!("parsing {}", path.display())),
            None => Ok(derive_profile(&self.instance.load()?)),
        }
    }
}

#[derive(Debug, Args)]
struct QuotaArgs {
    /// Committee size
    #[arg(long)]
    k: usize,
    /// hare, droop, or a fixed group size
    #[arg(long, default_value = "droop")]
    quota: QuotaPolicy,
}

impl QuotaArgs {
    fn resolve(&self, n: usize) -> Result<Quota> {
        Ok(self.quota.resolve(n, self.k)?)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => emit(text.trim_end()),
    }
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

/// Exit status of a command that ran to completion: checks report a
/// negative answer with 1.
fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { spec, output } => {
            let inst = generate(&spec.spec())?;
            write_out(output.as_deref(), &inst.to_json()?)?;
        }
        Command::Validate { source } => {
            let check = source.load()?.validate_metric()?;
            print(&check)?;
            return Ok(verdict(check.is_ok()));
        }
        Command::Capture {
            source,
            quota,
            tiebreak: TieBreak::Index,
        } => {
            let inst = source.load()?;
            let k = quota.k;
            let quota = quota.resolve(inst.n())?;
            print(&greedy_capture(&inst, k, &quota)?)?;
        }
        Command::Audit {
            source,
            centers,
            quota,
            core_q,
            max_group_size,
        } => {
            let inst = source.load()?;
            let k = quota.k;
            let ell = quota.resolve(inst.n())?.ell();
            let mut report = match core_q {
                Some(q) => min_alpha_q_core(&inst, &centers, ell, q, max_group_size)?,
                None => min_alpha_proportional(&inst, &centers, ell)?,
            };
            report.k = Some(k);
            print(&report)?;
        }
        Command::Plurality {
            source,
            point,
            beta,
        } => {
            let inst = source.load()?;
            match beta {
                Some(beta) => {
                    let holds = is_beta_plurality(&inst, point, beta)?;
                    print(&json!({ "point": point, "beta": beta, "holds": holds }))?;
                    return Ok(verdict(holds));
                }
                None => print(&beta_plurality_value(&inst, point)?)?,
            }
        }
        Command::Equivalence {
            source,
            point,
            grid,
        } => {
            let inst = source.load()?;
            let grid = if grid.is_empty() { beta_grid() } else { grid };
            let points: Vec<usize> = match point {
                Some(p) => vec![p],
                None => (0..inst.m()).collect(),
            };
            let mut all_ok = true;
            let mut results = Vec::new();
            for p in points {
                let check = verify_equivalence(&inst, p, &grid)?;
                all_ok &= check == EquivalenceCheck::Ok;
                results.push(json!({ "point": p, "result": check }));
            }
            print(&results)?;
            return Ok(verdict(all_ok));
        }
        Command::Veto { source, order } => {
            let profile = source.load()?;
            let runs = order
                .orders(profile.n())?
                .iter()
                .map(|o| Ok(json!({ "order": o, "transcript": plurality_veto(&profile, o)? })))
                .collect::<Result<Vec<_>>>()?;
            print(&runs)?;
        }
        Command::Ear { source, quota } => {
            let profile = source.load()?;
            let k = quota.k;
            let quota = quota.resolve(profile.n())?;
            let winners = ear(&profile, k, &quota)?;
            print(&json!({ "k": k, "ell": quota.ell(), "winners": winners }))?;
        }
        Command::CheckJr {
            source,
            centers,
            quota,
        } => {
            let profile = source.load()?;
            let ell = quota.resolve(profile.n())?.ell();
            let outcome = check_rank_jr(&profile, &centers, ell)?;
            print(&outcome)?;
            return Ok(verdict(outcome.is_satisfied()));
        }
        Command::CheckPjr {
            source,
            centers,
            quota,
            max_mu,
        } => {
            let profile = source.load()?;
            let ell = quota.resolve(profile.n())?.ell();
            let outcome = check_rank_pjr(&profile, &centers, ell, max_mu)?;
            print(&outcome)?;
            return Ok(verdict(outcome.is_satisfied()));
        }
        Command::Distortion { source, point } => {
            let inst = source.load()?;
            let mut profile = cost_profile(&inst);
            if let Some(p) = point {
                profile.distortion = Some(distortion(&inst, p)?);
            }
            print(&profile)?;
        }
        Command::Experiment {
            config,
            output,
            format,
            jobs,
        } => {
            let config = ExperimentConfig::from_json(&read(&config)?)
                .with_context(|| format!("parsing {}", config.display()))?;
            let table = run_experiment(&config, jobs)?;
            let text = match format {
                Format::Csv => table.to_csv()?,
                Format::Json => table.to_json()?,
            };
            write_out(output.as_deref(), &text)?;
            let failures = table.failures().count();
            if failures > 0 {
                eprintln!("{failures} of {} rows failed their bound", table.rows.len());
            }
            return Ok(verdict(failures == 0));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
