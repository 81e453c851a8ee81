//! Command-line front end.
//!
//! Every command reads one JSON [`ExperimentConfig`] and writes CSV or JSON.
//! Values are resolved as flags, then config fields, then built-in defaults.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numerical
//! failure, 4 certification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{self, Objective};
use crate::equilibrium::solve;
use crate::error::{Error, Result};
use crate::groups::{self, GroupSpec};
use crate::multidim::{self, IndexKind, MultiSkillSpec, UnmeasurableSpec};
use crate::oracle::{default_epsilon, DeviationRule, DiscreteInstance};
use crate::policy::{two_level, PolicySpec, TwoLevelPolicy};
use crate::primitives::PopulationSpec;
use crate::welfare;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 4;

const DEFAULT_GRID: usize = 201;
const DEFAULT_AGENTS: usize = 500;
const DEFAULT_EFFORT_STEP: f64 = 1e-3;
const DEFAULT_SEARCH_BUDGET: usize = 20_000;
const DEFAULT_MULTIDIM_AGENTS: usize = 500;
const DEFAULT_MULTIDIM_C: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Welfare,
    Societal,
    Private,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Welfare => Objective::ApplicantWelfare,
            ObjectiveArg::Societal => Objective::SocietalUtility,
            ObjectiveArg::Private => Objective::PrivateUtility,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    EntryScore,
    Resort,
}

impl From<RuleArg> for DeviationRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::EntryScore => DeviationRule::EntryScore,
            RuleArg::Resort => DeviationRule::Resort,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rankdesign", version, about = "Equilibria, welfare and policy design for strategic ranking")]
pub struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "RANKDESIGN_WORKERS")]
    pub workers: Option<usize>,
    /// Grid size for schedule sampling and rank checks.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the equilibrium and report welfare.
    Eval,
    /// Welfare profile over a range of two-level cutpoints.
    Sweep,
    /// Effort and score schedule on a rank grid.
    Equilibrium,
    /// Disparate-impact audit for two groups.
    Groups,
    /// Certify the closed form against the discrete-agent oracle.
    Verify {
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        effort_step: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
    },
    /// Optimize the two-level cutpoint, or search three-level policies.
    Optimize {
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long)]
        three_level: bool,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Multi-skill rank preservation and measurable/unmeasurable weighting.
    Multidim {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        agents: Option<usize>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_sweep_parameter")]
    pub parameter: String,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    #[serde(default)]
    pub capacity: Option<f64>,
}

fn default_sweep_parameter() -> String {
    "c".into()
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.parameter != "c" {
            return Err(Error::Config(format!("only the cutpoint `c` can be swept, got `{}`", self.parameter)));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("a sweep needs at least 2 steps, got {}", self.steps)));
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(Error::Config(format!("sweep range [{}, {}] is empty", self.start, self.end)));
        }
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| self.start + (self.end - self.start) * i as f64 / last)
            .collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub agents: Option<usize>,
    pub effort_step: Option<f64>,
    pub epsilon: Option<f64>,
    pub rule: Option<DeviationRule>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: Option<Objective>,
    #[serde(default)]
    pub three_level: bool,
    pub search_budget: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultidimConfig {
    pub skills: Option<MultiSkillSpec>,
    pub policy: Option<PolicySpec>,
    pub agents: Option<usize>,
    pub effort_step: Option<f64>,
    pub unmeasurable: Option<UnmeasurableSpec>,
    pub c: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population: Option<PopulationSpec>,
    pub policy: Option<PolicySpec>,
    pub groups: Option<GroupSpec>,
    pub sweep: Option<SweepSpec>,
    pub oracle: Option<OracleConfig>,
    pub optimize: Option<OptimizeConfig>,
    pub multidim: Option<MultidimConfig>,
    pub output: Option<OutputSpec>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validates every spec present, before any computation runs.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.population {
            p.validate()?;
        }
        if let Some(p) = &self.policy {
            p.resolve()?;
        }
        if let Some(g) = &self.groups {
            g.validate()?;
        }
        if let Some(s) = &self.sweep {
            s.values()?;
        }
        if let Some(m) = &self.multidim {
            if let Some(s) = &m.skills {
                s.validate()?;
            }
            if let Some(p) = &m.policy {
                p.resolve()?;
            }
            if let Some(u) = &m.unmeasurable {
                u.validate()?;
            }
        }
        Ok(())
    }

    fn population(&self) -> Result<&PopulationSpec> {
        self.population
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing `population`".into()))
    }

    fn policy(&self) -> Result<&PolicySpec> {
        self.policy
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing `policy`".into()))
    }

    fn groups(&self) -> Result<&GroupSpec> {
        self.groups
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing `groups`".into()))
    }

    /// Capacity from the sweep, falling back to the policy.
    fn capacity(&self) -> Result<f64> {
        if let Some(c) = self.sweep.as_ref().and_then(|s| s.capacity) {
            return Ok(c);
        }
        match &self.policy {
            Some(p) => Ok(p.resolve()?.capacity),
            None => Err(Error::Config("no capacity: set `sweep.capacity` or `policy`".into())),
        }
    }
}

/// Settings after applying flags over config over defaults.
struct Resolved {
    config: ExperimentConfig,
    format: Option<Format>,
    output: Option<PathBuf>,
    seed: u64,
    grid: usize,
}

enum Payload {
    Json(serde_json::Value),
    Csv(Vec<u8>),
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn emit<T: Serialize, R: Serialize>(format: Format, json: &T, rows: &[R]) -> Result<Payload> {
    Ok(match format {
        Format::Json => Payload::Json(serde_json::to_value(json)?),
        Format::Csv => Payload::Csv(csv_rows(rows)?),
    })
}

#[derive(Serialize)]
struct WelfareRow {
    applicant_welfare: f64,
    societal_utility: f64,
    private_utility: f64,
    quadrature_error_estimate: f64,
}

fn cmd_eval(r: &Resolved) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let policy = r.config.policy()?.resolve()?;
    let report = welfare::evaluate(&solve(pop, &policy)?)?;
    let row = WelfareRow {
        applicant_welfare: report.applicant_welfare,
        societal_utility: report.societal_utility,
        private_utility: report.private_utility,
        quadrature_error_estimate: report.quadrature_error_estimate,
    };
    Ok((emit(r.format.unwrap_or(Format::Json), &report, &[row])?, EXIT_OK))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub level1: Option<f64>,
    pub applicant_welfare: Option<f64>,
    pub societal_utility: Option<f64>,
    pub private_utility: Option<f64>,
    pub error: Option<String>,
}

/// Two-level welfare profile, evaluated in parallel and returned in input order.
pub fn sweep_rows(population: &PopulationSpec, capacity: f64, cs: &[f64]) -> Vec<(SweepRow, Option<Error>)> {
    cs.par_iter()
        .map(|&c| {
            let point = || -> Result<SweepRow> {
                let policy = two_level(c, capacity)?;
                let report = welfare::evaluate(&solve(population, &policy)?)?;
                Ok(SweepRow {
                    c,
                    level1: Some(policy.max_level()),
                    applicant_welfare: Some(report.applicant_welfare),
                    societal_utility: Some(report.societal_utility),
                    private_utility: Some(report.private_utility),
                    error: None,
                })
            };
            match point() {
                Ok(row) => (row, None),
                Err(e) => (
                    SweepRow {
                        c,
                        level1: None,
                        applicant_welfare: None,
                        societal_utility: None,
                        private_utility: None,
                        error: Some(e.to_string()),
                    },
                    Some(e),
                ),
            }
        })
        .collect()
}

fn cmd_sweep(r: &Resolved) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let sweep = r
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config is missing `sweep`".into()))?;
    let results = sweep_rows(pop, r.config.capacity()?, &sweep.values()?);
    if results.iter().all(|(_, e)| e.is_some()) {
        let (_, first) = results.into_iter().next().expect("sweep has at least 2 points");
        return Err(first.expect("all points failed"));
    }
    let rows: Vec<SweepRow> = results.into_iter().map(|(row, _)| row).collect();
    Ok((emit(r.format.unwrap_or(Format::Csv), &rows, &rows)?, EXIT_OK))
}

fn cmd_equilibrium(r: &Resolved) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let policy = r.config.policy()?.resolve()?;
    let schedule = solve(pop, &policy)?;
    let rows = schedule.sample(r.grid)?;
    Ok((emit(r.format.unwrap_or(Format::Csv), &rows, &rows)?, EXIT_OK))
}

#[derive(Serialize)]
struct GroupsReport {
    audit: Vec<groups::AuditRow>,
    regions: Option<Vec<groups::RegionRow>>,
}

fn cmd_groups(r: &Resolved) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let spec = r.config.groups()?;
    let (policies, single) = match &r.config.sweep {
        Some(s) => {
            let cap = r.config.capacity()?;
            let ps = s
                .values()?
                .into_iter()
                .map(|c| TwoLevelPolicy::new(c, cap))
                .collect::<Result<Vec<_>>>()?;
            (ps, false)
        }
        None => {
            let p = r
                .config
                .policy()?
                .as_two_level()
                .ok_or_else(|| Error::Config("the group audit needs a two-level policy".into()))?;
            (vec![p], true)
        }
    };
    let audit = policies
        .par_iter()
        .map(|p| groups::audit_row(pop, spec, p))
        .collect::<Result<Vec<_>>>()?;
    let regions = if single && !policies[0].is_pure_randomization() {
        Some(groups::region_table(pop, spec, policies[0].c)?)
    } else {
        None
    };
    let report = GroupsReport { audit, regions };
    Ok((emit(r.format.unwrap_or(Format::Csv), &report, &report.audit)?, EXIT_OK))
}

#[derive(Serialize)]
struct VerifyRow {
    certified: bool,
    agents: usize,
    epsilon: f64,
    worst_gain: f64,
    worst_agent: usize,
}

fn cmd_verify(
    r: &Resolved,
    agents: Option<usize>,
    effort_step: Option<f64>,
    epsilon: Option<f64>,
    rule: Option<RuleArg>,
) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let policy = r.config.policy()?.resolve()?;
    let oc = r.config.oracle.clone().unwrap_or_default();
    let n = agents.or(oc.agents).unwrap_or(DEFAULT_AGENTS);
    if n == 0 {
        return Err(Error::Config("verify needs at least one agent".into()));
    }
    let step = effort_step.or(oc.effort_step).unwrap_or(DEFAULT_EFFORT_STEP);
    let eps = epsilon.or(oc.epsilon).unwrap_or_else(|| default_epsilon(n));
    let rule = rule.map(DeviationRule::from).or(oc.rule).unwrap_or_default();
    let schedule = solve(pop, &policy)?;
    let inst = DiscreteInstance::from_schedule(&schedule, n, step)?.with_rule(rule);
    let cert = inst.certify(eps)?;
    let row = VerifyRow {
        certified: cert.certified,
        agents: n,
        epsilon: eps,
        worst_gain: cert.worst_gain,
        worst_agent: cert.worst_agent,
    };
    let code = if cert.certified { EXIT_OK } else { EXIT_NOT_CERTIFIED };
    if !cert.certified {
        eprintln!("not certified: worst gain {} > epsilon {eps} (agent {})", cert.worst_gain, cert.worst_agent);
    }
    Ok((emit(r.format.unwrap_or(Format::Json), &cert, &[row])?, code))
}

#[derive(Serialize)]
struct ProfileRow {
    c: f64,
    value: f64,
}

#[derive(Serialize)]
struct ThreeLevelRow {
    x: f64,
    c1: f64,
    c2: f64,
    private_utility: f64,
    baseline: f64,
    improvement: f64,
}

fn cmd_optimize(r: &Resolved, objective: Option<ObjectiveArg>, three: bool, budget: Option<usize>) -> Result<(Payload, i32)> {
    let pop = r.config.population()?;
    let cap = r.config.capacity()?;
    let oc = r.config.optimize.clone().unwrap_or_default();
    let format = r.format.unwrap_or(Format::Json);
    if three || oc.three_level {
        let budget = budget.or(oc.search_budget).unwrap_or(DEFAULT_SEARCH_BUDGET);
        let found = design::find_three_level_improvement(pop, cap, budget, r.seed)?;
        let rows: Vec<ThreeLevelRow> = found
            .iter()
            .map(|c| ThreeLevelRow {
                x: c.x,
                c1: c.c1,
                c2: c.c2,
                private_utility: c.private_utility,
                baseline: c.baseline,
                improvement: c.improvement,
            })
            .collect();
        return Ok((emit(format, &found, &rows)?, EXIT_OK));
    }
    let objective = objective
        .map(Objective::from)
        .or(oc.objective)
        .unwrap_or(Objective::PrivateUtility);
    let opt = design::optimize_two_level(pop, cap, objective)?;
    let rows: Vec<ProfileRow> = opt.profile.iter().map(|&(c, value)| ProfileRow { c, value }).collect();
    Ok((emit(format, &opt, &rows)?, EXIT_OK))
}

#[derive(Serialize)]
struct BetaReport {
    c: f64,
    beta: f64,
    d_measured: f64,
    d_unmeasured: f64,
    weighted_utility: f64,
    weighted_utility_slope: f64,
}

#[derive(Serialize)]
struct MultidimReport {
    rank_preservation: Option<multidim::MultiRankReport>,
    interior_weight: Option<BetaReport>,
}

fn cmd_multidim(r: &Resolved, c: Option<f64>, agents: Option<usize>) -> Result<(Payload, i32)> {
    let mc = r
        .config
        .multidim
        .as_ref()
        .ok_or_else(|| Error::Config("config is missing `multidim`".into()))?;
    if mc.skills.is_none() && mc.unmeasurable.is_none() {
        return Err(Error::Config("`multidim` needs `skills` or `unmeasurable`".into()));
    }
    let rank_preservation = match &mc.skills {
        Some(spec) => {
            let policy = match (&mc.policy, &r.config.policy) {
                (Some(p), _) | (None, Some(p)) => p.resolve()?,
                (None, None) => return Err(Error::Config("multi-skill check needs a policy".into())),
            };
            let n = agents.or(mc.agents).unwrap_or(DEFAULT_MULTIDIM_AGENTS);
            let step = mc.effort_step.unwrap_or(DEFAULT_EFFORT_STEP);
            Some(multidim::check_multidim_rank_preservation(spec, n, &policy, step, r.seed, IndexKind::Max)?)
        }
        None => None,
    };
    let interior_weight = match &mc.unmeasurable {
        Some(spec) => {
            let c = c.or(mc.c).unwrap_or(DEFAULT_MULTIDIM_C);
            let w = multidim::beta_for_interior_optimum(spec, c)?;
            Some(BetaReport {
                c,
                beta: w.beta,
                d_measured: w.d_measured,
                d_unmeasured: w.d_unmeasured,
                weighted_utility: multidim::weighted_private_utility(spec, w.beta, c)?,
                weighted_utility_slope: multidim::weighted_utility_slope(spec, w.beta, c)?,
            })
        }
        None => None,
    };
    let format = r.format.unwrap_or(Format::Json);
    let payload = match (format, &rank_preservation, &interior_weight) {
        (Format::Csv, Some(rp), _) => Payload::Csv(csv_rows(&rp.rows)?),
        (Format::Csv, None, Some(b)) => Payload::Csv(csv_rows(std::slice::from_ref(b))?),
        _ => Payload::Json(serde_json::to_value(MultidimReport {
            rank_preservation,
            interior_weight,
        })?),
    };
    Ok((payload, EXIT_OK))
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out_cfg = config.output.clone().unwrap_or_default();
    let grid = cli.grid.or(config.grid).unwrap_or(DEFAULT_GRID);
    if grid < 2 {
        return Err(Error::Config(format!("grid must be at least 2, got {grid}")));
    }
    Ok(Resolved {
        format: cli.format.or(out_cfg.format),
        output: cli.output.clone().or(out_cfg.path),
        seed: cli.seed.or(config.seed).unwrap_or(0),
        grid,
        config,
    })
}

fn dispatch(cli: &Cli, r: &Resolved) -> Result<(Payload, i32)> {
    match &cli.command {
        Command::Eval => cmd_eval(r),
        Command::Sweep => cmd_sweep(r),
        Command::Equilibrium => cmd_equilibrium(r),
        Command::Groups => cmd_groups(r),
        Command::Verify {
            agents,
            effort_step,
            epsilon,
            rule,
        } => cmd_verify(r, *agents, *effort_step, *epsilon, *rule),
        Command::Optimize {
            objective,
            three_level,
            budget,
        } => cmd_optimize(r, *objective, *three_level, *budget),
        Command::Multidim { c, agents } => cmd_multidim(r, *c, *agents),
    }
}

/// Runs a parsed command, writing results to `out` unless an output path is
/// set. Returns the process exit code for outcomes that are not errors.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let resolved = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let (payload, code) = pool.install(|| dispatch(cli, &resolved))?;
    let bytes = match payload {
        Payload::Json(v) => {
            let mut s = serde_json::to_vec_pretty(&v)?;
            s.push(b'\n');
            s
        }
        Payload::Csv(b) => b,
    };
    match &resolved.output {
        Some(path) => fs::write(path, bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(code)
}

/// Entry point for the binary: parses arguments, runs, reports errors on
/// stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
