use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{parse_config, serialize_config, ConfigError, Format, PolicyName, RunConfig, SeedSpec, SweepConfig, Task};
use crate::checks::{cheapest_action_suite, large_count_dominance_suite, tie_order_oracle};
use crate::dynamics::{
    product_bound_sweep, reinforced_walk_run, run, write_summary_json, write_trajectory_csv, write_trajectory_json,
    MyopicCache, PolicyKind, Reinforcement, RunOptions, RunSummary, Trajectory, WalkParams,
};
use crate::game::{
    cce_zero_support_certificate, expected_late_positive, two_point_candidate, verify_nash_with_cap, CceVerdict,
};
use crate::queue::{MixedProfile, ModelParams, State};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const REPORT_SCHEMA: &str = "dqm.report.v1";

/// One row of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub players: usize,
    pub period: usize,
    pub policy: String,
    pub eta: Option<f64>,
    pub penalty: String,
    pub seed: u64,
    pub horizon: u64,
    pub max_k: u64,
    pub argmax_period: u64,
    pub final_k: u64,
    pub first_half_max: u64,
    pub second_half_max: u64,
    pub non_divergent: bool,
    pub bound: Option<u64>,
    pub bound_violated: bool,
    pub pref0_violations: Option<u64>,
    pub init_bound_holds: Option<bool>,
    /// Largest per-visit expected regret over every player and level.
    pub max_level_regret: Option<f64>,
    pub assertions_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionReport {
    pub records: Vec<RunRecord>,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    /// Failed assertions; empty when all passed or assertions are off.
    pub failures: Vec<String>,
    pub assertions_checked: bool,
}

impl ExecutionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct ReportDocument<'a, T: Serialize> {
    schema: &'static str,
    task: &'static str,
    config: &'a str,
    passed: bool,
    report: &'a T,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, ConfigError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_report<T: Serialize>(
    path: &Path,
    task: Task,
    config: &str,
    passed: bool,
    report: &T,
) -> Result<(), ConfigError> {
    let doc = ReportDocument {
        schema: REPORT_SCHEMA,
        task: task.name(),
        config,
        passed,
        report,
    };
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| io_error(path, e))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| io_error(path, e))
}

fn model_params(config: &RunConfig, players: usize, period: usize) -> Result<ModelParams, ConfigError> {
    ModelParams::build(players, period, config.penalty.clone(), config.allow_short_period)
        .map_err(|e| ConfigError::Invalid(vec![format!("model (N = {players}, T = {period}): {e}")]))
}

fn initial_state(config: &RunConfig, players: usize) -> Result<State, ConfigError> {
    match &config.initial_counts {
        Some(c) => State::new(c.clone()).map_err(|e| ConfigError::Invalid(vec![format!("model.initial_counts: {e}")])),
        None => Ok(State::unit(players)),
    }
}

/// The configuration of a single run inside a sweep; parsing and re-serializing it is the identity.
pub fn single_run_config(config: &RunConfig, players: usize, period: usize, eta: f64, seed: u64) -> RunConfig {
    let mut c = config.clone();
    c.players = players;
    c.period = period;
    c.policy.eta = eta;
    c.seeds = SeedSpec::List(vec![seed]);
    c.sweep = SweepConfig::default();
    c.output.path = None;
    if c.assertions.non_divergence.is_some() {
        // A fraction over one run is not meaningful; the per-run flag is still reported.
        c.assertions.non_divergence = None;
    }
    c
}

fn run_stem(policy: PolicyName, players: usize, period: usize, eta: Option<f64>, seed: u64) -> String {
    match eta {
        Some(eta) => format!("{}_n{players}_t{period}_eta{eta}_s{seed}", policy.name()),
        None => format!("{}_n{players}_t{period}_s{seed}", policy.name()),
    }
}

fn policy_kind(config: &RunConfig, eta: f64) -> Result<PolicyKind, ConfigError> {
    Ok(match config.policy.kind {
        PolicyName::Mlewa => PolicyKind::Mlewa { eta },
        PolicyName::Myopic => PolicyKind::MyopicStage,
        PolicyName::AllZero => PolicyKind::AllZero,
        PolicyName::LastSlot => PolicyKind::LastSlot,
        PolicyName::FixedMixed => {
            let rows = config
                .policy
                .profile
                .clone()
                .ok_or_else(|| ConfigError::Invalid(vec!["policy.profile: required for fixed_mixed".into()]))?;
            let profile =
                MixedProfile::new(rows).map_err(|e| ConfigError::Invalid(vec![format!("policy.profile: {e}")]))?;
            PolicyKind::FixedMixed { profile }
        }
    })
}

fn run_assertions(config: &RunConfig, players: usize, traj: &Trajectory, summary: &RunSummary) -> Vec<String> {
    let a = &config.assertions;
    let mut failures = Vec::new();
    if let Some(bound) = a.max_k {
        if summary.max_total > bound {
            failures.push(format!(
                "max_k: k reached {} > {bound} at period {}",
                summary.max_total, summary.argmax_period
            ));
        }
    }
    if a.linear_growth {
        let totals = traj.totals();
        let k0 = summary.initial_total;
        if let Some(t) = (0..totals.len()).find(|&t| totals[t] != k0 + (players as u64 - 1) * t as u64) {
            failures.push(format!(
                "linear_growth: k_{t} = {}, expected {}",
                totals[t],
                k0 + (players as u64 - 1) * t as u64
            ));
        }
    }
    if a.regimes {
        match &summary.regimes {
            Some(r) => {
                if !r.zero_profile_when_overloaded {
                    failures.push("regimes: an overloaded period was not played at the all-zero profile".into());
                }
                if !r.nonincreasing_when_overloaded {
                    failures.push("regimes: the load increased from an overloaded period".into());
                }
            }
            None => failures.push("regimes: only checked under the myopic policy".into()),
        }
    }
    if a.lemma_bounds {
        match &summary.learning {
            Some(l) => {
                if !l.pref0_applicable {
                    failures.push("lemma_bounds: the penalty does not satisfy C_k > 4kT".into());
                }
                if l.pref0_violation_count > 0 {
                    failures.push(format!(
                        "lemma_bounds: {} violations of the action-0 lower bound",
                        l.pref0_violation_count
                    ));
                }
                for p in &l.players {
                    if !p.init_bound.holds() {
                        failures.push(format!(
                            "lemma_bounds: player {} violates the first-visit bound at {} levels",
                            p.player,
                            p.init_bound.violations.len()
                        ));
                    }
                    if !p.regret_within_bound {
                        failures.push(format!(
                            "lemma_bounds: player {} has average regret {} above {} at level {}",
                            p.player, p.average_regret, p.ewa_bound, p.most_visited_level
                        ));
                    }
                }
            }
            None => failures.push("lemma_bounds: only checked under the mlewa policy".into()),
        }
    }
    failures
}

struct RunJob {
    index: usize,
    combo: usize,
    players: usize,
    period: usize,
    eta: f64,
    seed: u64,
}

struct RunResult {
    record: RunRecord,
    files: Vec<PathBuf>,
    failures: Vec<String>,
}

fn execute_run(
    config: &RunConfig,
    job: &RunJob,
    cache: &MyopicCache,
    out_dir: &Path,
    check: bool,
) -> Result<RunResult, ConfigError> {
    let params = model_params(config, job.players, job.period)?;
    let policy = policy_kind(config, job.eta)?;
    let uses_eta = config.policy.kind == PolicyName::Mlewa;
    let stem = run_stem(
        config.policy.kind,
        job.players,
        job.period,
        uses_eta.then_some(job.eta),
        job.seed,
    );
    let options = RunOptions {
        initial_counts: config.initial_counts.clone(),
        record: true,
        grid: config.approx_settings(),
        cache: cache.clone(),
        ..RunOptions::default()
    };
    let output = run(&params, &policy, config.horizon, job.seed, &options)
        .map_err(|e| ConfigError::Run(format!("run {stem}: {e}")))?;
    let single = serialize_config(&single_run_config(config, job.players, job.period, job.eta, job.seed));

    let traj_name = format!("{stem}.{}", config.output.format.extension());
    let traj_path = out_dir.join(&traj_name);
    let mut out = create(&traj_path)?;
    match config.output.format {
        Format::Csv => write_trajectory_csv(&output.trajectory, &mut out),
        Format::Json => write_trajectory_json(&output.trajectory, Some(&single), &mut out),
    }
    .map_err(|e| io_error(&traj_path, e))?;
    out.flush().map_err(|e| io_error(&traj_path, e))?;

    let summary_path = out_dir.join(format!("{stem}.summary.json"));
    let mut out = create(&summary_path)?;
    write_summary_json(&output.summary, Some(&single), Some(&traj_name), &mut out)
        .map_err(|e| io_error(&summary_path, e))?;
    out.flush().map_err(|e| io_error(&summary_path, e))?;

    let failures: Vec<String> = if check {
        run_assertions(config, job.players, &output.trajectory, &output.summary)
            .into_iter()
            .map(|f| format!("{stem}: {f}"))
            .collect()
    } else {
        Vec::new()
    };
    let s = &output.summary;
    let learning = s.learning.as_ref();
    let record = RunRecord {
        run: job.index,
        players: job.players,
        period: job.period,
        policy: config.policy.kind.name().into(),
        eta: uses_eta.then_some(job.eta),
        penalty: config.penalty.describe(),
        seed: job.seed,
        horizon: config.horizon,
        max_k: s.max_total,
        argmax_period: s.argmax_period,
        final_k: s.final_total,
        first_half_max: s.first_half_max,
        second_half_max: s.second_half_max,
        non_divergent: s.non_divergent,
        bound: config.assertions.max_k,
        bound_violated: config.assertions.max_k.is_some_and(|b| s.max_total > b),
        pref0_violations: learning.map(|l| l.pref0_violation_count),
        init_bound_holds: learning.map(|l| l.players.iter().all(|p| p.init_bound.holds())),
        max_level_regret: learning.map(|l| {
            l.players
                .iter()
                .flat_map(|p| p.levels.iter())
                .filter(|lv| lv.visits > 0)
                .map(|lv| lv.expected_regret / lv.visits as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        }),
        assertions_passed: failures.is_empty(),
    };
    Ok(RunResult {
        record,
        files: vec![traj_path, summary_path],
        failures,
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn write_aggregate(path: &Path, records: &[RunRecord]) -> Result<(), ConfigError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header = [
        "run",
        "players",
        "period",
        "policy",
        "eta",
        "penalty",
        "seed",
        "horizon",
        "max_k",
        "argmax_period",
        "final_k",
        "first_half_max",
        "second_half_max",
        "non_divergent",
        "bound",
        "bound_violated",
        "pref0_violations",
        "init_bound_holds",
        "max_level_regret",
        "assertions_passed",
    ];
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for r in records {
        w.write_record([
            r.run.to_string(),
            r.players.to_string(),
            r.period.to_string(),
            r.policy.clone(),
            opt(&r.eta),
            r.penalty.clone(),
            r.seed.to_string(),
            r.horizon.to_string(),
            r.max_k.to_string(),
            r.argmax_period.to_string(),
            r.final_k.to_string(),
            r.first_half_max.to_string(),
            r.second_half_max.to_string(),
            r.non_divergent.to_string(),
            opt(&r.bound),
            r.bound_violated.to_string(),
            opt(&r.pref0_violations),
            opt(&r.init_bound_holds),
            opt(&r.max_level_regret),
            r.assertions_passed.to_string(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn execute_runs(
    config: &RunConfig,
    out_dir: &Path,
    check: bool,
    report: &mut ExecutionReport,
) -> Result<(), ConfigError> {
    let combos = config.combinations();
    let caches: Vec<MyopicCache> = combos.iter().map(|_| MyopicCache::new()).collect();
    let mut jobs = Vec::new();
    for (combo, &(players, period, eta)) in combos.iter().enumerate() {
        for seed in config.seeds.seeds() {
            jobs.push(RunJob {
                index: jobs.len(),
                combo,
                players,
                period,
                eta,
                seed,
            });
        }
    }
    let results: Vec<Result<RunResult, ConfigError>> = jobs
        .par_iter()
        .map(|job| execute_run(config, job, &caches[job.combo], out_dir, check))
        .collect();
    for r in results {
        let r = r?;
        report.files.extend(r.files);
        report.failures.extend(r.failures);
        report.records.push(r.record);
    }
    if check {
        if let Some(fraction) = config.assertions.non_divergence {
            let total = report.records.len();
            let ok = report.records.iter().filter(|r| r.non_divergent).count();
            if (ok as f64) < fraction * total as f64 {
                report.failures.push(format!(
                    "non_divergence: {ok} of {total} runs are non-divergent, below the required fraction {fraction}"
                ));
            }
        }
    }
    let path = out_dir.join(AGGREGATE_FILE);
    write_aggregate(&path, &report.records)?;
    report.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct NashReport {
    players: usize,
    period: usize,
    counts: Vec<u64>,
    certificate: crate::game::NashCertificate,
    lateness: crate::game::LatenessCheck,
}

fn execute_certify_nash(
    config: &RunConfig,
    text: &str,
    out_dir: &Path,
    check: bool,
    report: &mut ExecutionReport,
) -> Result<(), ConfigError> {
    for (players, period, _) in config.combinations() {
        let params = model_params(config, players, period)?;
        let state = initial_state(config, players)?;
        let fail =
            |e: crate::game::GameError| ConfigError::Run(format!("certify_nash (N = {players}, T = {period}): {e}"));
        let profile = two_point_candidate(&params, &state).map_err(fail)?;
        let certificate = verify_nash_with_cap(
            &params,
            &state,
            &profile,
            config.certify_epsilon,
            config.caps.exact_profiles,
        )
        .map_err(fail)?;
        let lateness = expected_late_positive(&params, &state, &profile).map_err(fail)?;
        let mut problems = Vec::new();
        if !certificate.is_epsilon_nash {
            problems.push(format!("maximal deviation gain {}", certificate.max_deviation_gain));
        }
        if certificate.structure_flags.as_ref().is_some_and(|f| !f.all()) {
            problems.push("structure flags fail".to_string());
        }
        if !lateness.positive {
            problems.push("expected late jobs are zero".to_string());
        }
        let passed = problems.is_empty();
        if check {
            report.failures.extend(
                problems
                    .into_iter()
                    .map(|p| format!("certify_nash (N = {players}, T = {period}): {p}")),
            );
        }
        let path = out_dir.join(format!("certify_nash_n{players}_t{period}.json"));
        let body = NashReport {
            players,
            period,
            counts: state.counts().to_vec(),
            certificate,
            lateness,
        };
        write_report(&path, Task::CertifyNash, text, passed, &body)?;
        report.files.push(path);
    }
    Ok(())
}

fn execute_certify_cce(
    config: &RunConfig,
    text: &str,
    out_dir: &Path,
    check: bool,
    report: &mut ExecutionReport,
) -> Result<(), ConfigError> {
    for (players, period, _) in config.combinations() {
        let params = model_params(config, players, period)?;
        let state = initial_state(config, players)?;
        let cert = cce_zero_support_certificate(&params, &state, config.caps.exact_profiles)
            .map_err(|e| ConfigError::Run(format!("certify_cce (N = {players}, T = {period}): {e}")))?;
        let passed = cert.verdict == CceVerdict::Certified && cert.sum_bound_everywhere && cert.gaps_everywhere;
        if check && !passed {
            report.failures.push(format!(
                "certify_cce (N = {players}, T = {period}): verdict {:?}, sum bound {}, gaps {}",
                cert.verdict, cert.sum_bound_everywhere, cert.gaps_everywhere
            ));
        }
        let path = out_dir.join(format!("certify_cce_n{players}_t{period}.json"));
        write_report(&path, Task::CertifyCce, text, passed, &cert)?;
        report.files.push(path);
    }
    Ok(())
}

fn walk_params(config: &RunConfig) -> WalkParams {
    let w = &config.walk;
    WalkParams {
        reinforcement: Reinforcement::Exponential {
            scale: w.scale,
            eta: w.eta,
            divisor: w.divisor,
        },
        max_jump: w.max_jump,
        d: w.d,
        z0: w.z0,
        sum_bound: None,
        low_up: None,
        start: w.start,
    }
}

fn execute_walk(
    config: &RunConfig,
    text: &str,
    out_dir: &Path,
    check: bool,
    report: &mut ExecutionReport,
) -> Result<(), ConfigError> {
    let wp = walk_params(config);
    let fail = |e: crate::dynamics::DynamicsError| ConfigError::Run(format!("walk: {e}"));
    let seeds = config.seeds.seeds();
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&seed| reinforced_walk_run(&wp, config.horizon, seed))
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let limit = config.walk.sup_limit;
    let path = out_dir.join(AGGREGATE_FILE);
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["seed", "steps", "start", "sup", "final_x", "up_moves", "bounded"])
        .map_err(|e| io_error(&path, e))?;
    for r in &runs {
        w.write_record([
            r.seed.to_string(),
            r.steps.to_string(),
            r.start.to_string(),
            r.sup.to_string(),
            r.final_x.to_string(),
            r.up_moves.to_string(),
            (r.sup < limit).to_string(),
        ])
        .map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    report.files.push(path);

    let sweep = product_bound_sweep(&wp, config.walk.z0 + config.walk.max_jump..=config.walk.sweep_to).map_err(fail)?;
    let unbounded: Vec<u64> = runs.iter().filter(|r| r.sup >= limit).map(|r| r.seed).collect();
    let passed = unbounded.is_empty() && sweep.all_hold;
    if check {
        if !unbounded.is_empty() {
            report
                .failures
                .push(format!("walk: runs with seeds {unbounded:?} reached {limit} or more"));
        }
        if !sweep.all_hold {
            let first = sweep.rows.iter().find(|r| !r.holds).map(|r| r.x).unwrap_or_default();
            report
                .failures
                .push(format!("walk: the product bound fails at x = {first}"));
        }
    }
    #[derive(Serialize)]
    struct WalkDocument<'a> {
        runs: &'a [crate::dynamics::WalkReport],
        product_bound: &'a crate::dynamics::ProductBoundSweep,
    }
    let doc_path = out_dir.join("walk.json");
    write_report(
        &doc_path,
        Task::Walk,
        text,
        passed,
        &WalkDocument {
            runs: &runs,
            product_bound: &sweep,
        },
    )?;
    report.files.push(doc_path);
    Ok(())
}

fn execute_suite(
    config: &RunConfig,
    text: &str,
    out_dir: &Path,
    check: bool,
    report: &mut ExecutionReport,
) -> Result<(), ConfigError> {
    let c = &config.check;
    let path = out_dir.join(format!("{}.json", config.task.name()));
    let run_err = |e: String| ConfigError::Run(format!("{}: {e}", config.task.name()));
    let (passed, detail) = match config.task {
        Task::TieOracle => {
            let r = tie_order_oracle(c.max_total, c.max_period).map_err(|e| run_err(e.to_string()))?;
            write_report(&path, config.task, text, r.passed, &r)?;
            (
                r.passed,
                format!("{} mismatches in {} comparisons", r.mismatch_count, r.comparisons),
            )
        }
        Task::CheapestAction => {
            let r = cheapest_action_suite(&c.periods, &config.penalty, c.cases, c.seed)
                .map_err(|e| run_err(e.to_string()))?;
            write_report(&path, config.task, text, r.passed, &r)?;
            (r.passed, format!("{} failures in {} cases", r.failure_count, r.cases))
        }
        Task::LargeCountDominance => {
            let r = large_count_dominance_suite(&c.periods, c.cases, c.seed).map_err(|e| run_err(e.to_string()))?;
            write_report(&path, config.task, text, r.passed, &r)?;
            (
                r.passed,
                format!("{} failures in {} profiles", r.failure_count, r.profiles_checked),
            )
        }
        _ => unreachable!("not a suite task"),
    };
    if check && !passed {
        report.failures.push(format!("{}: {detail}", config.task.name()));
    }
    report.files.push(path);
    Ok(())
}

/// Runs every combination in the configuration and writes the outputs to `out_dir`.
///
/// `jobs = 0` uses the default thread count. Results are ordered by
/// combination and then seed, whatever the scheduling. Assertions are checked
/// when both the configuration and `assertions` enable them.
pub fn execute(
    config: &RunConfig,
    text: &str,
    out_dir: &Path,
    jobs: usize,
    assertions: bool,
) -> Result<ExecutionReport, ConfigError> {
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError::Run(format!("thread pool: {e}")))?;
    let check = assertions && config.assertions.enabled;
    let mut report = ExecutionReport {
        assertions_checked: check,
        ..ExecutionReport::default()
    };
    pool.install(|| match config.task {
        Task::Run => execute_runs(config, out_dir, check, &mut report),
        Task::CertifyNash => execute_certify_nash(config, text, out_dir, check, &mut report),
        Task::CertifyCce => execute_certify_cce(config, text, out_dir, check, &mut report),
        Task::Walk => execute_walk(config, text, out_dir, check, &mut report),
        Task::TieOracle | Task::CheapestAction | Task::LargeCountDominance => {
            execute_suite(config, text, out_dir, check, &mut report)
        }
    })?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    /// `(original, regenerated, identical)` for every compared file.
    pub compared: Vec<(PathBuf, PathBuf, bool)>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        !self.compared.is_empty() && self.compared.iter().all(|c| c.2)
    }
}

/// Regenerates an output from the configuration embedded in it and compares bytes.
///
/// Accepts a run summary, a JSON trajectory or a task report. For a summary
/// whose trajectory file sits next to it, that file is compared as well.
pub fn replay(file: &Path, out_dir: &Path) -> Result<ReplayOutcome, ConfigError> {
    let text = fs::read_to_string(file).map_err(|e| io_error(file, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| io_error(file, e))?;
    let config_text = doc
        .get("config")
        .and_then(|c| c.as_str())
        .or_else(|| {
            doc.get("metadata")
                .and_then(|m| m.get("config"))
                .and_then(|c| c.as_str())
        })
        .ok_or_else(|| ConfigError::Io(format!("{}: no embedded configuration", file.display())))?
        .to_owned();
    let config = parse_config(&config_text)?;
    execute(&config, &config_text, out_dir, 0, false)?;

    let name = file
        .file_name()
        .ok_or_else(|| ConfigError::Io(format!("{}: not a file", file.display())))?;
    let mut targets = vec![file.to_path_buf()];
    if let Some(traj) = doc.get("trajectory_file").and_then(|t| t.as_str()) {
        let sibling = file.with_file_name(traj);
        if sibling.exists() {
            targets.push(sibling);
        }
    }
    // A renamed summary is matched through the trajectory it names.
    let own_name = match doc.get("trajectory_file").and_then(|t| t.as_str()) {
        Some(traj) if !out_dir.join(name).exists() => {
            let stem = traj.rsplit_once('.').map_or(traj, |(s, _)| s);
            std::ffi::OsString::from(format!("{stem}.summary.json"))
        }
        _ => name.to_owned(),
    };
    let mut compared = Vec::new();
    for original in targets {
        let fname = if original == file {
            own_name.clone()
        } else {
            original.file_name().expect("sibling has a name").to_owned()
        };
        let regenerated = out_dir.join(&fname);
        let a = fs::read(&original).map_err(|e| io_error(&original, e))?;
        let b = fs::read(&regenerated).map_err(|e| io_error(&regenerated, e))?;
        compared.push((original, regenerated, a == b));
    }
    Ok(ReplayOutcome { compared })
}
