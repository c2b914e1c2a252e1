//! Command implementations behind the `minaffine` binary.
//!
//! Every command reads a JSON problem file and writes a pretty-printed JSON
//! report (plot-data writes CSV files instead). Pieces and partition cells are
//! numbered from 1 in reports.

pub mod problem;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use minaffine::cost::{validate_mm_nondegeneracy, NonDegeneracyReport, PairwiseReport};
use minaffine::multimarginal::{self, MultiMarginalProblem};
use minaffine::oracle::{self, DiscreteProblem, OracleStatus};
use minaffine::partition::{self, CyclicReport, SolveOptions, SolveReport, VerifyReport};
use minaffine::plan::PlanCell;
use minaffine::two_piece::solve_two_piece;
use minaffine::{MinAffineCost, MultiAffinePiece, SupportRegion};
use serde::Serialize;
use thiserror::Error;

pub use problem::{CostSpec, NamedCost, Problem, ProblemFile, ProblemOptions};

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_ATOMS: usize = 200;
pub const SUPPORT_SAMPLES: usize = 1000;
pub const MARGINAL_GRID: usize = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Usage(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }

    pub fn from_core(e: minaffine::Error) -> Self {
        match e {
            minaffine::Error::Io(io) => CliError::Io(io.to_string()),
            e @ (minaffine::Error::OrderTooLarge(_) | minaffine::Error::SizeLimit(_)) => CliError::Usage(e.to_string()),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "minaffine", version, about = "Transport on the line for minima of affine costs")]
pub struct Cli {
    /// Solver threads; 0 uses every core. Results do not depend on it.
    #[arg(long, env = "MINAFFINE_WORKERS", default_value_t = 0, global = true)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check assumption (A), essential pieces and the coincidence direction.
    Validate {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a two-marginal problem through the partition functional.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve, then compare against the discrete oracle.
    Compare {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Atoms per marginal for the oracle.
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the min-coordinates cost with any number of marginals.
    MmSolve {
        problem: PathBuf,
        /// Also run the multi-marginal oracle at this many atoms per marginal.
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write CSV data for envelope regions, partition cells and plan support.
    PlotData {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Output directory.
        #[arg(long)]
        out: String,
        /// Grid points per axis for the region map.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, default_value_t = SUPPORT_SAMPLES)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Relative value tolerance of the local search.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Corner margin allowed when verifying the partition.
    #[arg(long)]
    pub verify_tolerance: Option<f64>,
}

/// A command's JSON report and exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: String,
    pub exit_code: i32,
    pub out: Option<PathBuf>,
}

/// Runs a parsed command, writing the report to `--out` or `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            let written = match &outcome.out {
                Some(path) => fs::write(path, &outcome.report).map_err(|e| format!("{}: {e}", path.display())),
                None => stdout.write_all(outcome.report.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => outcome.exit_code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Validate { problem, out } => {
            let (report, code) = cmd_validate(&Problem::load(problem)?)?;
            Ok(Outcome { report: to_json(&report), exit_code: code, out: out.clone() })
        }
        Command::Solve { problem, search, out } => {
            let report = cmd_solve(&Problem::load(problem)?, search, cli.workers)?;
            Ok(Outcome { report: to_json(&report), exit_code: 0, out: out.clone() })
        }
        Command::Compare { problem, search, atoms, out } => {
            let report = cmd_compare(&Problem::load(problem)?, search, *atoms, cli.workers)?;
            let code = if report.within_tolerance { 0 } else { 3 };
            Ok(Outcome { report: to_json(&report), exit_code: code, out: out.clone() })
        }
        Command::MmSolve { problem, atoms, out } => {
            let report = cmd_mm_solve(&Problem::load(problem)?, *atoms)?;
            Ok(Outcome { report: to_json(&report), exit_code: 0, out: out.clone() })
        }
        Command::PlotData { problem, search, out, grid, samples } => {
            if out.trim().is_empty() {
                return Err(CliError::Usage("--out needs a directory".into()));
            }
            let report = cmd_plot_data(&Problem::load(problem)?, search, cli.workers, Path::new(out), *grid, *samples)?;
            Ok(Outcome { report: to_json(&report), exit_code: 0, out: None })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct MarginalSummary {
    pub support: (f64, f64),
    pub mean: f64,
}

fn summarize(problem: &Problem) -> Vec<MarginalSummary> {
    problem.marginals.iter().map(|m| MarginalSummary { support: m.support(), mean: m.mean() }).collect()
}

#[derive(Debug, Serialize)]
pub struct PairwiseSummary {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl From<&PairwiseReport> for PairwiseSummary {
    fn from(r: &PairwiseReport) -> Self {
        PairwiseSummary { passed: r.passed, failures: r.failures.iter().map(|f| f.to_string()).collect() }
    }
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub valid: bool,
    pub marginals: Vec<MarginalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<PairwiseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub essential: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped: Option<Vec<usize>>,
    /// Coincidence line of `m` pieces in `m` variables, when the counts match.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multi_marginal: Option<NonDegeneracyReport>,
    pub reasons: Vec<String>,
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|i| i + 1).collect()
}

pub fn cmd_validate(problem: &Problem) -> Result<(ValidateReport, i32), CliError> {
    let m = problem.marginals.len();
    let mut report = ValidateReport {
        command: "validate",
        valid: true,
        marginals: summarize(problem),
        pairwise: None,
        essential: None,
        dropped: None,
        multi_marginal: None,
        reasons: Vec::new(),
    };
    let multi_pieces: Vec<MultiAffinePiece> = match problem.pieces() {
        Some(pieces) => {
            let cost = problem.affine_cost()?;
            report.pairwise = Some((&cost.validate_pairwise_a()).into());
            match cost.validate(&problem.working_box()) {
                Ok((_, v)) => {
                    report.essential = Some(one_based(&v.essential));
                    report.dropped = Some(one_based(&v.dropped));
                }
                Err(e) => {
                    report.valid = false;
                    report.reasons.push(e.to_string());
                }
            }
            pieces.iter().map(|p| MultiAffinePiece::new(vec![p[0], p[1]], p[2])).collect()
        }
        None => (0..m).map(|i| MultiAffinePiece::coordinate(m, i)).collect(),
    };
    if m < 2 {
        report.valid = false;
        report.reasons.push(minaffine::Error::TooFewMarginals(m).to_string());
    } else if multi_pieces.len() == m {
        match validate_mm_nondegeneracy(&multi_pieces) {
            Ok(r) => {
                // a zero component only matters for the multi-marginal cost
                if !r.passed && problem.pieces().is_none() {
                    report.valid = false;
                    report.reasons.push(format!("coincidence direction has zero components {:?}", one_based(&r.zero_components)));
                }
                report.multi_marginal = Some(r);
            }
            Err(e) => {
                if problem.pieces().is_none() {
                    report.valid = false;
                    report.reasons.push(e.to_string());
                }
            }
        }
    }
    let code = if report.valid { 0 } else { 2 };
    Ok((report, code))
}

fn solve_options(problem: &Problem, search: &SearchArgs, workers: usize) -> SolveOptions {
    let opts = &problem.file.options;
    let defaults = SolveOptions::default();
    SolveOptions {
        max_order: search.max_order.or(opts.max_order),
        restarts: search.restarts.or(opts.restarts).unwrap_or(DEFAULT_RESTARTS),
        seed: search.seed.or(opts.seed).unwrap_or(0),
        tolerance: search.tolerance.or(opts.tolerance).unwrap_or(defaults.tolerance),
        verify_tolerance: search.verify_tolerance.or(opts.verify_tolerance).unwrap_or(defaults.verify_tolerance),
        collapse_mass: defaults.collapse_mass,
        workers,
    }
}

#[derive(Debug, Serialize)]
pub struct OptionsEcho {
    pub max_order: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub verify_tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    /// 1-based index into the original family.
    pub piece: usize,
    pub mass: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

#[derive(Debug, Serialize)]
pub struct PartitionSummary {
    pub order: usize,
    /// μ-levels separating the x-intervals.
    pub levels: Vec<f64>,
    pub x_breaks: Vec<f64>,
    pub y_breaks: Vec<f64>,
    /// Cells listed in increasing y.
    pub y_order: Vec<usize>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Serialize)]
pub struct PlanSummary {
    pub cells: Vec<PlanCell>,
    pub cost: f64,
    /// Worst error per axis of the plan's marginal on a 64-interval grid.
    pub marginal_discrepancy: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ClosedForm {
    pub split: f64,
    pub value: f64,
    pub anchor: (f64, f64),
    pub region: SupportRegion,
}

#[derive(Debug, Serialize)]
pub struct OrderBest {
    pub order: usize,
    pub y_order: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveDiagnostics {
    pub subproblems: usize,
    pub evaluations: usize,
    pub best_by_order: Vec<OrderBest>,
    pub demoted: usize,
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub command: &'static str,
    pub value: f64,
    pub options: OptionsEcho,
    pub essential: Vec<usize>,
    pub dropped: Vec<usize>,
    pub partition: PartitionSummary,
    pub plan: PlanSummary,
    pub verification: VerifyReport,
    pub cyclic: CyclicReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForm>,
    pub diagnostics: SolveDiagnostics,
}

/// Runs the partition solver on a validated two-marginal problem.
pub fn solve_problem(problem: &Problem, search: &SearchArgs, workers: usize) -> Result<(SolveReport, SolveOptions), CliError> {
    let cost = problem.affine_cost()?;
    let options = solve_options(problem, search, workers);
    let report = partition::optimize(&problem.marginals[0], &problem.marginals[1], &cost, &options)
        .map_err(CliError::from_core)?;
    Ok((report, options))
}

pub fn cmd_solve(problem: &Problem, search: &SearchArgs, workers: usize) -> Result<SolveOutput, CliError> {
    let (report, options) = solve_problem(problem, search, workers)?;
    let (mu, nu) = (&problem.marginals[0], &problem.marginals[1]);
    let p = &report.partition;
    let original = |reduced: usize| report.essential[reduced] + 1;
    let cells = (0..p.order())
        .map(|c| {
            let r = p.support_rect(c, mu, nu);
            CellSummary { cell: c + 1, piece: original(report.labels[c]), mass: p.masses()[c], x_range: r.x, y_range: r.y }
        })
        .collect();
    let partition = PartitionSummary {
        order: p.order(),
        levels: p.levels().to_vec(),
        x_breaks: p.x_breaks().to_vec(),
        y_breaks: p.y_breaks().to_vec(),
        y_order: one_based(p.perm()),
        cells,
    };
    let plan = PlanSummary {
        cells: report.plan.cells().to_vec(),
        cost: report.plan.cost(&report.cost.linear_forms()),
        marginal_discrepancy: report.plan.marginal_discrepancy(MARGINAL_GRID),
    };
    let points: Vec<(f64, f64)> =
        report.plan.sample(SUPPORT_SAMPLES).into_iter().map(|w| (w.point[0], w.point[1])).collect();
    let cyclic = partition::cyclic_monotonicity_check(&points, &report.cost, 2).map_err(CliError::from_core)?;
    let closed_form = match report.cost.pieces() {
        [l1, l2] => {
            let s = solve_two_piece(mu, nu, l1, l2).map_err(CliError::from_core)?;
            Some(ClosedForm { split: s.split, value: s.value, anchor: s.anchor, region: s.region })
        }
        _ => None,
    };
    let d = &report.diagnostics;
    let best_by_order = (1..=d.subproblems.iter().map(|s| s.order).max().unwrap_or(0))
        .filter_map(|k| {
            d.subproblems
                .iter()
                .filter(|s| s.order == k)
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .map(|s| OrderBest { order: k, y_order: one_based(&s.perm), value: s.value })
        })
        .collect();
    Ok(SolveOutput {
        command: "solve",
        value: report.value,
        options: OptionsEcho {
            max_order: options.max_order,
            restarts: options.restarts,
            seed: options.seed,
            tolerance: options.tolerance,
            verify_tolerance: options.verify_tolerance,
        },
        essential: one_based(&report.essential),
        dropped: one_based(&report.dropped),
        partition,
        plan,
        verification: report.verification.clone(),
        cyclic,
        closed_form,
        diagnostics: SolveDiagnostics {
            subproblems: d.subproblems.len(),
            evaluations: d.evaluations,
            best_by_order,
            demoted: d.demoted.len(),
        },
    })
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub command: &'static str,
    pub atoms: usize,
    pub solver_value: f64,
    pub oracle_value: f64,
    /// Solver value minus oracle value.
    pub gap: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub oracle_iterations: usize,
    pub oracle_status: OracleStatus,
}

/// Allowed `|gap|` at `atoms` atoms per marginal: `4 · (widest support) / atoms`.
pub fn compare_tolerance(problem: &Problem, atoms: usize) -> f64 {
    let width = problem.marginals.iter().map(|m| m.support_width()).fold(0.0, f64::max);
    4.0 * width / atoms as f64
}

pub fn cmd_compare(
    problem: &Problem,
    search: &SearchArgs,
    atoms: Option<usize>,
    workers: usize,
) -> Result<CompareReport, CliError> {
    let atoms = atoms.or(problem.file.options.oracle_atoms).unwrap_or(DEFAULT_ATOMS);
    if atoms == 0 {
        return Err(CliError::Usage("--atoms must be positive".into()));
    }
    let (report, _) = solve_problem(problem, search, workers)?;
    let (mu, nu) = (&problem.marginals[0], &problem.marginals[1]);
    let discrete = DiscreteProblem::from_min_affine(mu.discretize(atoms), nu.discretize(atoms), &report.cost)
        .map_err(CliError::from_core)?;
    let exact = oracle::solve_discrete_ot(&discrete).map_err(CliError::from_core)?;
    let gap = report.value - exact.value;
    let tolerance = compare_tolerance(problem, atoms);
    Ok(CompareReport {
        command: "compare",
        atoms,
        solver_value: report.value,
        oracle_value: exact.value,
        gap,
        tolerance,
        within_tolerance: gap.abs() <= tolerance,
        oracle_iterations: exact.iterations,
        oracle_status: exact.status,
    })
}

#[derive(Debug, Serialize)]
pub struct SupportSummary {
    pub samples: usize,
    pub passed: bool,
    pub violations: usize,
}

#[derive(Debug, Serialize)]
pub struct MmOracle {
    pub atoms: usize,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Serialize)]
pub struct MmSolveReport {
    pub command: &'static str,
    pub marginals: Vec<MarginalSummary>,
    pub threshold: f64,
    pub low_mass: Vec<f64>,
    pub mass_residual: f64,
    pub value: f64,
    pub plan_cost: f64,
    pub support: SupportSummary,
    pub marginal_discrepancy: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<MmOracle>,
}

fn mm_problem(problem: &Problem) -> Result<MultiMarginalProblem, CliError> {
    if problem.pieces().is_some() {
        return Err(CliError::Invalid("mm-solve needs the min-coordinates cost".into()));
    }
    MultiMarginalProblem::min_coordinates(problem.marginals.clone()).map_err(CliError::from_core)
}

pub fn cmd_mm_solve(problem: &Problem, atoms: Option<usize>) -> Result<MmSolveReport, CliError> {
    let mm = mm_problem(problem)?;
    let sol = multimarginal::solve_min_coordinates(&mm).map_err(CliError::from_core)?;
    let points: Vec<Vec<f64>> = sol.plan.sample(SUPPORT_SAMPLES).into_iter().map(|w| w.point).collect();
    let check = multimarginal::verify_support_conditions(&points, sol.threshold);
    let oracle = match atoms {
        None => None,
        Some(0) => return Err(CliError::Usage("--atoms must be positive".into())),
        Some(n) => {
            let lists = problem.marginals.iter().map(|m| m.discretize(n)).collect();
            let discrete = DiscreteProblem::from_min_coordinates(lists).map_err(CliError::from_core)?;
            let r = oracle::solve_discrete_mmot(&discrete).map_err(CliError::from_core)?;
            Some(MmOracle { atoms: n, value: r.value, gap: sol.value - r.value })
        }
    };
    Ok(MmSolveReport {
        command: "mm-solve",
        marginals: summarize(problem),
        threshold: sol.threshold,
        low_mass: sol.low_mass.clone(),
        mass_residual: sol.diagnostics.mass_residual,
        value: sol.value,
        plan_cost: sol.diagnostics.plan_cost,
        support: SupportSummary { samples: check.checked, passed: check.passed, violations: check.violations.len() },
        marginal_discrepancy: sol.plan.marginal_discrepancy(MARGINAL_GRID),
        oracle,
    })
}

#[derive(Debug, Serialize)]
pub struct PlotFile {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
pub struct PlotReport {
    pub command: &'static str,
    pub directory: PathBuf,
    pub files: Vec<PlotFile>,
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PlotFile, CliError> {
    let mut text = String::with_capacity(rows.len() * 32);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(PlotFile { name: name.to_string(), rows: rows.len() })
}

fn grid_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn region_rows(cost: &MinAffineCost, x: (f64, f64), y: (f64, f64), grid: usize) -> Vec<String> {
    let ys = grid_points(y.0, y.1, grid);
    grid_points(x.0, x.1, grid)
        .into_iter()
        .flat_map(|xv| ys.iter().map(move |&yv| (xv, yv)))
        .map(|(xv, yv)| format!("{xv},{yv},{}", cost.evaluate(xv, yv).1 + 1))
        .collect()
}

pub fn cmd_plot_data(
    problem: &Problem,
    search: &SearchArgs,
    workers: usize,
    dir: &Path,
    grid: usize,
    samples: usize,
) -> Result<PlotReport, CliError> {
    if grid == 0 || samples == 0 {
        return Err(CliError::Usage("--grid and --samples must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    if problem.pieces().is_some() {
        let cost = problem.affine_cost()?;
        let (report, _) = solve_problem(problem, search, workers)?;
        let (mu, nu) = (&problem.marginals[0], &problem.marginals[1]);
        let bbox = problem.working_box();
        files.push(write_csv(dir, "regions.csv", "x,y,piece", &region_rows(&cost, bbox.x, bbox.y, grid))?);
        let p = &report.partition;
        let rows: Vec<String> = (0..p.order())
            .map(|c| {
                let r = p.support_rect(c, mu, nu);
                let piece = report.essential[report.labels[c]] + 1;
                format!("{},{},{},{},{},{},{}", c + 1, r.x.0, r.x.1, r.y.0, r.y.1, p.masses()[c], piece)
            })
            .collect();
        files.push(write_csv(dir, "partition.csv", "cell,x_lo,x_hi,y_lo,y_hi,mass,piece", &rows)?);
        let rows: Vec<String> =
            report.plan.sample(samples).into_iter().map(|w| format!("{},{}", w.point[0], w.point[1])).collect();
        files.push(write_csv(dir, "support.csv", "x,y", &rows)?);
    } else {
        let sol = multimarginal::solve_min_coordinates(&mm_problem(problem)?).map_err(CliError::from_core)?;
        let header: Vec<String> = (1..=problem.marginals.len()).map(|i| format!("x{i}")).collect();
        let rows: Vec<String> = sol
            .plan
            .sample(samples)
            .into_iter()
            .map(|w| w.point.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
            .collect();
        files.push(write_csv(dir, "support.csv", &header.join(","), &rows)?);
    }
    Ok(PlotReport { command: "plot-data", directory: dir.to_path_buf(), files })
}
