//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns the process exit status.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use homoclinic::multiplicity::{GuessKind, ScheduleItem};
use homoclinic::potential::{
    check_a, check_h2, check_h3, check_h4, check_sign, StrongForceWitness,
};
use homoclinic::solver::measure_candidate;
use homoclinic::{
    ps_split, search_distinct, solve_homoclinic, ActionFunctional, GridFunction, HamiltonianSystem,
    PowerWell, SolutionLibrary,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{
    BumpRow, CheckRow, DiagnoseSummary, ManifestEntry, RunReport, ScheduleRow, SolveSummary, Timing,
};
use crate::{exit, CliError};

type System = HamiltonianSystem<f64, PowerWell<f64>>;

/// Samples per hypothesis probe.
const CHECK_SAMPLES: usize = 64;

/// A command's result and written files, or a partial result on failure.
type CommandResult<T> = Result<(T, Vec<String>), (Option<T>, Vec<String>, CliError)>;

pub struct Context {
    /// Resolved configuration, echoed into every report.
    pub config: RunConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    fn finish<T: Serialize>(
        &self,
        name: &str,
        command: &str,
        hypotheses: Vec<CheckRow>,
        result: CommandResult<T>,
        timing: Timing,
    ) -> i32 {
        let (status, code, error, result, outputs) = match result {
            Ok((r, outputs)) => ("ok".to_string(), exit::OK, None, Some(r), outputs),
            Err((r, outputs, e)) => (
                "failed".to_string(),
                e.exit_code(),
                Some(e.to_string()),
                r,
                outputs,
            ),
        };
        let report = RunReport {
            command: command.into(),
            status,
            exit_code: code,
            error: error.clone(),
            config: self.config.clone(),
            hypotheses,
            result,
            outputs,
            timing,
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        if let Err(e) = self.write(name, &text) {
            eprintln!("{e}");
            return exit::CONFIG;
        }
        if let Some(e) = error {
            eprintln!("{e}");
        }
        code
    }
}

fn row(name: &str, result: Result<String, homoclinic::Error>) -> CheckRow {
    match result {
        Ok(detail) => CheckRow {
            name: name.into(),
            passed: true,
            detail,
        },
        Err(e) => CheckRow {
            name: name.into(),
            passed: false,
            detail: match e {
                homoclinic::Error::HypothesisViolation(m) => m,
                other => other.to_string(),
            },
        },
    }
}

/// Runs every hypothesis probe on the configured system.
pub fn hypothesis_rows(system: &System) -> Vec<CheckRow> {
    let well = &system.potential;
    let witness = StrongForceWitness::for_power_well(well.alpha(), system.singularity_norm());
    vec![
        row(
            "A: a(t) > 0",
            check_a(&system.coefficient, 1024)
                .map(|r| format!("min a = {:.6}, max a = {:.6}", r.min_a, r.max_a)),
        ),
        row(
            "H1: W < 0 away from 0, W(0) = 0, grad W(0) = 0",
            check_sign(well, CHECK_SAMPLES).map(|r| {
                format!(
                    "max sampled W = {:.3e}, |grad W(0)| = {:.1e}",
                    r.max_value, r.gradient_at_origin
                )
            }),
        ),
        row(
            "H2: W_uu(0) negative definite",
            check_h2(well, 1e-4)
                .map(|r| format!("eigenvalues in [{:.6}, {:.6}]", r.eigen_min, r.eigen_max)),
        ),
        row(
            "H3: strong force near q",
            check_h3(well, &witness, CHECK_SAMPLES).map(|r| {
                format!(
                    "min margin {:.4e} over {} samples, r = {}",
                    r.min_margin, r.samples, witness.radius
                )
            }),
        ),
        row(
            "H4: far-field growth",
            check_h4(well, &witness, CHECK_SAMPLES).map(|r| {
                format!(
                    "min margin {:.4e} over {} samples, R0 = {}",
                    r.min_margin, r.samples, witness.far_radius
                )
            }),
        ),
    ]
}

fn gate(rows: &[CheckRow]) -> Result<(), CliError> {
    match rows.iter().find(|r| !r.passed) {
        Some(r) => Err(CliError::Hypothesis(format!("{}: {}", r.name, r.detail))),
        None => Ok(()),
    }
}

fn print_rows(rows: &[CheckRow]) {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in rows {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:width$}  {}", r.name, r.detail);
    }
}

fn elapsed(timing: &mut Timing, stage: &str, start: Instant) {
    timing.insert(stage.into(), start.elapsed().as_secs_f64());
}

pub fn check(ctx: &Context) -> i32 {
    let start = Instant::now();
    let mut timing = Timing::new();
    let system = match ctx.config.system() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let rows = hypothesis_rows(&system);
    print_rows(&rows);
    elapsed(&mut timing, "total", start);
    let result = gate(&rows)
        .map(|()| ((), Vec::new()))
        .map_err(|e| (None, Vec::new(), e));
    ctx.finish("check.json", "check", rows, result, timing)
}

pub fn solve(ctx: &Context) -> i32 {
    let start = Instant::now();
    let mut timing = Timing::new();
    let system = match ctx.config.system() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let rows = hypothesis_rows(&system);
    elapsed(&mut timing, "hypotheses", start);
    let result = (|| {
        gate(&rows)?;
        let grid = ctx.config.grid()?;
        let cfg = ctx.config.solver()?;
        let t = Instant::now();
        let solution = solve_homoclinic(&system, grid, &cfg)?;
        elapsed(&mut timing, "solve", t);
        let functional = ActionFunctional::new(&system, grid);
        ctx.write("solution.csv", &solution.candidate.trajectory.to_csv())?;
        let summary = SolveSummary::new(
            &functional,
            &solution,
            ctx.config.diagnose.sobolev_windows,
            ctx.config.seed,
        );
        println!(
            "action {:.10}  grad_norm {:.3e}  clearance {:.4}  tails {:.2e} / {:.2e}",
            summary.candidate.action,
            summary.candidate.grad_norm,
            summary.candidate.clearance,
            summary.candidate.tail_sup_u,
            summary.candidate.tail_sup_du
        );
        Ok((summary, vec!["solution.csv".to_string()]))
    })()
    .map_err(|e: CliError| (None, Vec::new(), e));
    elapsed(&mut timing, "total", start);
    ctx.finish("report.json", "solve", rows, result, timing)
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineSummary {
    pub coarse_m: usize,
    pub fine_m: usize,
    pub coarse: SolveSummary,
    pub fine: SolveSummary,
    pub residual_ratio: f64,
    pub ratio_band: [f64; 2],
    pub action_drift: f64,
    pub d_h_drift: f64,
    pub passed: bool,
}

pub fn refine(ctx: &Context) -> i32 {
    let start = Instant::now();
    let mut timing = Timing::new();
    let system = match ctx.config.system() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let rows = hypothesis_rows(&system);
    let mut outputs = Vec::new();
    let result = (|| {
        gate(&rows)?;
        let cfg = ctx.config.solver()?;
        let m = ctx.config.grid.m;
        let fine_m = ctx.config.refine.fine_m.unwrap_or(2 * m);
        let mut levels = Vec::new();
        for level_m in [m, fine_m] {
            let grid = ctx.config.grid_with(level_m)?;
            let t = Instant::now();
            let solution = solve_homoclinic(&system, grid, &cfg)
                .map_err(|e| CliError::NoSolution(format!("m = {level_m}: {e}")))?;
            elapsed(&mut timing, &format!("solve_m{level_m}"), t);
            let name = format!("solution_m{level_m}.csv");
            ctx.write(&name, &solution.candidate.trajectory.to_csv())?;
            outputs.push(name);
            let functional = ActionFunctional::new(&system, grid);
            levels.push(SolveSummary::new(
                &functional,
                &solution,
                ctx.config.diagnose.sobolev_windows,
                ctx.config.seed,
            ));
        }
        let fine = levels.pop().expect("two levels");
        let coarse = levels.pop().expect("two levels");
        let scale = (fine_m as f64 / m as f64).powi(2) / 4.0;
        let band = ctx.config.refine.ratio_band.map(|b| b * scale);
        let residual_ratio = coarse.candidate.defect_residual / fine.candidate.defect_residual;
        let action_drift =
            (fine.candidate.action - coarse.candidate.action).abs() / fine.candidate.action.abs();
        let d_h_drift =
            (fine.constrained.d_h - coarse.constrained.d_h).abs() / fine.constrained.d_h.abs();
        let passed = residual_ratio >= band[0]
            && residual_ratio <= band[1]
            && action_drift <= ctx.config.refine.max_action_drift;
        println!(
            "m {m} -> {fine_m}: residual ratio {residual_ratio:.4} (band [{:.3}, {:.3}]), action drift {:.3e}, d_h drift {:.3e}",
            band[0], band[1], action_drift, d_h_drift
        );
        Ok(RefineSummary {
            coarse_m: m,
            fine_m,
            coarse,
            fine,
            residual_ratio,
            ratio_band: band,
            action_drift,
            d_h_drift,
            passed,
        })
    })();
    elapsed(&mut timing, "total", start);
    let result = match result {
        Ok(s) if s.passed => Ok((s, outputs)),
        Ok(s) => {
            let e = CliError::NoSolution(format!(
                "refinement outside tolerance: ratio {:.4}, action drift {:.3e}",
                s.residual_ratio, s.action_drift
            ));
            Err((Some(s), outputs, e))
        }
        Err(e) => Err((None, outputs, e)),
    };
    ctx.finish("refine_report.json", "refine", rows, result, timing)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub targets: usize,
    pub found: usize,
    pub eps_distinct: f64,
    pub min_pairwise_distance: Option<f64>,
    pub entries: Vec<ManifestEntry>,
    pub distance_matrix: Vec<Vec<f64>>,
    pub schedule: Vec<ScheduleRow>,
}

fn distance_csv(matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("id");
    for j in 0..matrix.len() {
        let _ = write!(out, ",{j}");
    }
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        let _ = write!(out, "{i}");
        for d in row {
            let _ = write!(out, ",{d:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn search(ctx: &Context) -> i32 {
    let start = Instant::now();
    let mut timing = Timing::new();
    let system = match ctx.config.system() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let rows = hypothesis_rows(&system);
    let mut outputs = Vec::new();
    let result = (|| {
        gate(&rows)?;
        let grid = ctx.config.grid()?;
        let cfg = ctx.config.solver()?;
        let search = ctx.config.search()?;
        let t = Instant::now();
        let outcome = search_distinct(&system, grid, &cfg, &search, ctx.jobs.max(1))?;
        elapsed(&mut timing, "search", t);
        let library = &outcome.library;
        let mut entries = Vec::new();
        for (id, entry) in library.entries().iter().enumerate() {
            let name = format!("entry_{id:03}.csv");
            ctx.write(&name, &entry.candidate.trajectory.to_csv())?;
            outputs.push(name.clone());
            entries.push(ManifestEntry {
                id,
                action: entry.candidate.action,
                grad_norm: entry.candidate.grad_norm,
                clearance: entry.candidate.clearance,
                trajectory_csv_path: name,
                seed: entry.seed,
                schedule_item: entry.origin.to_string(),
            });
        }
        let manifest = serde_json::to_string_pretty(&entries).expect("manifest serializes") + "\n";
        ctx.write("library.json", &manifest)?;
        ctx.write("distances.csv", &distance_csv(library.distance_matrix()))?;
        outputs.push("library.json".into());
        outputs.push("distances.csv".into());
        for e in &entries {
            println!(
                "entry {}  action {:.10}  grad_norm {:.3e}  clearance {:.4}  from {}",
                e.id, e.action, e.grad_norm, e.clearance, e.schedule_item
            );
        }
        Ok(SearchSummary {
            targets: search.targets,
            found: library.len(),
            eps_distinct: library.eps_distinct(),
            min_pairwise_distance: library.min_pairwise_distance(),
            entries,
            distance_matrix: library.distance_matrix().to_vec(),
            schedule: outcome.log.iter().map(Into::into).collect(),
        })
    })();
    elapsed(&mut timing, "total", start);
    let result = match result {
        Ok(s) if s.found >= s.targets => Ok((s, outputs)),
        Ok(s) => {
            let e = CliError::NoSolution(format!("found {} of {} targets", s.found, s.targets));
            Err((Some(s), outputs, e))
        }
        Err(e) => Err((None, outputs, e)),
    };
    ctx.finish("search_report.json", "search", rows, result, timing)
}

/// Reads a manifest and measures each listed trajectory. Returns the library
/// and the manifest id of each stored entry.
fn load_library(
    ctx: &Context,
    system: &System,
    path: &Path,
) -> Result<(SolutionLibrary<f64>, Vec<usize>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let grid = ctx.config.grid()?;
    let functional = ActionFunctional::new(system, grid);
    let mut library = SolutionLibrary::new(ctx.config.search.eps_distinct)?;
    let mut ids = Vec::new();
    for entry in manifest {
        let file = base.join(&entry.trajectory_csv_path);
        let text = std::fs::read_to_string(&file)
            .map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
        let u = GridFunction::from_csv(grid, &text)
            .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
        let candidate = measure_candidate(&functional, &u)
            .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
        let origin = ScheduleItem {
            index: entry.id,
            kind: GuessKind::Loaded(entry.schedule_item.clone()),
        };
        if let homoclinic::multiplicity::Insertion::Added(_) =
            library.insert(candidate, origin, entry.seed)?
        {
            ids.push(entry.id);
        }
    }
    Ok((library, ids))
}

pub fn diagnose(ctx: &Context, trajectory: &Path, library_path: Option<&Path>) -> i32 {
    let start = Instant::now();
    let mut timing = Timing::new();
    let system = match ctx.config.system() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let result = (|| {
        let grid = ctx.config.grid()?;
        let text = std::fs::read_to_string(trajectory)
            .map_err(|e| CliError::Io(format!("{}: {e}", trajectory.display())))?;
        let u = GridFunction::from_csv(grid, &text)
            .map_err(|e| CliError::Config(format!("{}: {e}", trajectory.display())))?;
        let default_library = ctx.out.join("library.json");
        let library_path = library_path
            .map(Path::to_path_buf)
            .or_else(|| default_library.exists().then_some(default_library));
        let (library, ids) = match library_path {
            Some(p) => load_library(ctx, &system, &p)?,
            None => (
                SolutionLibrary::new(ctx.config.search.eps_distinct)?,
                Vec::new(),
            ),
        };
        let functional = ActionFunctional::new(&system, grid);
        let measured = measure_candidate(&functional, &u);
        let search = &ctx.config.search;
        let split = ps_split(&u, &library, search.delta_bump, search.delta_gap)?;
        let sweep = u.sobolev_sweep(ctx.config.diagnose.sobolev_windows, ctx.config.seed)?;
        let nan = f64::NAN;
        let summary = DiagnoseSummary {
            action: measured.as_ref().map_or(nan, |c| c.action),
            grad_norm: measured.as_ref().map_or(nan, |c| c.grad_norm),
            clearance: measured.as_ref().map_or(nan, |c| c.clearance),
            sup_residual: measured.as_ref().map_or(nan, |c| c.residual.sup_residual),
            tail_sup_u: measured.as_ref().map_or(nan, |c| c.residual.tail_sup_u),
            tail_sup_du: measured.as_ref().map_or(nan, |c| c.residual.tail_sup_du),
            library_size: library.len(),
            bumps: split
                .bumps
                .iter()
                .map(|b| BumpRow {
                    window: [b.window.0, b.window.1],
                    matched: b.matched.map(|i| ids[i]),
                    shift: b.shift,
                    distance: b.matched.map(|_| b.distance),
                    h1_norm: b.profile.h1_norm(),
                })
                .collect(),
            residual_norm: split.residual_norm,
            tail_mass: split.tail_mass,
            sobolev_windows: sweep.checked,
            sobolev_failures: sweep.failures,
            sobolev_worst_slack: sweep.worst_slack,
        };
        if let Err(e) = &measured {
            println!("trajectory could not be evaluated: {e}");
        }
        println!(
            "action {:.10}  grad_norm {:.3e}  clearance {:.4}  tails {:.2e} / {:.2e}",
            summary.action,
            summary.grad_norm,
            summary.clearance,
            summary.tail_sup_u,
            summary.tail_sup_du
        );
        println!(
            "{} bump(s) against a library of {}; residual {:.3e}, tail mass {:.3e}",
            summary.bumps.len(),
            summary.library_size,
            summary.residual_norm,
            summary.tail_mass
        );
        for b in &summary.bumps {
            match b.matched {
                Some(id) => println!(
                    "  [{:.3}, {:.3}] -> entry {id} shift {} distance {:.3e}",
                    b.window[0],
                    b.window[1],
                    b.shift,
                    b.distance.unwrap_or(nan)
                ),
                None => println!("  [{:.3}, {:.3}] -> unmatched", b.window[0], b.window[1]),
            }
        }
        println!(
            "Sobolev bound: {} window(s), {} failure(s), worst slack {:.3e}",
            summary.sobolev_windows, summary.sobolev_failures, summary.sobolev_worst_slack
        );
        Ok((summary, Vec::new()))
    })()
    .map_err(|e: CliError| (None, Vec::new(), e));
    elapsed(&mut timing, "total", start);
    ctx.finish(
        "diagnose_report.json",
        "diagnose",
        Vec::new(),
        result,
        timing,
    )
}
