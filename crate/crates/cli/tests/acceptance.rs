//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line on stdout (bypassing the harness capture) and then asserts.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use homoclinic::multiplicity::{
    multibump_guess, ps_split, GuessKind, ScheduleItem, SolutionLibrary,
};
use homoclinic::potential::{check_h2, check_h3, StrongForceWitness};
use homoclinic::{
    search_distinct, solve_homoclinic, ActionFunctional, ExampleSystem64, Grid, GridFunction,
    HamiltonianSystem, PowerWell, SearchConfig, SearchOutcome, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn report(n: u32, passed: bool, what: &str, detail: String, elapsed: Duration) {
    let mark = if passed { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {n:>2}: {mark}  {what}  [{detail}; {:.2} s]\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn example() -> ExampleSystem64 {
    HamiltonianSystem::example(2, 2.0, 2.5, 1.0, 1.0).unwrap()
}

fn cli(args: &[&str], dir: &Path) -> (i32, Value, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_homoclinic"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("HOMOCLINIC_OUT")
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let name = match args[0] {
        "solve" => "report.json",
        "refine" => "refine_report.json",
        "search" => "search_report.json",
        other => panic!("no report for {other}"),
    };
    let text = std::fs::read_to_string(dir.join(name)).unwrap_or_else(|_| "null".into());
    (
        out.status.code().unwrap_or(-1),
        serde_json::from_str(&text).unwrap(),
        elapsed,
    )
}

/// Sum of one to three Gaussians with random vector amplitudes.
fn random_trajectory(grid: Grid<f64>, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction<f64> {
    let bumps: Vec<(f64, f64, [f64; 2])> = (0..rng.gen_range(1..=3))
        .map(|_| {
            (
                rng.gen_range(-4.0..4.0),
                rng.gen_range(0.3..2.0),
                [rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)],
            )
        })
        .collect();
    GridFunction::from_fn(grid, 2, |t, out| {
        for (c, w, a) in &bumps {
            let e = (-((t - c) / w).powi(2)).exp();
            out[0] += a[0] * e;
            out[1] += a[1] * e;
        }
    })
}

fn library() -> &'static SearchOutcome<f64> {
    static LIB: OnceLock<SearchOutcome<f64>> = OnceLock::new();
    LIB.get_or_init(|| {
        let system = example();
        search_distinct(
            &system,
            Grid::desk(),
            &SolverConfig::default(),
            &SearchConfig::default(),
            1,
        )
        .expect("search runs")
    })
}

#[test]
fn criterion_01_gradient_consistency() {
    let start = Instant::now();
    let system = example();
    let f = ActionFunctional::new(&system, Grid::desk());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 20 {
        let u = random_trajectory(Grid::desk(), &mut rng, 2.5);
        let clearance = f.singularity_clearance(&u);
        if clearance < f.clearance() {
            continue;
        }
        // truncation error grows like step^2 / clearance^2 near q
        let step = 1e-4 * clearance.min(1.0);
        worst = worst.max(f.gradient_fd_check(&u, step, 200, tested as u64).unwrap());
        tested += 1;
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-6 && elapsed.as_secs_f64() <= 10.0;
    report(
        1,
        passed,
        "analytic gradient vs central differences, 20 trajectories",
        format!("worst relative error {worst:.2e} (limit 1e-6)"),
        elapsed,
    );
    assert!(passed);
}

#[test]
fn criterion_02_hypothesis_checker() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for alpha in [2.0, 3.0, 4.0] {
        let well = PowerWell::standard(2, alpha).unwrap();
        let r = check_h2(&well, 1e-4).unwrap();
        let exact = -2.0 * 2f64.powf(-alpha);
        worst = worst
            .max((r.eigen_min - exact).abs())
            .max((r.eigen_max - exact).abs());
    }
    let well = PowerWell::standard(2, 2.0).unwrap();
    let witness = StrongForceWitness::for_power_well(2.0, 2.0);
    let h3 = check_h3(&well, &witness, 64);
    let passed = worst <= 1e-4 && h3.is_ok();
    report(
        2,
        passed,
        "check_H2 eigenvalues for alpha 2, 3, 4 and check_H3 with ln|u-q| at r = 0.1",
        format!(
            "max eigenvalue error {worst:.2e}; H3 {}",
            match &h3 {
                Ok(r) => format!("margin {:.3e}", r.min_margin),
                Err(e) => e.to_string(),
            }
        ),
        start.elapsed(),
    );
    assert!(passed);
}

#[test]
fn criterion_03_translation_invariance() {
    let start = Instant::now();
    let system = example();
    let grid = Grid::desk();
    let f = ActionFunctional::new(&system, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (c, w) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..1.5));
        let a = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
        let u = GridFunction::from_fn(grid, 2, |t, out| {
            let s = (t - c) / w;
            if s.abs() < 1.0 {
                let b = (1.0 - s * s).powi(3);
                out[0] = a[0] * b;
                out[1] = a[1] * b * s;
            }
        });
        let base = f.value(&u).unwrap();
        for k in -4..=4 {
            let shifted = f.value(&u.shift_periods(k).unwrap()).unwrap();
            worst = worst.max((shifted - base).abs() / base.abs());
        }
    }
    let passed = worst <= 1e-10;
    report(
        3,
        passed,
        "action under period shifts |k| <= 4, 10 trajectories",
        format!("worst relative change {worst:.2e} (limit 1e-10)"),
        start.elapsed(),
    );
    assert!(passed);
}

#[test]
fn criterion_04_existence_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r, elapsed) = cli(&["solve"], dir.path());
    let c = &r["result"]["candidate"];
    let get = |k: &str| c[k].as_f64().unwrap_or(f64::NAN);
    let passed = code == 0
        && get("grad_norm") <= 1e-6
        && get("action") > 0.0
        && get("clearance") >= 1e-3 * 2.0
        && get("tail_sup_u") <= 1e-3
        && get("tail_sup_du") <= 1e-2
        && elapsed.as_secs_f64() <= 60.0;
    report(
        4,
        passed,
        "solve on the example potential, default grid",
        format!(
            "exit {code}, action {:.6}, grad_norm {:.2e}, clearance {:.3}, tails {:.2e} / {:.2e}",
            get("action"),
            get("grad_norm"),
            get("clearance"),
            get("tail_sup_u"),
            get("tail_sup_du")
        ),
        elapsed,
    );
    assert!(passed);
}

#[test]
fn criterion_05_discretization_order() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r, elapsed) = cli(&["refine"], dir.path());
    let ratio = r["result"]["residual_ratio"].as_f64().unwrap_or(f64::NAN);
    let drift = r["result"]["action_drift"].as_f64().unwrap_or(f64::NAN);
    let passed = code == 0
        && (3.5..=4.5).contains(&ratio)
        && drift <= 0.05
        && elapsed.as_secs_f64() <= 180.0;
    report(
        5,
        passed,
        "refine m = 40 -> 80",
        format!(
            "exit {code}, residual ratio {ratio:.4} (band [3.5, 4.5]), action drift {drift:.2e}"
        ),
        elapsed,
    );
    assert!(passed);
}

#[test]
fn criterion_06_constrained_level() {
    let start = Instant::now();
    let system = example();
    let cfg = SolverConfig::default();
    let mut levels = Vec::new();
    let mut ok = true;
    for m in [40, 80] {
        let grid = Grid::new(1.0, m, 8).unwrap();
        let s = solve_homoclinic(&system, grid, &cfg).unwrap();
        let c = &s.constrained;
        ok &= c.value > 0.0 && (c.constraint.k > 1.0 + cfg.eps_k / 2.0 || c.constraint_active);
        levels.push((c.value, c.constraint.k, c.constraint_active));
    }
    let drift = (levels[1].0 - levels[0].0).abs() / levels[1].0;
    let passed = ok && drift <= 0.05;
    report(
        6,
        passed,
        "E-constrained level d_h > 0 and stable under m = 40 -> 80",
        format!(
            "d_h {:.6} / {:.6} (drift {drift:.2e}), k {:.4} / {:.4}, constraint-active {} / {}",
            levels[0].0, levels[1].0, levels[0].1, levels[1].1, levels[0].2, levels[1].2
        ),
        start.elapsed(),
    );
    assert!(passed);
}

#[test]
fn criterion_07_multiplicity() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r, elapsed) = cli(&["search", "--targets", "3", "--jobs", "1"], dir.path());
    let res = &r["result"];
    let found = res["found"].as_u64().unwrap_or(0);
    let min_d = res["min_pairwise_distance"].as_f64().unwrap_or(f64::NAN);
    let passed = code == 0 && found >= 3 && min_d >= 0.1 && elapsed.as_secs_f64() <= 300.0;
    report(
        7,
        passed,
        "search --targets 3 at jobs = 1",
        format!("exit {code}, {found} distinct candidates, min pairwise distance {min_d:.4}"),
        elapsed,
    );
    assert!(passed);
}

#[test]
fn criterion_08_ps_splitting() {
    let start = Instant::now();
    let system = example();
    // tau_10 v needs L >= 10 + bump width, so this uses M = 16.
    let grid = Grid::new(1.0, 40, 16).unwrap();
    let f = ActionFunctional::new(&system, grid);
    let v = solve_homoclinic(&system, grid, &SolverConfig::default())
        .unwrap()
        .candidate;
    let norm_v = v.trajectory.h1_norm();
    let mut lib = SolutionLibrary::new(0.1).unwrap();
    let origin = ScheduleItem {
        index: 0,
        kind: GuessKind::Loaded("v".into()),
    };
    lib.insert(v.clone(), origin, 0).unwrap();
    let u = multibump_guess(&f, &[(&v.trajectory, 0), (&v.trajectory, 10)], 0.05).unwrap();
    let split = ps_split(&u, &lib, 0.05, 0.01).unwrap();
    let shifts: Vec<i64> = split.bumps.iter().map(|b| b.shift).collect();
    let worst = split.bumps.iter().map(|b| b.distance).fold(0.0, f64::max);
    let passed = split.bumps.len() == 2
        && split.bumps.iter().all(|b| b.matched == Some(0))
        && shifts == [0, 10]
        && worst <= 0.05 * norm_v
        && split.residual_norm <= 2.0 * split.tail_mass;
    report(
        8,
        passed,
        "ps_split of v + tau_10 v",
        format!(
            "{} bumps, shifts {shifts:?}, worst match {worst:.3e} (limit {:.3e}), residual {:.2e} vs tail mass {:.2e}",
            split.bumps.len(),
            0.05 * norm_v,
            split.residual_norm,
            split.tail_mass
        ),
        start.elapsed(),
    );
    assert!(passed);
}

#[test]
fn criterion_09_sobolev_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut checked = 0;
    let mut slack = f64::INFINITY;
    for i in 0..100 {
        let u = random_trajectory(Grid::desk(), &mut rng, 3.0);
        let sweep = u.sobolev_sweep(20, i).unwrap();
        failures += sweep.failures;
        checked += sweep.checked;
        slack = slack.min(sweep.worst_slack);
    }
    let lib = library();
    for (i, e) in lib.library.entries().iter().enumerate() {
        let sweep = e
            .candidate
            .trajectory
            .sobolev_sweep(20, 1000 + i as u64)
            .unwrap();
        failures += sweep.failures;
        checked += sweep.checked;
        slack = slack.min(sweep.worst_slack);
    }
    let passed = failures == 0 && !lib.library.is_empty();
    report(
        9,
        passed,
        "discrete Sobolev bound on 100 random functions and every library entry",
        format!(
            "{checked} windows, {failures} failures, worst slack {slack:.3e}, {} entries",
            lib.library.len()
        ),
        start.elapsed(),
    );
    assert!(passed);
}

#[test]
fn criterion_10_positivity_gap() {
    let start = Instant::now();
    let system = example();
    let f = ActionFunctional::new(&system, Grid::desk());
    let probe = f.positivity_probe(1.0, 1000, 10).unwrap();
    let lib = library();
    let lowest = lib
        .library
        .entries()
        .iter()
        .map(|e| e.candidate.action)
        .fold(f64::INFINITY, f64::min);
    let passed = probe.samples == 1000
        && probe.min_action > 0.0
        && !lib.library.is_empty()
        && lowest > probe.min_action;
    report(
        10,
        passed,
        "sampled action on the unit H1 sphere, 1000 samples",
        format!(
            "min sampled action {:.4e}, lowest library action {lowest:.4}",
            probe.min_action
        ),
        start.elapsed(),
    );
    assert!(passed);
}
