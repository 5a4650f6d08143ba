use homoclinic::multiplicity::{GuessKind, Insertion, ScheduleItem};
use homoclinic::{
    geometric_distance, is_distinct, multibump_guess, search_distinct, solve_homoclinic,
    ActionFunctional, Error, ExampleSystem64, Grid, Grid64, GridFunction, HamiltonianSystem,
    SearchConfig, SolutionLibrary, SolverConfig,
};

fn example() -> ExampleSystem64 {
    HamiltonianSystem::example(2, 2.0, 2.5, 1.0, 1.0).unwrap()
}

fn loaded() -> ScheduleItem<f64> {
    ScheduleItem {
        index: 0,
        kind: GuessKind::Loaded("test".into()),
    }
}

fn reflect(u: &GridFunction<f64>) -> GridFunction<f64> {
    let mut v = u.clone();
    v.values_mut().chunks_mut(2).for_each(|p| p[1] = -p[1]);
    v
}

#[test]
fn reflected_solution_is_geometrically_distinct() {
    let s = solve_homoclinic(&example(), Grid64::desk(), &SolverConfig::default()).unwrap();
    let v = &s.candidate.trajectory;
    let mirrored = reflect(v);
    let d = geometric_distance(v, &mirrored).unwrap();
    assert!(d > 0.1, "distance {d}");
    assert!(is_distinct(v, &mirrored, 0.1).unwrap());
    assert!(!is_distinct(v, v, 0.1).unwrap());
    assert!(!is_distinct(v, &v.shift_periods(2).unwrap(), 0.1).unwrap());
}

#[test]
fn multibump_actions_add_up() {
    let system = example();
    let grid = Grid::new(1.0, 40, 16).unwrap();
    let f = ActionFunctional::new(&system, grid);
    let v = solve_homoclinic(&system, grid, &SolverConfig::default())
        .unwrap()
        .candidate;
    let single = multibump_guess(&f, &[(&v.trajectory, 0)], 0.05).unwrap();
    assert_eq!(single, v.trajectory);

    let pair = multibump_guess(&f, &[(&v.trajectory, 0), (&v.trajectory, 10)], 0.05).unwrap();
    let ratio = f.value(&pair).unwrap() / v.action;
    assert!((ratio - 2.0).abs() <= 0.1, "two-bump ratio {ratio}");

    let triple = multibump_guess(
        &f,
        &[
            (&v.trajectory, -10),
            (&v.trajectory, 0),
            (&v.trajectory, 10),
        ],
        0.05,
    )
    .unwrap();
    let ratio = f.value(&triple).unwrap() / v.action;
    assert!((ratio - 3.0).abs() <= 0.15, "three-bump ratio {ratio}");

    let err = multibump_guess(&f, &[(&v.trajectory, 0), (&v.trajectory, 1)], 0.05).unwrap_err();
    assert!(matches!(err, Error::OverlappingBumps), "{err}");
}

#[test]
fn library_keeps_one_representative_per_orbit() {
    let s = solve_homoclinic(&example(), Grid64::desk(), &SolverConfig::default()).unwrap();
    let mut lib = SolutionLibrary::new(0.1).unwrap();
    assert!(matches!(
        lib.insert(s.candidate.clone(), loaded(), 0).unwrap(),
        Insertion::Added(0)
    ));
    let mut shifted = s.candidate.clone();
    shifted.trajectory = shifted.trajectory.shift_periods(5).unwrap();
    assert!(matches!(
        lib.insert(shifted, loaded(), 1).unwrap(),
        Insertion::Duplicate { nearest: 0, .. }
    ));
    let mut mirrored = s.candidate;
    mirrored.trajectory = reflect(&mirrored.trajectory);
    assert!(matches!(
        lib.insert(mirrored, loaded(), 2).unwrap(),
        Insertion::Added(1)
    ));
    assert_eq!(lib.len(), 2);
    assert!(lib.min_pairwise_distance().unwrap() >= lib.eps_distinct());
}

#[test]
fn search_for_one_target() {
    let search = SearchConfig {
        targets: 1,
        ..SearchConfig::default()
    };
    let out = search_distinct(
        &example(),
        Grid64::desk(),
        &SolverConfig::default(),
        &search,
        1,
    )
    .unwrap();
    assert_eq!(out.library.len(), 1);
    assert!(out.library.entries()[0]
        .candidate
        .trajectory
        .is_normalized());
}

#[test]
fn search_library_is_sound_and_deterministic() {
    let system = example();
    let run = || {
        search_distinct(
            &system,
            Grid64::desk(),
            &SolverConfig::default(),
            &SearchConfig::default(),
            1,
        )
        .unwrap()
    };
    let a = run();
    assert!(a.library.len() >= 3);
    let entries = a.library.entries();
    for (i, x) in entries.iter().enumerate() {
        assert!(x.candidate.trajectory.is_normalized());
        for y in &entries[i + 1..] {
            let d = geometric_distance(&x.candidate.trajectory, &y.candidate.trajectory).unwrap();
            assert!(d >= a.library.eps_distinct());
        }
    }
    let b = run();
    assert_eq!(a.library.distance_matrix(), b.library.distance_matrix());
}
