//! Geometric distinctness modulo period shifts, multibump guesses, bump
//! decomposition and the multi-solution search.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::action::ActionFunctional;
use crate::error::{Error, Result};
use crate::potential::{HamiltonianSystem, Potential};
use crate::scalar::{norm, Scalar};
use crate::solver::{
    descend_to_critical, hypothesis_gate, initial_guess_bump, solve_from_guess,
    HomoclinicCandidate, SolverConfig,
};
use crate::space::{Grid, GridFunction};

fn check_same_grid<F: Scalar>(u: &GridFunction<F>, v: &GridFunction<F>) -> Result<()> {
    if u.grid() != v.grid() || u.dim() != v.dim() {
        return Err(Error::GridMismatch(
            "functions live on different grids or dimensions".into(),
        ));
    }
    Ok(())
}

/// `min_{|k| <= M} |u - tau_k v|_{H^1}` together with the minimizing `k`.
pub fn best_shift<F: Scalar>(u: &GridFunction<F>, v: &GridFunction<F>) -> Result<(i64, F)> {
    check_same_grid(u, v)?;
    let m = u.grid().half_periods() as i64;
    let mut best = (0, F::infinity());
    for k in -m..=m {
        let d = u.try_sub(&v.shift_periods(k)?)?.h1_norm();
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best)
}

/// Distance between the period-shift orbits of `u` and `v`, symmetrized by
/// taking the smaller of both shift directions.
pub fn geometric_distance<F: Scalar>(u: &GridFunction<F>, v: &GridFunction<F>) -> Result<F> {
    let (_, a) = best_shift(u, v)?;
    let (_, b) = best_shift(v, u)?;
    Ok(a.min(b))
}

pub fn is_distinct<F: Scalar>(u: &GridFunction<F>, v: &GridFunction<F>, eps: F) -> Result<bool> {
    Ok(geometric_distance(u, v)? >= eps)
}

/// Node range `[first, last]` where `|u| > threshold`.
fn support<F: Scalar>(u: &GridFunction<F>, threshold: F) -> Option<(usize, usize)> {
    let mut points = u.points().enumerate().filter(|(_, p)| norm(p) > threshold);
    let first = points.next()?.0;
    let last = points.last().map_or(first, |(i, _)| i);
    Some((first, last))
}

/// Sum of shifted library entries. Supports (nodes where `|tau_k v| >
/// support_threshold`) must be pairwise separated by at least two periods.
pub fn multibump_guess<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    parts: &[(&GridFunction<F>, i64)],
    support_threshold: F,
) -> Result<GridFunction<F>> {
    let grid = *functional.grid();
    let dim = functional.dim();
    let mut sum = GridFunction::zeros(grid, dim);
    let mut supports = Vec::with_capacity(parts.len());
    for &(v, k) in parts {
        if *v.grid() != grid || v.dim() != dim {
            return Err(Error::GridMismatch(
                "multibump part on a different grid".into(),
            ));
        }
        let shifted = v.shift_periods(k)?;
        supports.push(support(&shifted, support_threshold).ok_or(Error::ZeroFunction)?);
        sum = sum.try_add(&shifted)?;
    }
    supports.sort_unstable();
    let gap = 2 * grid.nodes_per_period();
    if supports.windows(2).any(|w| w[1].0 < w[0].1 + gap) {
        return Err(Error::OverlappingBumps);
    }
    let clearance = functional.singularity_clearance(&sum);
    if clearance < functional.clearance() {
        return Err(Error::InfeasibleGuess {
            clearance: clearance.as_f64(),
            required: functional.clearance().as_f64(),
        });
    }
    Ok(sum)
}

/// One localized piece of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump<F> {
    /// Inclusive node range.
    pub nodes: (usize, usize),
    pub window: (F, F),
    /// The trajectory restricted to the window, zero elsewhere.
    pub profile: GridFunction<F>,
    pub matched: Option<usize>,
    pub shift: i64,
    pub distance: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpDecomposition<F> {
    pub bumps: Vec<Bump<F>>,
    /// `|u - sum tau_{k_i} v_i|_{H^1}` over matched bumps.
    pub residual_norm: F,
    /// `H^1` norm of `u` outside every window.
    pub tail_mass: F,
}

/// Splits `u` into bumps: maximal runs with `|u| >= delta_bump`, widened
/// while `|u| >= delta_gap` but never past the smallest `|u|` between two
/// neighbouring runs. Each bump is matched to the library entry and shift
/// with the smallest `H^1` distance.
pub fn ps_split<F: Scalar>(
    u: &GridFunction<F>,
    library: &SolutionLibrary<F>,
    delta_bump: F,
    delta_gap: F,
) -> Result<BumpDecomposition<F>> {
    if !(delta_gap < delta_bump) || !(delta_gap > F::zero()) {
        return Err(Error::InvalidArgument(
            "bump thresholds need 0 < delta_gap < delta_bump".into(),
        ));
    }
    let grid = *u.grid();
    let n = u.len();
    let mag: Vec<F> = u.points().map(norm).collect();

    let mut cores: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if mag[i] >= delta_bump {
            let start = i;
            while i + 1 < n && mag[i + 1] >= delta_bump {
                i += 1;
            }
            cores.push((start, i));
        }
        i += 1;
    }

    // Split points between neighbouring cores.
    let splits: Vec<usize> = cores
        .windows(2)
        .map(|w| {
            (w[0].1 + 1..w[1].0)
                .min_by(|&a, &b| mag[a].partial_cmp(&mag[b]).unwrap())
                .unwrap_or(w[0].1)
        })
        .collect();

    let mut covered = GridFunction::zeros(grid, u.dim());
    let mut bumps = Vec::with_capacity(cores.len());
    for (c, &(lo, hi)) in cores.iter().enumerate() {
        let left_limit = if c == 0 { 0 } else { splits[c - 1] + 1 };
        let right_limit = if c + 1 == cores.len() {
            n - 1
        } else {
            splits[c]
        };
        let mut a = lo;
        while a > left_limit && mag[a - 1] >= delta_gap {
            a -= 1;
        }
        let mut b = hi;
        while b < right_limit && mag[b + 1] >= delta_gap {
            b += 1;
        }
        let mut profile = GridFunction::zeros(grid, u.dim());
        for node in a..=b {
            profile.point_mut(node).copy_from_slice(u.point(node));
            covered.point_mut(node).copy_from_slice(u.point(node));
        }
        profile.clamp_boundary();

        let mut best: (Option<usize>, i64, F) = (None, 0, F::infinity());
        for (idx, entry) in library.entries().iter().enumerate() {
            let (k, d) = best_shift(&profile, &entry.candidate.trajectory)?;
            if d < best.2 {
                best = (Some(idx), k, d);
            }
        }
        bumps.push(Bump {
            nodes: (a, b),
            window: (grid.time(a), grid.time(b)),
            profile,
            matched: best.0,
            shift: best.1,
            distance: best.2,
        });
    }

    let mut reconstruction = GridFunction::zeros(grid, u.dim());
    for bump in &bumps {
        if let Some(idx) = bump.matched {
            let piece = library.entries()[idx]
                .candidate
                .trajectory
                .shift_periods(bump.shift)?;
            reconstruction = reconstruction.try_add(&piece)?;
        }
    }
    covered.clamp_boundary();
    Ok(BumpDecomposition {
        residual_norm: u.try_sub(&reconstruction)?.h1_norm(),
        tail_mass: u.try_sub(&covered)?.h1_norm(),
        bumps,
    })
}

/// How a search guess was built.
#[derive(Debug, Clone, PartialEq)]
pub enum GuessKind<F> {
    Bump {
        k0: F,
        center: F,
        width: F,
        orientation: i8,
    },
    Multibump {
        entries: Vec<usize>,
        shifts: Vec<i64>,
    },
    /// Entry read back from storage, labelled with its recorded origin.
    Loaded(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleItem<F> {
    pub index: usize,
    pub kind: GuessKind<F>,
}

impl<F: Scalar> std::fmt::Display for ScheduleItem<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            GuessKind::Bump {
                k0,
                center,
                width,
                orientation,
            } => write!(
                f,
                "#{} bump k0={k0} center={center} width={width} orientation={orientation:+}",
                self.index
            ),
            GuessKind::Multibump { entries, shifts } => {
                write!(
                    f,
                    "#{} multibump entries={entries:?} shifts={shifts:?}",
                    self.index
                )
            }
            GuessKind::Loaded(label) => f.write_str(label),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry<F> {
    pub candidate: HomoclinicCandidate<F>,
    pub origin: ScheduleItem<F>,
    pub seed: u64,
}

/// What inserting a candidate did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Insertion<F> {
    Added(usize),
    Duplicate { nearest: usize, distance: F },
}

/// Normalized candidates, pairwise at least `eps_distinct` apart modulo
/// period shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionLibrary<F> {
    entries: Vec<LibraryEntry<F>>,
    eps_distinct: F,
    distances: Vec<Vec<F>>,
}

impl<F: Scalar> SolutionLibrary<F> {
    pub fn new(eps_distinct: F) -> Result<Self> {
        if !(eps_distinct > F::zero()) {
            return Err(Error::InvalidArgument(
                "eps_distinct must be positive".into(),
            ));
        }
        Ok(Self {
            entries: Vec::new(),
            eps_distinct,
            distances: Vec::new(),
        })
    }

    pub fn eps_distinct(&self) -> F {
        self.eps_distinct
    }

    pub fn entries(&self) -> &[LibraryEntry<F>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Symmetric matrix of pairwise geometric distances.
    pub fn distance_matrix(&self) -> &[Vec<F>] {
        &self.distances
    }

    pub fn min_pairwise_distance(&self) -> Option<F> {
        self.distances
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().skip(i + 1).copied())
            .reduce(F::min)
    }

    /// Normalizes the candidate and stores it unless it lies within
    /// `eps_distinct` of an existing entry. Duplicates are judged on both the
    /// candidate as given and its normalized form, since normalizing a
    /// trajectory near the edge of the grid truncates its tail.
    pub fn insert(
        &mut self,
        mut candidate: HomoclinicCandidate<F>,
        origin: ScheduleItem<F>,
        seed: u64,
    ) -> Result<Insertion<F>> {
        if let Some(first) = self.entries.first() {
            check_same_grid(&first.candidate.trajectory, &candidate.trajectory)?;
        }
        let (normalized, shift) = candidate.trajectory.renormalize_translation()?;
        let mut row = Vec::with_capacity(self.entries.len());
        let mut nearest: Option<(usize, F)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let stored = geometric_distance(&e.candidate.trajectory, &normalized)?;
            let mut d = stored;
            if shift != 0 {
                d = d.min(geometric_distance(
                    &e.candidate.trajectory,
                    &candidate.trajectory,
                )?);
            }
            if nearest.is_none_or(|(_, best)| d < best) {
                nearest = Some((i, d));
            }
            row.push(stored);
        }
        if let Some((nearest, distance)) = nearest {
            if distance < self.eps_distinct {
                return Ok(Insertion::Duplicate { nearest, distance });
            }
        }
        candidate.trajectory = normalized;
        for (r, &d) in self.distances.iter_mut().zip(&row) {
            r.push(d);
        }
        let mut own = row;
        own.push(F::zero());
        self.distances.push(own);
        self.entries.push(LibraryEntry {
            candidate,
            origin,
            seed,
        });
        Ok(Insertion::Added(self.entries.len() - 1))
    }
}

/// Knobs of the multi-solution search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig<F> {
    pub targets: usize,
    pub eps_distinct: F,
    pub k0s: Vec<F>,
    /// Guess centers; must be grid nodes.
    pub centers: Vec<F>,
    pub widths: Vec<F>,
    pub orientations: Vec<i8>,
    /// Try sums of two found entries after the single-bump schedule.
    pub multibump: bool,
    pub support_threshold: F,
    pub delta_bump: F,
    pub delta_gap: F,
}

impl<F: Scalar> Default for SearchConfig<F> {
    fn default() -> Self {
        Self {
            targets: 3,
            eps_distinct: F::lit(0.1),
            k0s: vec![F::lit(1.5), F::lit(1.2), F::lit(2.0)],
            centers: vec![F::zero(), F::lit(0.5), F::lit(0.25), F::lit(0.75)],
            widths: vec![F::lit(2.0), F::lit(1.5)],
            orientations: vec![1, -1],
            multibump: true,
            support_threshold: F::lit(0.05),
            delta_bump: F::lit(0.05),
            delta_gap: F::lit(0.01),
        }
    }
}

impl<F: Scalar> SearchConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_distinct > F::zero()) {
            return Err(Error::InvalidArgument(
                "eps_distinct must be positive".into(),
            ));
        }
        if !(self.delta_gap > F::zero() && self.delta_gap < self.delta_bump) {
            return Err(Error::InvalidArgument(
                "bump thresholds need 0 < delta_gap < delta_bump".into(),
            ));
        }
        if !(self.support_threshold > F::zero()) {
            return Err(Error::InvalidArgument(
                "support_threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Single-bump part of the schedule: widths, then `k0`, then centers,
    /// then orientations vary slowest to fastest.
    pub fn bump_schedule(&self) -> Vec<ScheduleItem<F>> {
        let mut items = Vec::new();
        for &width in &self.widths {
            for &k0 in &self.k0s {
                for &center in &self.centers {
                    for &orientation in &self.orientations {
                        items.push(ScheduleItem {
                            index: items.len(),
                            kind: GuessKind::Bump {
                                k0,
                                center,
                                width,
                                orientation,
                            },
                        });
                    }
                }
            }
        }
        items
    }
}

/// Result of one schedule item.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<F> {
    Inserted {
        entry: usize,
        action: F,
        bumps: usize,
    },
    Duplicate {
        nearest: usize,
        distance: F,
        bumps: usize,
    },
    Failed(String),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRecord<F> {
    pub item: ScheduleItem<F>,
    pub outcome: Outcome<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<F> {
    pub library: SolutionLibrary<F>,
    pub log: Vec<ScheduleRecord<F>>,
}

enum Work<F> {
    Run(ScheduleItem<F>, Option<GridFunction<F>>),
    Skip(ScheduleItem<F>, String),
}

fn run_item<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
    item: &ScheduleItem<F>,
    guess: Option<&GridFunction<F>>,
) -> Result<HomoclinicCandidate<F>> {
    match (&item.kind, guess) {
        (
            GuessKind::Bump {
                k0,
                center,
                width,
                orientation,
            },
            _,
        ) => {
            let trial = SolverConfig {
                k0: *k0,
                center: *center,
                bump_width: *width,
                orientation: *orientation,
                ..cfg.clone()
            };
            let (u0, constraint) = initial_guess_bump(functional, &trial)?;
            Ok(solve_from_guess(functional, &u0, constraint, &trial)?.candidate)
        }
        (GuessKind::Multibump { .. }, Some(u0)) => {
            Ok(descend_to_critical(functional, u0, cfg)?.candidate)
        }
        (GuessKind::Multibump { .. }, None) | (GuessKind::Loaded(_), _) => Err(
            Error::InvalidArgument("schedule item has no guess to descend from".into()),
        ),
    }
}

/// Smallest shift placing `tau_s b` at least two periods to the right of `a`
/// at the given support threshold, or `None` if it does not fit.
fn pair_shift<F: Scalar>(a: &GridFunction<F>, b: &GridFunction<F>, threshold: F) -> Option<i64> {
    let (_, a_hi) = support(a, threshold)?;
    let (b_lo, b_hi) = support(b, threshold)?;
    let m = a.grid().nodes_per_period();
    let need = (a_hi + 2 * m) as i64 - b_lo as i64;
    let s = if need <= 0 {
        1
    } else {
        (need as usize).div_ceil(m) as i64
    };
    (b_hi as i64 + s * m as i64 + 1 < a.len() as i64).then_some(s)
}

/// Multibump guesses from pairs of library entries, centered on the grid.
fn multibump_work<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    library: &SolutionLibrary<F>,
    search: &SearchConfig<F>,
    first_index: usize,
) -> Vec<Work<F>> {
    let entries = library.entries();
    let mut work = Vec::new();
    for i in 0..entries.len() {
        for j in i..entries.len() {
            let index = first_index + work.len();
            let (a, b) = (
                &entries[i].candidate.trajectory,
                &entries[j].candidate.trajectory,
            );
            let Some(s) = pair_shift(a, b, search.support_threshold) else {
                work.push(Work::Skip(
                    ScheduleItem {
                        index,
                        kind: GuessKind::Multibump {
                            entries: vec![i, j],
                            shifts: vec![],
                        },
                    },
                    "two bumps with a two-period gap do not fit on the grid".into(),
                ));
                continue;
            };
            let left = -(s / 2);
            let shifts = vec![left, left + s];
            let item = ScheduleItem {
                index,
                kind: GuessKind::Multibump {
                    entries: vec![i, j],
                    shifts: shifts.clone(),
                },
            };
            match multibump_guess(
                functional,
                &[(a, shifts[0]), (b, shifts[1])],
                search.support_threshold,
            ) {
                Ok(u0) => work.push(Work::Run(item, Some(u0))),
                Err(e) => work.push(Work::Skip(item, e.to_string())),
            }
        }
    }
    work
}

fn bump_count<F: Scalar>(u: &GridFunction<F>, search: &SearchConfig<F>) -> usize {
    let empty = SolutionLibrary {
        entries: Vec::new(),
        eps_distinct: search.eps_distinct,
        distances: Vec::new(),
    };
    ps_split(u, &empty, search.delta_bump, search.delta_gap)
        .map(|d| d.bumps.len())
        .unwrap_or(0)
}

/// Runs `work` on `jobs` threads. Results are inserted by the calling thread
/// in completion order; with `jobs == 1` that is schedule order.
fn execute<F: Scalar, W: Potential<F> + Sync>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
    search: &SearchConfig<F>,
    jobs: usize,
    work: Vec<Work<F>>,
    outcome: &mut SearchOutcome<F>,
) -> Result<()> {
    let record = |item: ScheduleItem<F>,
                  result: Result<HomoclinicCandidate<F>>,
                  outcome: &mut SearchOutcome<F>|
     -> Result<()> {
        let result = match result {
            Ok(candidate) => {
                let bumps = bump_count(&candidate.trajectory, search);
                let action = candidate.action;
                match outcome.library.insert(candidate, item.clone(), cfg.seed)? {
                    Insertion::Added(entry) => Outcome::Inserted {
                        entry,
                        action,
                        bumps,
                    },
                    Insertion::Duplicate { nearest, distance } => Outcome::Duplicate {
                        nearest,
                        distance,
                        bumps,
                    },
                }
            }
            Err(e) => Outcome::Failed(e.to_string()),
        };
        outcome.log.push(ScheduleRecord {
            item,
            outcome: result,
        });
        Ok(())
    };

    if jobs <= 1 {
        for w in work {
            if outcome.library.len() >= search.targets {
                break;
            }
            match w {
                Work::Skip(item, why) => outcome.log.push(ScheduleRecord {
                    item,
                    outcome: Outcome::Skipped(why),
                }),
                Work::Run(item, guess) => {
                    let result = run_item(functional, cfg, &item, guess.as_ref());
                    record(item, result, outcome)?;
                }
            }
        }
        return Ok(());
    }

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(outcome.library.len() >= search.targets);
    let (tx, rx) = mpsc::channel();
    let work = &work;
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(w) = work.get(i) else { break };
                let message = match w {
                    Work::Skip(item, why) => (item.clone(), Err(why.clone())),
                    Work::Run(item, guess) => (
                        item.clone(),
                        Ok(run_item(functional, cfg, item, guess.as_ref())),
                    ),
                };
                if tx.send(message).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (item, result) in rx {
            match result {
                Err(why) => outcome.log.push(ScheduleRecord {
                    item,
                    outcome: Outcome::Skipped(why),
                }),
                Ok(result) => record(item, result, outcome)?,
            }
            if outcome.library.len() >= search.targets {
                stop.store(true, Ordering::SeqCst);
            }
        }
        Ok(())
    })
}

/// Searches for up to `search.targets` geometrically distinct candidates:
/// single-bump guesses over the schedule, then two-bump sums of found
/// entries, each followed by descent.
pub fn search_distinct<F: Scalar, W: Potential<F> + Sync>(
    system: &HamiltonianSystem<F, W>,
    grid: Grid<F>,
    cfg: &SolverConfig<F>,
    search: &SearchConfig<F>,
    jobs: usize,
) -> Result<SearchOutcome<F>> {
    cfg.validate()?;
    search.validate()?;
    hypothesis_gate(system)?;
    let functional = ActionFunctional::new(system, grid);
    let solver_cfg = SolverConfig {
        max_restarts: 0,
        ..cfg.clone()
    };
    let mut outcome = SearchOutcome {
        library: SolutionLibrary::new(search.eps_distinct)?,
        log: Vec::new(),
    };
    if search.targets == 0 {
        return Ok(outcome);
    }
    let singles: Vec<Work<F>> = search
        .bump_schedule()
        .into_iter()
        .map(|item| Work::Run(item, None))
        .collect();
    let next_index = singles.len();
    execute(
        &functional,
        &solver_cfg,
        search,
        jobs,
        singles,
        &mut outcome,
    )?;
    if search.multibump && outcome.library.len() < search.targets {
        let work = multibump_work(&functional, &outcome.library, search, next_index);
        execute(&functional, &solver_cfg, search, jobs, work, &mut outcome)?;
    }
    Ok(outcome)
}
