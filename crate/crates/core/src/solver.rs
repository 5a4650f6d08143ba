//! Homoclinic candidates by constrained minimization over trajectories
//! crossing the ray `{k q : k > 1}`, followed by free Armijo descent with
//! period renormalization.

use crate::action::{ActionEval, ActionFunctional, ResidualReport};
use crate::error::{Error, Result};
use crate::potential::{check_a, check_h2, HamiltonianSystem, Potential};
use crate::scalar::{distance, dot, norm, Scalar};
use crate::space::{Grid, GridFunction};

/// Tunables shared by both descent stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<F> {
    /// Threshold on `|g|_2 / sqrt(h)`.
    pub grad_tol: F,
    pub max_iters: usize,
    pub armijo_c1: F,
    pub backtrack: F,
    pub max_backtracks: usize,
    /// `k_min = 1 + eps_k`.
    pub eps_k: F,
    pub renormalize_every: usize,
    /// Width parameter `beta` of the `sech` guess.
    pub bump_width: F,
    pub k0: F,
    /// Time (a grid node) where the guess crosses the ray.
    pub center: F,
    /// Sign of the transverse loop of the guess around `q`.
    pub orientation: i8,
    /// Transverse amplitude of the guess relative to its ray component.
    pub transverse: F,
    /// Apply the `H^1` Riesz map to the gradient before stepping.
    pub precondition: bool,
    /// Consecutive clamped iterations before the E-stage is flagged
    /// constraint-active.
    pub clamp_window: usize,
    /// Sup norm below which descent is declared collapsed onto `u = 0`.
    pub zero_threshold: F,
    /// Decay bounds enforced on candidates; `None` disables the check.
    pub tail_tol_u: Option<F>,
    pub tail_tol_du: Option<F>,
    /// Extra attempts (alternate `k0` / orientation) before giving up.
    pub max_restarts: usize,
    pub seed: u64,
}

impl<F: Scalar> Default for SolverConfig<F> {
    fn default() -> Self {
        Self {
            grad_tol: F::lit(1e-6),
            max_iters: 20_000,
            armijo_c1: F::lit(1e-4),
            backtrack: F::lit(0.5),
            max_backtracks: 60,
            eps_k: F::lit(0.1),
            renormalize_every: 25,
            bump_width: F::lit(2.0),
            k0: F::lit(1.5),
            center: F::zero(),
            orientation: 1,
            transverse: F::one(),
            precondition: true,
            clamp_window: 50,
            zero_threshold: F::lit(1e-4),
            tail_tol_u: Some(F::lit(1e-3)),
            tail_tol_du: Some(F::lit(1e-2)),
            max_restarts: 3,
            seed: 0,
        }
    }
}

impl<F: Scalar> SolverConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bump_width", self.bump_width),
            ("eps_k", self.eps_k),
            ("backtrack", self.backtrack),
            ("zero_threshold", self.zero_threshold),
            ("transverse", self.transverse),
        ];
        for (name, v) in positive {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.grad_tol >= F::zero()) {
            return Err(Error::InvalidArgument(
                "grad_tol must be nonnegative".into(),
            ));
        }
        if !(self.armijo_c1 > F::zero() && self.armijo_c1 < F::one()) {
            return Err(Error::InvalidArgument(
                "armijo c1 must lie in (0, 1)".into(),
            ));
        }
        if self.backtrack >= F::one() {
            return Err(Error::InvalidArgument(
                "backtrack factor must lie in (0, 1)".into(),
            ));
        }
        if self.max_iters == 0 || self.renormalize_every == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidArgument(
                "iteration counts must be positive".into(),
            ));
        }
        if self.orientation != 1 && self.orientation != -1 {
            return Err(Error::InvalidArgument(
                "orientation must be +1 or -1".into(),
            ));
        }
        Ok(())
    }

    pub fn k_min(&self) -> F {
        F::one() + self.eps_k
    }
}

/// The discrete constraint `u_j = k q` with `k >= k_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintE<F> {
    pub node: usize,
    pub k_min: F,
    pub k: F,
}

/// Converged, verified and normalized critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct HomoclinicCandidate<F> {
    pub trajectory: GridFunction<F>,
    pub action: F,
    pub grad_norm: F,
    pub residual: ResidualReport<F>,
    pub clearance: F,
    /// `(cell, k)` where the trajectory crosses the ray beyond `q`.
    pub crossing: Option<(usize, F)>,
    pub iterations: usize,
}

/// Record of one period renormalization during descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormalizationEvent<F> {
    pub iteration: usize,
    pub shift: i64,
    pub action_before: F,
    pub action_after: F,
}

/// Result of the E-constrained stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedMinimum<F> {
    pub trajectory: GridFunction<F>,
    pub constraint: ConstraintE<F>,
    pub value: F,
    pub grad_norm: F,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_active: bool,
    pub history: Vec<F>,
}

/// Result of free descent, before or after verification.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentRun<F> {
    pub candidate: HomoclinicCandidate<F>,
    pub history: Vec<F>,
    pub renormalizations: Vec<RenormalizationEvent<F>>,
}

/// Full pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<F> {
    pub candidate: HomoclinicCandidate<F>,
    pub constrained: ConstrainedMinimum<F>,
    pub descent_history: Vec<F>,
    pub renormalizations: Vec<RenormalizationEvent<F>>,
    /// Whether the free descent left the class `E`.
    pub left_class_e: bool,
    pub attempts: Vec<AttemptLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptLog {
    pub k0: f64,
    pub orientation: i8,
    pub outcome: String,
}

/// Riesz map of the discrete `H^1` inner product with Dirichlet ends:
/// `(K + M) p = g` with `K = tridiag(-1, 2, -1) / h` and `M = h I`.
#[derive(Debug, Clone)]
pub(crate) struct RieszMap<F> {
    off: F,
    /// Modified super-diagonal of the Thomas factorization.
    c: Vec<F>,
    /// Inverse pivots.
    inv: Vec<F>,
}

impl<F: Scalar> RieszMap<F> {
    pub(crate) fn new(grid: &Grid<F>) -> Self {
        let h = grid.step();
        let n = grid.len() - 2;
        let diag = F::lit(2.0) / h + h;
        let off = -F::one() / h;
        let mut c = vec![F::zero(); n];
        let mut inv = vec![F::zero(); n];
        let mut prev_c = F::zero();
        for i in 0..n {
            let pivot = diag - off * prev_c;
            inv[i] = F::one() / pivot;
            c[i] = off * inv[i];
            prev_c = c[i];
        }
        Self { off, c, inv }
    }

    /// Solves in place on the interior nodes of every component of a
    /// node-major array.
    pub(crate) fn apply(&self, values: &mut [F], dim: usize) {
        let n = self.c.len();
        for comp in 0..dim {
            let idx = |i: usize| (i + 1) * dim + comp;
            let mut prev = F::zero();
            for i in 0..n {
                let v = (values[idx(i)] - self.off * prev) * self.inv[i];
                values[idx(i)] = v;
                prev = v;
            }
            for i in (0..n.saturating_sub(1)).rev() {
                let v = values[idx(i)] - self.c[i] * values[idx(i + 1)];
                values[idx(i)] = v;
            }
        }
    }
}

fn unit_perpendicular<F: Scalar>(q: &[F]) -> Vec<F> {
    let d = q.len();
    let axis = (0..d)
        .min_by(|&a, &b| q[a].abs().partial_cmp(&q[b].abs()).unwrap())
        .unwrap_or(0);
    let mut e = vec![F::zero(); d];
    e[axis] = F::one();
    let proj = dot(&e, q) / dot(q, q);
    for (ei, &qi) in e.iter_mut().zip(q) {
        *ei = *ei - proj * qi;
    }
    let n = norm(&e);
    e.iter_mut().for_each(|x| *x = *x / n);
    e
}

/// Guess crossing the ray at `center`: ray component `k0 q sech(beta s)` and
/// a transverse loop `+- gamma k0 |q| sech(beta s) tanh(beta s)`, `s = t - center`,
/// so the path winds around `q` instead of running through it.
pub fn initial_guess_bump<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
) -> Result<(GridFunction<F>, ConstraintE<F>)> {
    let grid = *functional.grid();
    let k_min = cfg.k_min();
    if !(cfg.k0 >= k_min) {
        return Err(Error::InvalidArgument(format!(
            "k0 = {} must be at least 1 + eps_k = {}",
            cfg.k0, k_min
        )));
    }
    let node = grid
        .index_of(cfg.center)
        .filter(|&i| (grid.time(i) - cfg.center).abs() <= grid.step() * F::lit(1e-6))
        .ok_or_else(|| {
            Error::InvalidArgument(format!("center {} is not a grid node", cfg.center))
        })?;
    let beta = cfg.bump_width;
    let reach = (grid.half_length() - cfg.center.abs()) * beta;
    if !(reach >= F::lit(20.0).acosh()) {
        return Err(Error::InvalidArgument(
            "guess support does not fit inside the truncated interval".into(),
        ));
    }
    let q = functional.system().singularity().to_vec();
    let q_norm = norm(&q);
    let perp = unit_perpendicular(&q);
    let side = if cfg.orientation < 0 {
        -F::one()
    } else {
        F::one()
    };
    let lateral = side * cfg.transverse * cfg.k0 * q_norm;
    let center_t = grid.time(node);
    let mut u = GridFunction::from_fn(grid, q.len(), |t, out| {
        let s = beta * (t - center_t);
        let sech = F::one() / s.cosh();
        let tanh = s.tanh();
        for ((o, &qi), &pi) in out.iter_mut().zip(&q).zip(&perp) {
            *o = cfg.k0 * qi * sech + lateral * pi * sech * tanh;
        }
    });
    for (o, &qi) in u.point_mut(node).iter_mut().zip(&q) {
        *o = cfg.k0 * qi;
    }
    let clearance = functional.singularity_clearance(&u);
    if clearance < functional.clearance() {
        return Err(Error::InfeasibleGuess {
            clearance: clearance.as_f64(),
            required: functional.clearance().as_f64(),
        });
    }
    Ok((
        u,
        ConstraintE {
            node,
            k_min,
            k: cfg.k0,
        },
    ))
}

/// First cell whose segment meets the ray `{k q : k > 1}`, with the `k` at
/// the meeting point.
pub fn ray_crossing<F: Scalar>(u: &GridFunction<F>, q: &[F]) -> Option<(usize, F)> {
    let qq = dot(q, q);
    let tol = F::lit(1e-9) * qq.sqrt();
    let mut pa = vec![F::zero(); q.len()];
    let mut pb = vec![F::zero(); q.len()];
    for i in 0..u.len() - 1 {
        let (a, b) = (u.point(i), u.point(i + 1));
        let ka = dot(a, q) / qq;
        let kb = dot(b, q) / qq;
        if ka <= F::one() && kb <= F::one() {
            continue;
        }
        for c in 0..q.len() {
            pa[c] = a[c] - ka * q[c];
            pb[c] = b[c] - kb * q[c];
        }
        let diff: Vec<F> = pb.iter().zip(&pa).map(|(&x, &y)| x - y).collect();
        let dd = dot(&diff, &diff);
        let s = if dd > F::zero() {
            (-dot(&pa, &diff) / dd).max(F::zero()).min(F::one())
        } else {
            F::zero()
        };
        let miss = pa
            .iter()
            .zip(&diff)
            .fold(F::zero(), |acc, (&p, &dp)| {
                acc + (p + s * dp) * (p + s * dp)
            })
            .sqrt();
        let k = ka + s * (kb - ka);
        if miss <= tol && k > F::one() {
            return Some((i, k));
        }
    }
    None
}

struct LineSearch<F> {
    step: F,
    max_step: F,
}

impl<F: Scalar> LineSearch<F> {
    fn new(h: F, precondition: bool) -> Self {
        if precondition {
            Self {
                step: F::one(),
                max_step: F::lit(64.0),
            }
        } else {
            Self {
                step: h / F::lit(4.0),
                max_step: F::lit(64.0) * h,
            }
        }
    }
}

fn dual_norm<F: Scalar>(g: &[F], h: F) -> F {
    norm(g) / h.sqrt()
}

/// Largest node displacement per step, as a fraction of the node's distance
/// to the singularity. Keeps the straight homotopy between iterates away from
/// `q`, so a step cannot carry a node across it.
const STEP_FRACTION: f64 = 0.5;

fn respects_singularity<F: Scalar>(u: &GridFunction<F>, trial: &GridFunction<F>, q: &[F]) -> bool {
    let fraction = F::lit(STEP_FRACTION);
    (1..u.len() - 1)
        .all(|i| distance(trial.point(i), u.point(i)) <= fraction * distance(u.point(i), q))
}

/// Tries `project(u + s d)` for a geometric sequence of `s`, accepting the
/// first feasible trial satisfying the Armijo condition
/// `I(trial) <= I(u) + c1 g.(trial - u)`.
fn armijo_step<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
    search: &mut LineSearch<F>,
    u: &GridFunction<F>,
    ev: &ActionEval<F>,
    direction: &[F],
    mut project: impl FnMut(&mut GridFunction<F>),
) -> Option<(GridFunction<F>, F)> {
    let mut s = (search.step * F::lit(2.0)).min(search.max_step);
    let mut trial = u.clone();
    for _ in 0..cfg.max_backtracks {
        for ((t, &x), &d) in trial.values_mut().iter_mut().zip(u.values()).zip(direction) {
            *t = x + s * d;
        }
        trial.clamp_boundary();
        project(&mut trial);
        let predicted = trial
            .values()
            .iter()
            .zip(u.values())
            .zip(&ev.gradient)
            .fold(F::zero(), |acc, ((&t, &x), &g)| acc + g * (t - x));
        if predicted < F::zero()
            && respects_singularity(u, &trial, functional.system().singularity())
            && functional.singularity_clearance(&trial) >= functional.clearance()
        {
            if let Ok(v) = functional.value(&trial) {
                if v <= ev.value + cfg.armijo_c1 * predicted {
                    search.step = s;
                    return Some((trial, v));
                }
            }
        }
        s = s * cfg.backtrack;
    }
    None
}

/// Minimizes the action over `E_h = {u : u_j = k q, k >= k_min}` by projected
/// Armijo descent in the free node values and `k`.
pub fn minimize_over_e<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    u0: &GridFunction<F>,
    constraint: ConstraintE<F>,
    cfg: &SolverConfig<F>,
) -> Result<ConstrainedMinimum<F>> {
    cfg.validate()?;
    let grid = *functional.grid();
    let h = grid.step();
    let d = functional.dim();
    let j = constraint.node;
    let q = functional.system().singularity().to_vec();
    let qq = dot(&q, &q);
    let q_hat: Vec<F> = q.iter().map(|&x| x / qq.sqrt()).collect();
    if j == 0 || j + 1 >= grid.len() {
        return Err(Error::InvalidArgument(
            "constrained node must be interior".into(),
        ));
    }
    let k_min = constraint.k_min;
    let mut k = dot(u0.point(j), &q) / qq;
    let on_ray =
        u0.point(j).iter().zip(&q).all(|(&x, &qi)| {
            (x - k * qi).abs() <= F::lit(1e-12) * qq.sqrt() * k.abs().max(F::one())
        });
    if !on_ray || k < k_min {
        return Err(Error::InvalidArgument(
            "initial trajectory does not satisfy the ray constraint".into(),
        ));
    }
    let mut u = u0.clone();
    for (x, &qi) in u.point_mut(j).iter_mut().zip(&q) {
        *x = k * qi;
    }
    let mut ev = functional.eval(&u)?;
    if !ev.feasible {
        return Err(Error::InfeasibleGuess {
            clearance: ev.min_seg_dist.as_f64(),
            required: functional.clearance().as_f64(),
        });
    }

    let riesz = cfg.precondition.then(|| RieszMap::new(&grid));
    // G e_j for the H^1 projection onto the constraint tangent space.
    let column = riesz.as_ref().map(|r| {
        let mut e = vec![F::zero(); grid.len()];
        e[j] = F::one();
        r.apply(&mut e, 1);
        e
    });

    let mut search = LineSearch::new(h, cfg.precondition);
    let mut history = vec![ev.value];
    let mut clamped_run = 0usize;
    let mut constraint_active = false;
    let mut iterations = 0usize;
    let mut projected = vec![F::zero(); ev.gradient.len()];

    let converged = loop {
        let gj = &ev.gradient[j * d..(j + 1) * d];
        let g_par = dot(gj, &q_hat);
        let at_clamp = k <= k_min && g_par > F::zero();
        projected.copy_from_slice(&ev.gradient);
        for c in 0..d {
            projected[j * d + c] = if at_clamp {
                F::zero()
            } else {
                g_par * q_hat[c]
            };
        }
        let grad_norm = dual_norm(&projected, h);
        if grad_norm <= cfg.grad_tol {
            break true;
        }
        if iterations >= cfg.max_iters {
            break false;
        }

        let direction: Vec<F> = match (&riesz, &column) {
            (Some(r), Some(col)) => {
                let mut p = ev.gradient.clone();
                r.apply(&mut p, d);
                let pj: Vec<F> = p[j * d..(j + 1) * d].to_vec();
                let pj_par = dot(&pj, &q_hat);
                let keep = if at_clamp { F::zero() } else { pj_par };
                let corr: Vec<F> = (0..d).map(|c| (pj[c] - keep * q_hat[c]) / col[j]).collect();
                let mut dir = vec![F::zero(); p.len()];
                for i in 1..grid.len() - 1 {
                    for c in 0..d {
                        dir[i * d + c] = -(p[i * d + c] - col[i] * corr[c]);
                    }
                }
                dir
            }
            _ => projected.iter().map(|&g| -g).collect(),
        };

        let project = |trial: &mut GridFunction<F>| {
            let kt = (dot(trial.point(j), &q) / qq).max(k_min);
            for (x, &qi) in trial.point_mut(j).iter_mut().zip(&q) {
                *x = kt * qi;
            }
        };
        let Some((next, _)) =
            armijo_step(functional, cfg, &mut search, &u, &ev, &direction, project)
        else {
            break false;
        };
        u = next;
        k = (dot(u.point(j), &q) / qq).max(k_min);
        ev = functional.eval(&u)?;
        history.push(ev.value);
        iterations += 1;
        if k <= k_min {
            clamped_run += 1;
            if clamped_run >= cfg.clamp_window {
                constraint_active = true;
            }
        } else {
            clamped_run = 0;
        }
    };

    let gj = &ev.gradient[j * d..(j + 1) * d];
    let g_par = dot(gj, &q_hat);
    let at_clamp = k <= k_min && g_par > F::zero();
    projected.copy_from_slice(&ev.gradient);
    for c in 0..d {
        projected[j * d + c] = if at_clamp {
            F::zero()
        } else {
            g_par * q_hat[c]
        };
    }
    Ok(ConstrainedMinimum {
        value: ev.value,
        grad_norm: dual_norm(&projected, h),
        trajectory: u,
        constraint: ConstraintE { node: j, k_min, k },
        iterations,
        converged,
        constraint_active,
        history,
    })
}

fn verify<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
    u: GridFunction<F>,
    ev: &ActionEval<F>,
    iterations: usize,
) -> Result<HomoclinicCandidate<F>> {
    let h = functional.grid().step();
    let grad_norm = ev.dual_norm(h);
    let residual = functional.ode_residual(&u)?;
    if grad_norm > cfg.grad_tol {
        return Err(Error::VerificationFailed(format!(
            "gradient norm {grad_norm} above tolerance"
        )));
    }
    if !ev.feasible {
        return Err(Error::VerificationFailed(format!(
            "singularity clearance {} below {}",
            ev.min_seg_dist,
            functional.clearance()
        )));
    }
    if !(ev.value > F::zero()) {
        return Err(Error::VerificationFailed(format!(
            "action {} not positive",
            ev.value
        )));
    }
    if let Some(tol) = cfg.tail_tol_u {
        if residual.tail_sup_u > tol {
            return Err(Error::VerificationFailed(format!(
                "tail sup |u| = {} exceeds {tol}",
                residual.tail_sup_u
            )));
        }
    }
    if let Some(tol) = cfg.tail_tol_du {
        if residual.tail_sup_du > tol {
            return Err(Error::VerificationFailed(format!(
                "tail sup |u'| = {} exceeds {tol}",
                residual.tail_sup_du
            )));
        }
    }
    let crossing = ray_crossing(&u, functional.system().singularity());
    Ok(HomoclinicCandidate {
        action: ev.value,
        grad_norm,
        residual,
        clearance: ev.min_seg_dist,
        crossing,
        iterations,
        trajectory: u,
    })
}

/// Measures an arbitrary feasible trajectory as a candidate without any
/// acceptance gate; `iterations` is reported as 0.
pub fn measure_candidate<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    u: &GridFunction<F>,
) -> Result<HomoclinicCandidate<F>> {
    let ev = functional.eval(u)?;
    Ok(HomoclinicCandidate {
        action: ev.value,
        grad_norm: ev.dual_norm(functional.grid().step()),
        residual: functional.ode_residual(u)?,
        clearance: ev.min_seg_dist,
        crossing: ray_crossing(u, functional.system().singularity()),
        iterations: 0,
        trajectory: u.clone(),
    })
}

/// Free Armijo descent from `u0` to a critical point. Every
/// `renormalize_every` iterations, and again once the tolerance is met, the
/// iterate is shifted by whole periods so its first peak lies in `[0, T)`;
/// descent resumes until a normalized iterate meets the tolerance.
pub fn descend_to_critical<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    u0: &GridFunction<F>,
    cfg: &SolverConfig<F>,
) -> Result<DescentRun<F>> {
    cfg.validate()?;
    let grid = *functional.grid();
    let h = grid.step();
    let d = functional.dim();
    let mut u = u0.clone();
    let mut ev = functional.eval(&u)?;
    if !ev.feasible {
        return Err(Error::InfeasibleGuess {
            clearance: ev.min_seg_dist.as_f64(),
            required: functional.clearance().as_f64(),
        });
    }
    let riesz = cfg.precondition.then(|| RieszMap::new(&grid));
    let mut search = LineSearch::new(h, cfg.precondition);
    let mut history = vec![ev.value];
    let mut renormalizations = Vec::new();
    let mut iterations = 0usize;

    loop {
        if u.sup_norm() < cfg.zero_threshold {
            return Err(Error::ConvergedToZero { iterations });
        }
        let grad_norm = ev.dual_norm(h);
        let due = iterations > 0 && iterations.is_multiple_of(cfg.renormalize_every);
        if grad_norm <= cfg.grad_tol || due {
            let (v, shift) = u.renormalize_translation()?;
            if shift != 0 {
                let before = ev.value;
                u = v;
                ev = functional.eval(&u)?;
                renormalizations.push(RenormalizationEvent {
                    iteration: iterations,
                    shift,
                    action_before: before,
                    action_after: ev.value,
                });
                history.push(ev.value);
                continue;
            }
            if grad_norm <= cfg.grad_tol {
                break;
            }
        }
        if iterations >= cfg.max_iters {
            return Err(Error::MaxItersExceeded {
                iterations,
                grad_norm: grad_norm.as_f64(),
            });
        }
        let mut direction = ev.gradient.clone();
        if let Some(r) = &riesz {
            r.apply(&mut direction, d);
        }
        direction.iter_mut().for_each(|x| *x = -*x);
        let Some((next, _)) =
            armijo_step(functional, cfg, &mut search, &u, &ev, &direction, |_| {})
        else {
            return Err(Error::LineSearchFailed {
                iterations,
                grad_norm: grad_norm.as_f64(),
            });
        };
        u = next;
        ev = functional.eval(&u)?;
        history.push(ev.value);
        iterations += 1;
    }
    let candidate = verify(functional, cfg, u, &ev, iterations)?;
    Ok(DescentRun {
        candidate,
        history,
        renormalizations,
    })
}

/// Runs the hypothesis gate shared by the solve and search pipelines.
pub fn hypothesis_gate<F: Scalar, W: Potential<F>>(system: &HamiltonianSystem<F, W>) -> Result<()> {
    check_a(&system.coefficient, 1024)?;
    check_h2(&system.potential, F::lit(1e-4))?;
    Ok(())
}

/// Guess, constrained minimization, release, free descent. Attempts after the
/// first cycle through `k0` values and loop orientations.
pub fn solve_homoclinic<F: Scalar, W: Potential<F>>(
    system: &HamiltonianSystem<F, W>,
    grid: Grid<F>,
    cfg: &SolverConfig<F>,
) -> Result<Solution<F>> {
    cfg.validate()?;
    hypothesis_gate(system)?;
    let functional = ActionFunctional::new(system, grid);
    let mut attempts = Vec::new();
    let mut last = String::new();
    for attempt in 0..=cfg.max_restarts {
        let mut trial = cfg.clone();
        if attempt > 0 {
            let alternates = [F::lit(2.0), F::lit(1.2), cfg.k0];
            trial.k0 = alternates[(attempt - 1) % alternates.len()].max(cfg.k_min());
            if attempt % 2 == 0 {
                trial.orientation = -cfg.orientation;
            }
        }
        let mut log = AttemptLog {
            k0: trial.k0.as_f64(),
            orientation: trial.orientation,
            outcome: String::new(),
        };
        match solve_once(&functional, &trial) {
            Ok(mut solution) => {
                log.outcome = "converged".into();
                attempts.push(log);
                solution.attempts = attempts;
                return Ok(solution);
            }
            Err(e @ (Error::InvalidArgument(_) | Error::GridMismatch(_))) => return Err(e),
            Err(e) => {
                last = e.to_string();
                log.outcome = last.clone();
                attempts.push(log);
            }
        }
    }
    Err(Error::NoSolutionFound {
        attempts: attempts.len(),
        last,
    })
}

fn solve_once<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    cfg: &SolverConfig<F>,
) -> Result<Solution<F>> {
    let (guess, constraint) = initial_guess_bump(functional, cfg)?;
    solve_from_guess(functional, &guess, constraint, cfg)
}

/// Constrained stage followed by free descent from a prepared guess in `E`.
pub fn solve_from_guess<F: Scalar, W: Potential<F>>(
    functional: &ActionFunctional<'_, F, W>,
    guess: &GridFunction<F>,
    constraint: ConstraintE<F>,
    cfg: &SolverConfig<F>,
) -> Result<Solution<F>> {
    let constrained = minimize_over_e(functional, guess, constraint, cfg)?;
    let run = descend_to_critical(functional, &constrained.trajectory, cfg)?;
    let left_class_e = run.candidate.crossing.is_none();
    Ok(Solution {
        candidate: run.candidate,
        constrained,
        descent_history: run.history,
        renormalizations: run.renormalizations,
        left_class_e,
        attempts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PowerWell;

    fn system() -> HamiltonianSystem<f64, PowerWell<f64>> {
        HamiltonianSystem::example(2, 2.0, 3.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn riesz_map_inverts_the_h1_matrix() {
        let grid = Grid::<f64>::new(1.0, 8, 2).unwrap();
        let h = grid.step();
        let n = grid.len();
        let mut x = vec![0.0; n];
        for (i, v) in x.iter_mut().enumerate().take(n - 1).skip(1) {
            *v = (i as f64 * 0.7).sin();
        }
        // b = (K + M) x
        let mut b = vec![0.0; n];
        for i in 1..n - 1 {
            b[i] = (2.0 * x[i] - x[i - 1] - x[i + 1]) / h + h * x[i];
        }
        RieszMap::new(&grid).apply(&mut b, 1);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12, "{i}: {} vs {}", b[i], x[i]);
        }
    }

    #[test]
    fn guess_construction() {
        let sys = system();
        let f = ActionFunctional::new(&sys, Grid::desk());
        let cfg = SolverConfig {
            center: 0.0,
            ..SolverConfig::default()
        };
        let (u, c) = initial_guess_bump(&f, &cfg).unwrap();
        assert_eq!(u.point(c.node), &[3.0, 0.0]);
        assert_eq!(u.point(0), &[0.0, 0.0]);
        assert_eq!(u.point(640), &[0.0, 0.0]);
        let v = f.value(&u).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let bad = SolverConfig {
            k0: 1.0,
            ..cfg.clone()
        };
        assert!(matches!(
            initial_guess_bump(&f, &bad),
            Err(Error::InvalidArgument(_))
        ));
        let off_grid = SolverConfig {
            center: 0.0123,
            ..cfg
        };
        assert!(initial_guess_bump(&f, &off_grid).is_err());
    }

    #[test]
    fn guess_through_q_is_rejected() {
        let sys = system();
        let f = ActionFunctional::new(&sys, Grid::desk());
        let cfg = SolverConfig {
            transverse: 1e-9,
            ..SolverConfig::default()
        };
        assert!(matches!(
            initial_guess_bump(&f, &cfg),
            Err(Error::InfeasibleGuess { .. })
        ));
    }

    #[test]
    fn crossing_detection() {
        let sys = system();
        let f = ActionFunctional::new(&sys, Grid::desk());
        let (u, c) = initial_guess_bump(&f, &SolverConfig::default()).unwrap();
        let (cell, k) = ray_crossing(&u, &[2.0, 0.0]).unwrap();
        assert!(cell == c.node || cell + 1 == c.node);
        assert!((k - 1.5).abs() < 1e-12);
        assert!(ray_crossing(&GridFunction::zeros(Grid::<f64>::desk(), 2), &[2.0, 0.0]).is_none());
    }

    #[test]
    fn tiny_perturbation_collapses_to_zero() {
        let sys = system();
        let f = ActionFunctional::new(&sys, Grid::desk());
        let u = GridFunction::from_fn(Grid::desk(), 2, |t: f64, out| {
            out[0] = 1e-3 * (-t * t).exp();
            out[1] = -5e-4 * (-(t - 1.0).powi(2)).exp();
        });
        let err = descend_to_critical(&f, &u, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ConvergedToZero { .. }), "{err}");
    }

    #[test]
    fn gate_rejects_sign_changing_coefficient() {
        let sys = HamiltonianSystem::example(2, 2.0, 1.0, 2.0, 1.0).unwrap();
        let err = solve_homoclinic(&sys, Grid::desk(), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)));
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig::<f64> {
            armijo_c1: 1.5,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig::<f64> {
            orientation: 0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
