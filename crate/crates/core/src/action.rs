//! The discrete action `I_h(u) = sum_cells h/2 |du/h|^2 - trapezoid(a W(u))`,
//! its node gradient, and residual, decay and clearance diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::potential::{HamiltonianSystem, Potential};
use crate::scalar::{distance, norm, norm_sq, point_segment_distance, CompensatedSum, Scalar};
use crate::space::{Grid, GridFunction};

/// Value, gradient and feasibility data of the action at one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEval<F> {
    pub value: F,
    /// Euclidean gradient with respect to node values, node-major. Boundary
    /// entries are zero.
    pub gradient: Vec<F>,
    /// Minimum over cells of the distance from the segment `[u_i, u_{i+1}]`
    /// to `q`.
    pub min_seg_dist: F,
    pub feasible: bool,
}

impl<F: Scalar> ActionEval<F> {
    /// Stopping norm `|g|_2 / sqrt(h)`, a proxy for the dual `H^1` norm.
    pub fn dual_norm(&self, h: F) -> F {
        norm(&self.gradient) / h.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport<F> {
    /// `sup_i |(u_{i+1} - 2u_i + u_{i-1}) / h^2 + a(t_i) grad W(u_i)|`.
    pub sup_residual: F,
    /// `max |u(t_i)|` over `|t_i| >= L - T`.
    pub tail_sup_u: F,
    /// Same for the forward difference quotient.
    pub tail_sup_du: F,
}

/// The action functional bound to a grid, with node coefficients cached.
#[derive(Debug, Clone)]
pub struct ActionFunctional<'a, F, W> {
    system: &'a HamiltonianSystem<F, W>,
    grid: Grid<F>,
    coefficients: Vec<F>,
    clearance: F,
}

impl<'a, F: Scalar, W: Potential<F>> ActionFunctional<'a, F, W> {
    /// Binds the system to a grid. The feasibility clearance defaults to
    /// `1e-3 |q|`.
    pub fn new(system: &'a HamiltonianSystem<F, W>, grid: Grid<F>) -> Self {
        let m = grid.nodes_per_period();
        let coefficients = (0..grid.len())
            .map(|i| system.coefficient.at_phase(grid.phase_index(i), m))
            .collect();
        Self {
            system,
            grid,
            coefficients,
            clearance: F::lit(1e-3) * system.singularity_norm(),
        }
    }

    pub fn with_clearance(mut self, clearance: F) -> Self {
        self.clearance = clearance;
        self
    }

    pub fn system(&self) -> &'a HamiltonianSystem<F, W> {
        self.system
    }

    pub fn grid(&self) -> &Grid<F> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Feasibility threshold `delta_seg`.
    pub fn clearance(&self) -> F {
        self.clearance
    }

    /// `a(t_i)`.
    pub fn coefficient(&self, i: usize) -> F {
        self.coefficients[i]
    }

    fn check(&self, u: &GridFunction<F>) -> Result<()> {
        if *u.grid() != self.grid || u.dim() != self.dim() {
            return Err(Error::GridMismatch(
                "trajectory does not match the functional's grid".into(),
            ));
        }
        Ok(())
    }

    fn guard_nodes(&self, u: &GridFunction<F>) -> Result<()> {
        let q = self.system.singularity();
        let guard = self.system.potential.guard();
        for (i, p) in u.points().enumerate() {
            let d = distance(p, q);
            if d < guard {
                return Err(Error::SingularityProximity {
                    node: i,
                    distance: d.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Minimum over cells of the point-to-segment distance to `q`.
    pub fn singularity_clearance(&self, u: &GridFunction<F>) -> F {
        let q = self.system.singularity();
        let mut best = F::infinity();
        for i in 0..u.len() - 1 {
            best = best.min(point_segment_distance(q, u.point(i), u.point(i + 1)));
        }
        best
    }

    /// Action value only.
    pub fn value(&self, u: &GridFunction<F>) -> Result<F> {
        self.check(u)?;
        self.guard_nodes(u)?;
        Ok(self.value_unchecked(u))
    }

    fn value_unchecked(&self, u: &GridFunction<F>) -> F {
        let h = self.grid.step();
        let two_h = h + h;
        let w = &self.system.potential;
        let mut acc = CompensatedSum::new();
        for i in 0..u.len() - 1 {
            let a = u.point(i);
            let b = u.point(i + 1);
            let s = a
                .iter()
                .zip(b)
                .fold(F::zero(), |s, (&x, &y)| s + (y - x) * (y - x));
            acc.add(s / two_h);
        }
        for i in 0..u.len() {
            let p = u.point(i);
            if norm_sq(p) == F::zero() {
                continue;
            }
            acc.add(-self.grid.weight(i) * self.coefficients[i] * w.value_unchecked(p));
        }
        acc.value()
    }

    /// Value together with the segment clearance, the pair the line search
    /// needs.
    pub fn value_and_clearance(&self, u: &GridFunction<F>) -> Result<(F, F)> {
        let v = self.value(u)?;
        Ok((v, self.singularity_clearance(u)))
    }

    /// Full evaluation. Nodes inside the evaluation guard are an error;
    /// segments passing closer than `delta_seg` only clear `feasible`.
    pub fn eval(&self, u: &GridFunction<F>) -> Result<ActionEval<F>> {
        let value = self.value(u)?;
        let d = self.dim();
        let n = u.len();
        let h = self.grid.step();
        let w = &self.system.potential;
        let mut gradient = vec![F::zero(); n * d];
        let mut gw = vec![F::zero(); d];
        let two = F::lit(2.0);
        for i in 1..n - 1 {
            let (prev, cur, next) = (u.point(i - 1), u.point(i), u.point(i + 1));
            w.gradient_unchecked(cur, &mut gw);
            let ha = h * self.coefficients[i];
            let g = &mut gradient[i * d..(i + 1) * d];
            for c in 0..d {
                g[c] = -(next[c] - two * cur[c] + prev[c]) / h - ha * gw[c];
            }
        }
        let min_seg_dist = self.singularity_clearance(u);
        Ok(ActionEval {
            value,
            gradient,
            min_seg_dist,
            feasible: min_seg_dist >= self.clearance,
        })
    }

    /// Compares the analytic gradient with central differences of the action
    /// along `n_dirs` randomly chosen node coordinates. The error of each
    /// coordinate is measured relative to `max |g|` (absolute if `g = 0`).
    pub fn gradient_fd_check(
        &self,
        u: &GridFunction<F>,
        step: F,
        n_dirs: usize,
        seed: u64,
    ) -> Result<F> {
        let ev = self.eval(u)?;
        let scale = ev.gradient.iter().fold(F::zero(), |m, g| m.max(g.abs()));
        let d = self.dim();
        let n = u.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = F::zero();
        let mut probe = u.clone();
        for _ in 0..n_dirs {
            let node = rng.gen_range(1..n - 1);
            let k = node * d + rng.gen_range(0..d);
            let orig = probe.values()[k];
            probe.values_mut()[k] = orig + step;
            let up = self.value(&probe)?;
            probe.values_mut()[k] = orig - step;
            let down = self.value(&probe)?;
            probe.values_mut()[k] = orig;
            let fd = (up - down) / (step + step);
            let err = (fd - ev.gradient[k]).abs();
            // absolute error when the gradient vanishes identically
            let rel = if scale > F::zero() { err / scale } else { err };
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    /// Residual of the second-order stencil and tail decay metrics.
    pub fn ode_residual(&self, u: &GridFunction<F>) -> Result<ResidualReport<F>> {
        self.check(u)?;
        self.guard_nodes(u)?;
        let d = self.dim();
        let n = u.len();
        let h = self.grid.step();
        let h2 = h * h;
        let two = F::lit(2.0);
        let mut gw = vec![F::zero(); d];
        let mut r = vec![F::zero(); d];
        let mut sup_residual = F::zero();
        for i in 1..n - 1 {
            let (prev, cur, next) = (u.point(i - 1), u.point(i), u.point(i + 1));
            self.system.potential.gradient_unchecked(cur, &mut gw);
            for c in 0..d {
                r[c] = (next[c] - two * cur[c] + prev[c]) / h2 + self.coefficients[i] * gw[c];
            }
            sup_residual = sup_residual.max(norm(&r));
        }
        let (tail_sup_u, tail_sup_du) = self.tails(u);
        Ok(ResidualReport {
            sup_residual,
            tail_sup_u,
            tail_sup_du,
        })
    }

    fn tails(&self, u: &GridFunction<F>) -> (F, F) {
        let cut = self.grid.half_length() - self.grid.period();
        let h = self.grid.step();
        let eps = h * F::lit(1e-9);
        let mut su = F::zero();
        let mut sdu = F::zero();
        for i in 0..u.len() {
            if self.grid.time(i).abs() + eps < cut {
                continue;
            }
            su = su.max(norm(u.point(i)));
            if i + 1 < u.len() {
                sdu = sdu.max(distance(u.point(i + 1), u.point(i)) / h);
            }
        }
        (su, sdu)
    }

    /// Sup over nodes `2..n-3` of the residual measured with the five-point
    /// fourth-order stencil for `u''`. For a converged discrete solution this
    /// isolates the `O(h^2)` defect of the three-point scheme, so it is the
    /// quantity compared across refinement levels.
    pub fn defect_residual(&self, u: &GridFunction<F>) -> Result<F> {
        self.check(u)?;
        self.guard_nodes(u)?;
        let d = self.dim();
        let n = u.len();
        let h = self.grid.step();
        let denom = F::lit(12.0) * h * h;
        let (c16, c30) = (F::lit(16.0), F::lit(30.0));
        let mut gw = vec![F::zero(); d];
        let mut r = vec![F::zero(); d];
        let mut sup = F::zero();
        for i in 2..n - 2 {
            let (m2, m1, c0, p1, p2) = (
                u.point(i - 2),
                u.point(i - 1),
                u.point(i),
                u.point(i + 1),
                u.point(i + 2),
            );
            self.system.potential.gradient_unchecked(c0, &mut gw);
            for c in 0..d {
                let lap = (-p2[c] + c16 * p1[c] - c30 * c0[c] + c16 * m1[c] - m2[c]) / denom;
                r[c] = lap + self.coefficients[i] * gw[c];
            }
            sup = sup.max(norm(&r));
        }
        Ok(sup)
    }

    /// Samples feasible trajectories with `|u|_{H^1} = radius` and returns the
    /// smallest action seen: a sampled lower estimate of
    /// `inf_{|u| >= r} I(u)`.
    pub fn positivity_probe(
        &self,
        radius: F,
        n_samples: usize,
        seed: u64,
    ) -> Result<PositivityReport<F>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let half = self.grid.half_length().as_f64() / 2.0;
        let mut min_action = F::infinity();
        let mut accepted = 0;
        let mut rejected = 0;
        while accepted < n_samples {
            let bumps: Vec<(f64, f64, Vec<f64>)> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let c = rng.gen_range(-half..half);
                    let w = rng.gen_range(0.15..2.0);
                    let amp = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    (c, w, amp)
                })
                .collect();
            let raw = GridFunction::from_fn(self.grid, d, |t, out| {
                let t = t.as_f64();
                for (c, w, amp) in &bumps {
                    let e = (-((t - c) / w).powi(2)).exp();
                    for (o, a) in out.iter_mut().zip(amp) {
                        *o = *o + F::lit(a * e);
                    }
                }
            });
            let size = raw.h1_norm();
            if size == F::zero() {
                rejected += 1;
                continue;
            }
            let u = raw.scaled(radius / size);
            if self.singularity_clearance(&u) < self.clearance {
                rejected += 1;
                continue;
            }
            min_action = min_action.min(self.value(&u)?);
            accepted += 1;
        }
        Ok(PositivityReport {
            radius,
            min_action,
            samples: accepted,
            rejected,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport<F> {
    pub radius: F,
    pub min_action: F,
    pub samples: usize,
    pub rejected: usize,
}

/// Free-function form of [`ActionFunctional::eval`].
pub fn eval_action<F: Scalar, W: Potential<F>>(
    u: &GridFunction<F>,
    system: &HamiltonianSystem<F, W>,
) -> Result<ActionEval<F>> {
    ActionFunctional::new(system, *u.grid()).eval(u)
}

pub fn ode_residual<F: Scalar, W: Potential<F>>(
    u: &GridFunction<F>,
    system: &HamiltonianSystem<F, W>,
) -> Result<ResidualReport<F>> {
    ActionFunctional::new(system, *u.grid()).ode_residual(u)
}

pub fn singularity_clearance<F: Scalar, W: Potential<F>>(
    u: &GridFunction<F>,
    system: &HamiltonianSystem<F, W>,
) -> F {
    ActionFunctional::new(system, *u.grid()).singularity_clearance(u)
}
