//! Period-aligned grids on a truncated interval and the piecewise-linear
//! trajectories living on them.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{norm_sq, CompensatedSum, Scalar};

/// Uniform grid on `[-L, L]` with `L = M T` and `m` cells per period.
///
/// Node `i` sits at `t_i = -L + i h`, `h = T / m`. Shifting values by `m`
/// nodes is exactly a time shift by one period, and `t = 0` is node `M m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<F> {
    period: F,
    nodes_per_period: usize,
    half_periods: usize,
}

impl<F: Scalar> Grid<F> {
    pub fn new(period: F, nodes_per_period: usize, half_periods: usize) -> Result<Self> {
        if !(period > F::zero()) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {period}"
            )));
        }
        if nodes_per_period < 8 {
            return Err(Error::InvalidArgument(format!(
                "need at least 8 nodes per period, got {nodes_per_period}"
            )));
        }
        if half_periods < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 half periods, got {half_periods}"
            )));
        }
        Ok(Self {
            period,
            nodes_per_period,
            half_periods,
        })
    }

    /// `T = 1, m = 40, M = 8`: 641 nodes on `[-8, 8]`.
    pub fn desk() -> Self {
        Self::new(F::one(), 40, 8).expect("valid default grid")
    }

    pub fn period(&self) -> F {
        self.period
    }

    pub fn nodes_per_period(&self) -> usize {
        self.nodes_per_period
    }

    pub fn half_periods(&self) -> usize {
        self.half_periods
    }

    /// Cell width `h = T / m`.
    pub fn step(&self) -> F {
        self.period / F::from_usize_lossy(self.nodes_per_period)
    }

    pub fn half_length(&self) -> F {
        F::from_usize_lossy(self.half_periods) * self.period
    }

    /// Number of nodes `2 M m + 1`.
    pub fn len(&self) -> usize {
        2 * self.half_periods * self.nodes_per_period + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node at `t = 0`.
    pub fn origin_index(&self) -> usize {
        self.half_periods * self.nodes_per_period
    }

    pub fn time(&self, i: usize) -> F {
        -self.half_length() + F::from_usize_lossy(i) * self.step()
    }

    /// Signed node offset from the origin.
    pub fn offset(&self, i: usize) -> i64 {
        i as i64 - self.origin_index() as i64
    }

    /// Position of node `i` within its period, in `0..m`.
    pub fn phase_index(&self, i: usize) -> usize {
        self.offset(i).rem_euclid(self.nodes_per_period as i64) as usize
    }

    /// Integer `l` with `l T <= t_i < (l + 1) T`.
    pub fn period_index(&self, i: usize) -> i64 {
        self.offset(i).div_euclid(self.nodes_per_period as i64)
    }

    /// Node index for a time that lies on the grid (nearest node otherwise).
    pub fn index_of(&self, t: F) -> Option<usize> {
        let x = ((t + self.half_length()) / self.step()).round();
        let i = x.to_i64()?;
        (0..self.len() as i64).contains(&i).then_some(i as usize)
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> F {
        if i == 0 || i + 1 == self.len() {
            self.step() / F::lit(2.0)
        } else {
            self.step()
        }
    }

    /// Same grid with the resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.period,
            self.nodes_per_period * factor,
            self.half_periods,
        )
    }
}

/// Node values of a trajectory `u : [-L, L] -> R^d` with `u(-L) = u(L) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<F> {
    grid: Grid<F>,
    dim: usize,
    values: Vec<F>,
}

/// Aggregate of Sobolev checks at several window anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevSweep<F> {
    pub checked: usize,
    pub failures: usize,
    /// Smallest `rhs - lhs` seen.
    pub worst_slack: F,
}

impl<F> SobolevSweep<F> {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Outcome of the pointwise bound `|u(s)| <= |u|_{L2(A)} + |u'|_{L2(A)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevReport<F> {
    pub lhs: F,
    pub rhs: F,
    pub passed: bool,
}

impl<F: Scalar> GridFunction<F> {
    /// Wraps node-major values (`values[i * dim + c]`). Fails on length
    /// mismatch, non-finite entries or nonzero boundary values.
    pub fn new(grid: Grid<F>, dim: usize, values: Vec<F>) -> Result<Self> {
        if dim == 0 || values.len() != grid.len() * dim {
            return Err(Error::GridMismatch(format!(
                "expected {} values of dimension {dim}, got {}",
                grid.len() * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "trajectory values must be finite".into(),
            ));
        }
        let u = Self { grid, dim, values };
        let last = grid.len() - 1;
        if u.point(0)
            .iter()
            .chain(u.point(last))
            .any(|&v| v != F::zero())
        {
            return Err(Error::InvalidArgument("boundary values must vanish".into()));
        }
        Ok(u)
    }

    pub fn zeros(grid: Grid<F>, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![F::zero(); grid.len() * dim],
        }
    }

    /// Samples `f(t, out)` at interior nodes; boundary nodes are set to zero.
    pub fn from_fn(grid: Grid<F>, dim: usize, mut f: impl FnMut(F, &mut [F])) -> Self {
        let mut u = Self::zeros(grid, dim);
        for i in 1..grid.len() - 1 {
            let t = grid.time(i);
            f(t, u.point_mut(i));
        }
        u
    }

    pub fn grid(&self) -> &Grid<F> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Mutable access to the raw values. Callers keep the boundary at zero.
    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn point(&self, i: usize) -> &[F] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub(crate) fn clamp_boundary(&mut self) {
        let last = self.len() - 1;
        self.point_mut(0).fill(F::zero());
        self.point_mut(last).fill(F::zero());
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch(
                "trajectories live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    pub fn scaled(&self, factor: F) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    /// `sum_cells h |(u_{i+1} - u_i) / h|^2`.
    pub fn kinetic_sq(&self) -> F {
        self.kinetic_sq_range(0, self.len() - 1)
    }

    /// Kinetic integral over cells `first..last` (cell `i` joins nodes `i`
    /// and `i + 1`).
    fn kinetic_sq_range(&self, first: usize, last: usize) -> F {
        let h = self.grid.step();
        let mut acc = CompensatedSum::new();
        for i in first..last {
            let a = self.point(i);
            let b = self.point(i + 1);
            let s = a
                .iter()
                .zip(b)
                .fold(F::zero(), |s, (&x, &y)| s + (y - x) * (y - x));
            acc.add(s / h);
        }
        acc.value()
    }

    /// Trapezoid rule for `int |u|^2`.
    pub fn l2_sq(&self) -> F {
        let mut acc = CompensatedSum::new();
        for (i, p) in self.points().enumerate() {
            acc.add(self.grid.weight(i) * norm_sq(p));
        }
        acc.value()
    }

    pub fn kinetic_seminorm(&self) -> F {
        self.kinetic_sq().sqrt()
    }

    pub fn l2_norm(&self) -> F {
        self.l2_sq().sqrt()
    }

    pub fn h1_norm(&self) -> F {
        (self.kinetic_sq() + self.l2_sq()).sqrt()
    }

    pub fn sup_norm(&self) -> F {
        self.points().map(norm_sq).fold(F::zero(), F::max).sqrt()
    }

    /// First node attaining `max |u(t_i)|`, or `None` if `u` vanishes.
    pub fn peak_index(&self) -> Option<usize> {
        let mut best = F::zero();
        let mut at = None;
        for (i, p) in self.points().enumerate() {
            let v = norm_sq(p);
            if v > best {
                best = v;
                at = Some(i);
            }
        }
        at
    }

    /// `tau_k u = u(. - kT)`: values move `k m` nodes to the right, vacated
    /// nodes are zero-filled and values pushed past the ends are dropped.
    pub fn shift_periods(&self, k: i64) -> Result<Self> {
        let n = self.len() as i64;
        let offset = k
            .checked_mul(self.grid.nodes_per_period() as i64)
            .filter(|o| o.abs() < n)
            .ok_or(Error::ShiftOutOfRange {
                k,
                nodes: self.len(),
            })?;
        let mut out = Self::zeros(self.grid, self.dim);
        for i in 0..n {
            let src = i - offset;
            if (0..n).contains(&src) {
                out.point_mut(i as usize)
                    .copy_from_slice(self.point(src as usize));
            }
        }
        out.clamp_boundary();
        Ok(out)
    }

    /// Normalized representative: shifts by whole periods so that the first
    /// maximizer of `|u|` lands in `[0, T)`. Returns the shifted function and
    /// the number of periods `l` that were removed (`v = tau_{-l} u`).
    pub fn renormalize_translation(&self) -> Result<(Self, i64)> {
        let peak = self.peak_index().ok_or(Error::ZeroFunction)?;
        let l = self.grid.period_index(peak);
        if l == 0 {
            return Ok((self.clone(), 0));
        }
        Ok((self.shift_periods(-l)?, l))
    }

    /// `true` if the first maximizer of `|u|` lies in `[0, T)`.
    pub fn is_normalized(&self) -> bool {
        self.peak_index()
            .map(|i| self.grid.period_index(i) == 0)
            .unwrap_or(false)
    }

    /// Discrete form of `|v(s)| <= |v|_{L2(A(s))} + |v'|_{L2(A(s))}` with the
    /// unit window `A(s) = [s, s+1]` for `s >= 0` and `[s-1, s]` otherwise,
    /// snapped to a whole number of cells.
    pub fn sobolev_bound_check(&self, node: usize) -> Result<SobolevReport<F>> {
        let h = self.grid.step();
        let cells = (F::one() / h).round().to_usize().unwrap_or(1).max(1);
        let t = self.grid.time(node);
        let (first, last) = if t >= F::zero() {
            (node, node + cells)
        } else {
            (node.wrapping_sub(cells), node)
        };
        if node >= self.len() || first > node || last >= self.len() {
            let width = F::from_usize_lossy(cells) * h;
            let (start, end) = if t >= F::zero() {
                (t, t + width)
            } else {
                (t - width, t)
            };
            return Err(Error::WindowOutOfDomain {
                start: start.as_f64(),
                end: end.as_f64(),
            });
        }
        let half = h / F::lit(2.0);
        let mut mass = CompensatedSum::new();
        for i in first..=last {
            let w = if i == first || i == last { half } else { h };
            mass.add(w * norm_sq(self.point(i)));
        }
        let lhs = norm_sq(self.point(node)).sqrt();
        let rhs = mass.value().sqrt() + self.kinetic_sq_range(first, last).sqrt();
        Ok(SobolevReport {
            lhs,
            rhs,
            passed: lhs <= rhs + F::lit(1e-8),
        })
    }

    /// Runs [`sobolev_bound_check`](Self::sobolev_bound_check) at `count`
    /// window anchors drawn uniformly from the nodes whose window fits.
    pub fn sobolev_sweep(&self, count: usize, seed: u64) -> Result<SobolevSweep<F>> {
        let cells = (F::one() / self.grid.step())
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let n = self.len();
        if n <= 2 * cells {
            return Err(Error::InvalidArgument(
                "grid shorter than one Sobolev window".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sweep = SobolevSweep {
            checked: 0,
            failures: 0,
            worst_slack: F::infinity(),
        };
        for _ in 0..count {
            let node = rng.gen_range(cells..n - cells);
            let report = self.sobolev_bound_check(node)?;
            sweep.checked += 1;
            if !report.passed {
                sweep.failures += 1;
            }
            sweep.worst_slack = sweep.worst_slack.min(report.rhs - report.lhs);
        }
        Ok(sweep)
    }

    /// CSV with header `t,u1,...,ud` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in 1..=self.dim {
            let _ = write!(out, ",u{c}");
        }
        out.push('\n');
        for (i, p) in self.points().enumerate() {
            let _ = write!(out, "{:.16e}", self.grid.time(i).as_f64());
            for v in p {
                let _ = write!(out, ",{:.16e}", v.as_f64());
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV produced by [`to_csv`](Self::to_csv), checking that the
    /// node times match `grid`.
    pub fn from_csv(grid: Grid<F>, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty trajectory file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = cols.len().saturating_sub(1);
        let header_ok = cols.first() == Some(&"t")
            && dim > 0
            && cols[1..]
                .iter()
                .enumerate()
                .all(|(c, name)| *name == format!("u{}", c + 1));
        if !header_ok {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header t,u1,...,ud, got `{header}`"),
            });
        }
        let mut values = Vec::with_capacity(grid.len() * dim);
        let mut rows = 0usize;
        let tol = grid.step() * F::lit(1e-6);
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, got {}", dim + 1, fields.len()),
                });
            }
            let parse = |s: &str| -> Result<F> {
                s.parse::<f64>().map(F::lit).map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            let t = parse(fields[0])?;
            if rows >= grid.len() || (t - grid.time(rows)).abs() > tol {
                return Err(Error::GridMismatch(format!(
                    "row {} at t = {t} does not match the configured grid",
                    rows + 1
                )));
            }
            for f in &fields[1..] {
                values.push(parse(f)?);
            }
            rows += 1;
        }
        if rows != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} rows, found {rows}",
                grid.len()
            )));
        }
        Self::new(grid, dim, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hat(grid: Grid<f64>, at: usize) -> GridFunction<f64> {
        let mut u = GridFunction::zeros(grid, 1);
        u.point_mut(at)[0] = 1.0;
        u
    }

    fn bump(grid: Grid<f64>, center: f64, width: f64) -> GridFunction<f64> {
        GridFunction::from_fn(grid, 2, |t, out| {
            let e = (-(t - center).powi(2) / (width * width)).exp();
            out[0] = e;
            out[1] = 0.5 * e * (t - center);
        })
    }

    #[test]
    fn grid_layout() {
        let g = Grid::<f64>::desk();
        assert_eq!(g.len(), 641);
        assert_eq!(g.time(0), -8.0);
        assert_eq!(g.time(g.origin_index()), 0.0);
        assert_eq!(g.time(640), 8.0);
        assert_eq!(g.period_index(g.origin_index() + 39), 0);
        assert_eq!(g.period_index(g.origin_index() + 40), 1);
        assert_eq!(g.period_index(g.origin_index() - 1), -1);
        assert!(Grid::<f64>::new(1.0, 7, 8).is_err());
        assert!(Grid::<f64>::new(1.0, 8, 1).is_err());
    }

    #[test]
    fn zero_function_norms() {
        let u = GridFunction::<f64>::zeros(Grid::desk(), 2);
        assert_eq!((u.h1_norm(), u.l2_norm(), u.sup_norm()), (0.0, 0.0, 0.0));
        assert!(matches!(
            u.renormalize_translation(),
            Err(Error::ZeroFunction)
        ));
    }

    #[test]
    fn hat_norms() {
        let g = Grid::<f64>::desk();
        let h = g.step();
        let u = hat(g, 100);
        assert_relative_eq!(u.l2_sq(), h, max_relative = 1e-14);
        assert_relative_eq!(u.kinetic_sq(), 2.0 / h, max_relative = 1e-14);
        assert_relative_eq!(
            u.h1_norm().powi(2),
            u.l2_sq() + u.kinetic_sq(),
            max_relative = 1e-14
        );
        assert_eq!(u.sup_norm(), 1.0);
    }

    #[test]
    fn boundary_must_vanish() {
        let g = Grid::<f64>::desk();
        let mut v = vec![0.0; g.len()];
        v[0] = 1.0;
        assert!(GridFunction::new(g, 1, v).is_err());
        assert!(GridFunction::new(g, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn shifts() {
        let g = Grid::<f64>::desk();
        // supported in the middle third
        let u = GridFunction::from_fn(g, 2, |t, out| {
            if t.abs() < 2.5 {
                out[0] = (1.0 - (t / 2.5).powi(2)).powi(2);
                out[1] = t * out[0];
            }
        });
        assert_eq!(u.shift_periods(0).unwrap(), u);
        let back = u.shift_periods(2).unwrap().shift_periods(-2).unwrap();
        assert_eq!(back, u);
        let s = u.shift_periods(3).unwrap();
        assert_relative_eq!(s.h1_norm(), u.h1_norm(), max_relative = 1e-13);
        assert_relative_eq!(s.l2_norm(), u.l2_norm(), max_relative = 1e-13);
        assert_eq!(s.sup_norm(), u.sup_norm());
        assert!(matches!(
            u.shift_periods(17),
            Err(Error::ShiftOutOfRange { .. })
        ));
        // negative shifts keep the boundary pinned
        let big = bump(g, -7.0, 3.0);
        let moved = big.shift_periods(-1).unwrap();
        assert_eq!(moved.point(0), &[0.0, 0.0]);
    }

    #[test]
    fn renormalization_cases() {
        let g = Grid::<f64>::desk();
        let u = bump(g, 0.5, 0.4);
        let (v, k) = u.renormalize_translation().unwrap();
        assert_eq!(k, 0);
        assert_eq!(v, u);
        let far = bump(g, 5.5, 0.4);
        let (v, k) = far.renormalize_translation().unwrap();
        assert_eq!(k, 5);
        assert!(v.is_normalized());
        // ties: the earlier maximizer decides
        let mut tie = GridFunction::<f64>::zeros(g, 1);
        tie.point_mut(g.origin_index() - 45)[0] = 1.0;
        tie.point_mut(g.origin_index() + 85)[0] = 1.0;
        let (_, k) = tie.renormalize_translation().unwrap();
        assert_eq!(k, -2);
    }

    #[test]
    fn sobolev_hat_closed_form() {
        let g = Grid::<f64>::desk();
        let h = g.step();
        let s = g.origin_index() + 3;
        let r = hat(g, s).sobolev_bound_check(s).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_relative_eq!(
            r.rhs,
            (h / 2.0).sqrt() + (1.0 / h).sqrt(),
            max_relative = 1e-14
        );
        assert!(r.passed);
        let z = GridFunction::<f64>::zeros(g, 2)
            .sobolev_bound_check(100)
            .unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(z.passed);
        let edge = hat(g, 3).sobolev_bound_check(g.len() - 10);
        assert!(matches!(edge, Err(Error::WindowOutOfDomain { .. })));
        assert!(hat(g, 3).sobolev_bound_check(10).is_err());
    }

    #[test]
    fn csv_roundtrip_and_grid_mismatch() {
        let g = Grid::<f64>::desk();
        let u = bump(g, 0.1, 0.7);
        let text = u.to_csv();
        assert!(text.starts_with("t,u1,u2\n"));
        assert_eq!(GridFunction::from_csv(g, &text).unwrap(), u);
        let other = Grid::<f64>::new(1.0, 20, 8).unwrap();
        assert!(matches!(
            GridFunction::from_csv(other, &text),
            Err(Error::GridMismatch(_))
        ));
        assert!(matches!(
            GridFunction::<f64>::from_csv(g, "x,y\n"),
            Err(Error::Parse { .. })
        ));
    }

    fn random_function(coeffs: &[(f64, f64, f64)]) -> GridFunction<f64> {
        let g = Grid::<f64>::new(1.0, 16, 6).unwrap();
        GridFunction::from_fn(g, 2, |t, out| {
            for &(c, w, a) in coeffs {
                let e = a * (-(t - c).powi(2) / (w * w)).exp();
                out[0] += e;
                out[1] += e * (t - c).sin();
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sup_bounded_by_h1(coeffs in prop::collection::vec((-4.0..4.0f64, 0.05..2.0f64, -3.0..3.0f64), 1..5)) {
            let u = random_function(&coeffs);
            prop_assert!(u.sup_norm() <= u.h1_norm() * (1.0 + 1e-10));
        }

        #[test]
        fn renormalization_idempotent(coeffs in prop::collection::vec((-4.0..4.0f64, 0.05..1.0f64, 0.1..3.0f64), 1..4)) {
            let u = random_function(&coeffs);
            let (v, _) = u.renormalize_translation().unwrap();
            let (w, k) = v.renormalize_translation().unwrap();
            prop_assert_eq!(k, 0);
            prop_assert_eq!(w, v);
        }

        #[test]
        fn sobolev_bound_holds(coeffs in prop::collection::vec((-3.0..3.0f64, 0.05..1.5f64, -3.0..3.0f64), 1..5), s in 16usize..177) {
            let u = random_function(&coeffs);
            let r = u.sobolev_bound_check(s).unwrap();
            prop_assert!(r.passed, "lhs {} rhs {}", r.lhs, r.rhs);
        }
    }
}
