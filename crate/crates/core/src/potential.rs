//! Potentials `V(t, u) = a(t) W(u)` with a point singularity, plus sampled
//! checks of the structural hypotheses the variational machinery relies on.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{distance, dot, norm, norm_sq, Scalar};

/// Fixed seed for the hypothesis samplers so check reports are reproducible.
const CHECK_SEED: u64 = 0x5E_ED0F_C4EC;

/// Time-periodic coefficient `a(t) = a_base + a_amp cos(2 pi t / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSpec<F> {
    pub a_base: F,
    pub a_amp: F,
    pub period: F,
}

impl<F: Scalar> CoefficientSpec<F> {
    /// Builds a coefficient, rejecting a non-positive period. Positivity of
    /// `a` is a hypothesis and is left to [`check_a`].
    pub fn new(a_base: F, a_amp: F, period: F) -> Result<Self> {
        if !(period > F::zero()) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        if !a_base.is_finite() || !a_amp.is_finite() {
            return Err(Error::InvalidArgument("coefficient must be finite".into()));
        }
        Ok(Self {
            a_base,
            a_amp,
            period,
        })
    }

    /// Lower bound `a_0 = a_base - |a_amp|`.
    pub fn a0(&self) -> F {
        self.a_base - self.a_amp.abs()
    }

    /// Upper bound `a_inf = a_base + |a_amp|`.
    pub fn a_inf(&self) -> F {
        self.a_base + self.a_amp.abs()
    }

    /// Evaluates `a(t)`. The time is first reduced modulo the period so that
    /// `a(t + T)` and `a(t)` see the same phase.
    pub fn eval(&self, t: F) -> F {
        let phase = t / self.period;
        let frac = phase - phase.floor();
        self.at_fraction(frac)
    }

    /// Evaluates `a` at the phase `num / den` of a period. Grids use this with
    /// the node index modulo nodes-per-period, making node coefficients
    /// exactly periodic.
    pub fn at_phase(&self, num: usize, den: usize) -> F {
        let frac = F::from_usize_lossy(num % den) / F::from_usize_lossy(den);
        self.at_fraction(frac)
    }

    fn at_fraction(&self, frac: F) -> F {
        self.a_base + self.a_amp * (F::TAU() * frac).cos()
    }
}

/// Free function form of [`CoefficientSpec::eval`].
pub fn eval_a<F: Scalar>(spec: &CoefficientSpec<F>, t: F) -> F {
    spec.eval(t)
}

/// The autonomous factor `W` of the potential.
///
/// Implementors must be immutable after construction; evaluation is shared
/// across solver workers.
pub trait Potential<F: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// The singular point `q`.
    fn singularity(&self) -> &[F];

    /// Floating point guard radius around `q` inside which evaluation refuses.
    fn guard(&self) -> F;

    /// `W(u)` for a point outside the guard radius.
    fn value_unchecked(&self, u: &[F]) -> F;

    /// `grad W(u)` written into `out`.
    fn gradient_unchecked(&self, u: &[F], out: &mut [F]);

    fn value(&self, u: &[F]) -> Result<F> {
        self.guard_point(u)?;
        Ok(self.value_unchecked(u))
    }

    fn gradient(&self, u: &[F], out: &mut [F]) -> Result<()> {
        self.guard_point(u)?;
        self.gradient_unchecked(u, out);
        Ok(())
    }

    fn guard_point(&self, u: &[F]) -> Result<()> {
        let dist = distance(u, self.singularity());
        if dist < self.guard() {
            return Err(Error::SingularityHit {
                distance: dist.as_f64(),
            });
        }
        Ok(())
    }
}

impl<F: Scalar, P: Potential<F> + ?Sized> Potential<F> for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn singularity(&self) -> &[F] {
        (**self).singularity()
    }
    fn guard(&self) -> F {
        (**self).guard()
    }
    fn value_unchecked(&self, u: &[F]) -> F {
        (**self).value_unchecked(u)
    }
    fn gradient_unchecked(&self, u: &[F], out: &mut [F]) {
        (**self).gradient_unchecked(u, out)
    }
}

/// The closed-form family `W(u) = -|u|^2 |u - q|^(-alpha)`.
///
/// Quadratic and negative definite at 0 with `W_uu(0) = -2|q|^(-alpha) I`,
/// blows up like `|u - q|^(-alpha)` at `q`, and tends to zero like
/// `|u|^(2 - alpha)` at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerWell<F> {
    q: Vec<F>,
    alpha: F,
    guard: F,
}

impl<F: Scalar> PowerWell<F> {
    pub fn new(q: Vec<F>, alpha: F) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be at least 2, got {}",
                q.len()
            )));
        }
        let q_norm = norm(&q);
        if !(q_norm > F::zero()) || q.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "singularity must be a finite nonzero point".into(),
            ));
        }
        if !(alpha >= F::lit(2.0) && alpha <= F::lit(4.0)) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [2, 4], got {alpha}"
            )));
        }
        Ok(Self {
            guard: F::lit(1e-9) * q_norm,
            q,
            alpha,
        })
    }

    /// Singularity at `(2, 0, ..., 0)`.
    pub fn standard(dim: usize, alpha: F) -> Result<Self> {
        let mut q = vec![F::zero(); dim];
        if let Some(first) = q.first_mut() {
            *first = F::lit(2.0);
        }
        Self::new(q, alpha)
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn with_guard(mut self, guard: F) -> Self {
        self.guard = guard;
        self
    }
}

impl<F: Scalar> Potential<F> for PowerWell<F> {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn singularity(&self) -> &[F] {
        &self.q
    }

    fn guard(&self) -> F {
        self.guard
    }

    fn value_unchecked(&self, u: &[F]) -> F {
        let rho = distance(u, &self.q);
        -norm_sq(u) * rho.powf(-self.alpha)
    }

    fn gradient_unchecked(&self, u: &[F], out: &mut [F]) {
        // grad = -2 u rho^-a + a |u|^2 rho^(-a-2) (u - q)
        let rho = distance(u, &self.q);
        let r_a = rho.powf(-self.alpha);
        let radial = self.alpha * norm_sq(u) * r_a / (rho * rho);
        let two = F::lit(2.0);
        for ((o, &ui), &qi) in out.iter_mut().zip(u).zip(&self.q) {
            *o = -two * ui * r_a + radial * (ui - qi);
        }
    }
}

type ValueFn<F> = Box<dyn Fn(&[F]) -> F + Send + Sync>;
type GradientFn<F> = Box<dyn Fn(&[F], &mut [F]) + Send + Sync>;

/// A user supplied `W` given as a value and gradient closure pair.
pub struct CustomPotential<F> {
    q: Vec<F>,
    guard: F,
    value: ValueFn<F>,
    gradient: GradientFn<F>,
}

impl<F: Scalar> CustomPotential<F> {
    pub fn new(
        q: Vec<F>,
        value: impl Fn(&[F]) -> F + Send + Sync + 'static,
        gradient: impl Fn(&[F], &mut [F]) + Send + Sync + 'static,
    ) -> Self {
        let guard = F::lit(1e-9) * norm(&q);
        Self {
            q,
            guard,
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }
}

impl<F: Scalar> std::fmt::Debug for CustomPotential<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomPotential")
            .field("q", &self.q)
            .field("guard", &self.guard)
            .finish_non_exhaustive()
    }
}

impl<F: Scalar> Potential<F> for CustomPotential<F> {
    fn dim(&self) -> usize {
        self.q.len()
    }
    fn singularity(&self) -> &[F] {
        &self.q
    }
    fn guard(&self) -> F {
        self.guard
    }
    fn value_unchecked(&self, u: &[F]) -> F {
        (self.value)(u)
    }
    fn gradient_unchecked(&self, u: &[F], out: &mut [F]) {
        (self.gradient)(u, out)
    }
}

/// A full potential: the periodic coefficient together with `W`.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem<F, W> {
    pub coefficient: CoefficientSpec<F>,
    pub potential: W,
}

impl<F: Scalar, W: Potential<F>> HamiltonianSystem<F, W> {
    pub fn new(coefficient: CoefficientSpec<F>, potential: W) -> Self {
        Self {
            coefficient,
            potential,
        }
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn singularity(&self) -> &[F] {
        self.potential.singularity()
    }

    pub fn singularity_norm(&self) -> F {
        norm(self.potential.singularity())
    }
}

impl<F: Scalar> HamiltonianSystem<F, PowerWell<F>> {
    /// The example family with `q = (2, 0, ...)`.
    pub fn example(dim: usize, alpha: F, a_base: F, a_amp: F, period: F) -> Result<Self> {
        Ok(Self::new(
            CoefficientSpec::new(a_base, a_amp, period)?,
            PowerWell::standard(dim, alpha)?,
        ))
    }
}

/// Radial profile used to build hypothesis witnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthProfile<F> {
    /// `scale * ln(rho)`
    Log { scale: F },
    /// `scale * rho^exponent`
    Power { scale: F, exponent: F },
}

impl<F: Scalar> GrowthProfile<F> {
    pub fn value(&self, rho: F) -> F {
        match *self {
            GrowthProfile::Log { scale } => scale * rho.ln(),
            GrowthProfile::Power { scale, exponent } => scale * rho.powf(exponent),
        }
    }

    /// Magnitude of the gradient of the radial field at radius `rho`.
    pub fn slope(&self, rho: F) -> F {
        match *self {
            GrowthProfile::Log { scale } => (scale / rho).abs(),
            GrowthProfile::Power { scale, exponent } => {
                (scale * exponent * rho.powf(exponent - F::one())).abs()
            }
        }
    }
}

/// Witness fields for the strong-force bound near `q` and the slow-decay
/// bound at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongForceWitness<F> {
    /// Field `U` as a function of `|u - q|`.
    pub near: GrowthProfile<F>,
    /// Radius `r` of the punctured ball around `q`.
    pub radius: F,
    /// Field `U_inf` as a function of `|u|`.
    pub far: GrowthProfile<F>,
    /// Radius `R_0` beyond which the far bound is probed.
    pub far_radius: F,
}

impl<F: Scalar> StrongForceWitness<F> {
    /// Default witnesses for the example family with exponent `alpha`.
    pub fn for_power_well(alpha: F, q_norm: F) -> Self {
        let two = F::lit(2.0);
        let near = if alpha == two {
            GrowthProfile::Log { scale: F::one() }
        } else {
            GrowthProfile::Power {
                scale: F::one(),
                exponent: F::one() - alpha / two,
            }
        };
        let far = if alpha < F::lit(4.0) {
            GrowthProfile::Power {
                scale: F::lit(0.5),
                exponent: (F::lit(4.0) - alpha) / two,
            }
        } else {
            GrowthProfile::Log { scale: F::lit(0.5) }
        };
        Self {
            near,
            radius: F::lit(0.1),
            far,
            far_radius: F::lit(10.0) * q_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientReport<F> {
    pub min_a: F,
    pub max_a: F,
}

/// Samples `a` over one period.
pub fn probe_a<F: Scalar>(spec: &CoefficientSpec<F>, n_samples: usize) -> CoefficientReport<F> {
    let n = n_samples.max(1);
    let mut min_a = F::infinity();
    let mut max_a = F::neg_infinity();
    for i in 0..n {
        let a = spec.at_phase(i, n);
        min_a = min_a.min(a);
        max_a = max_a.max(a);
    }
    CoefficientReport { min_a, max_a }
}

/// Checks `a(t) > 0` over one sampled period.
pub fn check_a<F: Scalar>(
    spec: &CoefficientSpec<F>,
    n_samples: usize,
) -> Result<CoefficientReport<F>> {
    let report = probe_a(spec, n_samples);
    if report.min_a <= F::zero() {
        return Err(Error::HypothesisViolation(format!(
            "coefficient a(t) reaches {} <= 0",
            report.min_a
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticReport<F> {
    pub eigen_min: F,
    pub eigen_max: F,
    pub alpha0: F,
    pub alpha1: F,
}

/// Finite-difference Hessian of `W` at the origin, symmetrized.
pub fn hessian_at_origin<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    fd_step: F,
) -> Result<DMatrix<f64>> {
    let d = potential.dim();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    let mut x = vec![F::zero(); d];
    let mut g_plus = vec![F::zero(); d];
    let mut g_minus = vec![F::zero(); d];
    for j in 0..d {
        x[j] = fd_step;
        potential.gradient(&x, &mut g_plus)?;
        x[j] = -fd_step;
        potential.gradient(&x, &mut g_minus)?;
        x[j] = F::zero();
        for i in 0..d {
            hess[(i, j)] = ((g_plus[i] - g_minus[i]) / (F::lit(2.0) * fd_step)).as_f64();
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Eigenvalue bounds of `W_uu(0)`: negative definiteness at the origin.
pub fn probe_h2<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    fd_step: F,
) -> Result<QuadraticReport<F>> {
    if !(fd_step > F::zero()) {
        return Err(Error::InvalidArgument(
            "finite difference step must be positive".into(),
        ));
    }
    let hess = hessian_at_origin(potential, fd_step)?;
    let eig = hess.symmetric_eigenvalues();
    let eigen_min = F::lit(eig.min());
    let eigen_max = F::lit(eig.max());
    Ok(QuadraticReport {
        eigen_min,
        eigen_max,
        alpha0: -eigen_min,
        alpha1: -eigen_max,
    })
}

pub fn check_h2<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    fd_step: F,
) -> Result<QuadraticReport<F>> {
    let report = probe_h2(potential, fd_step)?;
    if report.eigen_max >= F::zero() {
        return Err(Error::HypothesisViolation(format!(
            "Hessian of W at 0 has eigenvalue {} >= 0",
            report.eigen_max
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport<F> {
    /// Minimum of `-W(u) - |grad U(u)|^2` over the samples.
    pub min_margin: F,
    /// For the far-field probe: whether `|U_inf|` grew along every ray.
    pub growth_ok: bool,
    pub samples: usize,
}

impl<F: Scalar> MarginReport<F> {
    pub fn passed(&self) -> bool {
        self.min_margin >= F::zero() && self.growth_ok
    }
}

fn unit_directions<F: Scalar>(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<F>> {
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            dirs.push(v.iter().map(|x| F::lit(x / n)).collect());
        }
    }
    dirs
}

/// Samples the strong-force margin on shells `0 < |u - q| <= r`.
///
/// Shell radii are spaced geometrically from `r` down to `1e-6 r` (never
/// inside the evaluation guard); `n_samples` directions are used per shell.
pub fn probe_h3<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    witness: &StrongForceWitness<F>,
    n_samples: usize,
) -> Result<MarginReport<F>> {
    let q = potential.singularity();
    let q_norm = norm(q);
    let r = witness.radius;
    if !(r > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "witness radius must be positive, got {r}"
        )));
    }
    if r >= q_norm / F::lit(2.0) {
        return Err(Error::InvalidArgument(format!(
            "witness radius {r} must be below |q|/2"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    let dirs = unit_directions::<F>(potential.dim(), n_samples.max(1), &mut rng);
    let shells = 25usize;
    let floor = (r * F::lit(1e-6)).max(potential.guard() * F::lit(10.0));
    let ratio = (floor / r).ln() / F::from_usize_lossy(shells - 1);
    let mut min_margin = F::infinity();
    let mut samples = 0;
    let mut u = vec![F::zero(); potential.dim()];
    for s in 0..shells {
        let rho = r * (ratio * F::from_usize_lossy(s)).exp();
        let grad_sq = witness.near.slope(rho).powi(2);
        for dir in &dirs {
            for ((ui, &qi), &di) in u.iter_mut().zip(q).zip(dir) {
                *ui = qi + rho * di;
            }
            let w = potential.value(&u)?;
            min_margin = min_margin.min(-w - grad_sq);
            samples += 1;
        }
    }
    // Blow-up of |U| toward q along rays.
    let growth_ok = (1..shells).all(|s| {
        let outer = r * (ratio * F::from_usize_lossy(s - 1)).exp();
        let inner = r * (ratio * F::from_usize_lossy(s)).exp();
        witness.near.value(inner).abs() >= witness.near.value(outer).abs()
    });
    Ok(MarginReport {
        min_margin,
        growth_ok,
        samples,
    })
}

pub fn check_h3<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    witness: &StrongForceWitness<F>,
    n_samples: usize,
) -> Result<MarginReport<F>> {
    let report = probe_h3(potential, witness, n_samples)?;
    if !report.passed() {
        return Err(Error::HypothesisViolation(format!(
            "strong-force margin {} near the singularity",
            report.min_margin
        )));
    }
    Ok(report)
}

/// Samples `-W(u) - |grad U_inf(u)|^2` along rays for `R_0 <= |u| <= 1e4 R_0`
/// and checks that `|U_inf|` grows along each ray.
pub fn probe_h4<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    witness: &StrongForceWitness<F>,
    n_samples: usize,
) -> Result<MarginReport<F>> {
    let r0 = witness.far_radius;
    if !(r0 > F::zero()) {
        return Err(Error::InvalidArgument("far radius must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ 0xFA);
    let dirs = unit_directions::<F>(potential.dim(), n_samples.max(1), &mut rng);
    let shells = 25usize;
    let step = F::lit(4.0) * F::LN_10() / F::from_usize_lossy(shells - 1);
    let mut min_margin = F::infinity();
    let mut samples = 0;
    let mut u = vec![F::zero(); potential.dim()];
    for s in 0..shells {
        let radius = r0 * (step * F::from_usize_lossy(s)).exp();
        let grad_sq = witness.far.slope(radius).powi(2);
        for dir in &dirs {
            for (ui, &di) in u.iter_mut().zip(dir) {
                *ui = radius * di;
            }
            if distance(&u, potential.singularity()) <= potential.guard() {
                continue;
            }
            min_margin = min_margin.min(-potential.value(&u)? - grad_sq);
            samples += 1;
        }
    }
    let growth_ok = (1..shells).all(|s| {
        let a = r0 * (step * F::from_usize_lossy(s - 1)).exp();
        let b = r0 * (step * F::from_usize_lossy(s)).exp();
        witness.far.value(b).abs() > witness.far.value(a).abs()
    });
    Ok(MarginReport {
        min_margin,
        growth_ok,
        samples,
    })
}

pub fn check_h4<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    witness: &StrongForceWitness<F>,
    n_samples: usize,
) -> Result<MarginReport<F>> {
    let report = probe_h4(potential, witness, n_samples)?;
    if !report.passed() {
        return Err(Error::HypothesisViolation(format!(
            "far-field margin {} (growth ok: {})",
            report.min_margin, report.growth_ok
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignReport<F> {
    /// Largest sampled `W(u)` over `u` away from 0 and `q`.
    pub max_value: F,
    /// `W(0)`.
    pub value_at_origin: F,
    /// `|grad W(0)|`.
    pub gradient_at_origin: F,
}

/// Samples `W < 0` on shells around the origin out to `4 |q|`, avoiding
/// `q` itself, plus the values of `W` and its gradient at 0.
pub fn probe_sign<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    n_samples: usize,
) -> Result<SignReport<F>> {
    let d = potential.dim();
    let q = potential.singularity();
    let q_norm = norm(q);
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ 0x51);
    let dirs = unit_directions::<F>(d, n_samples.max(1), &mut rng);
    let mut max_value = F::neg_infinity();
    let mut u = vec![F::zero(); d];
    for s in 1..=40 {
        let radius = q_norm * F::lit(4.0) * F::from_usize_lossy(s) / F::lit(40.0);
        for dir in dirs.iter() {
            for (ui, &di) in u.iter_mut().zip(dir) {
                *ui = radius * di;
            }
            if distance(&u, q) < F::lit(1e-6) * q_norm {
                continue;
            }
            max_value = max_value.max(potential.value(&u)?);
        }
    }
    let origin = vec![F::zero(); d];
    let mut grad = vec![F::zero(); d];
    potential.gradient(&origin, &mut grad)?;
    Ok(SignReport {
        max_value,
        value_at_origin: potential.value(&origin)?,
        gradient_at_origin: norm(&grad),
    })
}

pub fn check_sign<F: Scalar, W: Potential<F> + ?Sized>(
    potential: &W,
    n_samples: usize,
) -> Result<SignReport<F>> {
    let report = probe_sign(potential, n_samples)?;
    if report.max_value >= F::zero() {
        return Err(Error::HypothesisViolation(format!(
            "W reaches {} >= 0 away from the origin",
            report.max_value
        )));
    }
    if report.value_at_origin != F::zero() || report.gradient_at_origin > F::lit(1e-12) {
        return Err(Error::HypothesisViolation(
            "W and its gradient must vanish at the origin".into(),
        ));
    }
    Ok(report)
}

/// Radial component of `grad W` along the direction of `q`, used when probing
/// monotonic descent of `W` toward the singularity.
pub fn radial_slope<F: Scalar, W: Potential<F> + ?Sized>(potential: &W, u: &[F]) -> Result<F> {
    let mut g = vec![F::zero(); potential.dim()];
    potential.gradient(u, &mut g)?;
    let q = potential.singularity();
    Ok(dot(&g, q) / norm(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn well(alpha: f64) -> PowerWell<f64> {
        PowerWell::standard(2, alpha).unwrap()
    }

    #[test]
    fn coefficient_values() {
        let a = CoefficientSpec::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(eval_a(&a, 0.0), 3.0);
        assert_relative_eq!(eval_a(&a, 0.25), 2.0, epsilon = 1e-15);
        assert_eq!(eval_a(&a, 7.25), eval_a(&a, 0.25));
        assert_eq!(a.a0(), 1.0);
        assert_eq!(a.a_inf(), 3.0);
    }

    #[test]
    fn coefficient_periodicity_on_random_times() {
        let a = CoefficientSpec::new(3.0, -1.5, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t: f64 = rng.gen_range(-50.0..50.0);
            let (x, y) = (a.eval(t), a.eval(t + 0.7));
            assert!((x - y).abs() <= 1e-12 * x.abs());
            assert!(x >= a.a0() - 1e-12 && x <= a.a_inf() + 1e-12);
        }
    }

    #[test]
    fn check_a_cases() {
        let r = check_a(&CoefficientSpec::new(2.0, 1.0, 1.0).unwrap(), 400).unwrap();
        assert_relative_eq!(r.min_a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.max_a, 3.0, epsilon = 1e-12);
        let r = check_a(&CoefficientSpec::new(2.0, 0.0, 1.0).unwrap(), 10).unwrap();
        assert_eq!((r.min_a, r.max_a), (2.0, 2.0));
        let bad = CoefficientSpec::new(1.0, 2.0, 1.0).unwrap();
        assert!(matches!(
            check_a(&bad, 100),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn power_well_values() {
        assert_eq!(well(2.0).value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(
            well(2.0).value(&[-2.0, 0.0]).unwrap(),
            -0.25,
            epsilon = 1e-15
        );
        assert_relative_eq!(well(3.0).value(&[1.0, 0.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(
            well(2.0).value(&[2.0, 0.0]),
            Err(Error::SingularityHit { .. })
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let w = well(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tested = 0;
        while tested < 100 {
            let u = [rng.gen_range(-4.0..6.0), rng.gen_range(-4.0..4.0)];
            if distance(&u, w.singularity()) < 0.2 {
                continue;
            }
            let mut g = [0.0; 2];
            w.gradient(&u, &mut g).unwrap();
            let step = 1e-5 * (1.0 + norm(&u));
            for k in 0..2 {
                let mut up = u;
                let mut dn = u;
                up[k] += step;
                dn[k] -= step;
                let fd = (w.value(&up).unwrap() - w.value(&dn).unwrap()) / (2.0 * step);
                let scale = norm(&g).max(1e-8);
                assert!(
                    (fd - g[k]).abs() / scale < 1e-6,
                    "u={u:?} k={k} fd={fd} g={}",
                    g[k]
                );
            }
            tested += 1;
        }
    }

    #[test]
    fn gradient_zero_at_origin_and_sign_toward_q() {
        let w = well(2.0);
        let mut g = [1.0; 2];
        w.gradient(&[0.0, 0.0], &mut g).unwrap();
        assert_eq!(g, [0.0, 0.0]);
        // W decreases monotonically along the segment from 0 to q.
        let mut prev = 0.0;
        for i in 1..100 {
            let s = 1.9 * i as f64 / 100.0;
            let u = [s, 0.0];
            let v = w.value(&u).unwrap();
            assert!(v < prev);
            assert!(radial_slope(&w, &u).unwrap() < 0.0);
            prev = v;
        }
    }

    #[test]
    fn h2_closed_form_eigenvalues() {
        for (alpha, dim, expected) in [(2.0f64, 3, -0.5f64), (3.0, 2, -0.25), (4.0, 2, -0.125)] {
            let w = PowerWell::standard(dim, alpha).unwrap();
            let r = check_h2(&w, 1e-4).unwrap();
            assert!((r.eigen_min - expected).abs() < 1e-4);
            assert!((r.eigen_max - expected).abs() < 1e-4);
            assert_relative_eq!(r.alpha0, -r.eigen_min);
        }
    }

    #[test]
    fn h2_rejects_positive_curvature() {
        let w = CustomPotential::new(
            vec![2.0, 0.0],
            |u: &[f64]| norm_sq(u),
            |u: &[f64], g: &mut [f64]| {
                for (gi, &ui) in g.iter_mut().zip(u) {
                    *gi = 2.0 * ui;
                }
            },
        );
        assert!(matches!(
            check_h2(&w, 1e-4),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn h3_example_passes_and_weak_force_fails() {
        let w = well(2.0);
        let witness = StrongForceWitness::for_power_well(2.0, 2.0);
        let r = check_h3(&w, &witness, 32).unwrap();
        assert!(r.min_margin > 0.0);

        let weak = CustomPotential::new(
            vec![2.0, 0.0],
            |u: &[f64]| -1.0 / distance(u, &[2.0, 0.0]),
            |u: &[f64], g: &mut [f64]| {
                let rho = distance(u, &[2.0, 0.0]);
                g[0] = (u[0] - 2.0) / rho.powi(3);
                g[1] = u[1] / rho.powi(3);
            },
        );
        assert!(matches!(
            check_h3(&weak, &witness, 32),
            Err(Error::HypothesisViolation(_))
        ));

        let empty = StrongForceWitness {
            radius: 0.0,
            ..witness
        };
        assert!(matches!(
            check_h3(&w, &empty, 8),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn h3_and_h4_pass_across_alpha() {
        for alpha in [2.0, 2.5, 3.0, 4.0] {
            let w = PowerWell::standard(3, alpha).unwrap();
            let witness = StrongForceWitness::for_power_well(alpha, 2.0);
            check_h3(&w, &witness, 16).unwrap();
            check_h4(&w, &witness, 16).unwrap();
        }
    }

    #[test]
    fn sign_check_on_example_family() {
        for alpha in [2.0, 3.0, 4.0] {
            let r = check_sign(&well(alpha), 64).unwrap();
            assert!(r.max_value < 0.0);
            assert_eq!(r.value_at_origin, 0.0);
        }
    }

    #[test]
    fn single_precision_instantiation() {
        let w = PowerWell::<f32>::standard(2, 2.0).unwrap();
        assert!((w.value(&[-2.0, 0.0]).unwrap() + 0.25).abs() < 1e-7);
        let r = check_h2(&w, 1e-2).unwrap();
        assert!((r.eigen_min + 0.5).abs() < 1e-3);
    }

    #[test]
    fn invalid_well_parameters() {
        assert!(PowerWell::<f64>::new(vec![2.0], 2.0).is_err());
        assert!(PowerWell::<f64>::new(vec![0.0, 0.0], 2.0).is_err());
        assert!(PowerWell::<f64>::new(vec![2.0, 0.0], 1.5).is_err());
        assert!(CoefficientSpec::<f64>::new(1.0, 0.0, 0.0).is_err());
    }
}
