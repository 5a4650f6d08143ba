//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use homoclinic::{CoefficientSpec, Grid, HamiltonianSystem, PowerWell, SearchConfig, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    /// Only `"power"`: `W(u) = -|u|^2 |u - q|^-alpha`.
    pub form: String,
    pub dimension: usize,
    /// Defaults to `(2, 0, ..., 0)`.
    pub q: Option<Vec<f64>>,
    pub alpha: f64,
    pub a_base: f64,
    pub a_amp: f64,
    pub period: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            form: "power".into(),
            dimension: 2,
            q: None,
            alpha: 2.0,
            a_base: 2.5,
            a_amp: 1.0,
            period: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Period of the grid; defaults to the coefficient period.
    #[serde(rename = "T")]
    pub period: Option<f64>,
    /// Nodes per period.
    pub m: usize,
    /// Half-length in periods.
    #[serde(rename = "M")]
    pub half_periods: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            period: None,
            m: 40,
            half_periods: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub eps_k: f64,
    pub renormalize_every: usize,
    pub bump_width: f64,
    pub k0: f64,
    pub center: f64,
    pub orientation: i8,
    pub transverse: f64,
    pub precondition: bool,
    pub clamp_window: usize,
    pub zero_threshold: f64,
    pub tail_tol_u: Option<f64>,
    pub tail_tol_du: Option<f64>,
    pub max_restarts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::<f64>::default();
        Self {
            grad_tol: d.grad_tol,
            max_iters: d.max_iters,
            armijo_c1: d.armijo_c1,
            backtrack: d.backtrack,
            max_backtracks: d.max_backtracks,
            eps_k: d.eps_k,
            renormalize_every: d.renormalize_every,
            bump_width: d.bump_width,
            k0: d.k0,
            center: d.center,
            orientation: d.orientation,
            transverse: d.transverse,
            precondition: d.precondition,
            clamp_window: d.clamp_window,
            zero_threshold: d.zero_threshold,
            tail_tol_u: d.tail_tol_u,
            tail_tol_du: d.tail_tol_du,
            max_restarts: d.max_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub targets: usize,
    pub eps_distinct: f64,
    pub k0s: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub orientations: Vec<i8>,
    pub multibump: bool,
    pub support_threshold: f64,
    pub delta_bump: f64,
    pub delta_gap: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchConfig::<f64>::default();
        Self {
            targets: d.targets,
            eps_distinct: d.eps_distinct,
            k0s: d.k0s,
            centers: d.centers,
            widths: d.widths,
            orientations: d.orientations,
            multibump: d.multibump,
            support_threshold: d.support_threshold,
            delta_bump: d.delta_bump,
            delta_gap: d.delta_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    /// Fine level; defaults to `2 m`.
    pub fine_m: Option<usize>,
    /// Largest accepted relative action change between levels.
    pub max_action_drift: f64,
    /// Accepted band for the residual ratio at `fine_m = 2 m`; scaled by
    /// `(fine_m / m)^2 / 4` otherwise.
    pub ratio_band: [f64; 2],
}

impl Default for RefineSection {
    fn default() -> Self {
        Self {
            fine_m: None,
            max_action_drift: 0.05,
            ratio_band: [3.5, 4.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    /// Random Sobolev window anchors per trajectory.
    pub sobolev_windows: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            sobolev_windows: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    pub solver: SolverSection,
    pub search: SearchSection,
    pub refine: RefineSection,
    pub diagnose: DiagnoseSection,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    /// Parses a JSON document and fills derived defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        // serde_json messages end with "at line L column C".
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fills `q` and the grid period, and rejects inconsistent fields.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let p = &mut self.potential;
        if p.form != "power" {
            return Err(CliError::Config(format!(
                "potential.form: unsupported form `{}` (expected \"power\")",
                p.form
            )));
        }
        if p.dimension < 2 {
            return Err(CliError::Config(
                "potential.dimension: must be at least 2".into(),
            ));
        }
        let q = p.q.get_or_insert_with(|| {
            let mut q = vec![0.0; p.dimension];
            q[0] = 2.0;
            q
        });
        if q.len() != p.dimension {
            return Err(CliError::Config(format!(
                "potential.q: has {} components but dimension is {}",
                q.len(),
                p.dimension
            )));
        }
        let period = *self.grid.period.get_or_insert(p.period);
        if period != p.period {
            return Err(CliError::Config(format!(
                "grid.T: {period} differs from potential.period {}",
                p.period
            )));
        }
        if let Some(fine) = self.refine.fine_m {
            if fine == self.grid.m {
                return Err(CliError::Config(
                    "refine.fine_m: both refinement levels use the same m".into(),
                ));
            }
        }
        let [lo, hi] = self.refine.ratio_band;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(CliError::Config(
                "refine.ratio_band: lower bound above upper".into(),
            ));
        }
        Ok(())
    }

    /// The system described by the potential block. A coefficient that is
    /// not positive is reported by the hypothesis checks, not here.
    pub fn system(&self) -> Result<HamiltonianSystem<f64, PowerWell<f64>>, CliError> {
        let p = &self.potential;
        let q = p.q.clone().unwrap_or_default();
        let well =
            PowerWell::new(q, p.alpha).map_err(|e| CliError::Config(format!("potential: {e}")))?;
        let coefficient = CoefficientSpec::new(p.a_base, p.a_amp, p.period)
            .map_err(|e| CliError::Config(format!("potential: {e}")))?;
        Ok(HamiltonianSystem::new(coefficient, well))
    }

    pub fn grid_with(&self, m: usize) -> Result<Grid<f64>, CliError> {
        Grid::new(
            self.grid.period.unwrap_or(self.potential.period),
            m,
            self.grid.half_periods,
        )
        .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn grid(&self) -> Result<Grid<f64>, CliError> {
        self.grid_with(self.grid.m)
    }

    pub fn solver(&self) -> Result<SolverConfig<f64>, CliError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            grad_tol: s.grad_tol,
            max_iters: s.max_iters,
            armijo_c1: s.armijo_c1,
            backtrack: s.backtrack,
            max_backtracks: s.max_backtracks,
            eps_k: s.eps_k,
            renormalize_every: s.renormalize_every,
            bump_width: s.bump_width,
            k0: s.k0,
            center: s.center,
            orientation: s.orientation,
            transverse: s.transverse,
            precondition: s.precondition,
            clamp_window: s.clamp_window,
            zero_threshold: s.zero_threshold,
            tail_tol_u: s.tail_tol_u,
            tail_tol_du: s.tail_tol_du,
            max_restarts: s.max_restarts,
            seed: self.seed,
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(cfg)
    }

    pub fn search(&self) -> Result<SearchConfig<f64>, CliError> {
        let s = &self.search;
        let cfg = SearchConfig {
            targets: s.targets,
            eps_distinct: s.eps_distinct,
            k0s: s.k0s.clone(),
            centers: s.centers.clone(),
            widths: s.widths.clone(),
            orientations: s.orientations.clone(),
            multibump: s.multibump,
            support_threshold: s.support_threshold,
            delta_bump: s.delta_bump,
            delta_gap: s.delta_gap,
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("search: {e}")))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg.potential.q, Some(vec![2.0, 0.0]));
        assert_eq!(cfg.grid.period, Some(1.0));
        assert_eq!(cfg.grid().unwrap().len(), 641);
        assert_eq!(cfg.solver().unwrap(), SolverConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse(r#"{"potential": {"dimension": 3}, "seed": 7}"#).unwrap();
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&echoed).unwrap(), cfg);
        assert_eq!(cfg.potential.q, Some(vec![2.0, 0.0, 0.0]));
    }

    #[test]
    fn errors_name_line_and_field() {
        let err = RunConfig::parse("{\n  \"grid\": {\"m\": 40, \"bogus\": 1}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("bogus"), "{msg}");
        let err = RunConfig::parse(r#"{"grid": {"m": 40}, "refine": {"fine_m": 40}}"#).unwrap_err();
        assert!(err.to_string().contains("refine.fine_m"));
        assert!(RunConfig::parse(r#"{"potential": {"q": [1, 2, 3]}}"#).is_err());
        assert!(RunConfig::parse(r#"{"potential": {"form": "custom"}}"#).is_err());
    }
}
