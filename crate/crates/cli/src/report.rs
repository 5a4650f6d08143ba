//! Serializable report records. Timing lives only under `timing`.

use std::collections::BTreeMap;

use homoclinic::multiplicity::{Outcome, ScheduleRecord};
use homoclinic::solver::{ConstrainedMinimum, RenormalizationEvent, Solution};
use homoclinic::{ActionFunctional, HomoclinicCandidate, Potential};
use serde::Serialize;

use crate::config::RunConfig;

/// Wall-clock seconds per stage.
pub type Timing = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSummary {
    pub action: f64,
    pub grad_norm: f64,
    pub clearance: f64,
    pub sup_residual: f64,
    pub defect_residual: f64,
    pub tail_sup_u: f64,
    pub tail_sup_du: f64,
    pub crossing_k: Option<f64>,
    pub peak_time: f64,
    pub sup_norm: f64,
    pub h1_norm: f64,
    pub iterations: usize,
}

impl CandidateSummary {
    pub fn new<W: Potential<f64>>(
        functional: &ActionFunctional<'_, f64, W>,
        c: &HomoclinicCandidate<f64>,
    ) -> Self {
        let u = &c.trajectory;
        Self {
            action: c.action,
            grad_norm: c.grad_norm,
            clearance: c.clearance,
            sup_residual: c.residual.sup_residual,
            defect_residual: functional.defect_residual(u).unwrap_or(f64::NAN),
            tail_sup_u: c.residual.tail_sup_u,
            tail_sup_du: c.residual.tail_sup_du,
            crossing_k: c.crossing.map(|(_, k)| k),
            peak_time: u.peak_index().map_or(f64::NAN, |i| u.grid().time(i)),
            sup_norm: u.sup_norm(),
            h1_norm: u.h1_norm(),
            iterations: c.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedSummary {
    pub d_h: f64,
    pub k: f64,
    pub k_min: f64,
    pub node_time: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_active: bool,
}

impl ConstrainedSummary {
    pub fn new(c: &ConstrainedMinimum<f64>) -> Self {
        Self {
            d_h: c.value,
            k: c.constraint.k,
            k_min: c.constraint.k_min,
            node_time: c.trajectory.grid().time(c.constraint.node),
            grad_norm: c.grad_norm,
            iterations: c.iterations,
            converged: c.converged,
            constraint_active: c.constraint_active,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenormalizationRow {
    pub iteration: usize,
    pub shift: i64,
    pub action_before: f64,
    pub action_after: f64,
}

impl From<&RenormalizationEvent<f64>> for RenormalizationRow {
    fn from(e: &RenormalizationEvent<f64>) -> Self {
        Self {
            iteration: e.iteration,
            shift: e.shift,
            action_before: e.action_before,
            action_after: e.action_after,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttemptRow {
    pub k0: f64,
    pub orientation: i8,
    pub outcome: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub constrained: ConstrainedSummary,
    pub candidate: CandidateSummary,
    pub left_class_e: bool,
    pub descent_iterations: usize,
    pub renormalizations: Vec<RenormalizationRow>,
    pub attempts: Vec<AttemptRow>,
    pub sobolev_windows: usize,
    pub sobolev_failures: usize,
}

impl SolveSummary {
    pub fn new<W: Potential<f64>>(
        functional: &ActionFunctional<'_, f64, W>,
        s: &Solution<f64>,
        windows: usize,
        seed: u64,
    ) -> Self {
        let sweep = s.candidate.trajectory.sobolev_sweep(windows, seed).ok();
        Self {
            constrained: ConstrainedSummary::new(&s.constrained),
            candidate: CandidateSummary::new(functional, &s.candidate),
            left_class_e: s.left_class_e,
            descent_iterations: s.candidate.iterations,
            renormalizations: s.renormalizations.iter().map(Into::into).collect(),
            attempts: s
                .attempts
                .iter()
                .map(|a| AttemptRow {
                    k0: a.k0,
                    orientation: a.orientation,
                    outcome: a.outcome.clone(),
                })
                .collect(),
            sobolev_windows: sweep.map_or(0, |s| s.checked),
            sobolev_failures: sweep.map_or(windows, |s| s.failures),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRow {
    pub index: usize,
    pub item: String,
    pub outcome: String,
    pub entry: Option<usize>,
    pub nearest: Option<usize>,
    pub distance: Option<f64>,
    pub bumps: Option<usize>,
    pub detail: Option<String>,
}

impl From<&ScheduleRecord<f64>> for ScheduleRow {
    fn from(r: &ScheduleRecord<f64>) -> Self {
        let mut row = Self {
            index: r.item.index,
            item: r.item.to_string(),
            outcome: String::new(),
            entry: None,
            nearest: None,
            distance: None,
            bumps: None,
            detail: None,
        };
        match &r.outcome {
            Outcome::Inserted { entry, bumps, .. } => {
                row.outcome = "inserted".into();
                row.entry = Some(*entry);
                row.bumps = Some(*bumps);
            }
            Outcome::Duplicate {
                nearest,
                distance,
                bumps,
            } => {
                row.outcome = "duplicate".into();
                row.nearest = Some(*nearest);
                row.distance = Some(*distance);
                row.bumps = Some(*bumps);
            }
            Outcome::Failed(m) => {
                row.outcome = "failed".into();
                row.detail = Some(m.clone());
            }
            Outcome::Skipped(m) => {
                row.outcome = "skipped".into();
                row.detail = Some(m.clone());
            }
        }
        row
    }
}

/// One line of the library manifest.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub action: f64,
    pub grad_norm: f64,
    pub clearance: f64,
    pub trajectory_csv_path: String,
    pub seed: u64,
    pub schedule_item: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BumpRow {
    pub window: [f64; 2],
    pub matched: Option<usize>,
    pub shift: i64,
    pub distance: Option<f64>,
    pub h1_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseSummary {
    pub action: f64,
    pub grad_norm: f64,
    pub clearance: f64,
    pub sup_residual: f64,
    pub tail_sup_u: f64,
    pub tail_sup_du: f64,
    pub library_size: usize,
    pub bumps: Vec<BumpRow>,
    pub residual_norm: f64,
    pub tail_mass: f64,
    pub sobolev_windows: usize,
    pub sobolev_failures: usize,
    pub sobolev_worst_slack: f64,
}

/// Top-level report document.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub config: RunConfig,
    pub hypotheses: Vec<CheckRow>,
    pub result: Option<T>,
    pub outputs: Vec<String>,
    pub timing: Timing,
}
