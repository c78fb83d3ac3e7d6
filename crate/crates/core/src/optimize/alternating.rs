//! Alternating optimization of phases and association, and the two-step
//! shortcut used during training.

use serde::{Deserialize, Serialize};

use super::association::eligibility;
use super::{associate, rate_objective, solve_phases, AssocStrategy, OptimizeError, PenaltySchedule, PhaseConfig, PhaseStrategy};
use crate::channel::{ChannelSet, PhaseShiftVector};
use crate::noma::{repair_feasibility, AssociationMatrix, RadioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoMode {
    /// Alternate until the objective settles.
    Full,
    /// Associate under optimistic gains, solve phases once, repair.
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoConfig {
    pub mode: AoMode,
    pub phases: PhaseConfig,
    /// Phase strategy for the two-step shortcut.
    pub two_step_phases: PhaseStrategy,
    pub association: AssocStrategy,
    pub penalty: PenaltySchedule,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            mode: AoMode::Full,
            phases: PhaseConfig::default(),
            two_step_phases: PhaseStrategy::Heuristic,
            association: AssocStrategy::Sca,
            penalty: PenaltySchedule::default(),
            max_iters: 20,
            rel_tol: 1e-4,
        }
    }
}

/// One AO iteration: the objective of that iteration's iterate and the best
/// objective seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoIteration {
    pub iteration: usize,
    pub objective: f64,
    pub incumbent: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub theta: PhaseShiftVector,
    pub assoc: AssociationMatrix,
    pub objective: f64,
    pub history: Vec<AoIteration>,
}

impl AoResult {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |h| h.iteration)
    }
}

/// Associates under optimistic (perfectly co-phased) gains, then solves the
/// phases once and drops GUs that no longer decode.
pub fn two_step(
    cs: &ChannelSet,
    rp: &RadioParams,
    backlogs: Option<&[f64]>,
    cfg: &AoConfig,
) -> Result<AoResult, OptimizeError> {
    let eligible = eligibility(cs.num_gus(), backlogs)?;
    let strength = cs.optimistic_gains();
    let first = associate(&strength, &strength, rp, &eligible, cfg.association, &cfg.penalty)?;
    let theta = if cs.has_no_reflection() {
        PhaseShiftVector::ones(cs.elements())
    } else {
        let pc = PhaseConfig {
            strategy: cfg.two_step_phases,
            ..cfg.phases
        };
        solve_phases(cs, &first.assoc, rp, &pc)?
    };
    let gains = cs.gains(&theta);
    let assoc = repair_feasibility(&gains, &strength, &first.assoc, rp);
    let objective = rate_objective(&gains, &assoc, rp);
    Ok(AoResult {
        theta,
        assoc,
        objective,
        history: vec![AoIteration {
            iteration: 0,
            objective,
            incumbent: objective,
            violation: first.violation,
        }],
    })
}

/// Runs the configured mode. In full mode the two-step solution seeds the
/// incumbent, so the result is never worse than [`two_step`]; each later
/// iteration solves phases for the incumbent association, then re-associates.
/// Iteration always resumes from the incumbent, and stops once the incumbent
/// improves by less than `rel_tol` (relative) or after `max_iters`.
pub fn alternate_optimize(
    cs: &ChannelSet,
    rp: &RadioParams,
    backlogs: Option<&[f64]>,
    cfg: &AoConfig,
) -> Result<AoResult, OptimizeError> {
    let mut best = two_step(cs, rp, backlogs, cfg)?;
    if cfg.mode == AoMode::TwoStep {
        return Ok(best);
    }
    let eligible = eligibility(cs.num_gus(), backlogs)?;
    let strength = cs.optimistic_gains();
    let no_reflection = cs.has_no_reflection();
    let mut assoc = best.assoc.clone();
    for iteration in 1..=cfg.max_iters {
        let previous = best.objective;
        let theta = if no_reflection {
            PhaseShiftVector::ones(cs.elements())
        } else {
            solve_phases(cs, &assoc, rp, &cfg.phases)?
        };
        let gains = cs.gains(&theta);
        let out = associate(&gains, &strength, rp, &eligible, cfg.association, &cfg.penalty)?;
        // keep the phase-only step if re-association lost ground
        let kept = repair_feasibility(&gains, &strength, &assoc, rp);
        let held = rate_objective(&gains, &kept, rp);
        let (next, objective) = if held > out.objective {
            (kept, held)
        } else {
            (out.assoc, out.objective)
        };
        if objective > best.objective {
            best.theta = theta;
            best.assoc = next;
            best.objective = objective;
        }
        best.history.push(AoIteration {
            iteration,
            objective,
            incumbent: best.objective,
            violation: out.violation,
        });
        let change = (best.objective - previous) / previous.abs().max(f64::MIN_POSITIVE);
        if change < cfg.rel_tol || no_reflection {
            break;
        }
        assoc = best.assoc.clone();
    }
    Ok(best)
}
