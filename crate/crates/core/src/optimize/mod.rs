//! Per-slot optimization of the reflecting surface's phase shifts and the GU
//! association, given the platform positions chosen by the learning agents.
//!
//! The two blocks are solved alternately ([`alternate_optimize`]) or with the
//! cheap two-step approximation ([`two_step`]). Objectives are the per-UAV
//! NOMA sum rates in the telescoped form
//! `sum_m ln((I'_m + sigma^2 + S_m) / (I'_m + sigma^2))`, which does not depend
//! on the SIC decoding order.

mod alternating;
mod association;
pub mod lifted;
mod phases;

pub use alternating::{alternate_optimize, two_step, AoConfig, AoIteration, AoMode, AoResult};
pub use association::{
    associate, association_oracle, solve_association, AssocStrategy, AssociationOutcome, PenaltySchedule,
    PenaltyState,
};
pub use lifted::{build_lifted, LiftedProblem};
pub use phases::{phase_objective, phase_oracle, solve_phases, PhaseConfig, PhaseStrategy};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::noma::{AssociationMatrix, RadioParams};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("exhaustive search too large: {0}")]
    OracleTooLarge(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Sum over UAVs of the telescoped NOMA rate for a (possibly relaxed)
/// association and fixed channel gains.
pub fn rate_objective(gains: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams) -> f64 {
    rate_objective_rows(gains, assoc.rows(), rp)
}

pub(crate) fn rate_objective_rows(gains: &[Vec<f64>], rho: &[Vec<f64>], rp: &RadioParams) -> f64 {
    let num_uavs = rho.len();
    let mut total = 0.0;
    for m in 0..num_uavs {
        let mut own = 0.0;
        let mut other = 0.0;
        for (mp, row) in rho.iter().enumerate() {
            let s: f64 = row.iter().zip(&gains[m]).map(|(r, g)| r * rp.p_g * g).sum();
            if mp == m {
                own += s;
            } else {
                other += s;
            }
        }
        let base = other + rp.sigma2;
        total += ((base + own) / base).ln();
    }
    total
}
