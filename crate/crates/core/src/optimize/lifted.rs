//! Rank-one lifting of the phase-shift problem.
//!
//! With `v = [theta; 1]` and `Phi = v v^H`, every equivalent channel gain is
//! linear in `Phi`: `|H_{m,d} theta + h_{m,d}|^2 = Tr(Q_{m,d} Phi)` where
//! `Q_{m,d} = [H h]^H [H h]`. This module assembles the `Q` matrices and
//! evaluates the lifted rate, the tangent bound on the interference log, the
//! linearised SINR constraints, and the penalty majorant used by the
//! association solver.

use nalgebra::DMatrix;

use super::OptimizeError;
use crate::channel::{ChannelSet, PhaseShiftVector};
use crate::noma::{AssociationMatrix, DecodingOrder, RadioParams};
use crate::C64;

const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LiftedProblem {
    /// `q[m][d]`, Hermitian `(L+1) x (L+1)`.
    pub q: Vec<Vec<DMatrix<C64>>>,
    pub rp: RadioParams,
}

/// Builds `Q_{m,d}` for every UAV/GU pair of `cs`.
pub fn build_lifted(cs: &ChannelSet, rp: &RadioParams) -> LiftedProblem {
    let q = (0..cs.num_uavs())
        .map(|m| {
            (0..cs.num_gus())
                .map(|d| {
                    let mut row: Vec<C64> = cs.cascade[m][d].clone();
                    row.push(cs.direct[m][d]);
                    let r = DMatrix::from_row_slice(1, row.len(), &row);
                    r.adjoint() * r
                })
                .collect()
        })
        .collect();
    LiftedProblem { q, rp: *rp }
}

/// `Phi = [theta; 1][theta; 1]^H`.
pub fn lift(theta: &PhaseShiftVector) -> DMatrix<C64> {
    let mut v: Vec<C64> = theta.as_slice().to_vec();
    v.push(C64::new(1.0, 0.0));
    let col = DMatrix::from_column_slice(v.len(), 1, &v);
    &col * col.adjoint()
}

/// Checks that `phi` is Hermitian with unit diagonal and PSD within `1e-8`.
pub fn validate_phi(phi: &DMatrix<C64>) -> Result<(), OptimizeError> {
    if !phi.is_square() {
        return Err(OptimizeError::DimensionMismatch("Phi must be square".into()));
    }
    let n = phi.nrows();
    for i in 0..n {
        if (phi[(i, i)] - C64::new(1.0, 0.0)).norm() > PSD_TOL {
            return Err(OptimizeError::DimensionMismatch(format!("Phi[{i},{i}] = {} != 1", phi[(i, i)])));
        }
        for j in 0..n {
            if (phi[(i, j)] - phi[(j, i)].conj()).norm() > PSD_TOL {
                return Err(OptimizeError::DimensionMismatch("Phi is not Hermitian".into()));
            }
        }
    }
    let min_eig = phi
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL {
        return Err(OptimizeError::DimensionMismatch(format!("Phi has eigenvalue {min_eig} < 0")));
    }
    Ok(())
}

/// Tangent of `ln(x + sigma2)` at `x0`. Because the log is concave this is an
/// upper bound, tight at `x0`; subtracting it yields a lower bound on the rate.
pub fn log_tangent(x: f64, x0: f64, sigma2: f64) -> f64 {
    (x0 + sigma2).ln() + (x - x0) / (x0 + sigma2)
}

/// Linear majorant of `rho - rho^2` at `rho0`: `rho + rho0^2 - 2 rho rho0`.
pub fn rho_majorant(rho: f64, rho0: f64) -> f64 {
    rho + rho0 * rho0 - 2.0 * rho * rho0
}

impl LiftedProblem {
    pub fn num_uavs(&self) -> usize {
        self.q.len()
    }

    pub fn num_gus(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.q.first().and_then(|r| r.first()).map_or(0, |q| q.nrows())
    }

    fn check(&self, phi: &DMatrix<C64>, rho: &AssociationMatrix) -> Result<(), OptimizeError> {
        if phi.nrows() != self.dim() || phi.ncols() != self.dim() {
            return Err(OptimizeError::DimensionMismatch(format!(
                "Phi is {}x{}, expected {}x{}",
                phi.nrows(),
                phi.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        if rho.num_uavs() != self.num_uavs() || rho.num_gus() != self.num_gus() {
            return Err(OptimizeError::DimensionMismatch("association shape".into()));
        }
        Ok(())
    }

    /// `Re Tr(Q_{m,d} Phi)`.
    pub fn trace(&self, m: usize, d: usize, phi: &DMatrix<C64>) -> f64 {
        let q = &self.q[m][d];
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                acc += q[(i, j)] * phi[(j, i)];
            }
        }
        acc.re
    }

    /// Inter-UAV interference level `l_m` at UAV `m` (without noise).
    pub fn interference(&self, m: usize, phi: &DMatrix<C64>, rho: &AssociationMatrix) -> f64 {
        let mut total = 0.0;
        for mp in 0..self.num_uavs() {
            if mp == m {
                continue;
            }
            for d in 0..self.num_gus() {
                let r = rho.get(mp, d);
                if r != 0.0 {
                    total += r * self.rp.p_g * self.trace(m, d, phi);
                }
            }
        }
        total
    }

    /// Own-signal level `sum_{d in K^m} rho_{m,d} p_G Tr(Q_{m,d} Phi)`.
    pub fn signal(&self, m: usize, phi: &DMatrix<C64>, rho: &AssociationMatrix) -> f64 {
        (0..self.num_gus())
            .filter(|&d| rho.get(m, d) != 0.0)
            .map(|d| rho.get(m, d) * self.rp.p_g * self.trace(m, d, phi))
            .sum()
    }

    /// Lifted rate of UAV `m`: `ln(S + I + sigma^2) - ln(I + sigma^2)`.
    pub fn rate(&self, m: usize, phi: &DMatrix<C64>, rho: &AssociationMatrix) -> Result<f64, OptimizeError> {
        self.check(phi, rho)?;
        let inter = self.interference(m, phi, rho);
        let own = self.signal(m, phi, rho);
        Ok((own + inter + self.rp.sigma2).ln() - (inter + self.rp.sigma2).ln())
    }

    pub fn objective(&self, phi: &DMatrix<C64>, rho: &AssociationMatrix) -> Result<f64, OptimizeError> {
        (0..self.num_uavs()).map(|m| self.rate(m, phi, rho)).sum()
    }

    /// Lower bound on the lifted rate with the interference log replaced by
    /// its tangent at `anchor`; equal to [`Self::rate`] when the interference
    /// equals the anchor.
    pub fn rate_lower_bound(
        &self,
        m: usize,
        phi: &DMatrix<C64>,
        rho: &AssociationMatrix,
        anchor: f64,
    ) -> Result<f64, OptimizeError> {
        self.check(phi, rho)?;
        let inter = self.interference(m, phi, rho);
        let own = self.signal(m, phi, rho);
        Ok((own + inter + self.rp.sigma2).ln() - log_tangent(inter, anchor, self.rp.sigma2))
    }

    /// Linearised SINR constraints: for each associated pair, the residual
    /// `rho p Tr(Q Phi) - gamma (intra + inter + sigma^2)`; non-negative means
    /// the threshold holds.
    pub fn sinr_residuals(
        &self,
        phi: &DMatrix<C64>,
        rho: &AssociationMatrix,
        order: &DecodingOrder,
    ) -> Result<Vec<(usize, usize, f64)>, OptimizeError> {
        self.check(phi, rho)?;
        let mut out = Vec::new();
        for m in 0..self.num_uavs() {
            let inter = self.interference(m, phi, rho);
            for &k in order.order(m) {
                let intra: f64 = order
                    .later(m, k)
                    .iter()
                    .map(|&d| rho.get(m, d) * self.rp.p_g * self.trace(m, d, phi))
                    .sum();
                let sig = rho.get(m, k) * self.rp.p_g * self.trace(m, k, phi);
                out.push((m, k, sig - self.rp.gamma * (intra + inter + self.rp.sigma2)));
            }
        }
        Ok(out)
    }
}
