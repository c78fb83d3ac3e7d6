//! GU association for fixed phase shifts: penalized successive convex
//! approximation over the relaxed association, and an exhaustive oracle.

use serde::{Deserialize, Serialize};

use super::{lifted::rho_majorant, rate_objective, rate_objective_rows, OptimizeError};
use crate::channel::{ChannelSet, PhaseShiftVector};
use crate::noma::{is_feasible, repair_feasibility, AssociationMatrix, RadioParams};

const ORACLE_MAX_GUS: usize = 10;
const ORACLE_MAX_UAVS: usize = 3;
const BISECTION_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocStrategy {
    Sca,
    Oracle,
}

/// Penalty coefficient schedule and inner-solver limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltySchedule {
    pub kappa_start: f64,
    pub kappa_factor: f64,
    pub kappa_max: f64,
    /// Stop tightening once `sum(rho - rho^2)` drops below this.
    pub violation_tol: f64,
    pub max_sca_iters: usize,
    pub max_fw_iters: usize,
    /// Single-GU moves after rounding and repair, kept only if they stay
    /// feasible and raise the objective.
    pub polish: bool,
    /// Also start the relaxation from "every GU on UAV m" for each m.
    pub vertex_starts: bool,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            kappa_start: 1.0,
            kappa_factor: 10.0,
            kappa_max: 1e6,
            violation_tol: 1e-6,
            max_sca_iters: 30,
            max_fw_iters: 200,
            polish: true,
            vertex_starts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyState {
    pub kappa: f64,
    /// Linearised binary-violation slack at the final anchor.
    pub lambda: f64,
    pub rho_anchor: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationOutcome {
    pub assoc: AssociationMatrix,
    pub objective: f64,
    /// `sum(rho - rho^2)` of the relaxed solution before rounding; zero for
    /// the oracle.
    pub violation: f64,
    pub penalty: Option<PenaltyState>,
}

/// Association for the equivalent channels under `theta`. GUs with an empty
/// buffer (per `backlogs`) are never associated.
pub fn solve_association(
    cs: &ChannelSet,
    theta: &PhaseShiftVector,
    rp: &RadioParams,
    backlogs: Option<&[f64]>,
    strategy: AssocStrategy,
    schedule: &PenaltySchedule,
) -> Result<AssociationOutcome, OptimizeError> {
    if theta.len() != cs.elements() {
        return Err(OptimizeError::DimensionMismatch(format!(
            "theta has {} entries, surface has {}",
            theta.len(),
            cs.elements()
        )));
    }
    let eligible = eligibility(cs.num_gus(), backlogs)?;
    associate(&cs.gains(theta), &cs.optimistic_gains(), rp, &eligible, strategy, schedule)
}

pub(crate) fn eligibility(num_gus: usize, backlogs: Option<&[f64]>) -> Result<Vec<bool>, OptimizeError> {
    match backlogs {
        None => Ok(vec![true; num_gus]),
        Some(b) if b.len() == num_gus => Ok(b.iter().map(|&x| x > 0.0).collect()),
        Some(b) => Err(OptimizeError::DimensionMismatch(format!("{} backlogs for {num_gus} GUs", b.len()))),
    }
}

/// Association from explicit gain matrices. `gains` drive the objective and
/// SINRs; `strength` fixes the decoding order.
pub fn associate(
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    rp: &RadioParams,
    eligible: &[bool],
    strategy: AssocStrategy,
    schedule: &PenaltySchedule,
) -> Result<AssociationOutcome, OptimizeError> {
    let num_uavs = gains.len();
    let num_gus = eligible.len();
    if gains.iter().chain(strength).any(|r| r.len() != num_gus) || strength.len() != num_uavs {
        return Err(OptimizeError::DimensionMismatch("gain matrices do not match the GU count".into()));
    }
    match strategy {
        AssocStrategy::Oracle => {
            let assoc = association_oracle(gains, strength, rp, eligible)?;
            Ok(AssociationOutcome {
                objective: rate_objective(gains, &assoc, rp),
                assoc,
                violation: 0.0,
                penalty: None,
            })
        }
        AssocStrategy::Sca => Ok(sca(gains, strength, rp, eligible, schedule)),
    }
}

/// Relaxed problem in noise-normalised units.
struct Relaxed<'a> {
    snr: Vec<Vec<f64>>,
    eligible: &'a [bool],
}

impl Relaxed<'_> {
    fn totals(&self, rho: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let m_count = self.snr.len();
        let load: Vec<f64> = (0..self.eligible.len()).map(|d| rho.iter().map(|r| r[d]).sum()).collect();
        let mut total = vec![0.0; m_count];
        let mut inter = vec![0.0; m_count];
        for m in 0..m_count {
            let t: f64 = load.iter().zip(&self.snr[m]).map(|(u, s)| u * s).sum();
            let own: f64 = rho[m].iter().zip(&self.snr[m]).map(|(r, s)| r * s).sum();
            total[m] = t;
            inter[m] = t - own;
        }
        (total, inter)
    }

    fn gradient(&self, rho: &[Vec<f64>], anchor: &[Vec<f64>], anchor_inter: &[f64], kappa: f64) -> Vec<Vec<f64>> {
        let (total, _) = self.totals(rho);
        let m_count = self.snr.len();
        let pos: Vec<f64> = (0..self.eligible.len())
            .map(|d| (0..m_count).map(|m| self.snr[m][d] / (1.0 + total[m])).sum())
            .collect();
        let neg_all: Vec<f64> = (0..self.eligible.len())
            .map(|d| (0..m_count).map(|m| self.snr[m][d] / (1.0 + anchor_inter[m])).sum())
            .collect();
        (0..m_count)
            .map(|mp| {
                (0..self.eligible.len())
                    .map(|d| {
                        let own_neg = self.snr[mp][d] / (1.0 + anchor_inter[mp]);
                        pos[d] - (neg_all[d] - own_neg) - kappa * (1.0 - 2.0 * anchor[mp][d])
                    })
                    .collect()
            })
            .collect()
    }

    /// Derivative of the surrogate along `delta` at step `t`.
    fn directional(
        &self,
        rho: &[Vec<f64>],
        delta: &[Vec<f64>],
        anchor: &[Vec<f64>],
        anchor_inter: &[f64],
        kappa: f64,
    ) -> impl Fn(f64) -> f64 {
        let (total, _) = self.totals(rho);
        let (d_total, d_inter) = self.totals(delta);
        let penalty: f64 = delta
            .iter()
            .zip(anchor)
            .flat_map(|(dr, ar)| dr.iter().zip(ar).map(|(d, a)| d * (1.0 - 2.0 * a)))
            .sum();
        let lin: f64 = d_inter.iter().zip(anchor_inter).map(|(di, ai)| di / (1.0 + ai)).sum();
        move |t: f64| {
            total
                .iter()
                .zip(&d_total)
                .map(|(tt, dt)| dt / (1.0 + tt + t * dt))
                .sum::<f64>()
                - lin
                - kappa * penalty
        }
    }

    /// Conditional-gradient ascent of the surrogate anchored at `anchor`.
    fn frank_wolfe(&self, start: &[Vec<f64>], anchor: &[Vec<f64>], kappa: f64, max_iters: usize) -> Vec<Vec<f64>> {
        let (_, anchor_inter) = self.totals(anchor);
        let m_count = self.snr.len();
        let mut rho = start.to_vec();
        for _ in 0..max_iters {
            let grad = self.gradient(&rho, anchor, &anchor_inter, kappa);
            // linear oracle: per GU, the vertex of {sum_m rho <= 1} with largest gradient
            let mut delta = vec![vec![0.0; self.eligible.len()]; m_count];
            let mut gap = 0.0;
            for (d, &ok) in self.eligible.iter().enumerate() {
                let mut pick = None;
                if ok {
                    let mut best = 0.0;
                    for (m, g) in grad.iter().enumerate() {
                        if g[d] > best {
                            best = g[d];
                            pick = Some(m);
                        }
                    }
                }
                for m in 0..m_count {
                    let target = if pick == Some(m) { 1.0 } else { 0.0 };
                    delta[m][d] = target - rho[m][d];
                    gap += grad[m][d] * delta[m][d];
                }
            }
            if gap <= 1e-10 {
                break;
            }
            let deriv = self.directional(&rho, &delta, anchor, &anchor_inter, kappa);
            let step = if deriv(1.0) >= 0.0 {
                1.0
            } else {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if deriv(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            for (r, dr) in rho.iter_mut().zip(&delta) {
                for (x, dx) in r.iter_mut().zip(dr) {
                    *x = (*x + step * dx).clamp(0.0, 1.0);
                }
            }
        }
        rho
    }
}

fn binary_violation(rho: &[Vec<f64>]) -> f64 {
    rho.iter().flatten().map(|r| r - r * r).sum()
}

fn sca(
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    rp: &RadioParams,
    eligible: &[bool],
    schedule: &PenaltySchedule,
) -> AssociationOutcome {
    let num_uavs = gains.len();
    let relaxed = Relaxed {
        snr: gains
            .iter()
            .map(|row| row.iter().map(|g| rp.p_g * g / rp.sigma2).collect())
            .collect(),
        eligible,
    };
    let fill = |value: &dyn Fn(usize) -> f64| -> Vec<Vec<f64>> {
        (0..num_uavs)
            .map(|m| eligible.iter().map(|&e| if e { value(m) } else { 0.0 }).collect())
            .collect()
    };
    let uniform = 1.0 / (num_uavs as f64 + 1.0);
    let mut starts = vec![fill(&|_| uniform)];
    if schedule.vertex_starts {
        for target in 0..num_uavs {
            starts.push(fill(&|m| if m == target { 1.0 } else { 0.0 }));
        }
    }
    let mut best: Option<AssociationOutcome> = None;
    for start in starts {
        let out = sca_from(&relaxed, start, gains, strength, rp, schedule);
        if best.as_ref().is_none_or(|b| out.objective > b.objective) {
            best = Some(out);
        }
    }
    best.expect("at least one start")
}

fn sca_from(
    relaxed: &Relaxed<'_>,
    mut rho: Vec<Vec<f64>>,
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    rp: &RadioParams,
    schedule: &PenaltySchedule,
) -> AssociationOutcome {
    let num_uavs = gains.len();
    let eligible = relaxed.eligible;
    let mut kappa = schedule.kappa_start;
    let mut anchor = rho.clone();
    loop {
        for _ in 0..schedule.max_sca_iters {
            anchor = rho.clone();
            rho = relaxed.frank_wolfe(&rho, &anchor, kappa, schedule.max_fw_iters);
            let moved = rho
                .iter()
                .flatten()
                .zip(anchor.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved < 1e-9 {
                break;
            }
        }
        if binary_violation(&rho) < schedule.violation_tol || kappa >= schedule.kappa_max {
            break;
        }
        kappa = (kappa * schedule.kappa_factor).min(schedule.kappa_max);
    }
    let violation = binary_violation(&rho);
    let lambda = rho
        .iter()
        .flatten()
        .zip(anchor.iter().flatten())
        .map(|(r, a)| rho_majorant(*r, *a))
        .sum::<f64>()
        .max(0.0);

    let mut serving = vec![None; eligible.len()];
    for (d, slot) in serving.iter_mut().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (m, row) in rho.iter().enumerate() {
            if best.is_none_or(|(_, b)| row[d] > b) {
                best = Some((m, row[d]));
            }
        }
        if let Some((m, r)) = best {
            if eligible[d] && r >= 0.5 {
                *slot = Some(m);
            }
        }
    }
    let rounded = AssociationMatrix::from_serving(num_uavs, &serving);
    let mut assoc = repair_feasibility(gains, strength, &rounded, rp);
    if schedule.polish {
        assoc = polish(gains, strength, rp, eligible, assoc);
    }
    AssociationOutcome {
        objective: rate_objective(gains, &assoc, rp),
        assoc,
        violation,
        penalty: Some(PenaltyState {
            kappa,
            lambda,
            rho_anchor: anchor,
        }),
    }
}

/// Best-improvement single-GU moves among feasible associations.
fn polish(
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    rp: &RadioParams,
    eligible: &[bool],
    mut assoc: AssociationMatrix,
) -> AssociationMatrix {
    let num_uavs = assoc.num_uavs();
    let mut value = rate_objective(gains, &assoc, rp);
    for _ in 0..4 * eligible.len().max(1) {
        let mut best: Option<(AssociationMatrix, f64)> = None;
        for (d, _) in eligible.iter().enumerate().filter(|(_, &e)| e) {
            for target in std::iter::once(None).chain((0..num_uavs).map(Some)) {
                if target == assoc.serving(d) {
                    continue;
                }
                let mut cand = assoc.clone();
                cand.drop_gu(d);
                if let Some(m) = target {
                    cand.assign(m, d);
                }
                let v = rate_objective(gains, &cand, rp);
                let bar = best.as_ref().map_or(value, |b| b.1);
                if v > bar + 1e-12 * bar.abs() && is_feasible(gains, strength, &cand, rp) {
                    best = Some((cand, v));
                }
            }
        }
        match best {
            Some((a, v)) => {
                assoc = a;
                value = v;
            }
            None => break,
        }
    }
    assoc
}

/// Exhaustive search over every assignment of eligible GUs to a UAV or to
/// none, keeping the best decodable one. Ties keep the first in enumeration
/// order, which starts from the empty association.
pub fn association_oracle(
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    rp: &RadioParams,
    eligible: &[bool],
) -> Result<AssociationMatrix, OptimizeError> {
    let num_uavs = gains.len();
    let num_gus = eligible.len();
    if num_gus > ORACLE_MAX_GUS || num_uavs > ORACLE_MAX_UAVS {
        return Err(OptimizeError::OracleTooLarge(format!(
            "association oracle supports K <= {ORACLE_MAX_GUS}, M <= {ORACLE_MAX_UAVS}; got K = {num_gus}, M = {num_uavs}"
        )));
    }
    let free: Vec<usize> = (0..num_gus).filter(|&d| eligible[d]).collect();
    let base = num_uavs + 1;
    let total = base.pow(free.len() as u32);
    let mut best = (0.0, AssociationMatrix::empty(num_uavs, num_gus));
    let mut rows = vec![vec![0.0; num_gus]; num_uavs];
    for code in 1..total {
        rows.iter_mut().for_each(|r| r.iter_mut().for_each(|x| *x = 0.0));
        let mut c = code;
        for &d in &free {
            let choice = c % base;
            c /= base;
            if choice > 0 {
                rows[choice - 1][d] = 1.0;
            }
        }
        let value = rate_objective_rows(gains, &rows, rp);
        if value > best.0 {
            let cand = AssociationMatrix::binary(rows.clone()).expect("one UAV per GU by construction");
            if is_feasible(gains, strength, &cand, rp) {
                best = (value, cand);
            }
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rp(gamma: f64) -> RadioParams {
        RadioParams {
            p_g: 1.0,
            sigma2: 0.1,
            gamma,
        }
    }

    #[test]
    fn singleton_is_served() {
        let gains = vec![vec![2.0]];
        for s in [AssocStrategy::Sca, AssocStrategy::Oracle] {
            let out = associate(&gains, &gains, &rp(1.0), &[true], s, &PenaltySchedule::default()).unwrap();
            assert_eq!(out.assoc.serving(0), Some(0));
        }
    }

    #[test]
    fn unreachable_threshold_gives_empty_association() {
        let gains = vec![vec![2.0, 1.0], vec![0.5, 3.0]];
        for s in [AssocStrategy::Sca, AssocStrategy::Oracle] {
            let out = associate(&gains, &gains, &rp(1e12), &[true, true], s, &PenaltySchedule::default()).unwrap();
            assert_eq!(out.assoc.count(), 0);
            assert_eq!(out.objective, 0.0);
        }
    }

    #[test]
    fn empty_buffers_are_skipped() {
        let gains = vec![vec![2.0, 1.0]];
        let out = associate(&gains, &gains, &rp(0.1), &[false, true], AssocStrategy::Sca, &PenaltySchedule::default())
            .unwrap();
        assert_eq!(out.assoc.serving(0), None);
    }

    #[test]
    fn sca_close_to_oracle_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut good = 0;
        for _ in 0..30 {
            let gains: Vec<Vec<f64>> = (0..2).map(|_| (0..4).map(|_| rng.random_range(0.0..4.0)).collect()).collect();
            let r = rp(0.5);
            let eligible = [true; 4];
            let sch = PenaltySchedule::default();
            let s = associate(&gains, &gains, &r, &eligible, AssocStrategy::Sca, &sch).unwrap();
            let o = associate(&gains, &gains, &r, &eligible, AssocStrategy::Oracle, &sch).unwrap();
            assert!(is_feasible(&gains, &gains, &s.assoc, &r));
            assert!(s.assoc.validate().is_ok());
            assert!(s.objective <= o.objective + 1e-12);
            if s.objective >= 0.9 * o.objective {
                good += 1;
            }
        }
        assert!(good >= 27, "{good}/30");
    }

    #[test]
    fn relaxation_ends_near_binary() {
        let gains = vec![vec![3.0, 0.2, 1.0], vec![0.1, 2.5, 1.2]];
        let out = associate(
            &gains,
            &gains,
            &rp(0.2),
            &[true; 3],
            AssocStrategy::Sca,
            &PenaltySchedule {
                polish: false,
                ..PenaltySchedule::default()
            },
        )
        .unwrap();
        assert!(out.violation < 1e-6);
        let p = out.penalty.unwrap();
        assert!(p.kappa >= 1.0 && p.lambda >= 0.0);
    }

    #[test]
    fn oracle_size_limits() {
        let gains = vec![vec![1.0; 11]];
        assert!(association_oracle(&gains, &gains, &rp(1.0), &[true; 11]).is_err());
        let gains = vec![vec![1.0; 2]; 4];
        assert!(association_oracle(&gains, &gains, &rp(1.0), &[true; 2]).is_err());
    }
}
