//! Phase-shift solvers for a fixed binary association.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rate_objective, OptimizeError};
use crate::channel::{ChannelSet, PhaseShiftVector};
use crate::noma::{AssociationMatrix, RadioParams};
use crate::C64;

const GRID_POINTS: usize = 72;
const GOLDEN_STEPS: usize = 40;
const ORACLE_MAX_ELEMENTS: usize = 6;
const RESTART_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStrategy {
    /// Co-phase the cascade of the strongest associated link with its direct
    /// path.
    Heuristic,
    /// Cyclic exact maximization over one element at a time.
    CoordDescent,
    /// Exhaustive search over discretized phases.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub strategy: PhaseStrategy,
    /// Restrict coordinate descent to this many uniformly spaced phases.
    pub levels: Option<usize>,
    pub oracle_levels: usize,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Extra descents from fixed pseudo-random phase vectors.
    pub restarts: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            strategy: PhaseStrategy::CoordDescent,
            levels: None,
            oracle_levels: 8,
            sweep_tol: 1e-6,
            max_sweeps: 50,
            restarts: 8,
        }
    }
}

impl PhaseConfig {
    pub fn with_strategy(strategy: PhaseStrategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }
}

/// Sum-rate objective of `theta` under a fixed association.
pub fn phase_objective(cs: &ChannelSet, theta: &PhaseShiftVector, assoc: &AssociationMatrix, rp: &RadioParams) -> f64 {
    rate_objective(&cs.gains(theta), assoc, rp)
}

pub fn solve_phases(
    cs: &ChannelSet,
    assoc: &AssociationMatrix,
    rp: &RadioParams,
    cfg: &PhaseConfig,
) -> Result<PhaseShiftVector, OptimizeError> {
    if assoc.num_uavs() != cs.num_uavs() || assoc.num_gus() != cs.num_gus() {
        return Err(OptimizeError::DimensionMismatch(format!(
            "association is {}x{}, channels are {}x{}",
            assoc.num_uavs(),
            assoc.num_gus(),
            cs.num_uavs(),
            cs.num_gus()
        )));
    }
    match cfg.strategy {
        PhaseStrategy::Heuristic => Ok(heuristic(cs, assoc, rp)),
        PhaseStrategy::CoordDescent => Ok(coord_descent(cs, assoc, rp, cfg)),
        PhaseStrategy::Oracle => phase_oracle(cs, assoc, rp, cfg.oracle_levels),
    }
}

fn heuristic(cs: &ChannelSet, assoc: &AssociationMatrix, rp: &RadioParams) -> PhaseShiftVector {
    let l = cs.elements();
    let mut best: Option<(usize, usize, f64)> = None;
    for m in 0..cs.num_uavs() {
        for k in assoc.members(m) {
            let s = rp.p_g * cs.optimistic_norm(m, k).powi(2);
            if best.is_none_or(|(_, _, b)| s > b) {
                best = Some((m, k, s));
            }
        }
    }
    let Some((m, k, _)) = best else {
        return PhaseShiftVector::ones(l);
    };
    let direct_arg = cs.direct[m][k].arg();
    let theta = cs.cascade[m][k]
        .iter()
        .map(|c| {
            if c.norm_sqr() == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, direct_arg - c.arg())
            }
        })
        .collect();
    PhaseShiftVector::new(theta).expect("polar construction is unit modulus")
}

fn quantize(phase: f64, levels: usize) -> f64 {
    let step = 2.0 * PI / levels as f64;
    (phase / step).round().rem_euclid(levels as f64) * step
}

/// One-element objective `sum_m ln(a0 + 2 Re(za e^{j phi})) - ln(b0 + 2 Re(zb e^{j phi}))`.
struct ElementTerms {
    terms: Vec<(f64, C64, f64, C64)>,
}

impl ElementTerms {
    fn eval(&self, phi: f64) -> f64 {
        let e = C64::from_polar(1.0, phi);
        self.terms
            .iter()
            .map(|&(a0, za, b0, zb)| (a0 + 2.0 * (za * e).re).ln() - (b0 + 2.0 * (zb * e).re).ln())
            .sum()
    }
}

fn align_to(cs: &ChannelSet, m: usize, k: usize) -> Vec<f64> {
    let direct_arg = cs.direct[m][k].arg();
    cs.cascade[m][k]
        .iter()
        .map(|c| if c.norm_sqr() == 0.0 { 0.0 } else { direct_arg - c.arg() })
        .collect()
}

/// Coordinate descent from several deterministic starts: all-ones, the
/// co-phased solution of every associated link (the heuristic is one of
/// them), and `restarts` pseudo-random vectors from a fixed seed. In quantized mode the continuous optimum, rounded, is one more
/// start. The best end point wins; ties keep the earliest start.
fn coord_descent(cs: &ChannelSet, assoc: &AssociationMatrix, rp: &RadioParams, cfg: &PhaseConfig) -> PhaseShiftVector {
    let l = cs.elements();
    let start = heuristic(cs, assoc, rp);
    if assoc.count() == 0 || cs.has_no_reflection() {
        return start;
    }
    let mut starts = vec![start.phases(), vec![0.0; l]];
    for m in 0..cs.num_uavs() {
        for k in assoc.members(m) {
            starts.push(align_to(cs, m, k));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..cfg.restarts {
        starts.push((0..l).map(|_| rng.random_range(0.0..2.0 * PI)).collect());
    }
    if let Some(q) = cfg.levels {
        let continuous = descend(cs, assoc, rp, cfg, None, starts[0].clone());
        starts.push(continuous);
        for s in &mut starts {
            s.iter_mut().for_each(|p| *p = quantize(*p, q));
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let phases = descend(cs, assoc, rp, cfg, cfg.levels, s);
        let value = phase_objective(cs, &PhaseShiftVector::from_phases(&phases), assoc, rp);
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, phases));
        }
    }
    PhaseShiftVector::from_phases(&best.expect("at least one start").1)
}

fn descend(
    cs: &ChannelSet,
    assoc: &AssociationMatrix,
    rp: &RadioParams,
    cfg: &PhaseConfig,
    levels: Option<usize>,
    mut phases: Vec<f64>,
) -> Vec<f64> {
    let l = cs.elements();
    let receivers: Vec<usize> = (0..cs.num_uavs()).filter(|&m| !assoc.members(m).is_empty()).collect();
    let active: Vec<(usize, usize)> = (0..cs.num_gus()).filter_map(|d| assoc.serving(d).map(|s| (d, s))).collect();
    let obj_of = |ph: &[f64]| phase_objective(cs, &PhaseShiftVector::from_phases(ph), assoc, rp);
    let scale = rp.p_g / rp.sigma2;
    let mut current = obj_of(&phases);
    for _ in 0..cfg.max_sweeps {
        let before = current;
        let theta: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
        let mut heq: Vec<Vec<C64>> = receivers
            .iter()
            .map(|&m| {
                active
                    .iter()
                    .map(|&(d, _)| {
                        cs.cascade[m][d].iter().zip(&theta).fold(cs.direct[m][d], |acc, (c, t)| acc + c * t)
                    })
                    .collect()
            })
            .collect();
        for el in 0..l {
            let old = C64::from_polar(1.0, phases[el]);
            let terms = ElementTerms {
                terms: receivers
                    .iter()
                    .zip(&heq)
                    .map(|(&m, row)| {
                        let (mut a0, mut za, mut b0, mut zb) = (1.0, C64::new(0.0, 0.0), 1.0, C64::new(0.0, 0.0));
                        for (&(d, serving), h) in active.iter().zip(row) {
                            let a = cs.cascade[m][d][el];
                            let r = h - a * old;
                            let base = scale * (r.norm_sqr() + a.norm_sqr());
                            let cross = scale * r.conj() * a;
                            a0 += base;
                            za += cross;
                            if serving != m {
                                b0 += base;
                                zb += cross;
                            }
                        }
                        (a0, za, b0, zb)
                    })
                    .collect(),
            };
            let here = terms.eval(phases[el]);
            let (cand, value) = match levels {
                Some(q) => best_on_levels(&terms, q),
                None => best_continuous(&terms),
            };
            if value > here {
                let new = C64::from_polar(1.0, cand);
                for (&m, row) in receivers.iter().zip(heq.iter_mut()) {
                    for (&(d, _), h) in active.iter().zip(row.iter_mut()) {
                        *h += cs.cascade[m][d][el] * (new - old);
                    }
                }
                phases[el] = cand;
            }
        }
        current = obj_of(&phases);
        if current - before < cfg.sweep_tol {
            break;
        }
    }
    phases
}

fn best_on_levels(terms: &ElementTerms, levels: usize) -> (f64, f64) {
    (0..levels)
        .map(|q| {
            let phi = 2.0 * PI * q as f64 / levels as f64;
            (phi, terms.eval(phi))
        })
        .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
}

fn best_continuous(terms: &ElementTerms) -> (f64, f64) {
    let (centre, _) = best_on_levels(terms, GRID_POINTS);
    let half = 2.0 * PI / GRID_POINTS as f64;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (centre - half, centre + half);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (terms.eval(x1), terms.eval(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = terms.eval(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = terms.eval(x1);
        }
    }
    let phi = 0.5 * (lo + hi);
    let value = terms.eval(phi);
    let grid_value = terms.eval(centre);
    if value >= grid_value {
        (phi.rem_euclid(2.0 * PI), value)
    } else {
        (centre, grid_value)
    }
}

/// Exhaustive search over `levels^L` discretized phase vectors; ties keep the
/// first vector in lexicographic level order.
pub fn phase_oracle(
    cs: &ChannelSet,
    assoc: &AssociationMatrix,
    rp: &RadioParams,
    levels: usize,
) -> Result<PhaseShiftVector, OptimizeError> {
    let l = cs.elements();
    if l > ORACLE_MAX_ELEMENTS {
        return Err(OptimizeError::OracleTooLarge(format!(
            "phase oracle supports at most {ORACLE_MAX_ELEMENTS} elements, got {l}"
        )));
    }
    if levels == 0 {
        return Err(OptimizeError::DimensionMismatch("oracle needs at least one phase level".into()));
    }
    let step = 2.0 * PI / levels as f64;
    let mut idx = vec![0usize; l];
    let mut best = (f64::NEG_INFINITY, vec![0.0; l]);
    loop {
        let phases: Vec<f64> = idx.iter().map(|&q| q as f64 * step).collect();
        let value = phase_objective(cs, &PhaseShiftVector::from_phases(&phases), assoc, rp);
        if value > best.0 {
            best = (value, phases);
        }
        // odometer increment, last element fastest
        let mut pos = l;
        loop {
            if pos == 0 {
                return Ok(PhaseShiftVector::from_phases(&best.1));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < levels {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_set(rng: &mut ChaCha8Rng, m: usize, k: usize, l: usize) -> ChannelSet {
        ChannelSet::from_links(
            (0..m).map(|_| (0..k).map(|_| c(rng)).collect()).collect(),
            (0..m).map(|_| (0..l).map(|_| c(rng)).collect()).collect(),
            (0..k).map(|_| (0..l).map(|_| c(rng)).collect()).collect(),
        )
        .unwrap()
    }

    fn rp() -> RadioParams {
        RadioParams {
            p_g: 1.0,
            sigma2: 0.1,
            gamma: 1.0,
        }
    }

    #[test]
    fn heuristic_reaches_the_optimistic_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let cs = random_set(&mut rng, 1, 1, 6);
            let assoc = AssociationMatrix::from_serving(1, &[Some(0)]);
            let theta = solve_phases(&cs, &assoc, &rp(), &PhaseConfig::with_strategy(PhaseStrategy::Heuristic)).unwrap();
            let got = cs.equivalent_channel(&theta, 0, 0).norm();
            let bound = cs.optimistic_norm(0, 0);
            assert!((got - bound).abs() <= 1e-10 * bound);
        }
    }

    #[test]
    fn zero_cascade_gives_all_ones() {
        let cs = ChannelSet::direct_only(vec![vec![C64::new(0.3, 0.1)]], 4).unwrap();
        let assoc = AssociationMatrix::from_serving(1, &[Some(0)]);
        for s in [PhaseStrategy::Heuristic, PhaseStrategy::CoordDescent] {
            let theta = solve_phases(&cs, &assoc, &rp(), &PhaseConfig::with_strategy(s)).unwrap();
            assert_eq!(theta, PhaseShiftVector::ones(4));
        }
    }

    #[test]
    fn no_association_gives_all_ones() {
        let cs = random_set(&mut ChaCha8Rng::seed_from_u64(6), 2, 2, 3);
        let assoc = AssociationMatrix::empty(2, 2);
        let theta = solve_phases(&cs, &assoc, &rp(), &PhaseConfig::with_strategy(PhaseStrategy::Heuristic)).unwrap();
        assert_eq!(theta, PhaseShiftVector::ones(3));
    }

    #[test]
    fn oracle_rejects_large_surfaces() {
        let cs = random_set(&mut ChaCha8Rng::seed_from_u64(7), 1, 1, 7);
        let assoc = AssociationMatrix::from_serving(1, &[Some(0)]);
        assert!(matches!(
            solve_phases(&cs, &assoc, &rp(), &PhaseConfig::with_strategy(PhaseStrategy::Oracle)),
            Err(OptimizeError::OracleTooLarge(_))
        ));
    }

    #[test]
    fn coordinate_descent_near_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut close = 0;
        for _ in 0..20 {
            let cs = random_set(&mut rng, 2, 3, 3);
            let assoc = AssociationMatrix::from_serving(2, &[Some(0), Some(1), Some(0)]);
            let oracle = phase_oracle(&cs, &assoc, &rp(), 8).unwrap();
            let cfg = PhaseConfig {
                levels: Some(8),
                ..PhaseConfig::default()
            };
            let cd = solve_phases(&cs, &assoc, &rp(), &cfg).unwrap();
            let o = phase_objective(&cs, &oracle, &assoc, &rp());
            let got = phase_objective(&cs, &cd, &assoc, &rp());
            assert!(got <= o + 1e-12);
            if got >= 0.98 * o {
                close += 1;
            }
            assert!(cd.is_unit_modulus());
        }
        assert!(close >= 18, "{close}/20");
    }

    #[test]
    fn continuous_descent_improves_on_heuristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let cs = random_set(&mut rng, 2, 4, 5);
            let assoc = AssociationMatrix::from_serving(2, &[Some(0), Some(1), Some(0), None]);
            let h = solve_phases(&cs, &assoc, &rp(), &PhaseConfig::with_strategy(PhaseStrategy::Heuristic)).unwrap();
            let cd = solve_phases(&cs, &assoc, &rp(), &PhaseConfig::default()).unwrap();
            assert!(phase_objective(&cs, &cd, &assoc, &rp()) >= phase_objective(&cs, &h, &assoc, &rp()) - 1e-12);
        }
    }
}
