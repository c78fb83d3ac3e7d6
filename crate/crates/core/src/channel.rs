//! Air-to-ground and air-to-air channel gains, reflected (cascade) channels,
//! and the stacked channels used when dual-mode UAVs act as passive
//! reflectors.
//!
//! A [`ChannelSet`] always describes one logical reflecting surface of `L`
//! elements: `uav_to_ris[m]` and `ris_to_gu[k]` are the two hops and
//! `cascade[m][k]` their element-wise product. Several passive UAVs are
//! handled by stacking their surfaces into a single longer one, see
//! [`DualModeChannels::stacked`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Position;
use crate::C64;

const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("phase-shift entry {index} has modulus {modulus}, expected 1")]
    NotUnitModulus { index: usize, modulus: f64 },
    #[error("UAV {0} is passive and has no receive chain")]
    PassiveReceiver(usize),
    #[error("invalid channel constants: {0}")]
    InvalidConstants(String),
}

/// Large-scale channel constants and array size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConstants {
    /// Linear power gain at the 1 m reference distance.
    pub beta: f64,
    /// Path-loss exponent.
    pub alpha0: f64,
    /// Linear Rician factor for links touching the ground; `None` disables
    /// small-scale fading.
    pub rician_k: Option<f64>,
    /// Reflecting elements per surface.
    pub elements: usize,
    /// Element spacing over carrier wavelength.
    pub spacing_ratio: f64,
}

impl Default for ChannelConstants {
    fn default() -> Self {
        Self {
            beta: 1e-3,
            alpha0: 2.2,
            rician_k: None,
            elements: 30,
            spacing_ratio: 0.5,
        }
    }
}

impl ChannelConstants {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.beta > 0.0) {
            return Err(ChannelError::InvalidConstants(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.alpha0 >= 2.0) {
            return Err(ChannelError::InvalidConstants(format!("alpha0 must be >= 2, got {}", self.alpha0)));
        }
        if self.elements == 0 {
            return Err(ChannelError::InvalidConstants("elements must be >= 1".into()));
        }
        if let Some(k) = self.rician_k {
            if !(k >= 0.0) {
                return Err(ChannelError::InvalidConstants(format!("rician_k must be >= 0, got {k}")));
            }
        }
        Ok(())
    }
}

/// Large-scale power gain `beta * d^(-alpha0)`.
pub fn pathloss_gain(d: f64, c: &ChannelConstants) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    Ok(c.beta * d.powf(-c.alpha0))
}

/// Uniform-linear-array response of a surface at `array` toward `other`. The
/// array axis is the x axis; element `l` carries the phase
/// `-2*pi*spacing*l*cos(phi)`.
pub fn ula_response(array: &Position, other: &Position, elements: usize, spacing_ratio: f64) -> Vec<C64> {
    let d = array.distance(other);
    let cos_phi = if d > 0.0 { (other.x - array.x) / d } else { 0.0 };
    (0..elements)
        .map(|l| C64::from_polar(1.0, -std::f64::consts::TAU * spacing_ratio * l as f64 * cos_phi))
        .collect()
}

fn circular_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Applies Rician small-scale fading in place: `sqrt(K/(K+1))*los +
/// sqrt(1/(K+1))*g` with `g ~ CN(0, 1)` per entry.
fn apply_rician<R: Rng + ?Sized>(los: &mut [C64], k: f64, rng: &mut R) {
    let a = (k / (k + 1.0)).sqrt();
    let b = (1.0 / (k + 1.0)).sqrt();
    for h in los.iter_mut() {
        *h = *h * a + circular_gaussian(rng) * b;
    }
}

/// An air-to-ground vector link `sqrt(pl) * a` with optional fading.
fn ground_vector<R: Rng + ?Sized>(
    surface: &Position,
    gu: &Position,
    c: &ChannelConstants,
    rng: &mut R,
) -> Result<Vec<C64>, ChannelError> {
    let amp = pathloss_gain(surface.distance(gu), c)?.sqrt();
    let mut v = ula_response(surface, gu, c.elements, c.spacing_ratio);
    if let Some(k) = c.rician_k {
        apply_rician(&mut v, k, rng);
    }
    Ok(v.into_iter().map(|x| x * amp).collect())
}

fn direct_scalar<R: Rng + ?Sized>(
    uav: &Position,
    gu: &Position,
    c: &ChannelConstants,
    rng: &mut R,
) -> Result<C64, ChannelError> {
    let amp = pathloss_gain(uav.distance(gu), c)?.sqrt();
    let mut h = [C64::new(1.0, 0.0)];
    if let Some(k) = c.rician_k {
        apply_rician(&mut h, k, rng);
    }
    Ok(h[0] * amp)
}

/// Line-of-sight vector link between two flying platforms.
fn air_vector(surface: &Position, uav: &Position, c: &ChannelConstants) -> Result<Vec<C64>, ChannelError> {
    let amp = pathloss_gain(surface.distance(uav), c)?.sqrt();
    Ok(ula_response(surface, uav, c.elements, c.spacing_ratio)
        .into_iter()
        .map(|x| x * amp)
        .collect())
}

/// Unit-modulus reflection coefficients of one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftVector(Vec<C64>);

impl PhaseShiftVector {
    pub fn new(theta: Vec<C64>) -> Result<Self, ChannelError> {
        for (index, t) in theta.iter().enumerate() {
            let modulus = t.norm();
            if (modulus - 1.0).abs() > UNIT_MODULUS_TOL {
                return Err(ChannelError::NotUnitModulus { index, modulus });
            }
        }
        Ok(Self(theta))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![C64::new(1.0, 0.0); len])
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(phases.iter().map(|&p| C64::from_polar(1.0, p)).collect())
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0.iter().map(|t| t.arg()).collect()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenates per-surface vectors into one stacked vector.
    pub fn concat(parts: &[PhaseShiftVector]) -> Self {
        Self(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn is_unit_modulus(&self) -> bool {
        self.0.iter().all(|t| (t.norm() - 1.0).abs() <= UNIT_MODULUS_TOL)
    }
}

/// All channels of one slot for a single (possibly stacked) reflecting surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `direct[m][k]`: GU `k` to UAV `m`.
    pub direct: Vec<Vec<C64>>,
    /// `uav_to_ris[m][l]`: surface element `l` to UAV `m`.
    pub uav_to_ris: Vec<Vec<C64>>,
    /// `ris_to_gu[k][l]`: GU `k` to surface element `l`.
    pub ris_to_gu: Vec<Vec<C64>>,
    /// `cascade[m][k][l] = uav_to_ris[m][l] * ris_to_gu[k][l]`.
    pub cascade: Vec<Vec<Vec<C64>>>,
}

impl ChannelSet {
    /// Assembles a channel set from its links, computing the cascade.
    pub fn from_links(
        direct: Vec<Vec<C64>>,
        uav_to_ris: Vec<Vec<C64>>,
        ris_to_gu: Vec<Vec<C64>>,
    ) -> Result<Self, ChannelError> {
        let m = direct.len();
        let k = direct.first().map_or(0, Vec::len);
        if direct.iter().any(|row| row.len() != k) {
            return Err(ChannelError::DimensionMismatch("ragged direct channel matrix".into()));
        }
        if uav_to_ris.len() != m || ris_to_gu.len() != k {
            return Err(ChannelError::DimensionMismatch(format!(
                "expected {m} UAV-surface and {k} surface-GU links, got {} and {}",
                uav_to_ris.len(),
                ris_to_gu.len()
            )));
        }
        let l = uav_to_ris
            .first()
            .or(ris_to_gu.first())
            .map_or(0, Vec::len);
        if uav_to_ris.iter().chain(ris_to_gu.iter()).any(|v| v.len() != l) {
            return Err(ChannelError::DimensionMismatch("surface vectors differ in length".into()));
        }
        let cascade = uav_to_ris
            .iter()
            .map(|hm| {
                ris_to_gu
                    .iter()
                    .map(|hk| hm.iter().zip(hk).map(|(a, b)| a * b).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            direct,
            uav_to_ris,
            ris_to_gu,
            cascade,
        })
    }

    /// A channel set without any reflection: all surface links are zero.
    pub fn direct_only(direct: Vec<Vec<C64>>, elements: usize) -> Result<Self, ChannelError> {
        let m = direct.len();
        let k = direct.first().map_or(0, Vec::len);
        Self::from_links(
            direct,
            vec![vec![C64::new(0.0, 0.0); elements]; m],
            vec![vec![C64::new(0.0, 0.0); elements]; k],
        )
    }

    pub fn num_uavs(&self) -> usize {
        self.direct.len()
    }

    pub fn num_gus(&self) -> usize {
        self.direct.first().map_or(0, Vec::len)
    }

    pub fn elements(&self) -> usize {
        self.uav_to_ris
            .first()
            .or(self.ris_to_gu.first())
            .map_or(0, Vec::len)
    }

    /// Equivalent scalar channel `H_{m,k} theta + h_{m,k}`.
    pub fn equivalent_channel(&self, theta: &PhaseShiftVector, m: usize, k: usize) -> C64 {
        let reflected = self.cascade[m][k]
            .iter()
            .zip(theta.as_slice())
            .fold(C64::new(0.0, 0.0), |acc, (h, t)| acc + h * t);
        reflected + self.direct[m][k]
    }

    /// Reflected part `H_{m,k} theta` only.
    pub fn reflected_channel(&self, theta: &PhaseShiftVector, m: usize, k: usize) -> C64 {
        self.cascade[m][k]
            .iter()
            .zip(theta.as_slice())
            .fold(C64::new(0.0, 0.0), |acc, (h, t)| acc + h * t)
    }

    /// Channel norm when every reflected path is co-phased with the direct
    /// path; an upper bound on `|equivalent_channel|` over all unit-modulus
    /// phase vectors.
    pub fn optimistic_norm(&self, m: usize, k: usize) -> f64 {
        self.cascade[m][k].iter().map(|c| c.norm()).sum::<f64>() + self.direct[m][k].norm()
    }

    /// `|equivalent_channel|^2` for every UAV/GU pair.
    pub fn gains(&self, theta: &PhaseShiftVector) -> Vec<Vec<f64>> {
        (0..self.num_uavs())
            .map(|m| {
                (0..self.num_gus())
                    .map(|k| self.equivalent_channel(theta, m, k).norm_sqr())
                    .collect()
            })
            .collect()
    }

    /// `optimistic_norm^2` for every UAV/GU pair.
    pub fn optimistic_gains(&self) -> Vec<Vec<f64>> {
        (0..self.num_uavs())
            .map(|m| (0..self.num_gus()).map(|k| self.optimistic_norm(m, k).powi(2)).collect())
            .collect()
    }

    /// Whether every cascade entry is exactly zero.
    pub fn has_no_reflection(&self) -> bool {
        self.cascade.iter().flatten().flatten().all(|c| c.norm_sqr() == 0.0)
    }
}

/// Builds the channels for UAVs served by one ARIS at `ris`. Air-to-air links
/// are line of sight; links touching the ground get Rician fading when
/// `c.rician_k` is set. Randomness is drawn from `rng` in a fixed order:
/// direct links (UAV-major), then surface-to-GU links (GU-major).
pub fn build_channels<R: Rng + ?Sized>(
    uavs: &[Position],
    ris: &Position,
    gus: &[Position],
    c: &ChannelConstants,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    c.validate()?;
    let direct = uavs
        .iter()
        .map(|u| gus.iter().map(|g| direct_scalar(u, g, c, rng)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let uav_to_ris = uavs.iter().map(|u| air_vector(ris, u, c)).collect::<Result<Vec<_>, _>>()?;
    let ris_to_gu = gus
        .iter()
        .map(|g| ground_vector(ris, g, c, rng))
        .collect::<Result<Vec<_>, _>>()?;
    ChannelSet::from_links(direct, uav_to_ris, ris_to_gu)
}

/// Channels among dual-mode UAVs, each carrying a surface of `L` elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualModeChannels {
    /// `direct[m][k]`: GU `k` to UAV `m`'s antenna.
    pub direct: Vec<Vec<C64>>,
    /// `uav_to_uav[m][j]`: surface on UAV `j` to UAV `m`'s antenna (zero for
    /// `j == m`).
    pub uav_to_uav: Vec<Vec<Vec<C64>>>,
    /// `surface_to_gu[j][k]`: GU `k` to the surface on UAV `j`.
    pub surface_to_gu: Vec<Vec<Vec<C64>>>,
    pub elements: usize,
}

impl DualModeChannels {
    pub fn num_uavs(&self) -> usize {
        self.direct.len()
    }

    pub fn num_gus(&self) -> usize {
        self.direct.first().map_or(0, Vec::len)
    }

    /// Stacked surface-to-receiver vector of UAV `m`: block `j` is
    /// `(1 - alpha_j) * h_{m,j}`. The block of `m` itself is zero because an
    /// active receiver has `alpha_m = 1`.
    fn stacked_receiver(&self, modes: &[bool], m: usize) -> Vec<C64> {
        let zero = C64::new(0.0, 0.0);
        (0..self.num_uavs())
            .flat_map(|j| {
                let passive = !modes[j] && j != m;
                self.uav_to_uav[m][j]
                    .iter()
                    .map(move |&h| if passive { h } else { zero })
            })
            .collect()
    }

    /// Stacked GU-to-surface vector of GU `k` over all UAVs.
    fn stacked_gu(&self, k: usize) -> Vec<C64> {
        (0..self.num_uavs())
            .flat_map(|j| self.surface_to_gu[j][k].iter().copied())
            .collect()
    }

    /// Rewrites the dual-mode channels as a single stacked surface of
    /// `M * L` elements, keeping only active UAVs as receivers. Returns the
    /// channel set and the original index of each receiver row.
    pub fn stacked(&self, modes: &[bool]) -> Result<(ChannelSet, Vec<usize>), ChannelError> {
        if modes.len() != self.num_uavs() {
            return Err(ChannelError::DimensionMismatch(format!(
                "{} modes for {} UAVs",
                modes.len(),
                self.num_uavs()
            )));
        }
        let active: Vec<usize> = (0..self.num_uavs()).filter(|&m| modes[m]).collect();
        let direct = active.iter().map(|&m| self.direct[m].clone()).collect();
        let uav_to_ris = active.iter().map(|&m| self.stacked_receiver(modes, m)).collect();
        let ris_to_gu = (0..self.num_gus()).map(|k| self.stacked_gu(k)).collect();
        let cs = ChannelSet::from_links(direct, uav_to_ris, ris_to_gu)?;
        Ok((cs, active))
    }

    /// Channel set treating only UAV `j`'s surface as reflector, with every
    /// other UAV a receiver. Used to cross-check the stacked form.
    pub fn single_reflector(&self, j: usize) -> Result<ChannelSet, ChannelError> {
        let receivers: Vec<usize> = (0..self.num_uavs()).filter(|&m| m != j).collect();
        ChannelSet::from_links(
            receivers.iter().map(|&m| self.direct[m].clone()).collect(),
            receivers.iter().map(|&m| self.uav_to_uav[m][j].clone()).collect(),
            (0..self.num_gus()).map(|k| self.surface_to_gu[j][k].clone()).collect(),
        )
    }
}

/// Equivalent channel of GU `k` at active UAV `m` when the passive UAVs in
/// `modes` reflect with `thetas[j]`, evaluated through the stacked form.
pub fn dualmode_channel(
    dm: &DualModeChannels,
    modes: &[bool],
    thetas: &[PhaseShiftVector],
    m: usize,
    k: usize,
) -> Result<C64, ChannelError> {
    if modes.len() != dm.num_uavs() || thetas.len() != dm.num_uavs() {
        return Err(ChannelError::DimensionMismatch("one mode and one phase vector per UAV".into()));
    }
    if !modes[m] {
        return Err(ChannelError::PassiveReceiver(m));
    }
    if let Some(t) = thetas.iter().find(|t| t.len() != dm.elements) {
        return Err(ChannelError::DimensionMismatch(format!(
            "phase vector of length {} for {} elements",
            t.len(),
            dm.elements
        )));
    }
    let receiver = dm.stacked_receiver(modes, m);
    let gu = dm.stacked_gu(k);
    let theta = PhaseShiftVector::concat(thetas);
    let reflected = receiver
        .iter()
        .zip(&gu)
        .zip(theta.as_slice())
        .fold(C64::new(0.0, 0.0), |acc, ((a, b), t)| acc + a * b * t);
    Ok(reflected + dm.direct[m][k])
}

/// Builds channels among dual-mode UAVs. Randomness order: direct links
/// (UAV-major), then surface-to-GU links (UAV-major, GU-minor).
pub fn build_dualmode_channels<R: Rng + ?Sized>(
    uavs: &[Position],
    gus: &[Position],
    c: &ChannelConstants,
    rng: &mut R,
) -> Result<DualModeChannels, ChannelError> {
    c.validate()?;
    let direct = uavs
        .iter()
        .map(|u| gus.iter().map(|g| direct_scalar(u, g, c, rng)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let uav_to_uav = uavs
        .iter()
        .enumerate()
        .map(|(m, um)| {
            uavs.iter()
                .enumerate()
                .map(|(j, uj)| {
                    if j == m {
                        Ok(vec![C64::new(0.0, 0.0); c.elements])
                    } else {
                        air_vector(uj, um, c)
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let surface_to_gu = uavs
        .iter()
        .map(|u| gus.iter().map(|g| ground_vector(u, g, c, rng)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DualModeChannels {
        direct,
        uav_to_uav,
        surface_to_gu,
        elements: c.elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn random_c<R: Rng>(rng: &mut R) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_set(rng: &mut ChaCha8Rng, m: usize, k: usize, l: usize) -> ChannelSet {
        let direct = (0..m).map(|_| (0..k).map(|_| random_c(rng)).collect()).collect();
        let a = (0..m).map(|_| (0..l).map(|_| random_c(rng)).collect()).collect();
        let b = (0..k).map(|_| (0..l).map(|_| random_c(rng)).collect()).collect();
        ChannelSet::from_links(direct, a, b).unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, l: usize) -> PhaseShiftVector {
        PhaseShiftVector::from_phases(&(0..l).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect::<Vec<_>>())
    }

    #[test]
    fn pathloss_reference_values() {
        let c = ChannelConstants {
            alpha0: 2.0,
            ..Default::default()
        };
        assert!((pathloss_gain(1.0, &c).unwrap() - 1e-3).abs() < 1e-18);
        assert!((pathloss_gain(10.0, &c).unwrap() - 1e-5).abs() < 1e-18);
        // 1e-3 * 100^-2.2 = 1e-3 * 10^-4.4
        let c22 = ChannelConstants::default();
        let expected = 3.981_071_705_534_969_6e-8;
        assert!((pathloss_gain(100.0, &c22).unwrap() - expected).abs() / expected < 1e-12);
        assert_eq!(pathloss_gain(0.0, &c), Err(ChannelError::NonPositiveDistance(0.0)));
    }

    #[test]
    fn degenerate_array_at_unit_distance() {
        // Every platform 1 m from the others: L = 1, no fading.
        let c = ChannelConstants {
            elements: 1,
            ..Default::default()
        };
        let uav = Position::new(0.0, 0.0, 1.0);
        let ris = Position::new(1.0, 0.0, 1.0);
        let gu = Position::new(1.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = build_channels(&[uav], &ris, &[Position::new(0.0, 0.0, 0.0)], &c, &mut rng).unwrap();
        assert!((cs.direct[0][0].norm() - 1e-3f64.sqrt()).abs() < 1e-15);
        assert!((cs.uav_to_ris[0][0].norm() - 1e-3f64.sqrt()).abs() < 1e-15);
        let cs2 = build_channels(&[uav], &ris, &[gu], &c, &mut rng).unwrap();
        assert!((cs2.ris_to_gu[0][0].norm() - 1e-3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cascade_is_elementwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = random_set(&mut rng, 3, 4, 5);
        for m in 0..3 {
            for k in 0..4 {
                for l in 0..5 {
                    assert_eq!(cs.cascade[m][k][l], cs.uav_to_ris[m][l] * cs.ris_to_gu[k][l]);
                }
            }
        }
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let c = ChannelConstants {
            rician_k: Some(10.0),
            elements: 6,
            ..Default::default()
        };
        let uavs = [Position::new(100.0, 200.0, 30.0), Position::new(600.0, 300.0, 30.0)];
        let ris = Position::new(400.0, 400.0, 30.0);
        let gus = [Position::new(10.0, 20.0, 0.0), Position::new(900.0, 800.0, 0.0)];
        let a = build_channels(&uavs, &ris, &gus, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = build_channels(&uavs, &ris, &gus, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let d = build_channels(&uavs, &ris, &gus, &c, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn colocated_platforms_are_rejected() {
        let c = ChannelConstants::default();
        let p = Position::new(1.0, 1.0, 30.0);
        let err = build_channels(&[p], &p, &[Position::new(0.0, 0.0, 0.0)], &c, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(err, Err(ChannelError::NonPositiveDistance(0.0)));
    }

    #[test]
    fn equivalent_channel_all_real() {
        let cs = ChannelSet::from_links(vec![vec![one()]], vec![vec![one()]], vec![vec![one()]]).unwrap();
        assert_eq!(cs.equivalent_channel(&PhaseShiftVector::ones(1), 0, 0), C64::new(2.0, 0.0));
        assert_eq!(cs.optimistic_norm(0, 0), 2.0);
    }

    #[test]
    fn cophased_theta_attains_optimistic_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cs = random_set(&mut rng, 1, 1, 6);
        let target = cs.direct[0][0].arg();
        let phases: Vec<f64> = cs.cascade[0][0].iter().map(|c| target - c.arg()).collect();
        let theta = PhaseShiftVector::from_phases(&phases);
        let got = cs.equivalent_channel(&theta, 0, 0).norm();
        assert!((got - cs.optimistic_norm(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn equivalent_channel_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cs = random_set(&mut rng, 2, 3, 4);
        let theta = random_theta(&mut rng, 4);
        for m in 0..2 {
            for k in 0..3 {
                let mut re = cs.direct[m][k].re;
                let mut im = cs.direct[m][k].im;
                for l in 0..4 {
                    let (a, b, t) = (cs.uav_to_ris[m][l], cs.ris_to_gu[k][l], theta.as_slice()[l]);
                    // (a*b)*t expanded by hand
                    let ab_re = a.re * b.re - a.im * b.im;
                    let ab_im = a.re * b.im + a.im * b.re;
                    re += ab_re * t.re - ab_im * t.im;
                    im += ab_re * t.im + ab_im * t.re;
                }
                let got = cs.equivalent_channel(&theta, m, k);
                assert!((got.re - re).abs() < 1e-12 && (got.im - im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimistic_norm_bounds_every_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let cs = random_set(&mut rng, 2, 2, 5);
            for _ in 0..2000 {
                let theta = random_theta(&mut rng, 5);
                for m in 0..2 {
                    for k in 0..2 {
                        assert!(cs.equivalent_channel(&theta, m, k).norm() <= cs.optimistic_norm(m, k) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_cascade_gives_direct_norm() {
        let h = C64::new(0.3, -0.4);
        let cs = ChannelSet::direct_only(vec![vec![h]], 4).unwrap();
        assert_eq!(cs.optimistic_norm(0, 0), h.norm());
        assert!(cs.has_no_reflection());
    }

    #[test]
    fn unit_modulus_is_enforced() {
        assert!(PhaseShiftVector::new(vec![C64::new(0.5, 0.0)]).is_err());
        assert!(PhaseShiftVector::new(vec![C64::from_polar(1.0, 0.7)]).is_ok());
    }

    fn random_dualmode(rng: &mut ChaCha8Rng, m: usize, k: usize, l: usize) -> DualModeChannels {
        DualModeChannels {
            direct: (0..m).map(|_| (0..k).map(|_| random_c(rng)).collect()).collect(),
            uav_to_uav: (0..m)
                .map(|a| {
                    (0..m)
                        .map(|b| {
                            if a == b {
                                vec![C64::new(0.0, 0.0); l]
                            } else {
                                (0..l).map(|_| random_c(rng)).collect()
                            }
                        })
                        .collect()
                })
                .collect(),
            surface_to_gu: (0..m).map(|_| (0..k).map(|_| (0..l).map(|_| random_c(rng)).collect()).collect()).collect(),
            elements: l,
        }
    }

    #[test]
    fn dualmode_all_active_is_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dm = random_dualmode(&mut rng, 3, 2, 4);
        let thetas: Vec<_> = (0..3).map(|_| random_theta(&mut rng, 4)).collect();
        let got = dualmode_channel(&dm, &[true, true, true], &thetas, 1, 1).unwrap();
        assert_eq!(got, dm.direct[1][1]);
    }

    #[test]
    fn dualmode_rejects_passive_receiver() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dm = random_dualmode(&mut rng, 2, 2, 3);
        let thetas = vec![PhaseShiftVector::ones(3), PhaseShiftVector::ones(3)];
        assert_eq!(
            dualmode_channel(&dm, &[false, true], &thetas, 0, 0),
            Err(ChannelError::PassiveReceiver(0))
        );
    }

    #[test]
    fn dualmode_single_passive_reduces_to_equivalent_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dm = random_dualmode(&mut rng, 3, 4, 5);
        let thetas: Vec<_> = (0..3).map(|_| random_theta(&mut rng, 5)).collect();
        for j in 0..3 {
            let modes: Vec<bool> = (0..3).map(|m| m != j).collect();
            let single = dm.single_reflector(j).unwrap();
            for (row, m) in (0..3).filter(|&m| m != j).enumerate() {
                for k in 0..4 {
                    let a = dualmode_channel(&dm, &modes, &thetas, m, k).unwrap();
                    let b = single.equivalent_channel(&thetas[j], row, k);
                    assert_eq!(a, b, "bit-exact reduction for passive {j}, receiver {m}, GU {k}");
                }
            }
        }
    }

    #[test]
    fn dualmode_stacked_equals_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dm = random_dualmode(&mut rng, 4, 3, 3);
        let thetas: Vec<_> = (0..4).map(|_| random_theta(&mut rng, 3)).collect();
        let modes = [true, false, true, false];
        for m in [0usize, 2] {
            for k in 0..3 {
                let mut explicit = dm.direct[m][k];
                for j in [1usize, 3] {
                    for l in 0..3 {
                        explicit += dm.uav_to_uav[m][j][l] * dm.surface_to_gu[j][k][l] * thetas[j].as_slice()[l];
                    }
                }
                let got = dualmode_channel(&dm, &modes, &thetas, m, k).unwrap();
                assert!((got - explicit).norm() < 1e-12);
            }
        }
        let (cs, rows) = dm.stacked(&modes).unwrap();
        assert_eq!(rows, vec![0, 2]);
        let stacked_theta = PhaseShiftVector::concat(&thetas);
        for (row, &m) in rows.iter().enumerate() {
            for k in 0..3 {
                let a = cs.equivalent_channel(&stacked_theta, row, k);
                let b = dualmode_channel(&dm, &modes, &thetas, m, k).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
