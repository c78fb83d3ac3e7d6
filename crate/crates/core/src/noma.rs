//! Uplink NOMA with successive interference cancellation: decoding order,
//! intra- and inter-UAV interference, SINR, rates, and the orthogonal access
//! baselines.
//!
//! Everything here works on channel power gains `gains[m][k] = |h_eq|^2`
//! rather than on complex channels, so the same code serves the fixed-ARIS
//! and the stacked dual-mode channels. Rates use the natural logarithm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NomaError {
    #[error("GU {0} is associated with more than one UAV")]
    MultipleServing(usize),
    #[error("association entry ({m}, {k}) = {value} outside [0, 1]")]
    OutOfRange { m: usize, k: usize, value: f64 },
    #[error("binary association has non-binary entry ({m}, {k}) = {value}")]
    NotBinary { m: usize, k: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Transmit power, noise power, and SIC decoding threshold (all linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// GU transmit power in watts.
    pub p_g: f64,
    /// Noise power in watts.
    pub sigma2: f64,
    /// Minimum SINR for successful decoding.
    pub gamma: f64,
}

impl RadioParams {
    pub fn from_db(p_g_dbm: f64, noise_dbm: f64, gamma_db: f64) -> Self {
        Self {
            p_g: dbm_to_watts(p_g_dbm),
            sigma2: dbm_to_watts(noise_dbm),
            gamma: 10f64.powf(gamma_db / 10.0),
        }
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        Self::from_db(30.0, -90.0, 0.0)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// GU-to-UAV association `rho[m][k]`, binary or relaxed to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    rho: Vec<Vec<f64>>,
    binary: bool,
}

impl AssociationMatrix {
    pub fn empty(num_uavs: usize, num_gus: usize) -> Self {
        Self {
            rho: vec![vec![0.0; num_gus]; num_uavs],
            binary: true,
        }
    }

    /// Binary association from the serving UAV of each GU.
    pub fn from_serving(num_uavs: usize, serving: &[Option<usize>]) -> Self {
        let mut a = Self::empty(num_uavs, serving.len());
        for (k, s) in serving.iter().enumerate() {
            if let Some(m) = *s {
                a.rho[m][k] = 1.0;
            }
        }
        a
    }

    pub fn binary(rho: Vec<Vec<f64>>) -> Result<Self, NomaError> {
        let a = Self { rho, binary: true };
        a.validate()?;
        Ok(a)
    }

    pub fn relaxed(rho: Vec<Vec<f64>>) -> Result<Self, NomaError> {
        let a = Self { rho, binary: false };
        a.validate()?;
        Ok(a)
    }

    /// Checks entry ranges, binarity in binary mode, and that every GU is
    /// served by at most one UAV (column sums at most one).
    pub fn validate(&self) -> Result<(), NomaError> {
        let k = self.num_gus();
        if self.rho.iter().any(|row| row.len() != k) {
            return Err(NomaError::DimensionMismatch("ragged association matrix".into()));
        }
        for (m, row) in self.rho.iter().enumerate() {
            for (kk, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(NomaError::OutOfRange { m, k: kk, value });
                }
                if self.binary && value != 0.0 && value != 1.0 {
                    return Err(NomaError::NotBinary { m, k: kk, value });
                }
            }
        }
        for kk in 0..k {
            let total: f64 = self.rho.iter().map(|row| row[kk]).sum();
            if total > 1.0 + 1e-9 {
                return Err(NomaError::MultipleServing(kk));
            }
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn num_uavs(&self) -> usize {
        self.rho.len()
    }

    pub fn num_gus(&self) -> usize {
        self.rho.first().map_or(0, Vec::len)
    }

    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.rho[m][k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rho
    }

    /// UAV serving GU `k`, if any (binary mode).
    pub fn serving(&self, k: usize) -> Option<usize> {
        (0..self.num_uavs()).find(|&m| self.rho[m][k] > 0.5)
    }

    /// GUs associated with UAV `m`, ascending.
    pub fn members(&self, m: usize) -> Vec<usize> {
        (0..self.num_gus()).filter(|&k| self.rho[m][k] > 0.5).collect()
    }

    pub fn count(&self) -> usize {
        self.rho.iter().flatten().filter(|&&v| v > 0.5).count()
    }

    /// Removes GU `k` from whichever UAV serves it.
    pub fn drop_gu(&mut self, k: usize) {
        for row in &mut self.rho {
            row[k] = 0.0;
        }
    }

    pub fn assign(&mut self, m: usize, k: usize) {
        self.drop_gu(k);
        self.rho[m][k] = 1.0;
    }
}

/// SIC decoding order per UAV: strongest (by the optimistic channel) first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    order: Vec<Vec<usize>>,
    /// Zero-based position of each GU in its UAV's order.
    position: Vec<Vec<Option<usize>>>,
}

impl DecodingOrder {
    pub fn order(&self, m: usize) -> &[usize] {
        &self.order[m]
    }

    /// One-based decoding rank `s_m(k)`, `None` if `k` is not served by `m`.
    pub fn rank(&self, m: usize, k: usize) -> Option<usize> {
        self.position[m][k].map(|p| p + 1)
    }

    /// GUs of UAV `m` decoded after `k`.
    pub fn later(&self, m: usize, k: usize) -> &[usize] {
        match self.position[m][k] {
            Some(p) => &self.order[m][p + 1..],
            None => &[],
        }
    }
}

/// Sorts each UAV's GUs by descending `strength[m][k]` (the squared
/// optimistic norm), ties broken by ascending GU index.
pub fn decode_order(strength: &[Vec<f64>], assoc: &AssociationMatrix) -> DecodingOrder {
    let num_gus = assoc.num_gus();
    let mut order = Vec::with_capacity(assoc.num_uavs());
    let mut position = Vec::with_capacity(assoc.num_uavs());
    for m in 0..assoc.num_uavs() {
        let mut members = assoc.members(m);
        members.sort_by(|&a, &b| strength[m][b].total_cmp(&strength[m][a]).then(a.cmp(&b)));
        let mut pos = vec![None; num_gus];
        for (p, &k) in members.iter().enumerate() {
            pos[k] = Some(p);
        }
        order.push(members);
        position.push(pos);
    }
    DecodingOrder { order, position }
}

/// Inter-UAV interference at UAV `m`: received power of every GU served by
/// another UAV.
pub fn inter_interference(gains: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams, m: usize) -> f64 {
    let mut total = 0.0;
    for mp in 0..assoc.num_uavs() {
        if mp == m {
            continue;
        }
        for k in 0..assoc.num_gus() {
            total += assoc.get(mp, k) * rp.p_g * gains[m][k];
        }
    }
    total
}

/// Intra-UAV interference to GU `k` at UAV `m`: GUs of the same UAV decoded
/// later.
pub fn intra_interference(
    gains: &[Vec<f64>],
    assoc: &AssociationMatrix,
    order: &DecodingOrder,
    rp: &RadioParams,
    m: usize,
    k: usize,
) -> f64 {
    order
        .later(m, k)
        .iter()
        .map(|&d| assoc.get(m, d) * rp.p_g * gains[m][d])
        .sum()
}

/// SINR of every UAV/GU pair; zero for unassociated pairs.
pub fn compute_sinr(
    gains: &[Vec<f64>],
    assoc: &AssociationMatrix,
    order: &DecodingOrder,
    rp: &RadioParams,
) -> Vec<Vec<f64>> {
    let (num_uavs, num_gus) = (assoc.num_uavs(), assoc.num_gus());
    let mut sinr = vec![vec![0.0; num_gus]; num_uavs];
    for m in 0..num_uavs {
        let inter = inter_interference(gains, assoc, rp, m);
        for &k in order.order(m) {
            let intra = intra_interference(gains, assoc, order, rp, m, k);
            sinr[m][k] = assoc.get(m, k) * rp.p_g * gains[m][k] / (intra + inter + rp.sigma2);
        }
    }
    sinr
}

/// Per-pair rates `ln(1 + SINR)` and the threshold mask `SINR >= gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rates: Vec<Vec<f64>>,
    pub feasible: Vec<Vec<bool>>,
}

impl RateReport {
    /// Associated pairs below the decoding threshold.
    pub fn violations(&self, assoc: &AssociationMatrix) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for m in 0..assoc.num_uavs() {
            for k in assoc.members(m) {
                if !self.feasible[m][k] {
                    out.push((m, k));
                }
            }
        }
        out
    }
}

pub fn rates_and_feasibility(sinr: &[Vec<f64>], rp: &RadioParams) -> RateReport {
    RateReport {
        rates: sinr.iter().map(|row| row.iter().map(|s| s.ln_1p()).collect()).collect(),
        feasible: sinr.iter().map(|row| row.iter().map(|&s| s >= rp.gamma).collect()).collect(),
    }
}

/// Orthogonal multiple access baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmaScheme {
    Tdma,
    Fdma,
}

/// Effective per-pair SINR under orthogonal access. TDMA gives each of the
/// `D_m` GUs a `1/D_m` time share at full power; FDMA a `1/D_m` band share
/// with noise and inter-UAV interference scaled by the same fraction.
pub fn oma_sinr(gains: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams, scheme: OmaScheme) -> Vec<Vec<f64>> {
    let (num_uavs, num_gus) = (assoc.num_uavs(), assoc.num_gus());
    let mut sinr = vec![vec![0.0; num_gus]; num_uavs];
    for m in 0..num_uavs {
        let members = assoc.members(m);
        let d = members.len() as f64;
        let inter = inter_interference(gains, assoc, rp, m);
        for &k in &members {
            let denom = match scheme {
                OmaScheme::Tdma => inter + rp.sigma2,
                OmaScheme::Fdma => (inter + rp.sigma2) / d,
            };
            sinr[m][k] = rp.p_g * gains[m][k] / denom;
        }
    }
    sinr
}

/// Per-pair rates under orthogonal access: `(1/D_m) * ln(1 + SINR_oma)`.
pub fn oma_baseline_rates(gains: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams, scheme: OmaScheme) -> Vec<Vec<f64>> {
    let sinr = oma_sinr(gains, assoc, rp, scheme);
    sinr.iter()
        .enumerate()
        .map(|(m, row)| {
            let d = assoc.members(m).len().max(1) as f64;
            row.iter().map(|s| s.ln_1p() / d).collect()
        })
        .collect()
}

/// Sum of NOMA rates over all pairs, ignoring the decoding threshold.
pub fn sum_rate(gains: &[Vec<f64>], strength: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams) -> f64 {
    let order = decode_order(strength, assoc);
    let sinr = compute_sinr(gains, assoc, &order, rp);
    sinr.iter().flatten().map(|s| s.ln_1p()).sum()
}

/// Whether every associated GU meets the decoding threshold.
pub fn is_feasible(gains: &[Vec<f64>], strength: &[Vec<f64>], assoc: &AssociationMatrix, rp: &RadioParams) -> bool {
    let order = decode_order(strength, assoc);
    let sinr = compute_sinr(gains, assoc, &order, rp);
    (0..assoc.num_uavs()).all(|m| assoc.members(m).iter().all(|&k| sinr[m][k] >= rp.gamma))
}

/// Drops violating GUs one at a time, lowest rate first, recomputing
/// interference after each drop, until every associated GU meets `gamma`.
pub fn repair_feasibility(
    gains: &[Vec<f64>],
    strength: &[Vec<f64>],
    assoc: &AssociationMatrix,
    rp: &RadioParams,
) -> AssociationMatrix {
    let mut assoc = assoc.clone();
    loop {
        let order = decode_order(strength, &assoc);
        let sinr = compute_sinr(gains, &assoc, &order, rp);
        let worst = (0..assoc.num_uavs())
            .flat_map(|m| assoc.members(m).into_iter().map(move |k| (m, k)))
            .filter(|&(m, k)| sinr[m][k] < rp.gamma)
            .min_by(|&(m1, k1), &(m2, k2)| sinr[m1][k1].total_cmp(&sinr[m2][k2]).then((m1, k1).cmp(&(m2, k2))));
        match worst {
            Some((_, k)) => assoc.drop_gu(k),
            None => return assoc,
        }
    }
}
