//! Per-agent rewards for UAVs, the ARIS, and dual-mode UAVs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub uav_weight: f64,
    pub uav_penalty: f64,
    pub aris_weight: f64,
    pub aris_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            uav_weight: 1.0,
            uav_penalty: 10.0,
            aris_weight: 1.0,
            aris_penalty: 10.0,
        }
    }
}

/// Collecting-UAV reward: weighted data drained this slot,
/// `sum_k min(tau * rate_k, backlog_k)`, minus the penalty when violating.
pub fn uav_reward(rates: &[f64], backlog: &[f64], tau: f64, violation: bool, w: &RewardWeights) -> f64 {
    let drained: f64 = rates.iter().zip(backlog).map(|(r, d)| (tau * r).min(*d)).sum();
    w.uav_weight * drained - if violation { w.uav_penalty } else { 0.0 }
}

/// Reflector reward: weighted sum over associated pairs of the
/// noise-normalised reflected-channel magnitude
/// `sqrt(p_G / sigma^2) |H_{m,k} theta|`, minus the penalty when violating.
/// `reflected[m][k]` holds `|H_{m,k} theta|`.
pub fn aris_reward(
    assoc: &[Vec<f64>],
    reflected: &[Vec<f64>],
    snr_scale: f64,
    violation: bool,
    w: &RewardWeights,
) -> f64 {
    let gain: f64 = assoc
        .iter()
        .zip(reflected)
        .flat_map(|(a, r)| a.iter().zip(r).map(|(rho, h)| rho * h))
        .sum();
    w.aris_weight * snr_scale.sqrt() * gain - if violation { w.aris_penalty } else { 0.0 }
}

/// Mode selector: the active reward when `active`, else the passive one.
pub fn dual_mode_reward(active: bool, active_reward: f64, passive_reward: f64) -> f64 {
    if active {
        active_reward
    } else {
        passive_reward
    }
}
