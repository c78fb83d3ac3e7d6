//! Scenario description: network size, layout, scheme, and every tunable of
//! the lower layers, with serde defaults so a scenario file only needs the
//! platform and GU counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelConstants;
use crate::geometry::MobilityLimits;
use crate::learn::{HyperParams, RewardWeights};
use crate::noma::{OmaScheme, RadioParams};
use crate::optimize::{AoConfig, AoMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Which platforms exist and what they do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `M` collecting UAVs plus one dedicated reflecting UAV.
    FixedAris,
    /// `M` UAVs that each choose per slot to collect or to reflect.
    DmSwitching,
    /// `M` collecting UAVs, no reflection.
    AllActive,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::FixedAris => "fixed-aris",
            Scheme::DmSwitching => "dm-switching",
            Scheme::AllActive => "all-active",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Noma,
    Tdma,
    Fdma,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::Noma => "noma",
            Access::Tdma => "tdma",
            Access::Fdma => "fdma",
        }
    }

    pub fn oma(self) -> Option<OmaScheme> {
        match self {
            Access::Noma => None,
            Access::Tdma => Some(OmaScheme::Tdma),
            Access::Fdma => Some(OmaScheme::Fdma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Uniform,
    /// Gaussian clusters around points of interest, clipped to the area.
    Clustered { pois: Vec<[f64; 2]>, std_dev: f64 },
}

impl Default for Layout {
    fn default() -> Self {
        Layout::Uniform
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub p_g_dbm: f64,
    pub noise_dbm: f64,
    pub gamma_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            p_g_dbm: 30.0,
            noise_dbm: -90.0,
            gamma_db: 0.0,
        }
    }
}

impl RadioConfig {
    pub fn params(&self) -> RadioParams {
        RadioParams::from_db(self.p_g_dbm, self.noise_dbm, self.gamma_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub beta: f64,
    pub alpha0: f64,
    pub rician_k: Option<f64>,
    pub spacing_ratio: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let c = ChannelConstants::default();
        Self {
            beta: c.beta,
            alpha0: c.alpha0,
            rician_k: c.rician_k,
            spacing_ratio: c.spacing_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    pub v_max: f64,
    pub d_min: f64,
    pub tau: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        let m = MobilityLimits::default();
        Self {
            v_max: m.v_max,
            d_min: m.d_min,
            tau: m.tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueConfig {
    pub d_max: f64,
    pub arrival_max: f64,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            d_max: 100.0,
            arrival_max: 20.0,
        }
    }
}

/// Inner optimizer settings for training and evaluation slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub train_mode: AoMode,
    pub eval_mode: AoMode,
    pub ao: AoConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            train_mode: AoMode::TwoStep,
            eval_mode: AoMode::Full,
            ao: AoConfig::default(),
        }
    }
}

/// A parameter sweep: the scenario is run once per value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(alias = "M")]
    pub num_uavs: usize,
    #[serde(alias = "K")]
    pub num_gus: usize,
    #[serde(alias = "L", default = "default_elements")]
    pub elements: usize,
    #[serde(alias = "N", default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_area")]
    pub area_side: f64,
    #[serde(default = "default_altitude")]
    pub altitude: f64,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_access")]
    pub access: Access,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Start every platform near one point instead of spreading them out.
    #[serde(default)]
    pub shared_start: bool,
    /// Explicit start positions `[x, y]`, one per platform (UAVs, then the
    /// reflector in the fixed-ARIS scheme).
    #[serde(default)]
    pub starts: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub mobility: MobilityConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub queue: QueueConfig,
    #[serde(default)]
    pub rewards: RewardWeights,
    #[serde(default)]
    pub learning: HyperParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_elements() -> usize {
    30
}
fn default_slots() -> usize {
    50
}
fn default_area() -> f64 {
    1000.0
}
fn default_altitude() -> f64 {
    30.0
}
fn default_scheme() -> Scheme {
    Scheme::DmSwitching
}
fn default_access() -> Access {
    Access::Noma
}
fn default_episodes() -> usize {
    2000
}
fn default_eval_episodes() -> usize {
    1
}

impl Scenario {
    /// A scenario with the given counts and every other field at its default.
    pub fn new(num_uavs: usize, num_gus: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "num_uavs": num_uavs, "num_gus": num_gus }))
            .expect("defaults deserialize")
    }

    /// Number of moving platforms, including the reflector in fixed-ARIS.
    pub fn num_platforms(&self) -> usize {
        self.num_uavs + usize::from(self.scheme == Scheme::FixedAris)
    }

    pub fn limits(&self) -> MobilityLimits {
        MobilityLimits {
            v_max: self.mobility.v_max,
            d_min: self.mobility.d_min,
            tau: self.mobility.tau,
            area_side: self.area_side,
        }
    }

    pub fn channel_constants(&self) -> ChannelConstants {
        ChannelConstants {
            beta: self.channel.beta,
            alpha0: self.channel.alpha0,
            rician_k: self.channel.rician_k,
            elements: self.elements,
            spacing_ratio: self.channel.spacing_ratio,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.num_uavs == 0 {
            return Err(invalid("num_uavs", "need at least one UAV"));
        }
        if self.num_gus == 0 {
            return Err(invalid("num_gus", "need at least one GU"));
        }
        if self.slots == 0 {
            return Err(invalid("slots", "need at least one slot"));
        }
        if self.elements == 0 {
            return Err(invalid("elements", "need at least one surface element"));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(invalid("area_side", "must be positive"));
        }
        if !(self.altitude > 0.0) {
            return Err(invalid("altitude", "must be positive"));
        }
        if let Layout::Clustered { pois, std_dev } = &self.layout {
            if pois.is_empty() {
                return Err(invalid("layout.pois", "clustered layout needs at least one point of interest"));
            }
            if !(*std_dev >= 0.0) {
                return Err(invalid("layout.std_dev", "must be non-negative"));
            }
        }
        if let Some(starts) = &self.starts {
            if starts.len() != self.num_platforms() {
                return Err(invalid(
                    "starts",
                    format!("{} positions for {} platforms", starts.len(), self.num_platforms()),
                ));
            }
        }
        let m = &self.mobility;
        if !(m.v_max >= 0.0 && m.d_min >= 0.0 && m.tau > 0.0) {
            return Err(invalid("mobility", "v_max, d_min must be >= 0 and tau > 0"));
        }
        let q = &self.queue;
        if !(q.d_max > 0.0 && q.arrival_max >= 0.0) {
            return Err(invalid("queue", "d_max must be > 0 and arrival_max >= 0"));
        }
        self.channel_constants()
            .validate()
            .map_err(|e| invalid("channel", e.to_string()))?;
        let h = &self.learning;
        if !(h.actor_lr > 0.0 && h.critic_lr > 0.0) {
            return Err(invalid("learning", "learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&h.gamma_d) {
            return Err(invalid("learning.gamma_d", "must lie in [0, 1)"));
        }
        if !(h.tau_soft > 0.0 && h.tau_soft <= 1.0) {
            return Err(invalid("learning.tau_soft", "must lie in (0, 1]"));
        }
        if h.batch_size == 0 || h.buffer_capacity < h.batch_size {
            return Err(invalid("learning", "need 0 < batch_size <= buffer_capacity"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let s: Scenario = serde_json::from_str(r#"{"M": 3, "K": 9}"#).unwrap();
        assert_eq!(s.num_uavs, 3);
        assert_eq!(s.elements, 30);
        assert_eq!(s.slots, 50);
        assert_eq!(s.scheme, Scheme::DmSwitching);
        assert_eq!(s.learning.batch_size, 256);
        s.validate().unwrap();
    }

    #[test]
    fn missing_count_is_named() {
        let err = serde_json::from_str::<Scenario>(r#"{"K": 9}"#).unwrap_err().to_string();
        assert!(err.contains("num_uavs"), "{err}");
    }

    #[test]
    fn clustered_needs_a_poi() {
        let mut s = Scenario::new(2, 4);
        s.layout = Layout::Clustered {
            pois: vec![],
            std_dev: 10.0,
        };
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { field: "layout.pois", .. })));
    }

    #[test]
    fn scheme_names() {
        let s: Scheme = serde_json::from_str("\"fixed-aris\"").unwrap();
        assert_eq!(s, Scheme::FixedAris);
        assert_eq!(Scheme::DmSwitching.as_str(), "dm-switching");
        let a: Access = serde_json::from_str("\"fdma\"").unwrap();
        assert_eq!(a.oma(), Some(OmaScheme::Fdma));
    }
}
