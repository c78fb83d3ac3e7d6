//! Platform positions, per-slot kinematics, and safety distances.

use serde::{Deserialize, Serialize};

/// A point in the service area. Flying platforms share one altitude; ground
/// users sit at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Speed limit, safety distance, slot duration, and square area side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityLimits {
    /// Maximum speed in m/s.
    pub v_max: f64,
    /// Minimum horizontal separation between flying platforms, in meters.
    pub d_min: f64,
    /// Slot duration in seconds.
    pub tau: f64,
    /// Side of the square service area `[0, area_side]^2`, in meters.
    pub area_side: f64,
}

impl Default for MobilityLimits {
    fn default() -> Self {
        Self {
            v_max: 50.0,
            d_min: 5.0,
            tau: 1.0,
            area_side: 1000.0,
        }
    }
}

/// Moves a platform for one slot. The speed is clipped to `[0, v_max]` and the
/// result is clipped to the service area; altitude is left unchanged.
pub fn apply_move(pos: Position, direction: f64, speed: f64, limits: &MobilityLimits) -> Position {
    let speed = if speed.is_finite() {
        speed.clamp(0.0, limits.v_max)
    } else {
        0.0
    };
    if speed == 0.0 {
        return pos;
    }
    let step = speed * limits.tau;
    let x = (pos.x + step * direction.cos()).clamp(0.0, limits.area_side);
    let y = (pos.y + step * direction.sin()).clamp(0.0, limits.area_side);
    Position::new(x, y, pos.z)
}

/// Outcome of a pairwise safety-distance check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SafetyReport {
    pub safe: bool,
    /// Index pairs `(i, j)` with `i < j` closer than `d_min`.
    pub violations: Vec<(usize, usize)>,
}

impl SafetyReport {
    /// Whether platform `i` takes part in any violating pair.
    pub fn involves(&self, i: usize) -> bool {
        self.violations.iter().any(|&(a, b)| a == i || b == i)
    }
}

/// Checks every pairwise horizontal distance against `d_min`. A distance of
/// exactly `d_min` is safe.
pub fn check_safety(positions: &[Position], limits: &MobilityLimits) -> SafetyReport {
    let mut violations = Vec::new();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i].horizontal_distance(&positions[j]) < limits.d_min {
                violations.push((i, j));
            }
        }
    }
    SafetyReport {
        safe: violations.is_empty(),
        violations,
    }
}
