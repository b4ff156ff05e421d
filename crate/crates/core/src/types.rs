//! Domain types shared by every model: positions, coil currents, field
//! vectors and the dataset atom built from them.
//!
//! Units are SI throughout (meters, amperes, teslas). Reports convert to
//! cm / mT at the presentation layer only.

use serde::{Deserialize, Serialize};

/// Number of electromagnets in the modeled system.
pub const NUM_COILS: usize = 8;

/// Input dimensionality: 3 position components + 8 coil currents.
pub const NUM_FEATURES: usize = 3 + NUM_COILS;

/// Per-coil current bound in amperes.
pub const MAX_COIL_CURRENT_A: f64 = 35.0;

/// Total electrical power budget in watts.
pub const POWER_LIMIT_W: f64 = 15_000.0;

/// A point in the workspace, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn sub(self, other: Position) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }

    pub fn distance(self, other: Position) -> f64 {
        let d = self.sub(other);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Currents applied to the eight coils, in amperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentVector(pub [f64; NUM_COILS]);

impl CurrentVector {
    pub fn zeros() -> Self {
        CurrentVector([0.0; NUM_COILS])
    }

    /// Maximum absolute coil current, the stratification variable for
    /// current-level analysis.
    pub fn i_max(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, &i| m.max(i.abs()))
    }

    /// Total electrical power for a given per-coil resistance: sum of R*i^2.
    pub fn power_of(&self, resistance_per_coil_ohm: f64) -> f64 {
        self.0
            .iter()
            .map(|&i| resistance_per_coil_ohm * i * i)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|i| i.is_finite())
    }
}

/// Magnetic flux density at a point, in teslas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub fn new(bx: f64, by: f64, bz: f64) -> Self {
        FieldVector { bx, by, bz }
    }

    pub fn zeros() -> Self {
        FieldVector::new(0.0, 0.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.bx, self.by, self.bz]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        FieldVector::new(a[0], a[1], a[2])
    }

    /// Euclidean norm, the "field magnitude".
    pub fn norm(self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }
}

/// One recorded (position, currents, field) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub position: Position,
    pub currents: CurrentVector,
    pub field: FieldVector,
    pub sensor_id: u32,
    pub current_vector_id: u32,
}

impl Sample {
    /// Model input in the frozen feature order (x, y, z, i_1..i_8).
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        feature_vector(&self.position, &self.currents)
    }
}

/// Concatenate position and currents in the frozen feature order.
pub fn feature_vector(p: &Position, i: &CurrentVector) -> [f64; NUM_FEATURES] {
    let mut f = [0.0; NUM_FEATURES];
    f[0] = p.x;
    f[1] = p.y;
    f[2] = p.z;
    f[3..].copy_from_slice(&i.0);
    f
}

/// Names of the 11 input features, in feature order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "x", "y", "z", "i_1", "i_2", "i_3", "i_4", "i_5", "i_6", "i_7", "i_8",
];
