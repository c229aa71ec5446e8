use std::fmt;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type ComplexVec3 = Vector3<Complex64>;
pub type RealVec3 = Vector3<f64>;
/// 3x3 complex value of a dyadic Green function (or of the test function).
pub type DyadicField = Matrix3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    /// Reflection through the terminating plate, `(x1, x2, x3) -> (x1, x2, -x3)`.
    pub fn mirrored(self) -> Self {
        Self::new(self.x1, self.x2, -self.x3)
    }

    pub fn distance(self, other: Point3) -> f64 {
        ((self.x1 - other.x1).powi(2) + (self.x2 - other.x2).powi(2) + (self.x3 - other.x3).powi(2)).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn with_axis(mut self, axis: usize, value: f64) -> Self {
        match axis {
            0 => self.x1 = value,
            1 => self.x2 = value,
            _ => self.x3 = value,
        }
        self
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x1, self.x2, self.x3)
    }
}

pub(crate) fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Frobenius norm of a complex 3x3 matrix.
pub fn dyad_norm(m: &DyadicField) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}
