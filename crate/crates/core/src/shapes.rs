//! Primitive solids and their voxelization.
//!
//! Voxel centers sit on the cell-centered lattice `((i + ½)p, (j + ½)p, (l + ½)p)`
//! of pitch `p`, so voxel cells tile space without crossing the end plate.
//! A voxel belongs to a solid iff its center lies in the closed solid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::operators::{Scene, Voxel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned box `[min, max]`.
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    /// Circular cylinder with axis parallel to `x3`.
    Cylinder {
        axis: [f64; 2],
        radius: f64,
        x3_min: f64,
        x3_max: f64,
    },
    Union {
        parts: Vec<Shape>,
    },
}

impl Shape {
    /// L-shaped prism: the union of two boxes sharing the corner block.
    pub fn l_shape(corner: [f64; 3], arm1: f64, arm2: f64, width: f64, height: f64) -> Shape {
        let [c1, c2, c3] = corner;
        Shape::Union {
            parts: vec![
                Shape::Box {
                    min: [c1, c2, c3],
                    max: [c1 + arm1, c2 + width, c3 + height],
                },
                Shape::Box {
                    min: [c1, c2, c3],
                    max: [c1 + width, c2 + arm2, c3 + height],
                },
            ],
        }
    }

    pub fn contains(&self, p: Point3) -> bool {
        let q = p.to_array();
        match self {
            Shape::Box { min, max } => (0..3).all(|i| min[i] <= q[i] && q[i] <= max[i]),
            Shape::Ball { center, radius } => {
                let d2: f64 = (0..3).map(|i| (q[i] - center[i]).powi(2)).sum();
                d2 <= radius * radius
            }
            Shape::Cylinder {
                axis,
                radius,
                x3_min,
                x3_max,
            } => {
                let d2 = (q[0] - axis[0]).powi(2) + (q[1] - axis[1]).powi(2);
                d2 <= radius * radius && *x3_min <= q[2] && q[2] <= *x3_max
            }
            Shape::Union { parts } => parts.iter().any(|s| s.contains(p)),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Shape::Box { min, max } => (*min, *max),
            Shape::Ball { center, radius } => (center.map(|c| c - radius), center.map(|c| c + radius)),
            Shape::Cylinder {
                axis,
                radius,
                x3_min,
                x3_max,
            } => (
                [axis[0] - radius, axis[1] - radius, *x3_min],
                [axis[0] + radius, axis[1] + radius, *x3_max],
            ),
            Shape::Union { parts } => parts.iter().map(Shape::bounds).fold(
                ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]),
                |(lo, hi), (a, b)| {
                    (
                        [lo[0].min(a[0]), lo[1].min(a[1]), lo[2].min(a[2])],
                        [hi[0].max(b[0]), hi[1].max(b[1]), hi[2].max(b[2])],
                    )
                },
            ),
        }
    }

    fn check(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Shape::Box { min, max } => finite(min) && finite(max) && (0..3).all(|i| min[i] <= max[i]),
            Shape::Ball { center, radius } => finite(center) && radius.is_finite() && *radius > 0.0,
            Shape::Cylinder {
                axis,
                radius,
                x3_min,
                x3_max,
            } => finite(axis) && radius.is_finite() && *radius > 0.0 && finite(&[*x3_min, *x3_max]) && x3_min <= x3_max,
            Shape::Union { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidScene("union has no parts".into()));
                }
                return parts.iter().try_for_each(Shape::check);
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("degenerate shape {self:?}")))
        }
    }

    /// Voxel centers inside the shape, ordered with `x1` fastest then `x2`, `x3`.
    pub fn voxel_centers(&self, pitch: f64) -> Result<Vec<Point3>> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "voxel pitch must be positive, got {pitch}"
            )));
        }
        self.check()?;
        let (lo, hi) = self.bounds();
        // lattice index range whose centers can fall inside [lo, hi]
        let range = |i: usize| {
            let first = (lo[i] / pitch - 0.5).ceil() as i64;
            let last = (hi[i] / pitch - 0.5).floor() as i64;
            first..=last
        };
        let mut out = Vec::new();
        for l in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let c = |n: i64| (n as f64 + 0.5) * pitch;
                    let p = Point3::new(c(i), c(j), c(l));
                    if self.contains(p) {
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A shape filled with a homogeneous medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub shape: Shape,
    pub epsilon: Complex64,
}

/// Voxelizes inclusions at a common pitch. Where inclusions overlap the
/// earlier one keeps the voxel. An inclusion too small to contain a voxel
/// center is an error.
pub fn voxelize(id: impl Into<String>, inclusions: &[Inclusion], pitch: f64) -> Result<Scene> {
    let volume = pitch.powi(3);
    let mut voxels: Vec<Voxel> = Vec::new();
    let mut taken = std::collections::HashSet::new();
    for (n, inc) in inclusions.iter().enumerate() {
        let centers = inc.shape.voxel_centers(pitch)?;
        if centers.is_empty() {
            return Err(Error::InvalidScene(format!(
                "inclusion {n} contains no voxel center at pitch {pitch}"
            )));
        }
        for c in centers {
            let key = [c.x1, c.x2, c.x3].map(|x| (x / pitch).floor() as i64);
            if taken.insert(key) {
                voxels.push(Voxel::new(c, volume, inc.epsilon));
            }
        }
    }
    Ok(Scene::new(id, voxels))
}
