//! Plane regions used as dynamical and parameter domains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// An open region of the complex plane. Membership tests are deterministic
/// and boundary-exclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Region {
    Disk { center: (f64, f64), radius: f64 },
    Rectangle { re: (f64, f64), im: (f64, f64) },
    PuncturedDisk { center: (f64, f64), radius: f64 },
    HalfPlane { re_min: f64 },
    FullPlane,
}

impl Region {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        Region::Disk {
            center: (center.re, center.im),
            radius,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Region::Disk {
                center: (re, im),
                radius,
            } => (z - Complex64::new(re, im)).norm() < radius,
            Region::Rectangle {
                re: (a, b),
                im: (c, d),
            } => z.re > a && z.re < b && z.im > c && z.im < d,
            Region::PuncturedDisk {
                center: (re, im),
                radius,
            } => {
                let d = (z - Complex64::new(re, im)).norm();
                d > 0.0 && d < radius
            }
            Region::HalfPlane { re_min } => z.re > re_min,
            Region::FullPlane => true,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Region::Disk { .. } => "disk",
            Region::Rectangle { .. } => "rectangle",
            Region::PuncturedDisk { .. } => "punctured-disk",
            Region::HalfPlane { .. } => "half-plane",
            Region::FullPlane => "full-plane",
        }
    }
}
