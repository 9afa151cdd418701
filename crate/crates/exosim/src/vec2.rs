//! Planar vectors in the horizontal task plane.
//!
//! The motion plane is spanned by world X (fore-aft) and world Z (lateral).
//! Positive angles rotate from +X toward +Z, so the planar cross product is
//! the torque component about the vertical (Y) axis.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub fn new(x: f64, z: f64) -> Self {
        Vec2 { x, z }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.z * other.z
    }

    /// Vertical-axis component of `self x other`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.z - self.z * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Rotate by `angle` radians (+X toward +Z).
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2 {
            x: c * self.x - s * self.z,
            z: s * self.x + c * self.z,
        }
    }

    /// 90-degree rotation (+X toward +Z); `J v` in matrix form.
    pub fn perp(self) -> Vec2 {
        Vec2 {
            x: -self.z,
            z: self.x,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.z + rhs.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.z * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_is_counterclockwise_from_x_to_z() {
        let v = Vec2::new(1.0, 0.0).rotated(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_matches_perp_dot() {
        let a = Vec2::new(0.3, -1.2);
        let b = Vec2::new(-0.7, 0.4);
        assert_relative_eq!(a.cross(b), a.perp().dot(b), epsilon = 1e-15);
    }
}
