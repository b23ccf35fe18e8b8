//! Minimal 3-vector for the electrostatics modules.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);
    pub const X: Vec3 = vec3(1.0, 0.0, 0.0);
    pub const Y: Vec3 = vec3(0.0, 1.0, 0.0);
    pub const Z: Vec3 = vec3(0.0, 0.0, 1.0);

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    #[inline]
    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

/// Field at `at` of a point dipole `mu` sitting at `pos`.
pub fn dipole_field(mu: Vec3, pos: Vec3, at: Vec3) -> Vec3 {
    let d = at - pos;
    let r = d.norm();
    let rhat = d * (1.0 / r);
    (rhat * (3.0 * mu.dot(rhat)) - mu) * (1.0 / (r * r * r))
}

/// Field at `at` of a point charge q at `pos`.
pub fn charge_field(q: f64, pos: Vec3, at: Vec3) -> Vec3 {
    let d = at - pos;
    let r = d.norm();
    d * (q / (r * r * r))
}

/// Potential at `at` of charge q and dipole mu at `pos`.
pub fn potential(q: f64, mu: Vec3, pos: Vec3, at: Vec3) -> f64 {
    let d = at - pos;
    let r = d.norm();
    q / r + mu.dot(d) / (r * r * r)
}

/// Dipole-dipole interaction energy of mu1 at r1 with mu2 at r2.
pub fn dipole_dipole_energy(mu1: Vec3, r1: Vec3, mu2: Vec3, r2: Vec3) -> f64 {
    let d = r2 - r1;
    let r = d.norm();
    let rhat = d * (1.0 / r);
    (mu1.dot(mu2) - 3.0 * mu1.dot(rhat) * mu2.dot(rhat)) / (r * r * r)
}
