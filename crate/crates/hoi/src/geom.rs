//! Small 3D math kit: vectors, rotation matrices, unit quaternions, poses.
//!
//! Everything is `f64`. Rotations are kept as unit quaternions where state is
//! integrated over time and as column-axis matrices where frames are compared.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// 3-component vector (meters for positions, unitless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const X: Vec3 = Vec3 {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: Vec3 = Vec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, rhs: Vec3) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * rhs.z - self.z * rhs.y,
            y: self.z * rhs.x - self.x * rhs.z,
            z: self.x * rhs.y - self.y * rhs.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, rhs: Vec3) -> f64 {
        (self - rhs).norm()
    }

    /// Unit vector in this direction, or `None` when shorter than `eps`.
    pub fn normalized(self, eps: f64) -> Option<Vec3> {
        let n = self.norm();
        if n <= eps {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3x3 matrix. Frame axes are stored as columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_cols(x: Vec3, y: Vec3, z: Vec3) -> Mat3 {
        Mat3 {
            m: [[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    #[allow(clippy::needless_range_loop)]
    pub fn transpose(&self) -> Mat3 {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = *v;
            }
        }
        Mat3 { m: t }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn mul_mat(&self, rhs: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Mat3 { m: out }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max absolute entry of `MᵀM − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.m[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol
    }

    pub fn is_proper_rotation(&self, tol: f64) -> bool {
        self.is_orthonormal(tol) && (self.det() - 1.0).abs() <= tol
    }
}

/// Unit quaternion (w, x, y, z). Renormalized after every composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        match axis.normalized(1e-12) {
            Some(u) => {
                let (s, c) = (angle * 0.5).sin_cos();
                Quat {
                    w: c,
                    x: u.x * s,
                    y: u.y * s,
                    z: u.z * s,
                }
            }
            None => Quat::IDENTITY,
        }
    }

    /// Rotation vector (axis scaled by angle, radians).
    pub fn from_rotation_vector(rv: Vec3) -> Quat {
        Quat::from_axis_angle(rv, rv.norm())
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        if n == 0.0 {
            return Quat::IDENTITY;
        }
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn conjugate(&self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product, renormalized.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        let q = Quat {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        };
        q.normalized()
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // q v q* with v promoted to a pure quaternion.
        let u = Vec3::new(self.x, self.y, self.z);
        let s = self.w;
        u * (2.0 * u.dot(v)) + v * (s * s - u.dot(u)) + u.cross(v) * (2.0 * s)
    }

    pub fn to_rotation_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3 {
            m: [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                ],
                [
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                ],
                [
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ],
        }
    }

    /// Shepperd's method; `m` must be a proper rotation.
    pub fn from_rotation_matrix(m: &Mat3) -> Quat {
        let t = m.m[0][0] + m.m[1][1] + m.m[2][2];
        let q = if t > 0.0 {
            let s = (t + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m.m[2][1] - m.m[1][2]) / s,
                y: (m.m[0][2] - m.m[2][0]) / s,
                z: (m.m[1][0] - m.m[0][1]) / s,
            }
        } else if m.m[0][0] > m.m[1][1] && m.m[0][0] > m.m[2][2] {
            let s = (1.0 + m.m[0][0] - m.m[1][1] - m.m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m.m[2][1] - m.m[1][2]) / s,
                x: 0.25 * s,
                y: (m.m[0][1] + m.m[1][0]) / s,
                z: (m.m[0][2] + m.m[2][0]) / s,
            }
        } else if m.m[1][1] > m.m[2][2] {
            let s = (1.0 + m.m[1][1] - m.m[0][0] - m.m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m.m[0][2] - m.m[2][0]) / s,
                x: (m.m[0][1] + m.m[1][0]) / s,
                y: 0.25 * s,
                z: (m.m[1][2] + m.m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m.m[2][2] - m.m[0][0] - m.m[1][1]).sqrt() * 2.0;
            Quat {
                w: (m.m[1][0] - m.m[0][1]) / s,
                x: (m.m[0][2] + m.m[2][0]) / s,
                y: (m.m[1][2] + m.m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    /// Rotation vector of the relative rotation taking `self` to `other`.
    pub fn rotation_to(&self, other: &Quat) -> Vec3 {
        let rel = other.mul(&self.conjugate());
        rel.to_rotation_vector()
    }

    /// Axis-angle as a single rotation vector. Angle is in [0, π].
    pub fn to_rotation_vector(&self) -> Vec3 {
        // Take the short way around.
        let q = if self.w < 0.0 {
            Quat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            *self
        };
        let s = Vec3::new(q.x, q.y, q.z).norm();
        if s < 1e-12 {
            return Vec3::ZERO;
        }
        let angle = 2.0 * s.atan2(q.w);
        Vec3::new(q.x, q.y, q.z) * (angle / s)
    }

    /// Shortest-arc angle to `other`, radians in [0, π].
    pub fn angle_to(&self, other: &Quat) -> f64 {
        self.rotation_to(other).norm()
    }

    /// Step toward `target` along the shortest arc, at most `max_angle` radians.
    pub fn rotate_toward(&self, target: &Quat, max_angle: f64) -> Quat {
        let rv = self.rotation_to(target);
        let angle = rv.norm();
        if angle <= max_angle {
            return target.normalized();
        }
        let step = Quat::from_rotation_vector(rv * (max_angle / angle));
        step.mul(self)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Position + orientation of a rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: Quat::IDENTITY,
    };

    pub fn new(position: Vec3, orientation: Quat) -> Pose {
        Pose {
            position,
            orientation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_vec_close(a: Vec3, b: Vec3, tol: f64) {
        assert!((a - b).norm() <= tol, "{a:?} != {b:?}");
    }

    #[test]
    fn cross_product_right_handed() {
        assert_vec_close(Vec3::X.cross(Vec3::Y), Vec3::Z, 1e-15);
        assert_vec_close(Vec3::Y.cross(Vec3::Z), Vec3::X, 1e-15);
        assert_vec_close(Vec3::Z.cross(Vec3::X), Vec3::Y, 1e-15);
    }

    #[test]
    fn quat_matrix_roundtrip() {
        let q = Quat::from_axis_angle(Vec3::new(0.3, -0.8, 0.5), 1.234);
        let m = q.to_rotation_matrix();
        assert!(m.is_proper_rotation(1e-12));
        let q2 = Quat::from_rotation_matrix(&m);
        // q and -q are the same rotation.
        let dot = q.w * q2.w + q.x * q2.x + q.y * q2.y + q.z * q2.z;
        assert!(dot.abs() > 1.0 - 1e-12);
    }

    #[test]
    fn rotate_matches_matrix() {
        let q = Quat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 0.7);
        let m = q.to_rotation_matrix();
        let v = Vec3::new(0.2, -0.4, 0.9);
        assert_vec_close(q.rotate(v), m.mul_vec(v), 1e-12);
    }

    #[test]
    fn rotate_toward_clamps_angle() {
        let from = Quat::IDENTITY;
        let to = Quat::from_axis_angle(Vec3::Z, 1.0);
        let stepped = from.rotate_toward(&to, 0.25);
        assert!((stepped.angle_to(&from) - 0.25).abs() < 1e-12);
        // Within reach: arrives exactly.
        let arrived = stepped.rotate_toward(&to, 10.0);
        assert!(arrived.angle_to(&to) < 1e-12);
    }

    #[test]
    fn rotation_vector_roundtrip() {
        let rv = Vec3::new(0.1, -0.2, 0.3);
        let q = Quat::from_rotation_vector(rv);
        assert_vec_close(q.to_rotation_vector(), rv, 1e-12);
    }
}
