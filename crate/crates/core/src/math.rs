//! Geometry shared by every stage: quaternions, the forward/up rotation
//! encoding and horizontal root transforms.
//!
//! World convention is Y-up, meters. Horizontal quantities are stored as
//! 2D vectors `(x, z)`.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Canonical bone forward axis.
pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, 1.0);
/// Canonical bone up axis.
pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

/// Minimum angle between decoded forward and up vectors.
const MIN_DECODE_ANGLE_DEG: f64 = 1.0;

/// Encode a rotation as its rotated forward and up axes.
pub fn encode_rotation(q: &Quat) -> [f64; 6] {
    let f = q * FORWARD;
    let u = q * UP;
    [f.x, f.y, f.z, u.x, u.y, u.z]
}

/// Recover a rotation from a (possibly non-orthonormal) forward/up pair.
pub fn decode_rotation(v: &[f64]) -> Result<Quat> {
    let f = Vec3::new(v[0], v[1], v[2]);
    let u = Vec3::new(v[3], v[4], v[5]);
    let (fn_, un) = (f.norm(), u.norm());
    if !(fn_.is_finite() && un.is_finite()) || fn_ < 1e-12 || un < 1e-12 {
        return Err(Error::NearParallel { angle_deg: 0.0 });
    }
    let sin = f.cross(&u).norm() / (fn_ * un);
    let angle_deg = sin.clamp(0.0, 1.0).asin().to_degrees();
    if angle_deg < MIN_DECODE_ANGLE_DEG {
        return Err(Error::NearParallel { angle_deg });
    }
    let z = f / fn_;
    let y = (u - z * u.dot(&z)).normalize();
    let x = y.cross(&z);
    let m = Matrix3::from_columns(&[x, y, z]);
    Ok(UnitQuaternion::from_rotation_matrix(
        &Rotation3::from_matrix_unchecked(m),
    ))
}

/// Shortest-arc spherical interpolation. `t = 0` and `t = 1` return the
/// endpoints exactly (the second one possibly sign-flipped).
pub fn slerp(a: &Quat, b: &Quat, t: f64) -> Quat {
    let mut bq = *b.quaternion();
    let aq = a.quaternion();
    let mut dot = aq.dot(&bq);
    if dot < 0.0 {
        bq = -bq;
        dot = -dot;
    }
    if t <= 0.0 {
        return *a;
    }
    if t >= 1.0 {
        return UnitQuaternion::new_unchecked(bq);
    }
    if dot > 0.9995 {
        let q = aq * (1.0 - t) + bq * t;
        return UnitQuaternion::new_normalize(q);
    }
    let theta = dot.clamp(-1.0, 1.0).acos();
    let s = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / s;
    let wb = (t * theta).sin() / s;
    UnitQuaternion::new_normalize(aq * wa + bq * wb)
}

/// Geodesic angle (radians) between two rotations, sign-invariant.
pub fn geodesic_angle(a: &Quat, b: &Quat) -> f64 {
    let d = a.quaternion().dot(b.quaternion()).abs().min(1.0);
    2.0 * d.acos()
}

/// Flip `q` into the hemisphere of `reference`.
pub fn align_hemisphere(q: &Quat, reference: &Quat) -> Quat {
    if q.quaternion().dot(reference.quaternion()) < 0.0 {
        UnitQuaternion::new_unchecked(-*q.quaternion())
    } else {
        *q
    }
}

/// Yaw rotation about +Y that maps local +Z onto the horizontal `forward`.
pub fn yaw_rotation(forward: &Vec2) -> Quat {
    let yaw = forward.x.atan2(forward.y);
    UnitQuaternion::from_axis_angle(&Vec3::y_axis(), yaw)
}

/// Rotate a horizontal vector by `angle` radians about +Y.
pub fn rotate2(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    // Rotation about +Y: x' = c x + s z, z' = -s x + c z
    Vec2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
}

/// Signed yaw angle of a horizontal direction (0 for +Z).
pub fn heading(v: &Vec2) -> f64 {
    v.x.atan2(v.y)
}

/// Spherical interpolation of two horizontal directions.
pub fn slerp2(a: &Vec2, b: &Vec2, t: f64) -> Vec2 {
    if t <= 0.0 {
        return *a;
    }
    if t >= 1.0 {
        return *b;
    }
    let delta = wrap_angle(heading(b) - heading(a));
    let norm = a.norm() * (1.0 - t) + b.norm() * t;
    let dir = rotate2(&Vec2::new(0.0, 1.0), heading(a) + t * delta);
    dir * norm
}

/// Wrap to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

/// Horizontal-plane character root: ground position and facing direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootTransform {
    pub position: Vec2,
    pub forward: Vec2,
}

impl Default for RootTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RootTransform {
    pub fn new(position: Vec2, forward: Vec2) -> Self {
        let n = forward.norm();
        let forward = if n > 1e-12 {
            forward / n
        } else {
            Vec2::new(0.0, 1.0)
        };
        Self { position, forward }
    }

    pub fn identity() -> Self {
        Self {
            position: Vec2::zeros(),
            forward: Vec2::new(0.0, 1.0),
        }
    }

    pub fn rotation(&self) -> Quat {
        yaw_rotation(&self.forward)
    }

    pub fn yaw(&self) -> f64 {
        heading(&self.forward)
    }

    fn origin3(&self) -> Vec3 {
        Vec3::new(self.position.x, 0.0, self.position.y)
    }

    pub fn to_local_point(&self, p: &Vec3) -> Vec3 {
        self.rotation().inverse() * (p - self.origin3())
    }

    pub fn to_world_point(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.origin3()
    }

    pub fn to_local_dir(&self, v: &Vec3) -> Vec3 {
        self.rotation().inverse() * v
    }

    pub fn to_world_dir(&self, v: &Vec3) -> Vec3 {
        self.rotation() * v
    }

    pub fn to_local_rot(&self, q: &Quat) -> Quat {
        self.rotation().inverse() * q
    }

    pub fn to_world_rot(&self, q: &Quat) -> Quat {
        self.rotation() * q
    }

    pub fn to_local_point2(&self, p: &Vec2) -> Vec2 {
        rotate2(&(p - self.position), -self.yaw())
    }

    pub fn to_world_point2(&self, p: &Vec2) -> Vec2 {
        rotate2(p, self.yaw()) + self.position
    }

    pub fn to_local_dir2(&self, v: &Vec2) -> Vec2 {
        rotate2(v, -self.yaw())
    }

    pub fn to_world_dir2(&self, v: &Vec2) -> Vec2 {
        rotate2(v, self.yaw())
    }

    /// Express `other` relative to `self`.
    pub fn relative(&self, other: &RootTransform) -> RootTransform {
        RootTransform::new(
            self.to_local_point2(&other.position),
            self.to_local_dir2(&other.forward),
        )
    }

    /// Inverse of [`relative`](Self::relative): lift a transform given in this frame into world.
    pub fn compose(&self, local: &RootTransform) -> RootTransform {
        RootTransform::new(
            self.to_world_point2(&local.position),
            self.to_world_dir2(&local.forward),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_quat(rng: &mut impl Rng) -> Quat {
        // Uniform on SO(3) via normalized 4D Gaussian-like sampling.
        loop {
            let v: [f64; 4] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if n2 > 1e-3 && n2 <= 1.0 {
                return UnitQuaternion::new_normalize(nalgebra::Quaternion::new(
                    v[0], v[1], v[2], v[3],
                ));
            }
        }
    }

    #[test]
    fn identity_encodes_to_canonical_axes() {
        let e = encode_rotation(&Quat::identity());
        assert_eq!(e, [0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn quarter_yaw_points_forward_along_x() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2);
        let e = encode_rotation(&q);
        let expected = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let q = random_quat(&mut rng);
            let back = decode_rotation(&encode_rotation(&q)).unwrap();
            assert!(geodesic_angle(&q, &back) < 1e-5);
        }
    }

    #[test]
    fn decode_rejects_parallel_vectors() {
        let v = [0.0, 0.0, 1.0, 0.0, 0.001, 1.0];
        assert!(matches!(
            decode_rotation(&v),
            Err(Error::NearParallel { .. })
        ));
        assert!(decode_rotation(&[0.0, 0.0, 1.0, 0.0, 0.05, 1.0]).is_ok());
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Quat::identity();
        let b = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2);
        assert_eq!(slerp(&a, &b, 0.0), a);
        assert_eq!(slerp(&a, &b, 1.0), b);
        let mid = slerp(&a, &b, 0.5);
        assert_relative_eq!(mid.angle(), FRAC_PI_2 / 2.0, epsilon = 1e-12);
        // Antipodal representation of the same target takes the short arc.
        let neg_b = UnitQuaternion::new_unchecked(-*b.quaternion());
        let mid2 = slerp(&a, &neg_b, 0.5);
        assert!(geodesic_angle(&mid, &mid2) < 1e-12);
    }

    #[test]
    fn root_transform_round_trips() {
        let root = RootTransform::new(Vec2::new(1.5, -2.0), Vec2::new(0.3, -0.8));
        let p = Vec3::new(0.2, 1.1, 3.0);
        let back = root.to_world_point(&root.to_local_point(&p));
        assert_relative_eq!(back, p, epsilon = 1e-12);
        let p2 = Vec2::new(-4.0, 0.5);
        assert_relative_eq!(root.to_world_point2(&root.to_local_point2(&p2)), p2, epsilon = 1e-12);
        // 2D and 3D maps agree on the ground plane.
        let q3 = root.to_local_point(&Vec3::new(p2.x, 0.0, p2.y));
        let q2 = root.to_local_point2(&p2);
        assert_relative_eq!(q3.x, q2.x, epsilon = 1e-12);
        assert_relative_eq!(q3.z, q2.y, epsilon = 1e-12);
        let other = RootTransform::new(Vec2::new(3.0, 1.0), Vec2::new(-1.0, 0.2));
        let rel = root.relative(&other);
        let again = root.compose(&rel);
        assert_relative_eq!(again.position, other.position, epsilon = 1e-12);
        assert_relative_eq!(again.forward, other.forward, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_principal_range() {
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(0.25), 0.25);
    }
}
