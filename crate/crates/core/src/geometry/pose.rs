use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};

/// Rigid transform `p ↦ R·p + t`.
///
/// A pose named `a_from_b` (or `P_a^b` in frame-change notation) maps points
/// expressed in frame `b` into frame `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    /// Builds a pose from a rotation matrix, re-orthonormalizing it.
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(
            Rotation3::from_matrix_eps(&rotation, 1e-12, 100, Rotation3::identity()),
            translation,
        )
    }

    /// `axis_angle` is a rotation vector (axis scaled by angle in radians).
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::new(axis_angle), translation)
    }

    /// Pose from a translation and a (not necessarily unit) quaternion in
    /// `x y z w` order.
    pub fn from_quaternion(t: [f64; 3], q: [f64; 4]) -> Self {
        let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[3], q[0], q[1], q[2]));
        Self::new(uq.to_rotation_matrix(), Vector3::new(t[0], t[1], t[2]))
    }

    /// Unit quaternion as `[qx, qy, qz, qw]` with `qw ≥ 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        let c = q.quaternion().coords;
        let s = if c.w < 0.0 { -1.0 } else { 1.0 };
        [s * c.x, s * c.y, s * c.z, s * c.w]
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.inverse();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Camera center of a `world_from_camera` pose, i.e. the translation.
    pub fn center(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite()) && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn approx_eq(&self, other: &Pose, eps: f64) -> bool {
        (self.rotation.matrix() - other.rotation.matrix()).abs().max() <= eps
            && (self.translation - other.translation).abs().max() <= eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-3.0f64..3.0),
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_map(|(w, t)| Pose::from_axis_angle(Vector3::from(w), Vector3::from(t)))
    }

    #[test]
    fn identity_and_translation() {
        let p = Vector3::new(1.0, -2.0, 3.0);
        assert_eq!(Pose::identity().transform_point(&p), p);
        let t = Vector3::new(0.5, 0.25, -1.0);
        assert_eq!(Pose::from_translation(t).transform_point(&Vector3::zeros()), t);
    }

    #[test]
    fn quaternion_round_trip() {
        let pose = Pose::from_axis_angle(Vector3::new(0.1, -0.4, 0.9), Vector3::new(1.0, 2.0, 3.0));
        let q = pose.quaternion();
        let back = Pose::from_quaternion([1.0, 2.0, 3.0], q);
        assert!(back.approx_eq(&pose, 1e-12));
        let id = Pose::from_quaternion([0.0; 3], [0.0, 0.0, 0.0, 1.0]);
        assert!(id.approx_eq(&Pose::identity(), 0.0));
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(pose in arb_pose()) {
            let r = pose.rotation.matrix();
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn inverse_is_two_sided(pose in arb_pose()) {
            prop_assert!(pose.compose(&pose.inverse()).approx_eq(&Pose::identity(), 1e-9));
            prop_assert!(pose.inverse().compose(&pose).approx_eq(&Pose::identity(), 1e-9));
        }

        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(l.approx_eq(&r, 1e-9));
        }

        #[test]
        fn transform_matches_homogeneous_matrix(
            pose in arb_pose(), p in prop::array::uniform3(-5.0f64..5.0)
        ) {
            let p = Vector3::from(p);
            let h = pose.to_homogeneous() * Vector4::new(p.x, p.y, p.z, 1.0);
            let q = pose.transform_point(&p);
            prop_assert!((q - h.xyz()).norm() < 1e-12);
            prop_assert_eq!(h.w, 1.0);
        }
    }
}
