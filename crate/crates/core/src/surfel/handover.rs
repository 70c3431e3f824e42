use crate::geometry::{GrayImage, Pose};

use super::{Keyframe, INV_DEPTH_MAX, INV_DEPTH_MIN};

/// Minimum camera-frame depth for a surfel to survive a hand-over.
const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HandoverStats {
    pub kept: usize,
    pub dropped_behind: usize,
    pub dropped_outside: usize,
}

/// Re-expresses every surfel of `kf_old` in a new reference frame.
///
/// `pose_old_to_new` maps points from the old keyframe's camera frame into
/// the new one. Positions and normals are transformed rigidly; the ray and
/// inverse depth are recomputed from the new position. Surfels that end up
/// behind the camera, or whose center projects farther than one radius
/// outside the new image, are dropped. Window frames are re-anchored on the
/// new keyframe; a frame carrying the new keyframe's own timestamp is removed.
pub fn change_reference_frame(
    mut kf_old: Keyframe,
    pose_old_to_new: &Pose,
    image_new: GrayImage,
    timestamp_new: f64,
) -> (Keyframe, HandoverStats) {
    let k = kf_old.intrinsics;
    let r = kf_old.radius_px;
    let mut stats = HandoverStats::default();
    let new_from_old = pose_old_to_new;
    let old_from_new = new_from_old.inverse();

    let mut kf = Keyframe::new(
        image_new,
        kf_old.pose.compose(&old_from_new),
        k,
        timestamp_new,
        r,
        kf_old.window_size(),
    );
    kf.frame_count = kf_old.frame_count;
    kf.set_next_id(kf_old.next_surfel_id());

    for mut s in std::mem::take(&mut kf_old.surfels) {
        let p = new_from_old.transform_point(&s.position());
        if !(p.z > MIN_DEPTH) || !p.iter().all(|v| v.is_finite()) {
            stats.dropped_behind += 1;
            continue;
        }
        s.ray = p / p.z;
        s.inv_depth = 1.0 / p.z;
        s.normal = new_from_old.rotate(&s.normal);
        s.orient_normal();
        if !k.contains(&s.center_pixel(&k), r) || !(INV_DEPTH_MIN..=INV_DEPTH_MAX).contains(&s.inv_depth) {
            stats.dropped_outside += 1;
            continue;
        }
        stats.kept += 1;
        kf.surfels.push(s);
    }

    for mut frame in kf_old.take_window() {
        if frame.timestamp == timestamp_new {
            continue;
        }
        frame.pose_kf_to_frame = frame.pose_kf_to_frame.compose(&old_from_new);
        kf.push_frame(frame)
            .expect("re-anchored window keeps its order and size");
    }
    (kf, stats)
}

/// Drops surfels whose last residual exceeds `max_residual` or that were not
/// successfully optimized within the last `max_age` frames. Returns the
/// number removed.
pub fn prune_surfels(kf: &mut Keyframe, max_residual: f64, max_age: u64) -> usize {
    let now = kf.frame_count;
    let before = kf.surfels.len();
    kf.surfels
        .retain(|s| !(s.last_residual > max_residual || now.saturating_sub(s.last_seen) > max_age));
    before - kf.surfels.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::optimizer::Frame;
    use crate::surfel::Surfel;
    use nalgebra::{Vector2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(300.0, 300.0, 160.0, 120.0, 320, 240).unwrap()
    }

    fn keyframe_with(surfels: Vec<Surfel>) -> Keyframe {
        let mut kf = Keyframe::new(GrayImage::filled(320, 240, 0.5), Pose::identity(), k(), 0.0, 10.0, 5);
        kf.append_surfels(surfels);
        kf
    }

    fn random_surfels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Surfel> {
        (0..n as u64)
            .map(|i| {
                let u = Vector2::new(rng.random_range(20.0..300.0), rng.random_range(20.0..220.0));
                let normal = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -1.0);
                Surfel::new(i, k().backproject_ray(&u), rng.random_range(0.2..1.0), normal, 10.0, 0)
            })
            .collect()
    }

    #[test]
    fn identity_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let surfels = random_surfels(&mut rng, 40);
        let kf = keyframe_with(surfels.clone());
        let (new, stats) = change_reference_frame(kf, &Pose::identity(), GrayImage::filled(320, 240, 0.1), 1.0);
        assert_eq!(stats.kept, 40);
        for (a, b) in surfels.iter().zip(&new.surfels) {
            assert!((a.ray - b.ray).norm() < 1e-12);
            assert!((a.inv_depth - b.inv_depth).abs() < 1e-12);
            assert!((a.normal - b.normal).norm() < 1e-12);
            assert_eq!(a.id, b.id);
        }
        assert_eq!(new.next_surfel_id(), 40);
    }

    #[test]
    fn forward_motion_reduces_depth() {
        let s = Surfel::new(
            0,
            Vector3::new(0.1, 0.05, 1.0),
            0.5,
            Vector3::new(0.0, 0.0, -1.0),
            10.0,
            0,
        );
        let kf = keyframe_with(vec![s.clone()]);
        // camera moves forward by 0.5: points move toward it by 0.5
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, -0.5));
        let (new, _) = change_reference_frame(kf, &pose, GrayImage::filled(320, 240, 0.1), 1.0);
        let t = &new.surfels[0];
        assert!((1.0 / t.inv_depth - 1.5).abs() < 1e-12);
        // lateral position scales with 1/depth
        assert!((t.ray - Vector3::new(0.1 * 2.0 / 1.5, 0.05 * 2.0 / 1.5, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn world_positions_are_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut kf = keyframe_with(random_surfels(&mut rng, 60));
        kf.pose = Pose::from_axis_angle(Vector3::new(0.1, 0.2, -0.1), Vector3::new(1.0, -2.0, 0.5));
        let world_before: Vec<(u64, Vector3<f64>)> = kf
            .surfels
            .iter()
            .map(|s| (s.id, kf.pose.transform_point(&s.position())))
            .collect();
        let pose = Pose::from_axis_angle(Vector3::new(0.02, -0.05, 0.01), Vector3::new(0.1, 0.05, -0.2));
        let (new, stats) = change_reference_frame(kf, &pose, GrayImage::filled(320, 240, 0.1), 1.0);
        assert!(stats.kept > 0);
        for s in &new.surfels {
            let before = world_before.iter().find(|(id, _)| *id == s.id).unwrap().1;
            let after = new.pose.transform_point(&s.position());
            assert!((before - after).norm() < 1e-9);
            assert!((s.normal.norm() - 1.0).abs() < 1e-12);
            assert!(s.is_valid());
        }
    }

    #[test]
    fn drops_surfels_behind_or_outside() {
        let near = Surfel::new(
            0,
            Vector3::new(0.0, 0.0, 1.0),
            2.0,
            Vector3::new(0.0, 0.0, -1.0),
            10.0,
            0,
        );
        let side = Surfel::new(
            1,
            Vector3::new(0.4, 0.0, 1.0),
            0.5,
            Vector3::new(0.0, 0.0, -1.0),
            10.0,
            0,
        );
        let far = Surfel::new(
            2,
            Vector3::new(0.0, 0.0, 1.0),
            0.25,
            Vector3::new(0.0, 0.0, -1.0),
            10.0,
            0,
        );
        let kf = keyframe_with(vec![near, side, far]);
        // forward by 1.0: `near` (depth 0.5) ends up behind, `side` leaves the image
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, -1.0));
        let (new, stats) = change_reference_frame(kf, &pose, GrayImage::filled(320, 240, 0.1), 1.0);
        assert_eq!(stats.dropped_behind, 1);
        assert_eq!(stats.dropped_outside, 1);
        assert_eq!(new.surfels.len(), 1);
        assert_eq!(new.surfels[0].id, 2);
    }

    #[test]
    fn window_is_reanchored() {
        let mut kf = keyframe_with(vec![]);
        let world_from_f = Pose::from_translation(Vector3::new(0.3, 0.0, 0.0));
        kf.push_frame(Frame::new(
            GrayImage::filled(320, 240, 0.2),
            world_from_f.inverse(),
            1.0,
        ))
        .unwrap();
        kf.push_frame(Frame::new(GrayImage::filled(320, 240, 0.2), Pose::identity(), 2.0))
            .unwrap();
        let new_from_old = Pose::from_translation(Vector3::new(-0.1, 0.0, 0.0));
        let (new, _) = change_reference_frame(kf, &new_from_old, GrayImage::filled(320, 240, 0.2), 2.0);
        assert_eq!(new.window().len(), 1);
        let p = Vector3::new(0.2, 0.3, 2.0);
        // the frame sees a point the same way whichever keyframe it is expressed in
        let via_new = new.window()[0]
            .pose_kf_to_frame
            .transform_point(&new_from_old.transform_point(&p));
        let direct = world_from_f.inverse().transform_point(&p);
        assert!((via_new - direct).norm() < 1e-12);
    }

    #[test]
    fn pruning() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut surfels = random_surfels(&mut rng, 50);
        let mut kf = keyframe_with(vec![]);
        kf.frame_count = 100;
        for s in surfels.iter_mut() {
            s.last_seen = 100;
            s.last_residual = 0.001;
        }
        kf.append_surfels(surfels.clone());
        assert_eq!(prune_surfels(&mut kf, 0.01, 10), 0);

        kf.surfels[7].last_residual = f64::INFINITY;
        assert_eq!(prune_surfels(&mut kf, 0.01, 10), 1);
        assert!(kf.surfels.iter().all(|s| s.id != 7));

        for s in kf.surfels.iter_mut() {
            s.last_residual = rng.random_range(0.0..0.02);
            s.last_seen = rng.random_range(80..=100);
        }
        let expected: Vec<u64> = kf
            .surfels
            .iter()
            .filter(|s| s.last_residual <= 0.01 && 100 - s.last_seen <= 10)
            .map(|s| s.id)
            .collect();
        let removed = prune_surfels(&mut kf, 0.01, 10);
        assert_eq!(removed, 49 - expected.len());
        assert_eq!(kf.surfels.iter().map(|s| s.id).collect::<Vec<_>>(), expected);
    }
}
