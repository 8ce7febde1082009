use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use super::{MotionClip, Pose, Skeleton};
use crate::error::Result;
use crate::math::{Quat, Vec2, Vec3};

/// Reflect a clip across the vertical plane that contains its initial root
/// facing direction, swapping left and right bone channels.
///
/// A global rotation `R` of bone `b` becomes `M R L` where `M` is the world
/// reflection and `L` the reflection of the skeleton's lateral rest axis,
/// so the result is a proper rotation and forward kinematics stays exact
/// with offsets `L o`.
pub fn mirror_clip(clip: &MotionClip) -> Result<MotionClip> {
    let map = clip.skeleton.mirror_map()?;
    let lateral = lateral_axis(&clip.skeleton, &map);
    let mut l = Matrix3::identity();
    l[(lateral, lateral)] = -1.0;

    let root0 = clip.frames[0].root;
    let n = Vec3::new(root0.forward.y, 0.0, -root0.forward.x);
    let m = Matrix3::identity() - 2.0 * n * n.transpose();
    let c = Vec3::new(root0.position.x, 0.0, root0.position.y);

    let reflect_point = |p: &Vec3| -> Vec3 { p - 2.0 * (p - c).dot(&n) * n };
    let reflect_rot = |q: &Quat| -> Quat {
        let r = m * q.to_rotation_matrix().into_inner() * l;
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r))
    };

    let mut skeleton: Skeleton = clip.skeleton.clone();
    let offsets: Vec<Vec3> = clip.skeleton.bones().iter().map(|b| b.offset).collect();
    for (i, b) in skeleton.bones_mut().iter_mut().enumerate() {
        b.offset = l * offsets[map[i]];
    }

    let frames = clip
        .frames
        .iter()
        .map(|f| {
            let positions = map.iter().map(|&j| reflect_point(&f.positions[j])).collect();
            let rotations = map.iter().map(|&j| reflect_rot(&f.rotations[j])).collect();
            let velocities = map.iter().map(|&j| m * f.velocities[j]).collect();
            let rp = reflect_point(&Vec3::new(f.root.position.x, 0.0, f.root.position.y));
            let rf = m * Vec3::new(f.root.forward.x, 0.0, f.root.forward.y);
            Pose {
                positions,
                rotations,
                velocities,
                root: crate::math::RootTransform::new(Vec2::new(rp.x, rp.z), Vec2::new(rf.x, rf.z)),
            }
        })
        .collect();

    let name = match clip.name.strip_suffix("_mirror") {
        Some(base) => base.to_string(),
        None => format!("{}_mirror", clip.name),
    };
    let mut out = MotionClip::new(name, skeleton, clip.fps, frames)?;
    out.subject = clip.subject;
    Ok(out)
}

/// Rest-pose axis along which paired left/right offsets differ the most.
fn lateral_axis(skeleton: &Skeleton, map: &[usize]) -> usize {
    let mut diff = Vec3::zeros();
    for (i, &j) in map.iter().enumerate() {
        if i != j {
            let d = skeleton.bones()[i].offset - skeleton.bones()[j].offset;
            diff += d.abs();
        }
    }
    if diff == Vec3::zeros() {
        return 0;
    }
    diff.iamax()
}
