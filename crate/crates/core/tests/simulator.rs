use exposlam_core::simulator::{
    degrade, generate_trajectory, place_on_axis, render, render_irradiance, render_trajectory, DegradeConfig,
    SceneConfig, TrajectoryKind,
};
use exposlam_core::{CameraModel, Pose, Twist};
use nalgebra::Vector3;

fn cam() -> CameraModel {
    CameraModel {
        fx: 60.0,
        fy: 60.0,
        cx: 39.5,
        cy: 29.5,
        width: 80,
        height: 60,
    }
}

#[test]
fn on_axis_depth_is_point_symmetric() {
    let c = cam();
    let f = render(&SceneConfig::default(), &c, &Pose::translate(0.0, 0.0, 0.7)).unwrap();
    let (w, h) = (c.width, c.height);
    for y in 0..h {
        for x in 0..w {
            let a = f.depth.get(x, y);
            let b = f.depth.get(w - 1 - x, h - 1 - y);
            assert!((a - b).abs() < 1e-6, "({x},{y}): {a} vs {b}");
        }
    }
}

#[test]
fn doubling_the_scene_quarters_irradiance() {
    let c = cam();
    let small = SceneConfig::default();
    let big = SceneConfig { radius: 2.0 * small.radius, ..small.clone() };
    let pose = Pose::rot_y(0.1) * Pose::translate(0.2, -0.1, 0.3);
    let scaled = pose.with_translation(pose.trans() * 2.0);
    // texture coordinates are normalized by the radius, so albedo matches
    let (i1, d1) = render_irradiance(&small, &c, &pose).unwrap();
    let (i2, d2) = render_irradiance(&big, &c, &scaled).unwrap();
    for k in 0..i1.data().len() {
        let (a, b) = (i1.data()[k], i2.data()[k]);
        if d1.data()[k] > 0.0 && a > 0.0 {
            assert!((b / a - 0.25).abs() < 1e-6, "pixel {k}: ratio {}", b / a);
            assert!((d2.data()[k] / d1.data()[k] - 2.0).abs() < 1e-6);
        }
    }
}

#[test]
fn rendering_is_deterministic() {
    let c = cam();
    let scene = SceneConfig { curvature: 0.1, ..SceneConfig::default() };
    let t = place_on_axis(&scene, &generate_trajectory(TrajectoryKind::Curved, 5, 0.05).unwrap());
    let a = render_trajectory(&scene, &c, &t).unwrap();
    let b = render_trajectory(&scene, &c, &t).unwrap();
    assert_eq!(a, b);
    assert_eq!(degrade(&a, &DegradeConfig::default()), degrade(&b, &DegradeConfig::default()));
}

/// Ground-truth depth of one view, reprojected into another, agrees with that
/// view's depth. The second depth is ray-cast exactly through the projected
/// subpixel by a 3×3 camera whose optical axis is that ray.
#[test]
fn depth_reprojects_consistently() {
    let c = CameraModel::default();
    let probe = CameraModel {
        fx: 1.0,
        fy: 1.0,
        cx: 1.0,
        cy: 1.0,
        width: 3,
        height: 3,
    };
    for scene in [SceneConfig::default(), SceneConfig { curvature: 0.2, ..SceneConfig::default() }] {
        let p1 = Pose::translate(0.1, 0.05, 0.0);
        let p2 = p1 * Pose::rot_y(0.05) * Pose::translate(0.02, -0.03, 0.08);
        let f1 = render(&scene, &c, &p1).unwrap();
        let rel = p2.inverse() * p1;
        let mut checked = 0;
        for v in (0..c.height).step_by(7) {
            for u in (0..c.width).step_by(7) {
                let d = f1.depth.get(u, v);
                if d <= 0.0 {
                    continue;
                }
                let q = rel.transform_point(&(c.ray(u as f64, v as f64).normalize() * d));
                let Some((u2, v2)) = c.project(&q) else { continue };
                if !c.contains(u2, v2) {
                    continue;
                }
                let dir = c.ray(u2, v2).normalize();
                let z = Vector3::z();
                let axis = z.cross(&dir);
                let angle = axis.norm().atan2(z.dot(&dir));
                let aim = if axis.norm() > 0.0 { axis / axis.norm() * angle } else { Vector3::zeros() };
                let look = p2 * Pose::exp(&Twist::new(aim, Vector3::zeros()));
                let d2 = render(&scene, &probe, &look).unwrap().depth.get(1, 1);
                if d2 <= 0.0 {
                    continue;
                }
                assert!((q.norm() - d2).abs() / d2 < 0.01, "curvature {} ({u},{v}): {} vs {d2}", scene.curvature, q.norm());
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {checked} pixels checked");
    }
}
