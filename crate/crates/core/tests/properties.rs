use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use safedrive_core::epipolar::fundamental_from_pose;
use safedrive_core::geometry::{project, triangulate_point};
use safedrive_core::registration::{solve_pnp, PnpParams};
use safedrive_core::{CameraIntrinsics, Pixel, Point3D, RigidPose};

fn pose_strategy() -> impl Strategy<Value = RigidPose> {
    (prop::array::uniform3(-0.3f64..0.3), prop::array::uniform3(-5.0f64..5.0))
        .prop_map(|(r, t)| RigidPose::from_rotation_vector(Vector3::from(r), Vector3::from(t)))
}

proptest! {
    #[test]
    fn inverse_undoes_transform(pose in pose_strategy(), p in prop::array::uniform3(-50.0f64..50.0)) {
        let p = Point3D::from(Vector3::from(p));
        let back = pose.inverse().transform(&Point3D::from(pose.transform(&p)));
        prop_assert!((back - p.coords).norm() < 1e-9 * (1.0 + p.coords.norm()));
    }

    #[test]
    fn triangulation_inverts_projection(
        b in pose_strategy(),
        p in (-8.0f64..8.0, -3.0f64..3.0, 8.0f64..60.0),
    ) {
        let k = CameraIntrinsics::reference_phone();
        let a = RigidPose::identity();
        let x = Point3D::new(p.0, p.1, p.2);
        let (pa, pb) = (project(&x, &a, &k).unwrap(), project(&x, &b, &k).unwrap());
        prop_assume!(pa.in_front() && pb.in_front());
        let ray_angle = (x.coords - a.center()).angle(&(x.coords - b.center()));
        prop_assume!(ray_angle > 0.01);
        let t = triangulate_point(&pa.pixel, &pb.pixel, &a, &b, &k).unwrap();
        prop_assert!(t.in_front);
        prop_assert!((t.point - x).norm() < 1e-6 * x.coords.norm(), "{:?} vs {:?}", t.point, x);
    }

    #[test]
    fn true_correspondences_satisfy_the_epipolar_constraint(
        a in pose_strategy(),
        b in pose_strategy(),
        p in (-8.0f64..8.0, -3.0f64..3.0, 8.0f64..60.0),
    ) {
        let k = CameraIntrinsics::reference_phone();
        prop_assume!((a.center() - b.center()).norm() > 0.1);
        let x = Point3D::new(p.0, p.1, p.2);
        let (pa, pb) = (project(&x, &a, &k).unwrap(), project(&x, &b, &k).unwrap());
        let frame = |q: &Pixel| (0.0..1280.0).contains(&q.u) && (0.0..720.0).contains(&q.v);
        prop_assume!(pa.in_front() && pb.in_front() && frame(&pa.pixel) && frame(&pb.pixel));
        let f = fundamental_from_pose(&b.relative_to(&a), &k, &k).unwrap();
        // Distance from b to the epipolar line of a.
        let l = f.line_in_b(&pa.pixel);
        let d = l.dot(&pb.pixel.homogeneous()).abs() / l.xy().norm();
        prop_assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn pnp_recovers_pose_with_outliers() {
    let k = CameraIntrinsics::reference_phone();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.5).unwrap();
    for _ in 0..20 {
        let rot = Vector3::new(
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.02..0.02),
        );
        let truth = RigidPose::from_center(
            RigidPose::from_rotation_vector(rot, Vector3::zeros()).rotation,
            Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.1..0.1),
                rng.random_range(-1.0..1.0),
            ),
        );
        let mut corrs = Vec::new();
        while corrs.len() < 100 {
            let x = Point3D::new(
                rng.random_range(-8.0..8.0),
                rng.random_range(-4.0..1.5),
                rng.random_range(6.0..40.0),
            );
            let Ok(p) = project(&x, &truth, &k) else { continue };
            if !(p.in_front() && (0.0..1280.0).contains(&p.pixel.u) && (0.0..720.0).contains(&p.pixel.v)) {
                continue;
            }
            let observed = if corrs.len() % 5 == 0 {
                Pixel::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0))
            } else {
                Pixel::new(p.pixel.u + noise.sample(&mut rng), p.pixel.v + noise.sample(&mut rng))
            };
            corrs.push((x, observed));
        }
        let result = solve_pnp(&corrs, &k, &PnpParams::default()).unwrap();
        // Scene scale: spread of the points around the camera, about 20 m.
        let scale = corrs.iter().map(|c| (c.0.coords - truth.center()).norm()).sum::<f64>() / corrs.len() as f64;
        let center_err = (result.pose.center() - truth.center()).norm();
        assert!(center_err < 0.005 * scale, "centre error {center_err} at scale {scale}");
        assert!(result.pose.rotation_angle_to(&truth).to_degrees() < 0.2);
        assert!(result.inlier_count >= 75, "{} inliers", result.inlier_count);
    }
}
